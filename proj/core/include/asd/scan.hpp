#pragma once

#include <string>
#include <vector>

#include "asd/params.hpp"
#include "asd/speaker_embedder.hpp"
#include "asd/tape.hpp"

namespace asd {

// Speaker Comparison Auxiliary Network: framewise cross-attention between
// speaker embeddings of the candidate audio (queries) and of reference
// speech (keys and values), a learned projection to the SCAN feature space,
// and a framewise auxiliary classification head.
//
// The scan parameter group lives inside whatever store hosts it (the ASD
// model's store when SCAN is enabled) under a prefix:
//   <prefix>proj.w [d_phi, feature_dim], <prefix>proj.b [1, feature_dim]
//   <prefix>head.w [feature_dim, 1],     <prefix>head.b [1, 1]

struct ScanOutput {
    Tensor features;                 // [T, feature_dim]
    Tensor attention;                // [T, K], row-stochastic
    std::vector<double> aux_scores;  // T values in (0,1)
};

void init_scan_params(ParameterStore& store, int d_phi, int feature_dim, uint64_t seed,
                      const std::string& prefix = "scan.");

// Plain forward from precomputed embeddings. queries [T, d_phi],
// reference_embeddings [K, d_phi], K >= 1.
ScanOutput scan_forward_from_embeddings(const ParameterStore& store, const std::string& prefix,
                                        const Tensor& queries,
                                        const Tensor& reference_embeddings);

// Full forward: embeds the windowed candidate audio and the reference
// segments through the frozen embedder, then attends. The embedder must be
// frozen; empty reference is an error (the caller decides any fallback).
ScanOutput scan_forward(const ParameterStore& store, const std::string& prefix,
                        const SpeakerEmbedder& embedder, const WindowedAudio& windowed,
                        const ReferenceSpeech& reference);

struct ScanTapeOutput {
    Value features;    // [T, feature_dim]
    Value aux_scores;  // [T, 1]
    Tensor attention;  // [T, K]
};

// Training-time forward. The attention output is a constant of the frozen
// embedder, so it enters the tape as a leaf; gradients flow to the
// projection and head only.
ScanTapeOutput scan_forward_on_tape(ComputationTape& tape, const ParameterStore& store,
                                    const std::string& prefix, const Tensor& queries,
                                    const Tensor& reference_embeddings);

// Mean binary cross-entropy of aux scores against frame labels.
Value scan_aux_loss(ComputationTape& tape, Value aux_scores,
                    const std::vector<uint8_t>& frame_labels);
double scan_aux_loss_value(const std::vector<double>& aux_scores,
                           const std::vector<uint8_t>& frame_labels);

// One embedding row per reference segment: [K, d_phi].
Tensor embed_reference(const SpeakerEmbedder& embedder, const ReferenceSpeech& reference);

}  // namespace asd
