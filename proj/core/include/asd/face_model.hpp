#pragma once

#include <string>
#include <vector>

#include "asd/corpus.hpp"
#include "asd/params.hpp"
#include "asd/tape.hpp"

namespace asd {

// Parent track with impostor frames inserted; the native mask is the
// self-supervised training target.
struct PollutedTrack {
    Tensor frames;                     // [T', H, W]
    std::vector<uint8_t> native_mask;  // true = native frame of the parent
    int parent_track_id = -1;
    std::vector<int> impostor_track_ids;  // source per inserted frame, slot order
};

// n = round-half-even(rate * T) frames drawn uniformly over pool frames
// (with replacement) and inserted at uniform positions; the track lengthens
// to T + n and native frames keep their order.
PollutedTrack pollute_track(const Track& parent, const std::vector<const Track*>& impostor_pool,
                            double rate, uint64_t seed);

struct FaceModelConfig {
    int frame_dim = 32;  // frame embedder output; equals model_dim
    int model_dim = 32;  // desk-scale default; 1024 at full scale
    int layers = 4;
    int heads = 8;
    int ff_dim = 64;
};

struct VbfrOutput {
    std::vector<double> impostor_prob;  // per frame
    Tensor last_states;                 // [T', model_dim]
};

// Frame embedder (dense H*W -> d with relu) followed by L pre-norm
// transformer encoder layers and a per-frame native/impostor head. No
// positional encoding: outputs are permutation-equivariant in the frames.
class FaceModel {
public:
    FaceModel() = default;
    FaceModel(int pixels, FaceModelConfig cfg, uint64_t seed);

    const FaceModelConfig& config() const { return cfg_; }
    int pixels() const { return pixels_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    struct TapeOutput {
        Value native_probs;  // [T',1]
        Value last_states;   // [T', model_dim]
    };
    TapeOutput forward_on_tape(ComputationTape& tape, const Tensor& frames_flat) const;

    VbfrOutput forward(const Tensor& frames_flat) const;
    VbfrOutput forward(const PollutedTrack& track) const;
    VbfrOutput forward(const Track& track) const;

    // Mean of the last encoder layer over time, unit-normalized.
    Tensor identity_embedding(const Track& track) const;
    // Temporal-context-free baseline: mean of frame-embedder outputs.
    Tensor framewise_identity_embedding(const Track& track) const;

    static FaceModel from_params(ParameterStore params, int pixels, FaceModelConfig cfg);

private:
    ParameterStore params_;
    FaceModelConfig cfg_;
    int pixels_ = 0;
};

struct VbfrTrainConfig {
    double impostor_rate = 0.3;
    int steps = 300;
    int batch = 2;
    double lr = 1e-3;
    int crop_frames = 120;  // random contiguous parent crop per sample
    int heldout_tracks = 8;
};

struct VbfrTrainReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double heldout_frame_accuracy = 0.0;
    int steps = 0;
    std::vector<double> loss_curve;
};

// Per-frame BCE against the native mask over polluted train-split tracks.
// Requires >= 2 distinct identities.
VbfrTrainReport vbfr_train(FaceModel& model, const Corpus& corpus, const VbfrTrainConfig& cfg,
                           uint64_t seed);

void save_face_model(const std::string& path, const FaceModel& model);
FaceModel load_face_model(const std::string& path);

Tensor flatten_polluted(const PollutedTrack& track);

}  // namespace asd
