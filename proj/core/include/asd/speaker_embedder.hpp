#pragma once

#include <string>
#include <vector>

#include "asd/corpus.hpp"
#include "asd/params.hpp"
#include "asd/tape.hpp"
#include "asd/windowing.hpp"

namespace asd {

// Reference speech for one identity: diarised waveform slices, each at
// least the library's minimum duration.
struct ReferenceSegment {
    int identity_id = -1;
    int scenario_id = -1;
    double start_s = 0.0;
    double end_s = 0.0;
    std::vector<double> waveform;
};

struct ReferenceSpeech {
    std::vector<ReferenceSegment> segments;
};

// Desk-scale stand-in for a pretrained speaker-recognition embedder:
// per-chunk linear lift -> temporal mean pooling -> layer-norm -> two dense
// layers -> unit-normalized embedding. The layer-norm after pooling makes
// the embedding exactly invariant to waveform gain. Once trained the
// embedder is frozen: its forward path creates no tape nodes and its
// parameters are excluded from every optimizer registry.
class SpeakerEmbedder {
public:
    SpeakerEmbedder() = default;
    SpeakerEmbedder(int chunk_samples, int lift_dim, int embed_dim, uint64_t init_seed);

    int embed_dim() const { return embed_dim_; }
    int chunk_samples() const { return chunk_samples_; }
    bool frozen() const { return frozen_; }
    void freeze() { frozen_ = true; }

    // Unit-norm embedding of one waveform. Requires >= one chunk of samples.
    Tensor embed(const std::vector<double>& waveform) const;
    // One embedding per window row: [T, embed_dim].
    Tensor embed_windows(const WindowedAudio& windows) const;

    // Training-time forward for one window: returns the pre-normalization
    // embedding node. Only valid while unfrozen.
    Value forward_on_tape(ComputationTape& tape, const std::vector<double>& waveform) const;

    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    static SpeakerEmbedder from_params(ParameterStore params, int chunk_samples, int lift_dim,
                                       int embed_dim, bool frozen);

private:
    Tensor chunk_matrix(const std::vector<double>& waveform) const;

    ParameterStore params_;
    int chunk_samples_ = 160;
    int lift_dim_ = 32;
    int embed_dim_ = 64;
    bool frozen_ = false;
};

struct EmbedderTrainConfig {
    int lift_dim = 32;
    int embed_dim = 64;    // d_phi
    double window_seconds = 1.0;
    int steps = 400;
    int batch = 8;
    double lr = 2e-3;
    double noise_snr_lo_db = 5.0;   // train-time noise augmentation range
    double noise_snr_hi_db = 20.0;
    int heldout_windows_per_speaker = 20;
};

struct EmbedderTrainReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double heldout_accuracy = 0.0;
    int steps = 0;
};

// Softmax-cross-entropy speaker classification on clean 1 s windows from
// the corpus's generative process (with noise augmentation); the
// classification head is discarded and the embedder returned frozen.
// Requires >= 2 speakers.
SpeakerEmbedder train_embedder(const Corpus& corpus, const EmbedderTrainConfig& cfg,
                               uint64_t seed, EmbedderTrainReport* report = nullptr);

struct TrialPair {
    std::vector<double> a;
    std::vector<double> b;
    bool same_speaker;
};

// Equal error rate of cosine scores over the trial list.
double verification_eer(const SpeakerEmbedder& embedder, const std::vector<TrialPair>& trials);

// Checkpoint helpers; the manifest carries frozen plus the dims.
void save_embedder(const std::string& path, const SpeakerEmbedder& embedder);
SpeakerEmbedder load_embedder(const std::string& path);

}  // namespace asd
