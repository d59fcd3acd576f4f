#pragma once

#include <optional>
#include <string>
#include <vector>

#include "asd/corpus.hpp"
#include "asd/identity_library.hpp"
#include "asd/scan.hpp"
#include "asd/speaker_embedder.hpp"
#include "asd/windowing.hpp"

namespace asd {

enum class FusionMode { Concat, Sum };

// How SCAN couples to the baseline:
//   Off     - baseline only
//   AuxOnly - SCAN trains through the auxiliary loss; decoder sees F_ASV
//   AuxFuse - auxiliary loss plus SCAN features concatenated into the decoder
//   TsFuse  - single mean reference embedding concatenated into the decoder
//             (no cross-attention, no auxiliary head); comparison mode only
enum class ScanMode { Off, AuxOnly, AuxFuse, TsFuse };

std::string to_string(FusionMode m);
std::string to_string(ScanMode m);
FusionMode fusion_mode_from_string(const std::string& s);
ScanMode scan_mode_from_string(const std::string& s);

struct AsdConfig {
    int encoder_dim = 32;  // d: both encoders embed to T x d
    int decoder_dim = 64;
    FusionMode fusion = FusionMode::Concat;
    ScanMode scan_mode = ScanMode::Off;
    int scan_feature_dim = 64;
    int d_phi = 64;
    double window_seconds = 1.0;
    int decimation = 100;  // 1 s window -> 160 audio features per frame
};

struct FramePredictions {
    int track_id = -1;
    std::vector<double> scores;   // in (0,1)
    std::vector<uint8_t> labels;  // when known
};

// Baseline audio-video ASD network: audio encoder and video encoder (linear
// lift, temporal conv k=3, layer-norm, relu), modality fusion, and a
// temporal decoder (two conv k=3 stages, dense, sigmoid per frame).
class AsdModel {
public:
    AsdModel() = default;
    AsdModel(int pixels, int audio_feature_dim, AsdConfig cfg, uint64_t seed);

    const AsdConfig& config() const { return cfg_; }
    int pixels() const { return pixels_; }
    int audio_feature_dim() const { return audio_feature_dim_; }
    bool scan_aux_active() const {
        return cfg_.scan_mode == ScanMode::AuxOnly || cfg_.scan_mode == ScanMode::AuxFuse;
    }

    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    struct TapeOutput {
        Value scores;               // [T,1]
        Value aux_scores;           // valid only when the aux head ran
        Tensor scan_attention;      // [T,K] when SCAN attended, else empty
    };
    // scan_queries/reference_embeddings may be null; a SCAN-enabled model
    // then falls back to zero features (baseline-mode forward).
    TapeOutput forward_on_tape(ComputationTape& tape, const Tensor& audio_features,
                               const Tensor& video_flat, const Tensor* scan_queries,
                               const Tensor* reference_embeddings) const;

    static AsdModel from_params(ParameterStore params, int pixels, int audio_feature_dim,
                                AsdConfig cfg);

private:
    ParameterStore params_;
    AsdConfig cfg_;
    int pixels_ = 0;
    int audio_feature_dim_ = 0;
};

// Framewise forward for one track. Audio must cover the track's time span.
FramePredictions asd_forward(const AsdModel& model, const Track& track, const AudioSignal& audio,
                             const Tensor* scan_queries = nullptr,
                             const Tensor* reference_embeddings = nullptr);

struct AsdTrainConfig {
    int steps = 600;
    int batch = 2;
    double lr = 2e-3;
    double lambda_aux = 0.3;
    int max_reference_segments = 4;
    // augmentation probabilities
    double negative_sample_prob = 0.1;
    double flip_prob = 0.25;
    double crop_prob = 0.25;
    double rotate_prob = 0.1;
    int crop_max_shift = 2;
};

struct AsdTrainReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int steps = 0;
    int usable_tracks = 0;
    int skipped_tracks = 0;  // SCAN enabled but identity absent from library
    std::vector<double> loss_curve;  // one entry every 50 steps
};

// Framewise BCE (+ lambda_aux * SCAN auxiliary BCE when enabled) over the
// train split, with negative-sampling / flip / crop / rotate augmentation.
// The embedder is required (and must be frozen) whenever scan_mode != Off;
// its parameters never enter the optimizer.
AsdTrainReport train_asd(AsdModel& model, const Corpus& corpus, const SpeakerEmbedder* embedder,
                         const IdentitySpeechLibrary* library, const AsdTrainConfig& cfg,
                         uint64_t seed);

void save_asd_model(const std::string& path, const AsdModel& model);
AsdModel load_asd_model(const std::string& path);

// Per-scenario query embeddings [T, d_phi] for SCAN, reusable across the
// scenario's tracks and for negative-sampled audio.
Tensor scenario_scan_queries(const SpeakerEmbedder& embedder, const Scenario& scenario, int fps,
                             int frame_count, double window_seconds);

}  // namespace asd
