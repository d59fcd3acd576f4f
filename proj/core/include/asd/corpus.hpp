#pragma once

#include <cstdint>
#include <vector>

#include "asd/rng.hpp"
#include "asd/tensor.hpp"

namespace asd {

// Latent identity of a synthetic speaker. Voiceprints (and faceprints) of
// distinct speakers are rejection-sampled to pairwise cosine < 0.5.
struct SyntheticSpeaker {
    int id = -1;
    Tensor voiceprint;  // rank-1, unit norm
    Tensor faceprint;   // rank-1, unit norm
};

struct AudioSignal {
    std::vector<double> samples;  // mono, in [-1, 1]
    int sample_rate = 16000;
    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

struct Utterance {
    int speaker_id;
    double start_s;
    double end_s;
};

// Identity-homogeneous sequence of candidate-face frames with framewise
// speaking labels and a corruption record.
struct Track {
    int track_id = -1;
    int speaker_id = -1;  // ground truth, hidden from models
    Tensor frames;        // [T, H, W]
    int fps = 30;
    std::vector<uint8_t> frame_labels;     // candidate speaking at frame center
    std::vector<uint8_t> corruption_mask;  // frame occluded or blurred

    int length() const { return frames.empty() ? 0 : frames.extent(0); }
    int height() const { return frames.extent(1); }
    int width() const { return frames.extent(2); }
};

struct Scenario {
    int scenario_id = -1;
    int split = 0;  // 0 train, 1 val
    uint64_t seed = 0;
    std::vector<int> speaker_ids;  // participants, tracked and confusers
    std::vector<Utterance> timeline;
    AudioSignal mixed_audio;
    std::vector<Track> tracks;
    std::vector<Utterance> diarised;  // ground-truth diarisation
};

struct ScenarioConfig {
    int n_speakers = 2;   // tracked speakers (one track each)
    int n_confusers = 1;  // off-screen voices; used only when confuser_prob > 0
    double duration_s = 8.0;
    int fps = 30;
    int sample_rate = 16000;
    int frame_height = 16;
    int frame_width = 16;
    int voice_dim = 8;
    int face_dim = 8;
    double utterance_min_s = 1.0;
    double utterance_max_s = 3.5;
    double gap_min_s = 0.1;
    double gap_max_s = 0.8;
    double overlap_prob = 0.3;
    double confuser_prob = 0.3;
    double occlusion_rate = 0.1;
    double blur_rate = 0.05;
    double snr_db = 5.0;

    void validate() const;  // throws ConfigError on out-of-range fields
};

// Corpus-wide seeded projections: voice chunks and face images are linear
// emissions of the latent prints through these fixed matrices. Occluders
// come from a small shared palette, so an occluded frame looks the same
// kind of wrong in every scenario.
struct EmissionModel {
    Tensor voice_projection;       // [chunk_samples, voice_dim]
    Tensor face_projection;        // [H*W, face_dim]
    std::vector<Tensor> occluders; // [H, W] each
    int chunk_samples = 160;       // 10 ms at 16 kHz

    static EmissionModel seeded(const ScenarioConfig& cfg, uint64_t corpus_seed);
};

struct CorpusConfig {
    ScenarioConfig scenario;
    int n_speakers_pool = 4;  // corpus-wide speaker population
    int scenarios_train = 8;
    int scenarios_val = 4;

    void validate() const;
};

struct Corpus {
    uint64_t seed = 0;
    ScenarioConfig scenario_cfg;
    int n_speakers_pool = 0;
    std::vector<SyntheticSpeaker> speakers;
    std::vector<Scenario> scenarios;

    const SyntheticSpeaker& speaker(int id) const;
    EmissionModel emission() const { return EmissionModel::seeded(scenario_cfg, seed); }
    std::vector<const Scenario*> split_scenarios(int split) const;
    const Scenario& scenario_by_id(int id) const;
    const Track* find_track(int track_id) const;
};

std::vector<SyntheticSpeaker> sample_speakers(int n, int voice_dim, int face_dim, Rng& rng);

// Standalone scenario generator: samples its own speakers and emission
// model from the seed. Deterministic given (cfg, seed).
Scenario generate_scenario(const ScenarioConfig& cfg, uint64_t seed);

// Corpus-level generator: one shared speaker pool and emission model,
// per-scenario seeds derived as mix(corpus_seed, scenario_index).
Corpus generate_corpus(const CorpusConfig& cfg, uint64_t seed);

// Occlusion replaces burst-contiguous frames with an occluder image plus
// noise (no faceprint, no mouth signal); blur convolves with a 3x3 box
// kernel. Counts follow round-half-even(rate * T). Labels are untouched.
// Without an explicit palette, a seed-derived one is used.
Track corrupt_video(const Track& track, double occlusion_rate, double blur_rate, uint64_t seed,
                    const std::vector<Tensor>* occluder_palette = nullptr);

// Clean single-speaker window from the corpus generative process; used for
// embedder training and identity-recoverability checks.
std::vector<double> synthesize_clean_window(const SyntheticSpeaker& speaker,
                                            const EmissionModel& emission, int window_samples,
                                            Rng& rng);

// Exact re-synthesis of one speaker's emission into a scenario's mixture;
// envelope parameters are derived from the scenario seed per utterance.
std::vector<double> render_speaker_emission(const Scenario& scenario,
                                            const SyntheticSpeaker& speaker,
                                            const EmissionModel& emission,
                                            const ScenarioConfig& cfg);

// Flatten track frames to a [T, H*W] matrix for the video encoders.
Tensor flatten_frames(const Track& track);

// count = round-half-even(rate * n); the repo-wide rate rounding rule.
int rate_count(double rate, int n);

}  // namespace asd
