#pragma once

#include <string>
#include <vector>

#include "asd/config.hpp"
#include "asd/metrics.hpp"

namespace asd {

// One experiment arm, after the ablation structure: baseline, SCAN with the
// hypothesised library, SCAN with the ground-truth library.
struct ArmSpec {
    std::string name;
    ScanMode scan_mode;
    bool oracle_library;
};

std::vector<ArmSpec> default_arms(ScanMode scan_mode);
std::vector<ArmSpec> arms_from_names(const std::vector<std::string>& names, ScanMode scan_mode);

struct EvalResult {
    std::string arm;
    double pooled_ap = 0.0;      // primary: all validation frames pooled
    double mean_track_ap = 0.0;  // secondary: mean of per-track APs
    std::vector<std::pair<int, double>> track_ap;
    std::vector<FramePredictions> predictions;
    int fallback_tracks = 0;  // identity missing: zero-feature forward
};

// Material for the occluded-confuser false-positive analysis and the
// library-quality comparison.
struct Diagnostics {
    double baseline_confuser_score = 0.0;
    double scan_confuser_score = 0.0;
    int confuser_frames = 0;
    double silhouette_temporal = 0.0;
    double silhouette_framewise = 0.0;
    SimilarityHistogram histogram;
};

struct SeedRun {
    uint64_t seed = 0;
    std::vector<EvalResult> arms;
    EmbedderTrainReport embedder_report;
    VbfrTrainReport vbfr_report;
    double embedder_eer = 0.0;
    Diagnostics diagnostics;
    bool has_diagnostics = false;
    bool embedder_frozen_intact = false;  // parameters bit-identical across ASD training
    bool library_matches_oracle = false;  // partition + segments equal on the val fold
};

struct ExperimentReport {
    std::string config_digest;
    std::vector<SeedRun> runs;
};

struct AblationOptions {
    std::vector<ArmSpec> arms;
    std::string out_dir;           // empty: no artifacts written
    bool diagnostics = true;       // confuser probe + silhouette comparison
    bool write_predictions = true;
};

// The end-to-end recipe, per seed: generate corpora, train and freeze the
// embedder, train the face model, enroll hypothesised and oracle libraries
// on the validation fold, train each arm on the train fold, evaluate AP on
// the validation fold. A failed arm is recorded and the rest continue.
ExperimentReport run_ablation(const ExperimentConfig& cfg, const std::vector<uint64_t>& seeds,
                              const AblationOptions& options);

// Stages, reusable from the CLI.
IdentitySpeechLibrary enroll_library(const FaceModel& model, const Corpus& corpus, int split,
                                     double threshold, double min_segment_s,
                                     AggregationMode mode);
EvalResult evaluate_asd(const AsdModel& model, const Corpus& corpus, int split,
                        const SpeakerEmbedder* embedder, const IdentitySpeechLibrary* library,
                        int max_reference_segments, uint64_t seed, const std::string& arm_name);

// Partition-and-segment equality up to identity relabeling.
bool libraries_equivalent(const IdentitySpeechLibrary& a, const IdentitySpeechLibrary& b);

std::string render_report_text(const ExperimentReport& report);
std::string render_report_json(const ExperimentReport& report);

// One record per frame: track-id, frame-index, score, label.
void write_predictions(const std::string& path, const std::vector<FramePredictions>& predictions,
                       const std::string& config_digest);

}  // namespace asd
