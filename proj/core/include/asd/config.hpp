#pragma once

#include <string>

#include "asd/asd_model.hpp"
#include "asd/corpus.hpp"
#include "asd/face_model.hpp"
#include "asd/identity_library.hpp"
#include "asd/speaker_embedder.hpp"

namespace asd {

// Whole-experiment configuration, read from a plain-text sectioned
// key = value file. Every field has a default; unknown keys are errors.
struct ExperimentConfig {
    CorpusConfig corpus;
    EmbedderTrainConfig embedder;
    AsdConfig asd;
    AsdTrainConfig asd_train;
    FaceModelConfig face;
    VbfrTrainConfig face_train;
    double library_threshold = 0.9;
    double library_min_segment_s = 2.5;
    AggregationMode aggregation = AggregationMode::Centroid;
    uint64_t seed = 7;
    int histogram_bins = 20;

    void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical serialization; also the hashing domain.
std::string serialize_config(const ExperimentConfig& cfg);
// 16 hex digits of fnv1a64 over the canonical serialization.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace asd
