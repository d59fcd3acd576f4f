#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asd/tensor.hpp"

namespace asd {

// One evaluated frame: detection score plus ground-truth speaking label.
struct ScoredFrame {
    double score;
    bool label;
};

using ScoredFrameSet = std::vector<ScoredFrame>;

// Average precision with the VOC2012 all-point interpolation: frames are
// ranked by score (ties broken by original index, ascending), precision is
// replaced by its monotone envelope p~(r) = max_{r' >= r} p(r'), and AP sums
// (r_i - r_{i-1}) * p~(r_i) over distinct recall points. Tracks supply the
// face boxes in this task, so detection matching reduces to framewise
// classification of the single "speaking" class and mAP equals AP.
// Throws ShapeError when the set is empty or has no positive label.
double average_precision(const ScoredFrameSet& frames);

enum class DistanceMetric { Cosine, Euclidean };

struct SilhouetteInput {
    std::vector<Tensor> embeddings;
    std::vector<int> labels;
    DistanceMetric metric = DistanceMetric::Cosine;
};

// Mean of s(i) = (b(i) - a(i)) / max(a(i), b(i)); singleton clusters
// contribute 0. Requires >= 2 clusters.
double silhouette(const SilhouetteInput& input);

struct SimilarityHistogram {
    std::vector<int> same_identity;       // bin counts
    std::vector<int> different_identity;  // bin counts
    double same_mean = 0.0;
    double different_mean = 0.0;
    int bins = 0;
    size_t same_pairs = 0;
    size_t different_pairs = 0;
};

// Cosine similarity over all unordered pairs, split by identity match,
// binned over [-1, 1].
SimilarityHistogram similarity_histogram(const std::vector<Tensor>& embeddings,
                                         const std::vector<int>& labels, int bins);

struct VerificationTrial {
    double score;
    bool same_speaker;
};

// Equal error rate by threshold sweep over cosine scores. Requires both
// same- and different-speaker trials.
double equal_error_rate(const std::vector<VerificationTrial>& trials);

}  // namespace asd
