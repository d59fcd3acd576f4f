#include "asd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "asd/errors.hpp"

namespace asd {

double average_precision(const ScoredFrameSet& frames) {
    if (frames.empty()) throw ShapeError("average_precision over empty frame set");
    size_t positives = 0;
    for (auto& f : frames) positives += f.label ? 1 : 0;
    if (positives == 0)
        throw ShapeError("average_precision undefined: no positive labels");

    std::vector<size_t> order(frames.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return frames[a].score > frames[b].score;  // ties keep original index order
    });

    std::vector<double> precision(frames.size()), recall(frames.size());
    size_t tp = 0;
    for (size_t r = 0; r < order.size(); ++r) {
        tp += frames[order[r]].label ? 1 : 0;
        precision[r] = static_cast<double>(tp) / static_cast<double>(r + 1);
        recall[r] = static_cast<double>(tp) / static_cast<double>(positives);
    }
    // Monotone precision envelope, right to left.
    for (size_t r = order.size() - 1; r-- > 0;)
        precision[r] = std::max(precision[r], precision[r + 1]);

    double ap = 0.0;
    double prev_recall = 0.0;
    for (size_t r = 0; r < order.size(); ++r) {
        if (recall[r] > prev_recall) {
            ap += (recall[r] - prev_recall) * precision[r];
            prev_recall = recall[r];
        }
    }
    return ap;
}

namespace {

double pair_distance(const Tensor& a, const Tensor& b, DistanceMetric metric) {
    if (metric == DistanceMetric::Cosine) return 1.0 - cosine_similarity(a, b);
    double s = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

double silhouette(const SilhouetteInput& input) {
    const size_t n = input.embeddings.size();
    if (n != input.labels.size()) throw ShapeError("silhouette label count mismatch");
    if (n < 2) throw ShapeError("silhouette needs >= 2 points");

    std::vector<int> clusters = input.labels;
    std::sort(clusters.begin(), clusters.end());
    clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());
    if (clusters.size() < 2) throw ShapeError("silhouette needs >= 2 clusters");

    std::vector<size_t> cluster_size(clusters.size(), 0);
    auto cluster_of = [&](int label) {
        return static_cast<size_t>(
            std::lower_bound(clusters.begin(), clusters.end(), label) - clusters.begin());
    };
    for (int l : input.labels) ++cluster_size[cluster_of(l)];

    double total = 0.0;
    std::vector<double> mean_dist(clusters.size());
    for (size_t i = 0; i < n; ++i) {
        const size_t own = cluster_of(input.labels[i]);
        if (cluster_size[own] == 1) continue;  // singleton scores 0
        std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            mean_dist[cluster_of(input.labels[j])] +=
                pair_distance(input.embeddings[i], input.embeddings[j], input.metric);
        }
        const double a = mean_dist[own] / static_cast<double>(cluster_size[own] - 1);
        double b = std::numeric_limits<double>::max();
        for (size_t c = 0; c < clusters.size(); ++c) {
            if (c == own || cluster_size[c] == 0) continue;
            b = std::min(b, mean_dist[c] / static_cast<double>(cluster_size[c]));
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

SimilarityHistogram similarity_histogram(const std::vector<Tensor>& embeddings,
                                         const std::vector<int>& labels, int bins) {
    if (embeddings.size() != labels.size()) throw ShapeError("histogram label count mismatch");
    if (embeddings.size() < 2) throw ShapeError("histogram needs >= 2 points");
    if (bins < 1) throw ShapeError("histogram needs >= 1 bin");

    SimilarityHistogram h;
    h.bins = bins;
    h.same_identity.assign(bins, 0);
    h.different_identity.assign(bins, 0);
    double same_sum = 0.0, diff_sum = 0.0;
    for (size_t i = 0; i < embeddings.size(); ++i)
        for (size_t j = i + 1; j < embeddings.size(); ++j) {
            const double sim = cosine_similarity(embeddings[i], embeddings[j]);
            int bin = static_cast<int>((sim + 1.0) / 2.0 * bins);
            bin = std::clamp(bin, 0, bins - 1);
            if (labels[i] == labels[j]) {
                ++h.same_identity[bin];
                ++h.same_pairs;
                same_sum += sim;
            } else {
                ++h.different_identity[bin];
                ++h.different_pairs;
                diff_sum += sim;
            }
        }
    if (h.same_pairs) h.same_mean = same_sum / static_cast<double>(h.same_pairs);
    if (h.different_pairs) h.different_mean = diff_sum / static_cast<double>(h.different_pairs);
    return h;
}

double equal_error_rate(const std::vector<VerificationTrial>& trials) {
    size_t pos = 0, neg = 0;
    for (auto& t : trials) (t.same_speaker ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw ShapeError("equal_error_rate needs both same- and different-speaker trials");

    std::vector<VerificationTrial> sorted = trials;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.score > b.score; });

    // Sweep the accept threshold down through the scores. Start with nothing
    // accepted: all same-speaker trials rejected (FRR 1), no false accepts.
    size_t accepted_pos = 0, accepted_neg = 0;
    double best_gap = std::numeric_limits<double>::max();
    double eer = 1.0;
    auto consider = [&]() {
        const double far = static_cast<double>(accepted_neg) / static_cast<double>(neg);
        const double frr = 1.0 - static_cast<double>(accepted_pos) / static_cast<double>(pos);
        const double gap = std::abs(far - frr);
        if (gap < best_gap) {
            best_gap = gap;
            eer = 0.5 * (far + frr);
        }
    };
    consider();
    for (size_t i = 0; i < sorted.size();) {
        size_t j = i;
        while (j < sorted.size() && sorted[j].score == sorted[i].score) {
            (sorted[j].same_speaker ? accepted_pos : accepted_neg)++;
            ++j;
        }
        consider();
        i = j;
    }
    return eer;
}

}  // namespace asd
