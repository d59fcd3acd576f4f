#include "asd/scan.hpp"

#include <cmath>

#include "asd/errors.hpp"

namespace asd {

void init_scan_params(ParameterStore& store, int d_phi, int feature_dim, uint64_t seed,
                      const std::string& prefix) {
    Rng rng(Rng::mix(seed, Rng::hash_str("scan_init")));
    store.insert(prefix + "proj.w", Tensor::randn({d_phi, feature_dim}, rng,
                                                  1.0 / std::sqrt(static_cast<double>(d_phi))));
    store.insert(prefix + "proj.b", Tensor::randn({1, feature_dim}, rng, 0.02));
    store.insert(prefix + "head.w",
                 Tensor::randn({feature_dim, 1}, rng,
                               1.0 / std::sqrt(static_cast<double>(feature_dim))));
    store.insert(prefix + "head.b", Tensor::randn({1, 1}, rng, 0.02));
}

ScanOutput scan_forward_from_embeddings(const ParameterStore& store, const std::string& prefix,
                                        const Tensor& queries,
                                        const Tensor& reference_embeddings) {
    if (reference_embeddings.rows() < 1) throw ShapeError("scan forward with empty reference");
    PlainAttention att = attention_plain(queries, reference_embeddings, reference_embeddings);

    const Tensor& pw = store.at(prefix + "proj.w");
    const Tensor& pb = store.at(prefix + "proj.b");
    Tensor features = matmul_plain(att.out, pw);
    for (int i = 0; i < features.rows(); ++i)
        for (int j = 0; j < features.cols(); ++j)
            features(i, j) = std::max(0.0, features(i, j) + pb(0, j));

    const Tensor& hw = store.at(prefix + "head.w");
    const double hb = store.at(prefix + "head.b")(0, 0);
    ScanOutput out;
    out.aux_scores.resize(static_cast<size_t>(features.rows()));
    for (int i = 0; i < features.rows(); ++i) {
        double z = hb;
        for (int j = 0; j < features.cols(); ++j) z += features(i, j) * hw(j, 0);
        out.aux_scores[static_cast<size_t>(i)] = 1.0 / (1.0 + std::exp(-z));
    }
    out.features = std::move(features);
    out.attention = std::move(att.weights);
    return out;
}

ScanOutput scan_forward(const ParameterStore& store, const std::string& prefix,
                        const SpeakerEmbedder& embedder, const WindowedAudio& windowed,
                        const ReferenceSpeech& reference) {
    if (!embedder.frozen()) throw ShapeError("scan forward requires a frozen embedder");
    if (reference.segments.empty()) throw ShapeError("scan forward with empty reference");
    Tensor queries = embedder.embed_windows(windowed);
    Tensor refs = embed_reference(embedder, reference);
    return scan_forward_from_embeddings(store, prefix, queries, refs);
}

ScanTapeOutput scan_forward_on_tape(ComputationTape& tape, const ParameterStore& store,
                                    const std::string& prefix, const Tensor& queries,
                                    const Tensor& reference_embeddings) {
    if (reference_embeddings.rows() < 1) throw ShapeError("scan forward with empty reference");
    PlainAttention att = attention_plain(queries, reference_embeddings, reference_embeddings);
    Value raw = tape.leaf(att.out);
    Value features =
        tape.relu(tape.bias_add(tape.matmul(raw, tape.param(prefix + "proj.w",
                                                            store.at(prefix + "proj.w"))),
                                tape.param(prefix + "proj.b", store.at(prefix + "proj.b"))));
    Value aux = tape.sigmoid(
        tape.bias_add(tape.matmul(features, tape.param(prefix + "head.w",
                                                       store.at(prefix + "head.w"))),
                      tape.param(prefix + "head.b", store.at(prefix + "head.b"))));
    return {features, aux, std::move(att.weights)};
}

Value scan_aux_loss(ComputationTape& tape, Value aux_scores,
                    const std::vector<uint8_t>& frame_labels) {
    const Tensor& scores = tape.value(aux_scores);
    if (scores.numel() != frame_labels.size())
        throw ShapeError("aux loss length mismatch: " + std::to_string(scores.numel()) +
                         " scores vs " + std::to_string(frame_labels.size()) + " labels");
    Tensor targets(scores.shape());
    for (size_t i = 0; i < frame_labels.size(); ++i) targets[i] = frame_labels[i] ? 1.0 : 0.0;
    return tape.bce_mean(aux_scores, tape.leaf(std::move(targets)));
}

double scan_aux_loss_value(const std::vector<double>& aux_scores,
                           const std::vector<uint8_t>& frame_labels) {
    if (aux_scores.size() != frame_labels.size())
        throw ShapeError("aux loss length mismatch");
    double loss = 0.0;
    for (size_t i = 0; i < aux_scores.size(); ++i) {
        const double p = std::min(1.0 - 1e-7, std::max(1e-7, aux_scores[i]));
        loss -= frame_labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    return loss / static_cast<double>(aux_scores.size());
}

Tensor embed_reference(const SpeakerEmbedder& embedder, const ReferenceSpeech& reference) {
    if (reference.segments.empty()) throw ShapeError("embed_reference with empty reference");
    Tensor out({static_cast<int>(reference.segments.size()), embedder.embed_dim()});
    for (size_t k = 0; k < reference.segments.size(); ++k) {
        Tensor e = embedder.embed(reference.segments[k].waveform);
        for (int j = 0; j < embedder.embed_dim(); ++j) out(static_cast<int>(k), j) = e[j];
    }
    return out;
}

}  // namespace asd
