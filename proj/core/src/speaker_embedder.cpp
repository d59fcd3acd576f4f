#include "asd/speaker_embedder.hpp"

#include <cmath>

#include "asd/checkpoint.hpp"
#include "asd/errors.hpp"
#include "asd/metrics.hpp"
#include "asd/optimizer.hpp"

namespace asd {

namespace {

constexpr double kLnEps = 1e-5;

ParameterStore init_embedder_params(int chunk_samples, int lift_dim, int embed_dim,
                                    uint64_t seed) {
    Rng rng(Rng::mix(seed, Rng::hash_str("embedder_init")));
    ParameterStore p;
    p.insert("lift.w", Tensor::randn({chunk_samples, lift_dim}, rng,
                                     1.0 / std::sqrt(static_cast<double>(chunk_samples))));
    p.insert("pool_ln.g", Tensor::full({1, lift_dim}, 1.0));
    p.insert("pool_ln.b", Tensor::randn({1, lift_dim}, rng, 0.1));
    p.insert("fc1.w", Tensor::randn({lift_dim, lift_dim}, rng,
                                    1.0 / std::sqrt(static_cast<double>(lift_dim))));
    p.insert("fc1.b", Tensor::randn({1, lift_dim}, rng, 0.1));
    p.insert("fc2.w", Tensor::randn({lift_dim, embed_dim}, rng,
                                    1.0 / std::sqrt(static_cast<double>(lift_dim))));
    p.insert("fc2.b", Tensor::randn({1, embed_dim}, rng, 0.1));
    return p;
}

// Pre-normalization embedding, plain path (no tape).
Tensor embed_prenorm(const ParameterStore& p, const Tensor& chunks, int lift_dim, int embed_dim) {
    Tensor lifted = matmul_plain(chunks, p.at("lift.w"));
    Tensor pooled({1, lift_dim});
    for (int j = 0; j < lift_dim; ++j) {
        double s = 0.0;
        for (int i = 0; i < lifted.rows(); ++i) s += lifted(i, j);
        pooled(0, j) = s / lifted.rows();
    }
    // layer-norm removes window gain exactly
    double mu = 0.0;
    for (int j = 0; j < lift_dim; ++j) mu += pooled(0, j);
    mu /= lift_dim;
    double var = 0.0;
    for (int j = 0; j < lift_dim; ++j) var += (pooled(0, j) - mu) * (pooled(0, j) - mu);
    var /= lift_dim;
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    const Tensor& g = p.at("pool_ln.g");
    const Tensor& b = p.at("pool_ln.b");
    Tensor normed({1, lift_dim});
    for (int j = 0; j < lift_dim; ++j)
        normed(0, j) = (pooled(0, j) - mu) * inv * g(0, j) + b(0, j);
    Tensor h = matmul_plain(normed, p.at("fc1.w"));
    for (int j = 0; j < lift_dim; ++j) h(0, j) = std::max(0.0, h(0, j) + p.at("fc1.b")(0, j));
    Tensor e = matmul_plain(h, p.at("fc2.w"));
    for (int j = 0; j < embed_dim; ++j) e(0, j) += p.at("fc2.b")(0, j);
    return e;
}

Value embed_on_tape(ComputationTape& tape, const ParameterStore& p, const Tensor& chunks) {
    Value x = tape.leaf(chunks);
    Value lifted = tape.matmul(x, tape.param("lift.w", p.at("lift.w")));
    Value pooled = tape.mean_axis(lifted, 0);
    Value normed = tape.layer_norm(pooled, tape.param("pool_ln.g", p.at("pool_ln.g")),
                                   tape.param("pool_ln.b", p.at("pool_ln.b")), kLnEps);
    Value h = tape.relu(tape.bias_add(tape.matmul(normed, tape.param("fc1.w", p.at("fc1.w"))),
                                      tape.param("fc1.b", p.at("fc1.b"))));
    return tape.bias_add(tape.matmul(h, tape.param("fc2.w", p.at("fc2.w"))),
                         tape.param("fc2.b", p.at("fc2.b")));
}

}  // namespace

SpeakerEmbedder::SpeakerEmbedder(int chunk_samples, int lift_dim, int embed_dim,
                                 uint64_t init_seed)
    : params_(init_embedder_params(chunk_samples, lift_dim, embed_dim, init_seed)),
      chunk_samples_(chunk_samples),
      lift_dim_(lift_dim),
      embed_dim_(embed_dim) {}

SpeakerEmbedder SpeakerEmbedder::from_params(ParameterStore params, int chunk_samples,
                                             int lift_dim, int embed_dim, bool frozen) {
    SpeakerEmbedder e;
    e.params_ = std::move(params);
    e.chunk_samples_ = chunk_samples;
    e.lift_dim_ = lift_dim;
    e.embed_dim_ = embed_dim;
    e.frozen_ = frozen;
    return e;
}

Tensor SpeakerEmbedder::chunk_matrix(const std::vector<double>& waveform) const {
    const int n_chunks = static_cast<int>(waveform.size()) / chunk_samples_;
    if (n_chunks < 1)
        throw ShapeError("waveform too short to embed: " + std::to_string(waveform.size()) +
                         " samples < one " + std::to_string(chunk_samples_) + "-sample chunk");
    Tensor m({n_chunks, chunk_samples_});
    for (int c = 0; c < n_chunks; ++c)
        for (int s = 0; s < chunk_samples_; ++s)
            m(c, s) = waveform[static_cast<size_t>(c) * chunk_samples_ + s];
    return m;
}

Tensor SpeakerEmbedder::embed(const std::vector<double>& waveform) const {
    Tensor e = embed_prenorm(params_, chunk_matrix(waveform), lift_dim_, embed_dim_);
    Tensor out({embed_dim_});
    const double norm = e.l2_norm();
    const double inv = norm > 1e-12 ? 1.0 / norm : 0.0;
    for (int j = 0; j < embed_dim_; ++j) out[static_cast<size_t>(j)] = e(0, j) * inv;
    return out;
}

Tensor SpeakerEmbedder::embed_windows(const WindowedAudio& windows) const {
    Tensor out({windows.frames(), embed_dim_});
    std::vector<double> row(static_cast<size_t>(windows.window_samples()));
    for (int t = 0; t < windows.frames(); ++t) {
        for (int k = 0; k < windows.window_samples(); ++k) row[static_cast<size_t>(k)] =
            windows.matrix(t, k);
        Tensor e = embed(row);
        for (int j = 0; j < embed_dim_; ++j) out(t, j) = e[static_cast<size_t>(j)];
    }
    return out;
}

Value SpeakerEmbedder::forward_on_tape(ComputationTape& tape,
                                       const std::vector<double>& waveform) const {
    if (frozen_)
        throw ShapeError("frozen embedder must not create tape nodes");
    return embed_on_tape(tape, params_, chunk_matrix(waveform));
}

SpeakerEmbedder train_embedder(const Corpus& corpus, const EmbedderTrainConfig& cfg,
                               uint64_t seed, EmbedderTrainReport* report) {
    const auto& speakers = corpus.speakers;
    const int n_speakers = static_cast<int>(speakers.size());
    if (n_speakers < 2)
        throw ShapeError("train_embedder needs >= 2 speakers, corpus has " +
                         std::to_string(n_speakers));
    const EmissionModel em = corpus.emission();
    const int window_samples =
        static_cast<int>(std::llround(cfg.window_seconds * corpus.scenario_cfg.sample_rate));

    ParameterStore work =
        init_embedder_params(em.chunk_samples, cfg.lift_dim, cfg.embed_dim, seed);
    Rng head_rng(Rng::mix(seed, Rng::hash_str("head_init")));
    work.insert("head.w", Tensor::randn({cfg.embed_dim, n_speakers}, head_rng,
                                        1.0 / std::sqrt(static_cast<double>(cfg.embed_dim))));
    work.insert("head.b", Tensor({1, n_speakers}));

    auto make_window = [&](Rng& rng, int spk) {
        std::vector<double> wave =
            synthesize_clean_window(speakers[spk], em, window_samples, rng);
        double pw = 0.0;
        for (double x : wave) pw += x * x;
        pw /= static_cast<double>(wave.size());
        const double snr = rng.uniform(cfg.noise_snr_lo_db, cfg.noise_snr_hi_db);
        const double sigma = std::sqrt(pw / std::pow(10.0, snr / 10.0));
        for (auto& x : wave) x += rng.normal() * sigma;
        return wave;
    };

    auto chunkify = [&](const std::vector<double>& wave) {
        const int n_chunks = static_cast<int>(wave.size()) / em.chunk_samples;
        Tensor m({n_chunks, em.chunk_samples});
        for (int c = 0; c < n_chunks; ++c)
            for (int s = 0; s < em.chunk_samples; ++s)
                m(c, s) = wave[static_cast<size_t>(c) * em.chunk_samples + s];
        return m;
    };

    Rng rng(Rng::mix(seed, Rng::hash_str("embedder_train")));
    Adam opt({.lr = cfg.lr});
    double initial_loss = 0.0, final_loss = 0.0;
    for (int step = 0; step < cfg.steps; ++step) {
        ComputationTape tape;
        std::vector<Value> rows;
        std::vector<int> labels;
        for (int b = 0; b < cfg.batch; ++b) {
            const int spk = rng.uniform_int(n_speakers);
            rows.push_back(embed_on_tape(tape, work, chunkify(make_window(rng, spk))));
            labels.push_back(spk);
        }
        Value emb = tape.concat(rows, 0);
        Value logits = tape.bias_add(tape.matmul(emb, tape.param("head.w", work.at("head.w"))),
                                     tape.param("head.b", work.at("head.b")));
        Value loss = tape.softmax_cross_entropy(logits, labels);
        tape.backward(loss);
        opt.step(work, tape.param_grads());
        if (step == 0) initial_loss = tape.value(loss)[0];
        final_loss = tape.value(loss)[0];
    }

    // Held-out accuracy through the classification head, fresh windows.
    Rng eval_rng(Rng::mix(seed, Rng::hash_str("embedder_heldout")));
    int correct = 0, total = 0;
    for (int spk = 0; spk < n_speakers; ++spk)
        for (int i = 0; i < cfg.heldout_windows_per_speaker; ++i) {
            Tensor e = embed_prenorm(work, chunkify(make_window(eval_rng, spk)), cfg.lift_dim,
                                     cfg.embed_dim);
            Tensor logits = matmul_plain(e, work.at("head.w"));
            int best = 0;
            double best_v = -1e300;
            for (int c = 0; c < n_speakers; ++c) {
                const double v = logits(0, c) + work.at("head.b")(0, c);
                if (v > best_v) {
                    best_v = v;
                    best = c;
                }
            }
            correct += best == spk ? 1 : 0;
            ++total;
        }

    if (report) {
        report->initial_loss = initial_loss;
        report->final_loss = final_loss;
        report->heldout_accuracy = total ? static_cast<double>(correct) / total : 0.0;
        report->steps = cfg.steps;
    }

    ParameterStore final_params;
    for (auto& [name, t] : work)
        if (name.rfind("head.", 0) != 0) final_params.insert(name, t);
    return SpeakerEmbedder::from_params(std::move(final_params), em.chunk_samples, cfg.lift_dim,
                                        cfg.embed_dim, /*frozen=*/true);
}

double verification_eer(const SpeakerEmbedder& embedder, const std::vector<TrialPair>& trials) {
    std::vector<VerificationTrial> scored;
    scored.reserve(trials.size());
    for (auto& t : trials)
        scored.push_back({cosine_similarity(embedder.embed(t.a), embedder.embed(t.b)),
                          t.same_speaker});
    return equal_error_rate(scored);
}

void save_embedder(const std::string& path, const SpeakerEmbedder& embedder) {
    MetaMap meta;
    meta["kind"] = "speaker_embedder";
    meta["frozen"] = embedder.frozen() ? "true" : "false";
    meta["chunk_samples"] = std::to_string(embedder.chunk_samples());
    meta["embed_dim"] = std::to_string(embedder.embed_dim());
    meta["lift_dim"] = std::to_string(static_cast<int>(embedder.params().at("fc1.w").rows()));
    save_checkpoint(path, embedder.params(), meta);
}

SpeakerEmbedder load_embedder(const std::string& path) {
    MetaMap meta;
    ParameterStore params = load_checkpoint(path, &meta);
    if (meta["kind"] != "speaker_embedder")
        throw IoError("'" + path + "' is not a speaker embedder checkpoint");
    return SpeakerEmbedder::from_params(std::move(params), std::stoi(meta.at("chunk_samples")),
                                        std::stoi(meta.at("lift_dim")),
                                        std::stoi(meta.at("embed_dim")),
                                        meta.at("frozen") == "true");
}

}  // namespace asd
