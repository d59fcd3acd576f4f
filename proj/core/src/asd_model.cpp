#include "asd/asd_model.hpp"

#include <cmath>
#include <map>

#include "asd/checkpoint.hpp"
#include "asd/errors.hpp"
#include "asd/optimizer.hpp"

namespace asd {

std::string to_string(FusionMode m) { return m == FusionMode::Concat ? "concat" : "sum"; }

std::string to_string(ScanMode m) {
    switch (m) {
        case ScanMode::Off: return "off";
        case ScanMode::AuxOnly: return "aux-only";
        case ScanMode::AuxFuse: return "aux+fuse";
        case ScanMode::TsFuse: return "tsfuse";
    }
    return "off";
}

FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "concat") return FusionMode::Concat;
    if (s == "sum") return FusionMode::Sum;
    throw ConfigError("unknown fusion mode '" + s + "' (expected concat|sum)");
}

ScanMode scan_mode_from_string(const std::string& s) {
    if (s == "off") return ScanMode::Off;
    if (s == "aux-only") return ScanMode::AuxOnly;
    if (s == "aux+fuse") return ScanMode::AuxFuse;
    if (s == "tsfuse") return ScanMode::TsFuse;
    throw ConfigError("unknown scan mode '" + s + "' (expected off|aux-only|aux+fuse|tsfuse)");
}

namespace {

int fused_dim(const AsdConfig& cfg) {
    int base = cfg.fusion == FusionMode::Concat ? 2 * cfg.encoder_dim : cfg.encoder_dim;
    if (cfg.scan_mode == ScanMode::AuxFuse) base += cfg.scan_feature_dim;
    if (cfg.scan_mode == ScanMode::TsFuse) base += cfg.d_phi;
    return base;
}

// biases start small but nonzero: composed relus otherwise emit exact
// zeros that land precisely on downstream relu kinks
void init_encoder(ParameterStore& p, const std::string& prefix, int in_dim, int d, Rng& rng) {
    p.insert(prefix + "lift.w",
             Tensor::randn({in_dim, d}, rng, 1.0 / std::sqrt(static_cast<double>(in_dim))));
    p.insert(prefix + "lift.b", Tensor::randn({1, d}, rng, 0.02));
    p.insert(prefix + "conv.w",
             Tensor::randn({3, d, d}, rng, 1.0 / std::sqrt(static_cast<double>(3 * d))));
    p.insert(prefix + "conv.b", Tensor::randn({1, d}, rng, 0.02));
    p.insert(prefix + "ln.g", Tensor::full({1, d}, 1.0));
    p.insert(prefix + "ln.b", Tensor::randn({1, d}, rng, 0.02));
}

Value encoder_forward(ComputationTape& tape, const ParameterStore& p, const std::string& prefix,
                      const Tensor& input) {
    Value x = tape.leaf(input);
    Value lifted = tape.bias_add(tape.matmul(x, tape.param(prefix + "lift.w",
                                                           p.at(prefix + "lift.w"))),
                                 tape.param(prefix + "lift.b", p.at(prefix + "lift.b")));
    Value conv = tape.conv1d_same3(lifted, tape.param(prefix + "conv.w", p.at(prefix + "conv.w")),
                                   tape.param(prefix + "conv.b", p.at(prefix + "conv.b")));
    Value normed = tape.layer_norm(conv, tape.param(prefix + "ln.g", p.at(prefix + "ln.g")),
                                   tape.param(prefix + "ln.b", p.at(prefix + "ln.b")));
    return tape.relu(normed);
}

}  // namespace

AsdModel::AsdModel(int pixels, int audio_feature_dim, AsdConfig cfg, uint64_t seed)
    : cfg_(cfg), pixels_(pixels), audio_feature_dim_(audio_feature_dim) {
    Rng rng(Rng::mix(seed, Rng::hash_str("asd_init")));
    init_encoder(params_, "audio.", audio_feature_dim, cfg.encoder_dim, rng);
    init_encoder(params_, "video.", pixels, cfg.encoder_dim, rng);
    const int fd = fused_dim(cfg);
    params_.insert("dec.conv1.w", Tensor::randn({3, fd, cfg.decoder_dim}, rng,
                                                1.0 / std::sqrt(static_cast<double>(3 * fd))));
    params_.insert("dec.conv1.b", Tensor::randn({1, cfg.decoder_dim}, rng, 0.02));
    params_.insert("dec.conv2.w",
                   Tensor::randn({3, cfg.decoder_dim, cfg.decoder_dim}, rng,
                                 1.0 / std::sqrt(static_cast<double>(3 * cfg.decoder_dim))));
    params_.insert("dec.conv2.b", Tensor::randn({1, cfg.decoder_dim}, rng, 0.02));
    params_.insert("dec.out.w", Tensor::randn({cfg.decoder_dim, 1}, rng,
                                              1.0 / std::sqrt(static_cast<double>(cfg.decoder_dim))));
    params_.insert("dec.out.b", Tensor::randn({1, 1}, rng, 0.02));
    if (scan_aux_active())
        init_scan_params(params_, cfg.d_phi, cfg.scan_feature_dim, seed);
}

AsdModel AsdModel::from_params(ParameterStore params, int pixels, int audio_feature_dim,
                               AsdConfig cfg) {
    AsdModel m;
    m.params_ = std::move(params);
    m.cfg_ = cfg;
    m.pixels_ = pixels;
    m.audio_feature_dim_ = audio_feature_dim;
    return m;
}

AsdModel::TapeOutput AsdModel::forward_on_tape(ComputationTape& tape,
                                               const Tensor& audio_features,
                                               const Tensor& video_flat,
                                               const Tensor* scan_queries,
                                               const Tensor* reference_embeddings) const {
    if (audio_features.rows() != video_flat.rows())
        throw ShapeError("frame count mismatch between modalities: " +
                         audio_features.shape_str() + " vs " + video_flat.shape_str());
    const int T = audio_features.rows();

    Value fa = encoder_forward(tape, params_, "audio.", audio_features);
    Value fv = encoder_forward(tape, params_, "video.", video_flat);
    Value fused = cfg_.fusion == FusionMode::Concat ? tape.concat({fa, fv}, 1)
                                                    : tape.add(fa, fv);

    TapeOutput out;
    Value decoder_in = fused;
    const bool have_reference = scan_queries != nullptr && reference_embeddings != nullptr &&
                                reference_embeddings->rows() > 0;
    if (scan_aux_active()) {
        if (have_reference) {
            ScanTapeOutput scan =
                scan_forward_on_tape(tape, params_, "scan.", *scan_queries,
                                     *reference_embeddings);
            out.aux_scores = scan.aux_scores;
            out.scan_attention = std::move(scan.attention);
            if (cfg_.scan_mode == ScanMode::AuxFuse)
                decoder_in = tape.concat({fused, scan.features}, 1);
        } else if (cfg_.scan_mode == ScanMode::AuxFuse) {
            // identity missing from the library: baseline-mode forward
            decoder_in = tape.concat({fused, tape.leaf(Tensor({T, cfg_.scan_feature_dim}))}, 1);
        }
    } else if (cfg_.scan_mode == ScanMode::TsFuse) {
        Tensor broadcast({T, cfg_.d_phi});
        if (have_reference) {
            for (int j = 0; j < cfg_.d_phi; ++j) {
                double s = 0.0;
                for (int k = 0; k < reference_embeddings->rows(); ++k)
                    s += (*reference_embeddings)(k, j);
                const double mean = s / reference_embeddings->rows();
                for (int t = 0; t < T; ++t) broadcast(t, j) = mean;
            }
        }
        decoder_in = tape.concat({fused, tape.leaf(std::move(broadcast))}, 1);
    }

    Value h1 = tape.relu(tape.conv1d_same3(decoder_in,
                                           tape.param("dec.conv1.w", params_.at("dec.conv1.w")),
                                           tape.param("dec.conv1.b", params_.at("dec.conv1.b"))));
    Value h2 = tape.relu(tape.conv1d_same3(h1, tape.param("dec.conv2.w", params_.at("dec.conv2.w")),
                                           tape.param("dec.conv2.b", params_.at("dec.conv2.b"))));
    out.scores = tape.sigmoid(
        tape.bias_add(tape.matmul(h2, tape.param("dec.out.w", params_.at("dec.out.w"))),
                      tape.param("dec.out.b", params_.at("dec.out.b"))));
    return out;
}

FramePredictions asd_forward(const AsdModel& model, const Track& track, const AudioSignal& audio,
                             const Tensor* scan_queries, const Tensor* reference_embeddings) {
    const int T = track.length();
    const double track_span = static_cast<double>(T) / track.fps;
    if (audio.duration_s() + 1e-9 < track_span)
        throw ShapeError("audio (" + std::to_string(audio.duration_s()) +
                         " s) does not cover the track span (" + std::to_string(track_span) +
                         " s)");
    Tensor audio_features = decimated_windows(audio, T, track.fps, model.config().window_seconds,
                                              model.config().decimation);
    Tensor video = flatten_frames(track);
    ComputationTape tape;
    auto out = model.forward_on_tape(tape, audio_features, video, scan_queries,
                                     reference_embeddings);
    FramePredictions pred;
    pred.track_id = track.track_id;
    const Tensor& s = tape.value(out.scores);
    pred.scores.resize(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) pred.scores[static_cast<size_t>(t)] = s(t, 0);
    pred.labels = track.frame_labels;
    return pred;
}

Tensor scenario_scan_queries(const SpeakerEmbedder& embedder, const Scenario& scenario, int fps,
                             int frame_count, double window_seconds) {
    WindowedAudio w = window_audio(scenario.mixed_audio, frame_count, fps, window_seconds);
    return embedder.embed_windows(w);
}

namespace {

// Label-preserving video augmentations on a [T,H,W] frame stack.
void flip_frames(Tensor& frames) {
    const int T = frames.extent(0), h = frames.extent(1), w = frames.extent(2);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w / 2; ++j)
                std::swap(frames(t, i, j), frames(t, i, w - 1 - j));
}

void shift_frames(Tensor& frames, int dy, int dx) {
    const int T = frames.extent(0), h = frames.extent(1), w = frames.extent(2);
    Tensor shifted(frames.shape());
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const int si = i + dy, sj = j + dx;
                shifted(t, i, j) = (si >= 0 && si < h && sj >= 0 && sj < w)
                                       ? frames(t, si, sj)
                                       : 0.5;
            }
    frames = std::move(shifted);
}

void rotate_frames(Tensor& frames) {
    const int T = frames.extent(0), h = frames.extent(1), w = frames.extent(2);
    if (h != w) return;
    Tensor rotated(frames.shape());
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) rotated(t, i, j) = frames(t, w - 1 - j, i);
    frames = std::move(rotated);
}

struct TrackRef {
    const Scenario* scenario;
    const Track* track;
};

}  // namespace

AsdTrainReport train_asd(AsdModel& model, const Corpus& corpus, const SpeakerEmbedder* embedder,
                         const IdentitySpeechLibrary* library, const AsdTrainConfig& cfg,
                         uint64_t seed) {
    const ScanMode mode = model.config().scan_mode;
    const bool needs_reference = mode != ScanMode::Off;
    if (needs_reference) {
        if (!embedder) throw ConfigError("train_asd: SCAN enabled but no embedder given");
        if (!embedder->frozen())
            throw ConfigError("train_asd: embedder must be frozen before ASD training");
        if (!library) throw ConfigError("train_asd: SCAN enabled but no library given");
        // Frozen embedder parameters must stay out of the optimizer registry.
        for (auto& [name, t] : model.params())
            if (name.rfind("lift.w", 0) == 0 || name.rfind("pool_ln", 0) == 0)
                throw ConfigError("train_asd: embedder parameters leaked into the ASD store");
    }

    std::vector<TrackRef> usable;
    int skipped = 0;
    for (auto& sc : corpus.scenarios) {
        if (sc.split != 0) continue;
        for (auto& tr : sc.tracks) {
            if (needs_reference && !library->usable_by_track(tr.track_id)) {
                ++skipped;
                continue;
            }
            usable.push_back({&sc, &tr});
        }
    }
    if (usable.empty()) throw ConfigError("train_asd: no usable training tracks");

    // Query embeddings are constants of the frozen embedder: one matrix per
    // scenario, shared by its tracks and by negative-sampled audio.
    std::map<int, Tensor> queries;
    if (needs_reference) {
        for (auto& sc : corpus.scenarios) {
            if (sc.split != 0) continue;
            const int T = sc.tracks.empty() ? 0 : sc.tracks.front().length();
            if (T == 0) continue;
            queries.emplace(sc.scenario_id,
                            scenario_scan_queries(*embedder, sc, corpus.scenario_cfg.fps, T,
                                                  model.config().window_seconds));
        }
    }
    std::map<std::tuple<int, long long, long long>, Tensor> segment_cache;
    auto segment_embedding = [&](const ReferenceSegment& seg) {
        auto key = std::make_tuple(seg.scenario_id, std::llround(seg.start_s * 1e6),
                                   std::llround(seg.end_s * 1e6));
        auto it = segment_cache.find(key);
        if (it == segment_cache.end())
            it = segment_cache.emplace(key, embedder->embed(seg.waveform)).first;
        return it->second;
    };

    std::vector<const Scenario*> train_scenarios;
    for (auto& sc : corpus.scenarios)
        if (sc.split == 0) train_scenarios.push_back(&sc);

    Rng rng(Rng::mix(seed, Rng::hash_str("asd_train")));
    Adam opt({.lr = cfg.lr});
    AsdTrainReport report;
    report.usable_tracks = static_cast<int>(usable.size());
    report.skipped_tracks = skipped;
    report.steps = cfg.steps;

    for (int step = 0; step < cfg.steps; ++step) {
        ComputationTape tape;
        Value total;
        for (int b = 0; b < cfg.batch; ++b) {
            const TrackRef& ref = usable[rng.uniform_int(static_cast<int>(usable.size()))];
            const Track& track = *ref.track;
            const int T = track.length();

            // negative sampling: another scenario's audio, all-false labels
            const Scenario* audio_scenario = ref.scenario;
            bool negative = false;
            if (train_scenarios.size() > 1 && rng.uniform() < cfg.negative_sample_prob) {
                const Scenario* other =
                    train_scenarios[rng.uniform_int(static_cast<int>(train_scenarios.size()))];
                if (other->scenario_id != ref.scenario->scenario_id) {
                    audio_scenario = other;
                    negative = true;
                }
            }
            std::vector<uint8_t> labels =
                negative ? std::vector<uint8_t>(static_cast<size_t>(T), 0) : track.frame_labels;

            Tensor frames = track.frames;
            if (rng.uniform() < cfg.flip_prob) flip_frames(frames);
            if (rng.uniform() < cfg.crop_prob)
                shift_frames(frames,
                             rng.uniform_int(2 * cfg.crop_max_shift + 1) - cfg.crop_max_shift,
                             rng.uniform_int(2 * cfg.crop_max_shift + 1) - cfg.crop_max_shift);
            if (rng.uniform() < cfg.rotate_prob) rotate_frames(frames);
            Track augmented = track;
            augmented.frames = std::move(frames);
            Tensor video = flatten_frames(augmented);

            Tensor audio_features =
                decimated_windows(audio_scenario->mixed_audio, T, track.fps,
                                  model.config().window_seconds, model.config().decimation);

            const Tensor* q = nullptr;
            Tensor refs;
            const Tensor* refs_ptr = nullptr;
            if (needs_reference) {
                q = &queries.at(audio_scenario->scenario_id);
                const IdentityEntry* entry = library->usable_by_track(track.track_id);
                ReferenceSpeech sampled = sample_reference(*library, entry->identity_id, rng,
                                                           cfg.max_reference_segments, corpus);
                refs = Tensor({static_cast<int>(sampled.segments.size()), embedder->embed_dim()});
                for (size_t k = 0; k < sampled.segments.size(); ++k) {
                    Tensor e = segment_embedding(sampled.segments[k]);
                    for (int j = 0; j < embedder->embed_dim(); ++j)
                        refs(static_cast<int>(k), j) = e[j];
                }
                refs_ptr = &refs;
            }

            auto out = model.forward_on_tape(tape, audio_features, video, q, refs_ptr);
            Tensor targets({T, 1});
            for (int t = 0; t < T; ++t) targets(t, 0) = labels[static_cast<size_t>(t)] ? 1.0 : 0.0;
            Value loss = tape.bce_mean(out.scores, tape.leaf(std::move(targets)));
            if (model.scan_aux_active() && out.aux_scores.valid())
                loss = tape.add(loss,
                                tape.scale(scan_aux_loss(tape, out.aux_scores, labels),
                                           cfg.lambda_aux));
            total = total.valid() ? tape.add(total, loss) : loss;
        }
        Value mean_loss = tape.scale(total, 1.0 / cfg.batch);
        tape.backward(mean_loss);
        opt.step(model.params(), tape.param_grads());

        const double loss_v = tape.value(mean_loss)[0];
        if (step == 0) report.initial_loss = loss_v;
        report.final_loss = loss_v;
        if (step % 50 == 0) report.loss_curve.push_back(loss_v);
    }
    return report;
}

void save_asd_model(const std::string& path, const AsdModel& model) {
    MetaMap meta;
    meta["kind"] = "asd_model";
    meta["pixels"] = std::to_string(model.pixels());
    meta["audio_feature_dim"] = std::to_string(model.audio_feature_dim());
    meta["encoder_dim"] = std::to_string(model.config().encoder_dim);
    meta["decoder_dim"] = std::to_string(model.config().decoder_dim);
    meta["fusion"] = to_string(model.config().fusion);
    meta["scan_mode"] = to_string(model.config().scan_mode);
    meta["scan_feature_dim"] = std::to_string(model.config().scan_feature_dim);
    meta["d_phi"] = std::to_string(model.config().d_phi);
    meta["window_seconds"] = double_to_hex(model.config().window_seconds);
    meta["decimation"] = std::to_string(model.config().decimation);
    save_checkpoint(path, model.params(), meta);
}

AsdModel load_asd_model(const std::string& path) {
    MetaMap meta;
    ParameterStore params = load_checkpoint(path, &meta);
    if (meta["kind"] != "asd_model")
        throw IoError("'" + path + "' is not an ASD model checkpoint");
    AsdConfig cfg;
    cfg.encoder_dim = std::stoi(meta.at("encoder_dim"));
    cfg.decoder_dim = std::stoi(meta.at("decoder_dim"));
    cfg.fusion = fusion_mode_from_string(meta.at("fusion"));
    cfg.scan_mode = scan_mode_from_string(meta.at("scan_mode"));
    cfg.scan_feature_dim = std::stoi(meta.at("scan_feature_dim"));
    cfg.d_phi = std::stoi(meta.at("d_phi"));
    cfg.window_seconds = hex_to_double(meta.at("window_seconds"));
    cfg.decimation = std::stoi(meta.at("decimation"));
    return AsdModel::from_params(std::move(params), std::stoi(meta.at("pixels")),
                                 std::stoi(meta.at("audio_feature_dim")), cfg);
}

}  // namespace asd
