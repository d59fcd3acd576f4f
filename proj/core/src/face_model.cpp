#include "asd/face_model.hpp"

#include <algorithm>
#include <cmath>

#include "asd/checkpoint.hpp"
#include "asd/errors.hpp"
#include "asd/optimizer.hpp"

namespace asd {

PollutedTrack pollute_track(const Track& parent, const std::vector<const Track*>& impostor_pool,
                            double rate, uint64_t seed) {
    if (rate < 0.0 || rate > 1.0) throw ConfigError("impostor rate must lie in [0,1]");
    const int T = parent.length();
    const int h = parent.height(), w = parent.width();
    const int n = rate_count(rate, T);
    if (n > 0 && impostor_pool.empty())
        throw ShapeError("pollute_track: empty impostor pool with rate > 0");

    Rng rng(seed);
    // Uniform over pool frames, not pool tracks.
    size_t total_pool_frames = 0;
    for (const Track* t : impostor_pool) {
        if (t->height() != h || t->width() != w)
            throw ShapeError("pollute_track: impostor frame size mismatch");
        total_pool_frames += static_cast<size_t>(t->length());
    }
    struct Source {
        const Track* track;
        int frame;
    };
    std::vector<Source> picks;
    for (int i = 0; i < n; ++i) {
        size_t g = rng.next_u64() % total_pool_frames;
        for (const Track* t : impostor_pool) {
            if (g < static_cast<size_t>(t->length())) {
                picks.push_back({t, static_cast<int>(g)});
                break;
            }
            g -= static_cast<size_t>(t->length());
        }
    }
    std::vector<int> impostor_slots = rng.sample_without_replacement(T + n, n);
    std::sort(impostor_slots.begin(), impostor_slots.end());

    PollutedTrack out;
    out.parent_track_id = parent.track_id;
    out.frames = Tensor({T + n, h, w});
    out.native_mask.assign(static_cast<size_t>(T + n), 1);
    const int px = h * w;
    size_t next_impostor = 0;
    int next_native = 0;
    for (int slot = 0; slot < T + n; ++slot) {
        const bool impostor = next_impostor < impostor_slots.size() &&
                              impostor_slots[next_impostor] == slot;
        const double* src;
        if (impostor) {
            const Source& s = picks[next_impostor];
            src = s.track->frames.data().data() + static_cast<size_t>(s.frame) * px;
            out.native_mask[static_cast<size_t>(slot)] = 0;
            out.impostor_track_ids.push_back(s.track->track_id);
            ++next_impostor;
        } else {
            src = parent.frames.data().data() + static_cast<size_t>(next_native) * px;
            ++next_native;
        }
        std::copy(src, src + px, out.frames.data().data() + static_cast<size_t>(slot) * px);
    }
    return out;
}

Tensor flatten_polluted(const PollutedTrack& track) {
    const int T = track.frames.extent(0);
    const int px = track.frames.extent(1) * track.frames.extent(2);
    Tensor out({T, px});
    std::copy(track.frames.data().begin(), track.frames.data().end(), out.data().begin());
    return out;
}

namespace {

constexpr double kLnEps = 1e-5;

std::string layer_prefix(int l) { return "enc" + std::to_string(l) + "."; }

}  // namespace

FaceModel::FaceModel(int pixels, FaceModelConfig cfg, uint64_t seed)
    : cfg_(cfg), pixels_(pixels) {
    if (cfg.frame_dim != cfg.model_dim)
        throw ConfigError("face model: frame_dim must equal model_dim");
    if (cfg.model_dim % cfg.heads != 0)
        throw ConfigError("face model: heads must divide model_dim");
    Rng rng(Rng::mix(seed, Rng::hash_str("face_init")));
    const int d = cfg.model_dim;
    const int dh = d / cfg.heads;
    params_.insert("frame.w",
                   Tensor::randn({pixels, cfg.frame_dim}, rng,
                                 1.0 / std::sqrt(static_cast<double>(pixels))));
    params_.insert("frame.b", Tensor::randn({1, cfg.frame_dim}, rng, 0.02));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = layer_prefix(l);
        params_.insert(p + "ln1.g", Tensor::full({1, d}, 1.0));
        params_.insert(p + "ln1.b", Tensor({1, d}));
        for (int hd = 0; hd < cfg.heads; ++hd) {
            const std::string hp = p + "h" + std::to_string(hd) + ".";
            const double s = 1.0 / std::sqrt(static_cast<double>(d));
            params_.insert(hp + "wq", Tensor::randn({d, dh}, rng, s));
            params_.insert(hp + "wk", Tensor::randn({d, dh}, rng, s));
            params_.insert(hp + "wv", Tensor::randn({d, dh}, rng, s));
        }
        params_.insert(p + "attn_out.w",
                       Tensor::randn({d, d}, rng, 1.0 / std::sqrt(static_cast<double>(d))));
        params_.insert(p + "attn_out.b", Tensor::randn({1, d}, rng, 0.02));
        params_.insert(p + "ln2.g", Tensor::full({1, d}, 1.0));
        params_.insert(p + "ln2.b", Tensor({1, d}));
        params_.insert(p + "ff1.w", Tensor::randn({d, cfg.ff_dim}, rng,
                                                  1.0 / std::sqrt(static_cast<double>(d))));
        params_.insert(p + "ff1.b", Tensor::randn({1, cfg.ff_dim}, rng, 0.02));
        params_.insert(p + "ff2.w",
                       Tensor::randn({cfg.ff_dim, d}, rng,
                                     1.0 / std::sqrt(static_cast<double>(cfg.ff_dim))));
        params_.insert(p + "ff2.b", Tensor::randn({1, d}, rng, 0.02));
    }
    params_.insert("final_ln.g", Tensor::full({1, d}, 1.0));
    params_.insert("final_ln.b", Tensor({1, d}));
    params_.insert("head.w",
                   Tensor::randn({d, 1}, rng, 1.0 / std::sqrt(static_cast<double>(d))));
    params_.insert("head.b", Tensor::randn({1, 1}, rng, 0.02));
}

FaceModel FaceModel::from_params(ParameterStore params, int pixels, FaceModelConfig cfg) {
    FaceModel m;
    m.params_ = std::move(params);
    m.cfg_ = cfg;
    m.pixels_ = pixels;
    return m;
}

FaceModel::TapeOutput FaceModel::forward_on_tape(ComputationTape& tape,
                                                 const Tensor& frames_flat) const {
    if (frames_flat.rows() < 1) throw ShapeError("face model forward over empty track");
    if (frames_flat.cols() != pixels_)
        throw ShapeError("face model expects " + std::to_string(pixels_) + " pixels, got " +
                         frames_flat.shape_str());
    auto P = [&](const std::string& name) { return tape.param(name, params_.at(name)); };

    Value x = tape.relu(tape.bias_add(tape.matmul(tape.leaf(frames_flat), P("frame.w")),
                                      P("frame.b")));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = layer_prefix(l);
        Value n1 = tape.layer_norm(x, P(p + "ln1.g"), P(p + "ln1.b"), kLnEps);
        std::vector<Value> heads;
        for (int hd = 0; hd < cfg_.heads; ++hd) {
            const std::string hp = p + "h" + std::to_string(hd) + ".";
            Value q = tape.matmul(n1, P(hp + "wq"));
            Value k = tape.matmul(n1, P(hp + "wk"));
            Value v = tape.matmul(n1, P(hp + "wv"));
            heads.push_back(tape.scaled_dot_attention(q, k, v).out);
        }
        Value attn = tape.bias_add(tape.matmul(tape.concat(heads, 1), P(p + "attn_out.w")),
                                   P(p + "attn_out.b"));
        x = tape.add(x, attn);
        Value n2 = tape.layer_norm(x, P(p + "ln2.g"), P(p + "ln2.b"), kLnEps);
        Value ff = tape.bias_add(
            tape.matmul(tape.relu(tape.bias_add(tape.matmul(n2, P(p + "ff1.w")),
                                                P(p + "ff1.b"))),
                        P(p + "ff2.w")),
            P(p + "ff2.b"));
        x = tape.add(x, ff);
    }
    x = tape.layer_norm(x, P("final_ln.g"), P("final_ln.b"), kLnEps);
    Value probs = tape.sigmoid(tape.bias_add(tape.matmul(x, P("head.w")), P("head.b")));
    return {probs, x};
}

VbfrOutput FaceModel::forward(const Tensor& frames_flat) const {
    ComputationTape tape;
    auto out = forward_on_tape(tape, frames_flat);
    VbfrOutput result;
    const Tensor& probs = tape.value(out.native_probs);
    result.impostor_prob.resize(static_cast<size_t>(probs.rows()));
    for (int t = 0; t < probs.rows(); ++t)
        result.impostor_prob[static_cast<size_t>(t)] = 1.0 - probs(t, 0);
    result.last_states = tape.value(out.last_states);
    return result;
}

VbfrOutput FaceModel::forward(const PollutedTrack& track) const {
    return forward(flatten_polluted(track));
}

VbfrOutput FaceModel::forward(const Track& track) const {
    return forward(flatten_frames(track));
}

Tensor FaceModel::identity_embedding(const Track& track) const {
    if (track.length() < 1) throw ShapeError("identity_embedding over empty track");
    VbfrOutput out = forward(track);
    Tensor emb({cfg_.model_dim});
    for (int j = 0; j < cfg_.model_dim; ++j) {
        double s = 0.0;
        for (int t = 0; t < out.last_states.rows(); ++t) s += out.last_states(t, j);
        emb[static_cast<size_t>(j)] = s / out.last_states.rows();
    }
    const double norm = emb.l2_norm();
    if (norm > 1e-12)
        for (auto& v : emb.data()) v /= norm;
    return emb;
}

Tensor FaceModel::framewise_identity_embedding(const Track& track) const {
    if (track.length() < 1) throw ShapeError("identity_embedding over empty track");
    Tensor flat = flatten_frames(track);
    Tensor lifted = matmul_plain(flat, params_.at("frame.w"));
    const Tensor& b = params_.at("frame.b");
    Tensor emb({cfg_.frame_dim});
    for (int j = 0; j < cfg_.frame_dim; ++j) {
        double s = 0.0;
        for (int t = 0; t < lifted.rows(); ++t) s += std::max(0.0, lifted(t, j) + b(0, j));
        emb[static_cast<size_t>(j)] = s / lifted.rows();
    }
    const double norm = emb.l2_norm();
    if (norm > 1e-12)
        for (auto& v : emb.data()) v /= norm;
    return emb;
}

namespace {

Track crop_track(const Track& track, int start, int frames) {
    Track out;
    out.track_id = track.track_id;
    out.speaker_id = track.speaker_id;
    out.fps = track.fps;
    const int h = track.height(), w = track.width();
    out.frames = Tensor({frames, h, w});
    const int px = h * w;
    std::copy(track.frames.data().begin() + static_cast<size_t>(start) * px,
              track.frames.data().begin() + static_cast<size_t>(start + frames) * px,
              out.frames.data().begin());
    out.frame_labels.assign(track.frame_labels.begin() + start,
                            track.frame_labels.begin() + start + frames);
    out.corruption_mask.assign(track.corruption_mask.begin() + start,
                               track.corruption_mask.begin() + start + frames);
    return out;
}

}  // namespace

VbfrTrainReport vbfr_train(FaceModel& model, const Corpus& corpus, const VbfrTrainConfig& cfg,
                           uint64_t seed) {
    std::vector<const Track*> train_tracks;
    std::vector<const Track*> val_tracks;
    for (auto& sc : corpus.scenarios)
        for (auto& tr : sc.tracks) (sc.split == 0 ? train_tracks : val_tracks).push_back(&tr);
    {
        std::vector<int> identities;
        for (const Track* t : train_tracks) identities.push_back(t->speaker_id);
        std::sort(identities.begin(), identities.end());
        identities.erase(std::unique(identities.begin(), identities.end()), identities.end());
        if (identities.size() < 2)
            throw ShapeError("vbfr_train needs >= 2 distinct identities, found " +
                             std::to_string(identities.size()));
    }

    auto pool_for = [](const std::vector<const Track*>& tracks, const Track* parent) {
        std::vector<const Track*> pool;
        for (const Track* t : tracks)
            if (t->speaker_id != parent->speaker_id) pool.push_back(t);
        return pool;
    };

    Rng rng(Rng::mix(seed, Rng::hash_str("vbfr_train")));
    Adam opt({.lr = cfg.lr});
    VbfrTrainReport report;
    report.steps = cfg.steps;

    for (int step = 0; step < cfg.steps; ++step) {
        ComputationTape tape;
        Value total;
        for (int b = 0; b < cfg.batch; ++b) {
            const Track* parent =
                train_tracks[rng.uniform_int(static_cast<int>(train_tracks.size()))];
            Track cropped = *parent;
            if (parent->length() > cfg.crop_frames) {
                const int start = rng.uniform_int(parent->length() - cfg.crop_frames + 1);
                cropped = crop_track(*parent, start, cfg.crop_frames);
            }
            auto pool = pool_for(train_tracks, parent);
            PollutedTrack polluted =
                pollute_track(cropped, pool, cfg.impostor_rate, rng.next_u64());
            auto out = model.forward_on_tape(tape, flatten_polluted(polluted));
            Tensor targets({static_cast<int>(polluted.native_mask.size()), 1});
            for (size_t t = 0; t < polluted.native_mask.size(); ++t)
                targets[t] = polluted.native_mask[t] ? 1.0 : 0.0;
            Value loss = tape.bce_mean(out.native_probs, tape.leaf(std::move(targets)));
            total = total.valid() ? tape.add(total, loss) : loss;
        }
        Value mean_loss = tape.scale(total, 1.0 / cfg.batch);
        tape.backward(mean_loss);
        opt.step(model.params(), tape.param_grads());
        const double v = tape.value(mean_loss)[0];
        if (step == 0) report.initial_loss = v;
        report.final_loss = v;
        if (step % 50 == 0) report.loss_curve.push_back(v);
    }

    // Held-out frame accuracy on full-length polluted validation tracks.
    Rng eval_rng(Rng::mix(seed, Rng::hash_str("vbfr_heldout")));
    const auto& heldout_source = val_tracks.empty() ? train_tracks : val_tracks;
    size_t correct = 0, total_frames = 0;
    const int n_eval = std::min<int>(cfg.heldout_tracks, static_cast<int>(heldout_source.size()));
    for (int i = 0; i < n_eval; ++i) {
        const Track* parent = heldout_source[static_cast<size_t>(i)];
        auto pool = pool_for(heldout_source, parent);
        if (pool.empty()) continue;
        PollutedTrack polluted =
            pollute_track(*parent, pool, cfg.impostor_rate, eval_rng.next_u64());
        VbfrOutput out = model.forward(polluted);
        for (size_t t = 0; t < polluted.native_mask.size(); ++t) {
            const bool predicted_impostor = out.impostor_prob[t] > 0.5;
            correct += (predicted_impostor == !polluted.native_mask[t]) ? 1 : 0;
            ++total_frames;
        }
    }
    report.heldout_frame_accuracy =
        total_frames ? static_cast<double>(correct) / static_cast<double>(total_frames) : 0.0;
    return report;
}

void save_face_model(const std::string& path, const FaceModel& model) {
    MetaMap meta;
    meta["kind"] = "face_model";
    meta["pixels"] = std::to_string(model.pixels());
    meta["frame_dim"] = std::to_string(model.config().frame_dim);
    meta["model_dim"] = std::to_string(model.config().model_dim);
    meta["layers"] = std::to_string(model.config().layers);
    meta["heads"] = std::to_string(model.config().heads);
    meta["ff_dim"] = std::to_string(model.config().ff_dim);
    save_checkpoint(path, model.params(), meta);
}

FaceModel load_face_model(const std::string& path) {
    MetaMap meta;
    ParameterStore params = load_checkpoint(path, &meta);
    if (meta["kind"] != "face_model")
        throw IoError("'" + path + "' is not a face model checkpoint");
    FaceModelConfig cfg;
    cfg.frame_dim = std::stoi(meta.at("frame_dim"));
    cfg.model_dim = std::stoi(meta.at("model_dim"));
    cfg.layers = std::stoi(meta.at("layers"));
    cfg.heads = std::stoi(meta.at("heads"));
    cfg.ff_dim = std::stoi(meta.at("ff_dim"));
    return FaceModel::from_params(std::move(params), std::stoi(meta.at("pixels")), cfg);
}

}  // namespace asd
