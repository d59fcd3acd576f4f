#include "asd/corpus.hpp"

#include <algorithm>
#include <cmath>

#include "asd/errors.hpp"

namespace asd {

namespace {

// Emission amplitudes; speech RMS fixed, noise scaled from it by SNR.
constexpr double kSpeechRms = 0.1;
constexpr double kFaceStd = 0.2;
constexpr double kVideoNoise = 0.08;
constexpr double kMouthGain = 0.18;
constexpr double kOcclusionNoise = 0.06;
constexpr double kOccluderStd = 0.75;
constexpr int kOccluderPaletteSize = 3;
constexpr double kChunkSeconds = 0.01;
// occlusions arrive in contiguous bursts sharing one occluder image
constexpr int kOcclusionBurstMin = 6;
constexpr int kOcclusionBurstMax = 20;

double envelope_value(double freq, double phase, double t) {
    return 0.55 + 0.45 * std::sin(2.0 * M_PI * freq * t + phase);
}

struct EnvelopeParams {
    double freq;
    double phase;
};

EnvelopeParams utterance_envelope(uint64_t env_seed, size_t utterance_index) {
    Rng r(Rng::mix(env_seed, utterance_index));
    return {r.uniform(2.0, 4.0), r.uniform(0.0, 2.0 * M_PI)};
}

// Per-speaker 10 ms chunk waveform, normalized to kSpeechRms.
Tensor speaker_chunk_base(const SyntheticSpeaker& sp, const EmissionModel& em) {
    Tensor v({em.voice_projection.cols(), 1});
    for (size_t i = 0; i < sp.voiceprint.numel(); ++i) v[i] = sp.voiceprint[i];
    Tensor base = matmul_plain(em.voice_projection, v);
    double ms = 0.0;
    for (double x : base.data()) ms += x * x;
    double rms = std::sqrt(ms / static_cast<double>(base.numel()));
    if (rms > 0.0)
        for (auto& x : base.data()) x *= kSpeechRms / rms;
    return base;
}

Tensor speaker_face_base(const SyntheticSpeaker& sp, const EmissionModel& em) {
    Tensor f({em.face_projection.cols(), 1});
    for (size_t i = 0; i < sp.faceprint.numel(); ++i) f[i] = sp.faceprint[i];
    Tensor base = matmul_plain(em.face_projection, f);
    double mean = 0.0;
    for (double x : base.data()) mean += x;
    mean /= static_cast<double>(base.numel());
    double var = 0.0;
    for (double x : base.data()) var += (x - mean) * (x - mean);
    double sd = std::sqrt(var / static_cast<double>(base.numel()));
    if (sd > 0.0)
        for (auto& x : base.data()) x = (x - mean) * (kFaceStd / sd);
    return base;
}

// Adds one speaker's utterances into `out`, chunk by chunk. A chunk belongs
// to an utterance when its midpoint lies inside [start, end).
void add_speaker_emission(std::vector<double>& out, std::vector<uint8_t>* active,
                          const std::vector<Utterance>& timeline, int speaker_id,
                          const Tensor& chunk_base, uint64_t env_seed, int chunk_samples) {
    const int n_chunks = static_cast<int>(out.size()) / chunk_samples;
    for (size_t ui = 0; ui < timeline.size(); ++ui) {
        const Utterance& u = timeline[ui];
        if (u.speaker_id != speaker_id) continue;
        const EnvelopeParams env = utterance_envelope(env_seed, ui);
        int c_lo = std::max(0, static_cast<int>(std::floor(u.start_s / kChunkSeconds)) - 1);
        int c_hi = std::min(n_chunks - 1, static_cast<int>(std::ceil(u.end_s / kChunkSeconds)) + 1);
        for (int c = c_lo; c <= c_hi; ++c) {
            const double mid = (c + 0.5) * kChunkSeconds;
            if (mid < u.start_s || mid >= u.end_s) continue;
            const double amp = envelope_value(env.freq, env.phase, mid);
            for (int s = 0; s < chunk_samples; ++s) {
                const size_t idx = static_cast<size_t>(c) * chunk_samples + s;
                if (idx >= out.size()) break;
                out[idx] += chunk_base[static_cast<size_t>(s)] * amp;
                if (active) (*active)[idx] = 1;
            }
        }
    }
}

struct MouthRegion {
    int row0, col0, extent;
};

MouthRegion mouth_region(int h, int w) { return {h * 5 / 8, (w - 4) / 2, 4}; }

Scenario generate_scenario_impl(const ScenarioConfig& cfg,
                                const std::vector<SyntheticSpeaker>& tracked,
                                const std::vector<SyntheticSpeaker>& confusers,
                                const EmissionModel& em, int scenario_id, int split,
                                uint64_t seed) {
    Scenario sc;
    sc.scenario_id = scenario_id;
    sc.split = split;
    sc.seed = seed;
    for (auto& s : tracked) sc.speaker_ids.push_back(s.id);
    for (auto& s : confusers) sc.speaker_ids.push_back(s.id);

    Rng rng(seed);
    const int n_tracked = static_cast<int>(tracked.size());

    // Timeline. The first n_tracked utterances cycle through the tracked
    // speakers in shuffled order so every track has speech (and, duration
    // permitting, an enrollable stretch of it); later utterances are drawn
    // at random, diverted to a confuser with confuser_prob.
    constexpr double kEnrollableLen = 2.6;
    std::vector<int> lead_order = rng.sample_without_replacement(n_tracked, n_tracked);
    double cursor = rng.uniform(0.0, 0.3);
    size_t idx = 0;
    while (true) {
        const double remaining = cfg.duration_s - cursor;
        if (remaining < cfg.utterance_min_s) break;
        double lo = cfg.utterance_min_s;
        if (idx < static_cast<size_t>(n_tracked) && remaining > kEnrollableLen &&
            cfg.utterance_max_s > kEnrollableLen)
            lo = kEnrollableLen;
        const double dur = rng.uniform(lo, std::max(lo, std::min(cfg.utterance_max_s, remaining)));
        int spk;
        if (idx < static_cast<size_t>(n_tracked)) {
            spk = tracked[lead_order[idx]].id;
        } else if (!confusers.empty() && rng.uniform() < cfg.confuser_prob) {
            spk = confusers[rng.uniform_int(static_cast<int>(confusers.size()))].id;
        } else {
            spk = tracked[rng.uniform_int(n_tracked)].id;
            // avoid a speaker overlapping their own running utterance
            if (!sc.timeline.empty() && cursor < sc.timeline.back().end_s &&
                spk == sc.timeline.back().speaker_id && n_tracked > 1)
                spk = tracked[rng.uniform_int(n_tracked)].id;
        }
        sc.timeline.push_back({spk, cursor, cursor + dur});
        if (rng.uniform() < cfg.overlap_prob)
            cursor += dur * rng.uniform(0.3, 0.8);
        else
            cursor += dur + rng.uniform(cfg.gap_min_s, cfg.gap_max_s);
        ++idx;
    }
    sc.diarised = sc.timeline;

    // Audio: per-speaker chunkwise emissions, mixed, then Gaussian noise at
    // the configured SNR relative to power over speech-active samples.
    const uint64_t env_seed = Rng::mix(seed, Rng::hash_str("envelope"));
    const size_t n_samples = static_cast<size_t>(
        std::llround(cfg.duration_s * cfg.sample_rate));
    std::vector<double> mix(n_samples, 0.0);
    std::vector<uint8_t> active(n_samples, 0);
    std::vector<const SyntheticSpeaker*> participants;
    for (auto& s : tracked) participants.push_back(&s);
    for (auto& s : confusers) participants.push_back(&s);
    for (const SyntheticSpeaker* sp : participants) {
        Tensor base = speaker_chunk_base(*sp, em);
        add_speaker_emission(mix, &active, sc.timeline, sp->id, base, env_seed,
                             em.chunk_samples);
    }
    double signal_power = 0.0;
    size_t n_active = 0;
    for (size_t i = 0; i < n_samples; ++i)
        if (active[i]) {
            signal_power += mix[i] * mix[i];
            ++n_active;
        }
    double noise_sigma = 1e-4;
    if (n_active > 0) {
        signal_power /= static_cast<double>(n_active);
        noise_sigma = std::sqrt(signal_power / std::pow(10.0, cfg.snr_db / 10.0));
    }
    for (auto& x : mix) x = std::clamp(x + rng.normal() * noise_sigma, -1.0, 1.0);
    sc.mixed_audio.samples = std::move(mix);
    sc.mixed_audio.sample_rate = cfg.sample_rate;

    // Tracks: one full-duration track per tracked speaker. A frame carries
    // the mouth signal exactly when its label is true.
    const int T = static_cast<int>(std::llround(cfg.duration_s * cfg.fps));
    const MouthRegion mr = mouth_region(cfg.frame_height, cfg.frame_width);
    for (int k = 0; k < n_tracked; ++k) {
        const SyntheticSpeaker& sp = tracked[k];
        Track tr;
        tr.track_id = scenario_id * 1000 + k;
        tr.speaker_id = sp.id;
        tr.fps = cfg.fps;
        tr.frames = Tensor({T, cfg.frame_height, cfg.frame_width});
        tr.frame_labels.assign(T, 0);
        tr.corruption_mask.assign(T, 0);
        Tensor face = speaker_face_base(sp, em);
        for (int t = 0; t < T; ++t) {
            const double tc = (t + 0.5) / cfg.fps;
            double amp = 0.0;
            bool speaking = false;
            for (size_t ui = 0; ui < sc.timeline.size(); ++ui) {
                const Utterance& u = sc.timeline[ui];
                if (u.speaker_id != sp.id || tc < u.start_s || tc >= u.end_s) continue;
                speaking = true;
                const EnvelopeParams env = utterance_envelope(env_seed, ui);
                amp = std::max(amp, envelope_value(env.freq, env.phase, tc));
            }
            tr.frame_labels[t] = speaking ? 1 : 0;
            for (int i = 0; i < cfg.frame_height; ++i)
                for (int j = 0; j < cfg.frame_width; ++j)
                    tr.frames(t, i, j) = 0.5 + face[static_cast<size_t>(i) * cfg.frame_width + j] +
                                         rng.normal() * kVideoNoise;
            if (speaking)
                for (int i = mr.row0; i < mr.row0 + mr.extent; ++i)
                    for (int j = mr.col0; j < mr.col0 + mr.extent; ++j)
                        tr.frames(t, i, j) += kMouthGain * amp;
        }
        if (cfg.occlusion_rate > 0.0 || cfg.blur_rate > 0.0)
            tr = corrupt_video(tr, cfg.occlusion_rate, cfg.blur_rate,
                               Rng::mix(Rng::mix(seed, Rng::hash_str("corrupt")),
                                        static_cast<uint64_t>(k)),
                               &em.occluders);
        sc.tracks.push_back(std::move(tr));
    }
    return sc;
}

}  // namespace

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("scenario config: " + m); };
    if (n_speakers < 1) fail("n_speakers must be >= 1");
    if (n_confusers < 0) fail("n_confusers must be >= 0");
    if (duration_s <= 0) fail("duration_s must be > 0");
    if (fps < 1) fail("fps must be >= 1");
    if (sample_rate < 1000 || sample_rate % 100 != 0)
        fail("sample_rate must be >= 1000 and divisible by 100");
    if (frame_height < 8 || frame_width < 8) fail("frames must be at least 8x8");
    if (voice_dim < 2 || face_dim < 2) fail("print dims must be >= 2");
    if (utterance_min_s <= 0 || utterance_max_s < utterance_min_s)
        fail("utterance length range invalid");
    if (utterance_min_s > duration_s) fail("utterance_min_s exceeds duration");
    if (gap_min_s < 0 || gap_max_s < gap_min_s) fail("gap range invalid");
    for (auto [name, p] : {std::pair<const char*, double>{"overlap_prob", overlap_prob},
                           {"confuser_prob", confuser_prob},
                           {"occlusion_rate", occlusion_rate},
                           {"blur_rate", blur_rate}})
        if (p < 0.0 || p > 1.0) fail(std::string(name) + " must lie in [0,1]");
}

void CorpusConfig::validate() const {
    scenario.validate();
    if (n_speakers_pool < scenario.n_speakers)
        throw ConfigError("corpus config: speaker pool smaller than per-scenario speakers");
    if (scenarios_train < 0 || scenarios_val < 0 || scenarios_train + scenarios_val < 1)
        throw ConfigError("corpus config: need at least one scenario");
}

EmissionModel EmissionModel::seeded(const ScenarioConfig& cfg, uint64_t corpus_seed) {
    EmissionModel em;
    em.chunk_samples = cfg.sample_rate / 100;
    Rng rv(Rng::mix(corpus_seed, Rng::hash_str("voice_proj")));
    em.voice_projection = Tensor::randn({em.chunk_samples, cfg.voice_dim}, rv,
                                        1.0 / std::sqrt(static_cast<double>(cfg.voice_dim)));
    Rng rf(Rng::mix(corpus_seed, Rng::hash_str("face_proj")));
    em.face_projection = Tensor::randn({cfg.frame_height * cfg.frame_width, cfg.face_dim}, rf,
                                       1.0 / std::sqrt(static_cast<double>(cfg.face_dim)));
    Rng ro(Rng::mix(corpus_seed, Rng::hash_str("occluders")));
    for (int i = 0; i < kOccluderPaletteSize; ++i)
        em.occluders.push_back(
            Tensor::randn({cfg.frame_height, cfg.frame_width}, ro, kOccluderStd));
    return em;
}

const SyntheticSpeaker& Corpus::speaker(int id) const {
    for (auto& s : speakers)
        if (s.id == id) return s;
    throw ShapeError("unknown speaker id " + std::to_string(id));
}

std::vector<const Scenario*> Corpus::split_scenarios(int split) const {
    std::vector<const Scenario*> out;
    for (auto& s : scenarios)
        if (s.split == split) out.push_back(&s);
    return out;
}

const Scenario& Corpus::scenario_by_id(int id) const {
    for (auto& s : scenarios)
        if (s.scenario_id == id) return s;
    throw ShapeError("unknown scenario id " + std::to_string(id));
}

const Track* Corpus::find_track(int track_id) const {
    for (auto& s : scenarios)
        for (auto& t : s.tracks)
            if (t.track_id == track_id) return &t;
    return nullptr;
}

std::vector<SyntheticSpeaker> sample_speakers(int n, int voice_dim, int face_dim, Rng& rng) {
    auto draw_distinct = [&rng](int dim, const std::vector<Tensor>& existing) {
        for (int attempt = 0; attempt < 20000; ++attempt) {
            Tensor v = Tensor::randn({dim}, rng);
            double norm = v.l2_norm();
            if (norm < 1e-9) continue;
            for (auto& x : v.data()) x /= norm;
            bool ok = true;
            for (auto& e : existing)
                if (cosine_similarity(v, e) >= 0.35) {
                    ok = false;
                    break;
                }
            if (ok) return v;
        }
        throw ConfigError("could not sample speaker prints with pairwise cosine < 0.5; "
                          "raise print dims or lower speaker count");
    };
    std::vector<SyntheticSpeaker> out;
    std::vector<Tensor> voices, faces;
    for (int i = 0; i < n; ++i) {
        SyntheticSpeaker sp;
        sp.id = i;
        sp.voiceprint = draw_distinct(voice_dim, voices);
        sp.faceprint = draw_distinct(face_dim, faces);
        voices.push_back(sp.voiceprint);
        faces.push_back(sp.faceprint);
        out.push_back(std::move(sp));
    }
    return out;
}

Scenario generate_scenario(const ScenarioConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(Rng::mix(seed, Rng::hash_str("speakers")));
    const int n_conf = cfg.confuser_prob > 0.0 ? cfg.n_confusers : 0;
    auto speakers = sample_speakers(cfg.n_speakers + n_conf, cfg.voice_dim, cfg.face_dim, rng);
    std::vector<SyntheticSpeaker> tracked(speakers.begin(), speakers.begin() + cfg.n_speakers);
    std::vector<SyntheticSpeaker> confusers(speakers.begin() + cfg.n_speakers, speakers.end());
    EmissionModel em = EmissionModel::seeded(cfg, seed);
    return generate_scenario_impl(cfg, tracked, confusers, em, 0, 0,
                                  Rng::mix(seed, Rng::hash_str("scenario")));
}

Corpus generate_corpus(const CorpusConfig& cfg, uint64_t seed) {
    cfg.validate();
    Corpus corpus;
    corpus.seed = seed;
    corpus.scenario_cfg = cfg.scenario;
    corpus.n_speakers_pool = cfg.n_speakers_pool;
    Rng rng(Rng::mix(seed, Rng::hash_str("speakers")));
    corpus.speakers =
        sample_speakers(cfg.n_speakers_pool, cfg.scenario.voice_dim, cfg.scenario.face_dim, rng);
    EmissionModel em = corpus.emission();

    const int total = cfg.scenarios_train + cfg.scenarios_val;
    for (int i = 0; i < total; ++i) {
        const uint64_t si_seed = Rng::mix(seed, static_cast<uint64_t>(i));
        Rng srng(si_seed);
        auto tracked_idx =
            srng.sample_without_replacement(cfg.n_speakers_pool, cfg.scenario.n_speakers);
        std::vector<SyntheticSpeaker> tracked;
        std::vector<uint8_t> used(cfg.n_speakers_pool, 0);
        for (int t : tracked_idx) {
            tracked.push_back(corpus.speakers[t]);
            used[t] = 1;
        }
        std::vector<SyntheticSpeaker> confusers;
        if (cfg.scenario.confuser_prob > 0.0) {
            std::vector<int> rest;
            for (int s = 0; s < cfg.n_speakers_pool; ++s)
                if (!used[s]) rest.push_back(s);
            const int n_conf = std::min<int>(cfg.scenario.n_confusers,
                                             static_cast<int>(rest.size()));
            for (int c : srng.sample_without_replacement(static_cast<int>(rest.size()), n_conf))
                confusers.push_back(corpus.speakers[rest[c]]);
        }
        corpus.scenarios.push_back(generate_scenario_impl(
            cfg.scenario, tracked, confusers, em, i, i < cfg.scenarios_train ? 0 : 1,
            Rng::mix(si_seed, Rng::hash_str("scenario"))));
    }
    return corpus;
}

int rate_count(double rate, int n) {
    return static_cast<int>(std::nearbyint(rate * n));  // ties to even
}

Track corrupt_video(const Track& track, double occlusion_rate, double blur_rate, uint64_t seed,
                    const std::vector<Tensor>* occluder_palette) {
    if (occlusion_rate < 0 || occlusion_rate > 1 || blur_rate < 0 || blur_rate > 1)
        throw ConfigError("corruption rates must lie in [0,1]");
    Track out = track;
    const int T = track.length();
    if (T == 0) return out;
    const int h = track.height(), w = track.width();
    Rng rng(seed);
    std::vector<Tensor> own_palette;
    if (!occluder_palette) {
        Rng prng(Rng::mix(seed, Rng::hash_str("occluders")));
        for (int i = 0; i < kOccluderPaletteSize; ++i)
            own_palette.push_back(Tensor::randn({h, w}, prng, kOccluderStd));
        occluder_palette = &own_palette;
    }
    auto blur_idx = rng.sample_without_replacement(T, rate_count(blur_rate, T));

    for (int t : blur_idx) {
        Tensor blurred({h, w});
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double s = 0.0;
                int cnt = 0;
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        int ii = i + di, jj = j + dj;
                        if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                        s += out.frames(t, ii, jj);
                        ++cnt;
                    }
                blurred(i, j) = s / cnt;
            }
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out.frames(t, i, j) = blurred(i, j);
        out.corruption_mask[t] = 1;
    }

    // Occlusions land as contiguous bursts; every frame of a burst shows the
    // same occluder image (plus per-frame noise) and none of the face.
    int remaining = rate_count(occlusion_rate, T);
    std::vector<uint8_t> occluded(static_cast<size_t>(T), 0);
    while (remaining > 0) {
        const int len = std::min(remaining,
                                 kOcclusionBurstMin +
                                     rng.uniform_int(kOcclusionBurstMax - kOcclusionBurstMin + 1));
        const int start = rng.uniform_int(T);
        const Tensor& occluder =
            (*occluder_palette)[rng.uniform_int(static_cast<int>(occluder_palette->size()))];
        for (int k = 0; k < len && start + k < T && remaining > 0; ++k) {
            const int t = start + k;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    out.frames(t, i, j) = 0.5 + occluder(i, j) + rng.normal() * kOcclusionNoise;
            out.corruption_mask[static_cast<size_t>(t)] = 1;
            if (!occluded[static_cast<size_t>(t)]) {
                occluded[static_cast<size_t>(t)] = 1;
                --remaining;
            }
        }
    }
    return out;
}

std::vector<double> synthesize_clean_window(const SyntheticSpeaker& speaker,
                                            const EmissionModel& emission, int window_samples,
                                            Rng& rng) {
    Tensor base = speaker_chunk_base(speaker, emission);
    const double freq = rng.uniform(2.0, 4.0);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    std::vector<double> out(static_cast<size_t>(window_samples), 0.0);
    const int n_chunks = window_samples / emission.chunk_samples;
    for (int c = 0; c < n_chunks; ++c) {
        const double amp = envelope_value(freq, phase, (c + 0.5) * kChunkSeconds);
        for (int s = 0; s < emission.chunk_samples; ++s)
            out[static_cast<size_t>(c) * emission.chunk_samples + s] =
                base[static_cast<size_t>(s)] * amp;
    }
    return out;
}

std::vector<double> render_speaker_emission(const Scenario& scenario,
                                            const SyntheticSpeaker& speaker,
                                            const EmissionModel& emission,
                                            const ScenarioConfig& cfg) {
    (void)cfg;
    std::vector<double> out(scenario.mixed_audio.samples.size(), 0.0);
    Tensor base = speaker_chunk_base(speaker, emission);
    add_speaker_emission(out, nullptr, scenario.timeline, speaker.id, base,
                         Rng::mix(scenario.seed, Rng::hash_str("envelope")),
                         emission.chunk_samples);
    return out;
}

Tensor flatten_frames(const Track& track) {
    const int T = track.length();
    const int px = track.height() * track.width();
    Tensor out({T, px});
    for (int t = 0; t < T; ++t)
        for (int p = 0; p < px; ++p)
            out(t, p) = track.frames.data()[static_cast<size_t>(t) * px + p];
    return out;
}

}  // namespace asd
