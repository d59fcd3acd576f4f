#include "asd/corpus_io.hpp"

#include "asd/checkpoint.hpp"
#include "asd/errors.hpp"

namespace asd {

namespace {

constexpr char kMagic[] = "ASDCORP1";
constexpr uint32_t kVersion = 1;

void put_utterances(std::string& out, const std::vector<Utterance>& us) {
    append_le_u32(out, static_cast<uint32_t>(us.size()));
    for (auto& u : us) {
        append_le_u32(out, static_cast<uint32_t>(u.speaker_id));
        append_le_double(out, u.start_s);
        append_le_double(out, u.end_s);
    }
}

std::vector<Utterance> get_utterances(const std::string& in, size_t& pos) {
    const uint32_t n = read_le_u32(in, pos);
    std::vector<Utterance> us(n);
    for (auto& u : us) {
        u.speaker_id = static_cast<int>(read_le_u32(in, pos));
        u.start_s = read_le_double(in, pos);
        u.end_s = read_le_double(in, pos);
    }
    return us;
}

void put_scenario_config(std::string& out, const ScenarioConfig& c) {
    append_le_u32(out, static_cast<uint32_t>(c.n_speakers));
    append_le_u32(out, static_cast<uint32_t>(c.n_confusers));
    append_le_double(out, c.duration_s);
    append_le_u32(out, static_cast<uint32_t>(c.fps));
    append_le_u32(out, static_cast<uint32_t>(c.sample_rate));
    append_le_u32(out, static_cast<uint32_t>(c.frame_height));
    append_le_u32(out, static_cast<uint32_t>(c.frame_width));
    append_le_u32(out, static_cast<uint32_t>(c.voice_dim));
    append_le_u32(out, static_cast<uint32_t>(c.face_dim));
    append_le_double(out, c.utterance_min_s);
    append_le_double(out, c.utterance_max_s);
    append_le_double(out, c.gap_min_s);
    append_le_double(out, c.gap_max_s);
    append_le_double(out, c.overlap_prob);
    append_le_double(out, c.confuser_prob);
    append_le_double(out, c.occlusion_rate);
    append_le_double(out, c.blur_rate);
    append_le_double(out, c.snr_db);
}

ScenarioConfig get_scenario_config(const std::string& in, size_t& pos) {
    ScenarioConfig c;
    c.n_speakers = static_cast<int>(read_le_u32(in, pos));
    c.n_confusers = static_cast<int>(read_le_u32(in, pos));
    c.duration_s = read_le_double(in, pos);
    c.fps = static_cast<int>(read_le_u32(in, pos));
    c.sample_rate = static_cast<int>(read_le_u32(in, pos));
    c.frame_height = static_cast<int>(read_le_u32(in, pos));
    c.frame_width = static_cast<int>(read_le_u32(in, pos));
    c.voice_dim = static_cast<int>(read_le_u32(in, pos));
    c.face_dim = static_cast<int>(read_le_u32(in, pos));
    c.utterance_min_s = read_le_double(in, pos);
    c.utterance_max_s = read_le_double(in, pos);
    c.gap_min_s = read_le_double(in, pos);
    c.gap_max_s = read_le_double(in, pos);
    c.overlap_prob = read_le_double(in, pos);
    c.confuser_prob = read_le_double(in, pos);
    c.occlusion_rate = read_le_double(in, pos);
    c.blur_rate = read_le_double(in, pos);
    c.snr_db = read_le_double(in, pos);
    return c;
}

}  // namespace

std::string serialize_corpus(const Corpus& corpus) {
    std::string body;
    append_le_u32(body, kVersion);
    append_le_u64(body, corpus.seed);
    put_scenario_config(body, corpus.scenario_cfg);
    append_le_u32(body, static_cast<uint32_t>(corpus.n_speakers_pool));

    append_le_u32(body, static_cast<uint32_t>(corpus.speakers.size()));
    for (auto& sp : corpus.speakers) {
        append_le_u32(body, static_cast<uint32_t>(sp.id));
        append_le_u32(body, static_cast<uint32_t>(sp.voiceprint.numel()));
        for (double v : sp.voiceprint.data()) append_le_double(body, v);
        append_le_u32(body, static_cast<uint32_t>(sp.faceprint.numel()));
        for (double v : sp.faceprint.data()) append_le_double(body, v);
    }

    append_le_u32(body, static_cast<uint32_t>(corpus.scenarios.size()));
    for (auto& sc : corpus.scenarios) {
        append_le_u32(body, static_cast<uint32_t>(sc.scenario_id));
        append_le_u32(body, static_cast<uint32_t>(sc.split));
        append_le_u64(body, sc.seed);
        append_le_u32(body, static_cast<uint32_t>(sc.speaker_ids.size()));
        for (int id : sc.speaker_ids) append_le_u32(body, static_cast<uint32_t>(id));
        put_utterances(body, sc.timeline);
        put_utterances(body, sc.diarised);
        append_le_u32(body, static_cast<uint32_t>(sc.mixed_audio.sample_rate));
        append_le_u64(body, sc.mixed_audio.samples.size());
        for (double v : sc.mixed_audio.samples) append_le_double(body, v);
        append_le_u32(body, static_cast<uint32_t>(sc.tracks.size()));
        for (auto& tr : sc.tracks) {
            append_le_u32(body, static_cast<uint32_t>(tr.track_id));
            append_le_u32(body, static_cast<uint32_t>(tr.speaker_id));
            append_le_u32(body, static_cast<uint32_t>(tr.fps));
            append_le_u32(body, static_cast<uint32_t>(tr.length()));
            append_le_u32(body, static_cast<uint32_t>(tr.height()));
            append_le_u32(body, static_cast<uint32_t>(tr.width()));
            for (double v : tr.frames.data()) append_le_double(body, v);
            for (uint8_t b : tr.frame_labels) body.push_back(static_cast<char>(b));
            for (uint8_t b : tr.corruption_mask) body.push_back(static_cast<char>(b));
        }
    }

    std::string out(kMagic);
    out += body;
    append_le_u64(out, fnv1a64(body));
    return out;
}

Corpus deserialize_corpus(const std::string& bytes) {
    const size_t magic_len = sizeof(kMagic) - 1;
    if (bytes.size() < magic_len + 8 || bytes.compare(0, magic_len, kMagic) != 0)
        throw IoError("corpus file: bad magic");
    const std::string body = bytes.substr(magic_len, bytes.size() - magic_len - 8);
    size_t cpos = bytes.size() - 8;
    const uint64_t stored = read_le_u64(bytes, cpos);
    if (fnv1a64(body) != stored) throw IoError("corpus file: checksum failure");

    size_t pos = 0;
    const uint32_t version = read_le_u32(body, pos);
    if (version != kVersion)
        throw IoError("corpus file: unsupported version " + std::to_string(version));

    Corpus corpus;
    corpus.seed = read_le_u64(body, pos);
    corpus.scenario_cfg = get_scenario_config(body, pos);
    corpus.n_speakers_pool = static_cast<int>(read_le_u32(body, pos));

    const uint32_t n_speakers = read_le_u32(body, pos);
    for (uint32_t i = 0; i < n_speakers; ++i) {
        SyntheticSpeaker sp;
        sp.id = static_cast<int>(read_le_u32(body, pos));
        const uint32_t vd = read_le_u32(body, pos);
        sp.voiceprint = Tensor({static_cast<int>(vd)});
        for (uint32_t j = 0; j < vd; ++j) sp.voiceprint[j] = read_le_double(body, pos);
        const uint32_t fd = read_le_u32(body, pos);
        sp.faceprint = Tensor({static_cast<int>(fd)});
        for (uint32_t j = 0; j < fd; ++j) sp.faceprint[j] = read_le_double(body, pos);
        corpus.speakers.push_back(std::move(sp));
    }

    const uint32_t n_scenarios = read_le_u32(body, pos);
    for (uint32_t i = 0; i < n_scenarios; ++i) {
        Scenario sc;
        sc.scenario_id = static_cast<int>(read_le_u32(body, pos));
        sc.split = static_cast<int>(read_le_u32(body, pos));
        sc.seed = read_le_u64(body, pos);
        const uint32_t n_ids = read_le_u32(body, pos);
        for (uint32_t j = 0; j < n_ids; ++j)
            sc.speaker_ids.push_back(static_cast<int>(read_le_u32(body, pos)));
        sc.timeline = get_utterances(body, pos);
        sc.diarised = get_utterances(body, pos);
        sc.mixed_audio.sample_rate = static_cast<int>(read_le_u32(body, pos));
        const uint64_t n_samples = read_le_u64(body, pos);
        sc.mixed_audio.samples.resize(n_samples);
        for (uint64_t j = 0; j < n_samples; ++j)
            sc.mixed_audio.samples[j] = read_le_double(body, pos);
        const uint32_t n_tracks = read_le_u32(body, pos);
        for (uint32_t j = 0; j < n_tracks; ++j) {
            Track tr;
            tr.track_id = static_cast<int>(read_le_u32(body, pos));
            tr.speaker_id = static_cast<int>(read_le_u32(body, pos));
            tr.fps = static_cast<int>(read_le_u32(body, pos));
            const int T = static_cast<int>(read_le_u32(body, pos));
            const int h = static_cast<int>(read_le_u32(body, pos));
            const int w = static_cast<int>(read_le_u32(body, pos));
            tr.frames = Tensor({T, h, w});
            for (size_t k = 0; k < tr.frames.numel(); ++k)
                tr.frames[k] = read_le_double(body, pos);
            tr.frame_labels.resize(T);
            for (int k = 0; k < T; ++k) {
                if (pos >= body.size()) throw IoError("corpus file: truncated labels");
                tr.frame_labels[k] = static_cast<uint8_t>(body[pos++]);
            }
            tr.corruption_mask.resize(T);
            for (int k = 0; k < T; ++k) {
                if (pos >= body.size()) throw IoError("corpus file: truncated mask");
                tr.corruption_mask[k] = static_cast<uint8_t>(body[pos++]);
            }
            sc.tracks.push_back(std::move(tr));
        }
        corpus.scenarios.push_back(std::move(sc));
    }
    if (pos != body.size()) throw IoError("corpus file: trailing bytes after last scenario");
    return corpus;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
    write_file(path, serialize_corpus(corpus));
}

Corpus read_corpus(const std::string& path) { return deserialize_corpus(read_file(path)); }

}  // namespace asd
