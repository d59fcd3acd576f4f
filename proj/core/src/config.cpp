#include "asd/config.hpp"

#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "asd/checkpoint.hpp"
#include "asd/errors.hpp"

namespace asd {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Binder {
    std::map<std::string, std::function<void(const std::string&)>> setters;
    std::map<std::string, std::function<std::string()>> getters;
    std::vector<std::string> order;

    void bind_int(const std::string& key, int* v) {
        setters[key] = [v, key](const std::string& s) {
            try {
                *v = std::stoi(s);
            } catch (...) {
                throw ConfigError("bad integer for " + key + ": '" + s + "'");
            }
        };
        getters[key] = [v] { return std::to_string(*v); };
        order.push_back(key);
    }
    void bind_double(const std::string& key, double* v) {
        setters[key] = [v, key](const std::string& s) {
            try {
                size_t used = 0;
                *v = std::stod(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
            } catch (...) {
                throw ConfigError("bad number for " + key + ": '" + s + "'");
            }
        };
        getters[key] = [v] { return fmt_double(*v); };
        order.push_back(key);
    }
    void bind_u64(const std::string& key, uint64_t* v) {
        setters[key] = [v, key](const std::string& s) {
            try {
                *v = std::stoull(s);
            } catch (...) {
                throw ConfigError("bad integer for " + key + ": '" + s + "'");
            }
        };
        getters[key] = [v] { return std::to_string(*v); };
        order.push_back(key);
    }
    void bind_str(const std::string& key, std::function<void(const std::string&)> set,
                  std::function<std::string()> get) {
        setters[key] = std::move(set);
        getters[key] = std::move(get);
        order.push_back(key);
    }
};

std::map<std::string, Binder> make_binders(ExperimentConfig& c) {
    std::map<std::string, Binder> sections;

    Binder& corpus = sections["corpus"];
    corpus.bind_int("n_speakers_pool", &c.corpus.n_speakers_pool);
    corpus.bind_int("scenarios_train", &c.corpus.scenarios_train);
    corpus.bind_int("scenarios_val", &c.corpus.scenarios_val);
    corpus.bind_int("n_speakers", &c.corpus.scenario.n_speakers);
    corpus.bind_int("n_confusers", &c.corpus.scenario.n_confusers);
    corpus.bind_double("duration_s", &c.corpus.scenario.duration_s);
    corpus.bind_int("fps", &c.corpus.scenario.fps);
    corpus.bind_int("sample_rate", &c.corpus.scenario.sample_rate);
    corpus.bind_int("frame_height", &c.corpus.scenario.frame_height);
    corpus.bind_int("frame_width", &c.corpus.scenario.frame_width);
    corpus.bind_int("voice_dim", &c.corpus.scenario.voice_dim);
    corpus.bind_int("face_dim", &c.corpus.scenario.face_dim);
    corpus.bind_double("utterance_min_s", &c.corpus.scenario.utterance_min_s);
    corpus.bind_double("utterance_max_s", &c.corpus.scenario.utterance_max_s);
    corpus.bind_double("gap_min_s", &c.corpus.scenario.gap_min_s);
    corpus.bind_double("gap_max_s", &c.corpus.scenario.gap_max_s);
    corpus.bind_double("overlap_prob", &c.corpus.scenario.overlap_prob);
    corpus.bind_double("confuser_prob", &c.corpus.scenario.confuser_prob);
    corpus.bind_double("occlusion_rate", &c.corpus.scenario.occlusion_rate);
    corpus.bind_double("blur_rate", &c.corpus.scenario.blur_rate);
    corpus.bind_double("snr_db", &c.corpus.scenario.snr_db);

    Binder& emb = sections["embedder"];
    emb.bind_int("d_phi", &c.embedder.embed_dim);
    emb.bind_int("lift_dim", &c.embedder.lift_dim);
    emb.bind_double("window_seconds", &c.embedder.window_seconds);
    emb.bind_int("steps", &c.embedder.steps);
    emb.bind_int("batch", &c.embedder.batch);
    emb.bind_double("lr", &c.embedder.lr);
    emb.bind_double("noise_snr_lo_db", &c.embedder.noise_snr_lo_db);
    emb.bind_double("noise_snr_hi_db", &c.embedder.noise_snr_hi_db);

    Binder& net = sections["asd"];
    net.bind_int("encoder_dim", &c.asd.encoder_dim);
    net.bind_int("decoder_dim", &c.asd.decoder_dim);
    net.bind_str(
        "fusion", [&c](const std::string& s) { c.asd.fusion = fusion_mode_from_string(s); },
        [&c] { return to_string(c.asd.fusion); });
    net.bind_str(
        "scan_mode", [&c](const std::string& s) { c.asd.scan_mode = scan_mode_from_string(s); },
        [&c] { return to_string(c.asd.scan_mode); });
    net.bind_int("scan_feature_dim", &c.asd.scan_feature_dim);
    net.bind_double("window_seconds", &c.asd.window_seconds);
    net.bind_int("decimation", &c.asd.decimation);
    net.bind_int("steps", &c.asd_train.steps);
    net.bind_int("batch", &c.asd_train.batch);
    net.bind_double("lr", &c.asd_train.lr);
    net.bind_double("lambda_aux", &c.asd_train.lambda_aux);
    net.bind_int("max_reference_segments", &c.asd_train.max_reference_segments);
    net.bind_double("negative_sample_prob", &c.asd_train.negative_sample_prob);
    net.bind_double("flip_prob", &c.asd_train.flip_prob);
    net.bind_double("crop_prob", &c.asd_train.crop_prob);
    net.bind_double("rotate_prob", &c.asd_train.rotate_prob);

    Binder& face = sections["facelib"];
    face.bind_int("frame_dim", &c.face.frame_dim);
    face.bind_int("model_dim", &c.face.model_dim);  // paper-scale value is 1024
    face.bind_int("layers", &c.face.layers);
    face.bind_int("heads", &c.face.heads);
    face.bind_int("ff_dim", &c.face.ff_dim);
    face.bind_double("impostor_rate", &c.face_train.impostor_rate);
    face.bind_int("steps", &c.face_train.steps);
    face.bind_int("batch", &c.face_train.batch);
    face.bind_double("lr", &c.face_train.lr);
    face.bind_int("crop_frames", &c.face_train.crop_frames);

    Binder& lib = sections["library"];
    lib.bind_double("threshold", &c.library_threshold);
    lib.bind_double("min_segment_s", &c.library_min_segment_s);
    lib.bind_str(
        "aggregation",
        [&c](const std::string& s) {
            if (s == "centroid") c.aggregation = AggregationMode::Centroid;
            else if (s == "union-find") c.aggregation = AggregationMode::UnionFind;
            else throw ConfigError("unknown aggregation '" + s + "'");
        },
        [&c] {
            return c.aggregation == AggregationMode::Centroid ? "centroid" : "union-find";
        });

    Binder& train = sections["train"];
    train.bind_u64("seed", &c.seed);

    Binder& eval = sections["eval"];
    eval.bind_int("histogram_bins", &c.histogram_bins);

    return sections;
}

}  // namespace

void ExperimentConfig::validate() const {
    corpus.validate();
    if (embedder.embed_dim != asd.d_phi)
        throw ConfigError("embedder d_phi (" + std::to_string(embedder.embed_dim) +
                          ") must match asd d_phi (" + std::to_string(asd.d_phi) + ")");
    if (library_threshold <= -1.0 || library_threshold > 1.0)
        throw ConfigError("library threshold must lie in (-1, 1]");
    if (library_min_segment_s <= 0) throw ConfigError("min_segment_s must be > 0");
    if (histogram_bins < 1) throw ConfigError("histogram_bins must be >= 1");
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    auto sections = make_binders(cfg);
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            if (!sections.count(section))
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
        auto& binder = sections.at(section);
        auto it = binder.setters.find(key);
        if (it == binder.setters.end())
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key +
                              "' in section [" + section + "]");
        it->second(value);
    }
    // keep the single d_phi consistent between the embedder and SCAN
    cfg.asd.d_phi = cfg.embedder.embed_dim;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return parse_config(read_file(path));
}

std::string serialize_config(const ExperimentConfig& cfg) {
    // binders mutate nothing when only getters run; const_cast keeps one binder table
    auto sections = make_binders(const_cast<ExperimentConfig&>(cfg));
    std::ostringstream out;
    for (auto& [name, binder] : sections) {
        out << "[" << name << "]\n";
        for (auto& key : binder.order) out << key << " = " << binder.getters.at(key)() << "\n";
        out << "\n";
    }
    return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
    uint64_t v = fnv1a64(serialize_config(cfg));
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

}  // namespace asd
