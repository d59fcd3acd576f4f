// scanasd: corpus generation, training, enrollment, evaluation, and the
// full ablation recipe, driven by one config file and one seed.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asd/checkpoint.hpp"
#include "asd/config.hpp"
#include "asd/corpus_io.hpp"
#include "asd/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace asd;

struct GlobalArgs {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = "out";
};

ExperimentConfig load_or_default(const GlobalArgs& g) {
    ExperimentConfig cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);
    if (g.seed_set) cfg.seed = g.seed;
    return cfg;
}

void require_artifact(const std::string& path, const std::string& what) {
    if (!fs::exists(path))
        throw IoError("missing " + what + ": '" + path + "' (run the producing stage first)");
}

std::string corpus_path(const GlobalArgs& g) { return g.out_dir + "/corpus.bin"; }

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    return out;
}

int cmd_gen(const GlobalArgs& g) {
    ExperimentConfig cfg = load_or_default(g);
    fs::create_directories(g.out_dir);
    Corpus corpus = generate_corpus(cfg.corpus, cfg.seed);
    write_corpus(corpus_path(g), corpus);
    std::cout << "wrote " << corpus_path(g) << " (" << corpus.scenarios.size() << " scenarios, "
              << corpus.speakers.size() << " speakers, config " << config_hash(cfg) << ")\n";
    return 0;
}

int cmd_train_embedder(const GlobalArgs& g) {
    ExperimentConfig cfg = load_or_default(g);
    require_artifact(corpus_path(g), "corpus");
    Corpus corpus = read_corpus(corpus_path(g));
    EmbedderTrainReport report;
    SpeakerEmbedder embedder = train_embedder(
        corpus, cfg.embedder, Rng::mix(cfg.seed, Rng::hash_str("embedder")), &report);
    save_embedder(g.out_dir + "/embedder.ckpt", embedder);
    std::cout << "embedder trained: heldout accuracy " << report.heldout_accuracy << ", loss "
              << report.initial_loss << " -> " << report.final_loss << "\n";
    std::cout << "wrote " << g.out_dir << "/embedder.ckpt (frozen)\n";
    return 0;
}

int cmd_train_face(const GlobalArgs& g) {
    ExperimentConfig cfg = load_or_default(g);
    require_artifact(corpus_path(g), "corpus");
    Corpus corpus = read_corpus(corpus_path(g));
    const int pixels = corpus.scenario_cfg.frame_height * corpus.scenario_cfg.frame_width;
    FaceModel model(pixels, cfg.face, Rng::mix(cfg.seed, Rng::hash_str("face")));
    VbfrTrainReport report =
        vbfr_train(model, corpus, cfg.face_train, Rng::mix(cfg.seed, Rng::hash_str("vbfr")));
    save_face_model(g.out_dir + "/face_model.ckpt", model);
    std::cout << "face model trained: heldout frame accuracy " << report.heldout_frame_accuracy
              << ", loss " << report.initial_loss << " -> " << report.final_loss << "\n";
    std::cout << "wrote " << g.out_dir << "/face_model.ckpt\n";
    return 0;
}

int cmd_enroll(const GlobalArgs& g, bool oracle, int split) {
    ExperimentConfig cfg = load_or_default(g);
    require_artifact(corpus_path(g), "corpus");
    Corpus corpus = read_corpus(corpus_path(g));
    const std::string split_name = split == 0 ? "train" : "val";
    IdentitySpeechLibrary lib;
    std::string path;
    if (oracle) {
        lib = build_library_oracle(corpus, split, cfg.library_min_segment_s);
        path = g.out_dir + "/library_oracle_" + split_name + ".txt";
    } else {
        require_artifact(g.out_dir + "/face_model.ckpt", "face model checkpoint");
        FaceModel model = load_face_model(g.out_dir + "/face_model.ckpt");
        lib = enroll_library(model, corpus, split, cfg.library_threshold,
                             cfg.library_min_segment_s, cfg.aggregation);
        path = g.out_dir + "/library_hyp_" + split_name + ".txt";
    }
    save_library(path, lib);
    int speechless = 0;
    for (auto& e : lib.entries) speechless += e.speechless ? 1 : 0;
    std::cout << "enrolled " << lib.entries.size() << " identities (" << speechless
              << " speechless) -> " << path << "\n";
    return 0;
}

int cmd_train_asd(const GlobalArgs& g, const std::string& scan_mode_flag,
                  const std::string& library_flag) {
    ExperimentConfig cfg = load_or_default(g);
    if (!scan_mode_flag.empty()) cfg.asd.scan_mode = scan_mode_from_string(scan_mode_flag);
    require_artifact(corpus_path(g), "corpus");
    Corpus corpus = read_corpus(corpus_path(g));
    const int pixels = corpus.scenario_cfg.frame_height * corpus.scenario_cfg.frame_width;
    const int audio_dim = static_cast<int>(
        std::llround(cfg.asd.window_seconds * corpus.scenario_cfg.sample_rate) /
        cfg.asd.decimation);

    AsdModel model(pixels, audio_dim, cfg.asd, Rng::mix(cfg.seed, Rng::hash_str("asd")));
    SpeakerEmbedder embedder;
    IdentitySpeechLibrary library;
    const SpeakerEmbedder* emb = nullptr;
    const IdentitySpeechLibrary* lib = nullptr;
    if (cfg.asd.scan_mode != ScanMode::Off) {
        require_artifact(g.out_dir + "/embedder.ckpt", "embedder checkpoint");
        embedder = load_embedder(g.out_dir + "/embedder.ckpt");
        const std::string lib_path =
            library_flag.empty() ? g.out_dir + "/library_hyp_train.txt" : library_flag;
        require_artifact(lib_path, "identity-speech library");
        library = load_library(lib_path);
        emb = &embedder;
        lib = &library;
    }
    AsdTrainReport report = train_asd(model, corpus, emb, lib, cfg.asd_train,
                                      Rng::mix(cfg.seed, Rng::hash_str("asd_train")));
    const std::string path = g.out_dir + "/asd_" + to_string(cfg.asd.scan_mode) + ".ckpt";
    save_asd_model(path, model);
    std::cout << "asd model trained (" << to_string(cfg.asd.scan_mode) << "): loss "
              << report.initial_loss << " -> " << report.final_loss << ", "
              << report.usable_tracks << " tracks (" << report.skipped_tracks << " skipped)\n";
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_eval(const GlobalArgs& g, const std::string& model_flag,
             const std::string& library_flag) {
    ExperimentConfig cfg = load_or_default(g);
    require_artifact(corpus_path(g), "corpus");
    Corpus corpus = read_corpus(corpus_path(g));
    const std::string model_path =
        model_flag.empty() ? g.out_dir + "/asd_" + to_string(cfg.asd.scan_mode) + ".ckpt"
                           : model_flag;
    require_artifact(model_path, "ASD model checkpoint");
    AsdModel model = load_asd_model(model_path);

    SpeakerEmbedder embedder;
    IdentitySpeechLibrary library;
    const SpeakerEmbedder* emb = nullptr;
    const IdentitySpeechLibrary* lib = nullptr;
    if (model.config().scan_mode != ScanMode::Off) {
        require_artifact(g.out_dir + "/embedder.ckpt", "embedder checkpoint");
        embedder = load_embedder(g.out_dir + "/embedder.ckpt");
        const std::string lib_path =
            library_flag.empty() ? g.out_dir + "/library_hyp_val.txt" : library_flag;
        require_artifact(lib_path, "identity-speech library");
        library = load_library(lib_path);
        emb = &embedder;
        lib = &library;
    }
    EvalResult result =
        evaluate_asd(model, corpus, 1, emb, lib, cfg.asd_train.max_reference_segments,
                     Rng::mix(cfg.seed, Rng::hash_str("eval")),
                     to_string(model.config().scan_mode));
    write_predictions(g.out_dir + "/predictions.txt", result.predictions, config_hash(cfg));
    std::cout << "AP (=mAP, single class) pooled: " << result.pooled_ap
              << "  mean-track: " << result.mean_track_ap << "  over "
              << result.predictions.size() << " tracks";
    if (result.fallback_tracks) std::cout << " (" << result.fallback_tracks << " fallback)";
    std::cout << "\nwrote " << g.out_dir << "/predictions.txt\n";
    return 0;
}

int cmd_ablate(const GlobalArgs& g, const std::string& seeds_csv, const std::string& arms_csv,
               const std::string& lambda_csv) {
    ExperimentConfig cfg = load_or_default(g);
    std::vector<uint64_t> seeds;
    for (auto& s : split_csv(seeds_csv)) seeds.push_back(std::stoull(s));
    if (seeds.empty()) seeds.push_back(cfg.seed);
    const std::vector<std::string> arm_names = split_csv(arms_csv);

    auto run_once = [&](const ExperimentConfig& run_cfg, const std::string& out_dir) {
        AblationOptions options;
        options.arms = arm_names.empty() ? default_arms(run_cfg.asd.scan_mode)
                                         : arms_from_names(arm_names, run_cfg.asd.scan_mode);
        options.out_dir = out_dir;
        ExperimentReport report = run_ablation(run_cfg, seeds, options);
        std::cout << render_report_text(report);
    };

    if (lambda_csv.empty()) {
        run_once(cfg, g.out_dir);
    } else {
        for (auto& ls : split_csv(lambda_csv)) {
            ExperimentConfig swept = cfg;
            swept.asd_train.lambda_aux = std::stod(ls);
            std::cout << "=== lambda_aux = " << ls << " ===\n";
            run_once(swept, g.out_dir + "/lambda_" + ls);
        }
    }
    return 0;
}

int cmd_report(const GlobalArgs& g) {
    const std::string path = g.out_dir + "/report.txt";
    require_artifact(path, "ablation report (run `scanasd ablate` first)");
    std::cout << read_file(path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speaker-embedding-informed active speaker detection workbench"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "experiment config file");
    auto* seed_opt = app.add_option("--seed", g.seed, "master seed (overrides config)");
    app.add_option("--out", g.out_dir, "artifact directory (default: out)");

    auto* gen = app.add_subcommand("gen", "generate the synthetic corpus");
    auto* temb = app.add_subcommand("train-embedder", "train and freeze the speaker embedder");
    auto* tface = app.add_subcommand("train-face", "train the video face model");

    auto* enroll = app.add_subcommand("enroll", "build an identity-speech library");
    bool enroll_oracle = false;
    std::string enroll_split = "val";
    enroll->add_flag("--oracle", enroll_oracle, "use ground-truth identities");
    enroll->add_option("--split", enroll_split, "train|val (default val)");

    auto* tasd = app.add_subcommand("train-asd", "train an ASD model");
    std::string scan_mode_flag, library_flag;
    tasd->add_option("--scan", scan_mode_flag, "off|aux-only|aux+fuse|tsfuse");
    tasd->add_option("--library", library_flag, "library file (default library_hyp_train.txt)");

    auto* ev = app.add_subcommand("eval", "evaluate a model on the validation fold");
    std::string eval_model_flag, eval_library_flag;
    ev->add_option("--model", eval_model_flag, "ASD checkpoint path");
    ev->add_option("--library", eval_library_flag, "library file (default library_hyp_val.txt)");

    auto* ablate = app.add_subcommand("ablate", "run the full multi-arm ablation");
    std::string seeds_csv, arms_csv, lambda_csv;
    ablate->add_option("--seeds", seeds_csv, "comma-separated seeds (default: config seed)");
    ablate->add_option("--arms", arms_csv, "subset of baseline,scan_hyp,scan_oracle");
    ablate->add_option("--sweep-lambda", lambda_csv, "comma-separated lambda_aux values");

    auto* rep = app.add_subcommand("report", "print the last ablation report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }
    g.seed_set = seed_opt->count() > 0;

    try {
        if (gen->parsed()) return cmd_gen(g);
        if (temb->parsed()) return cmd_train_embedder(g);
        if (tface->parsed()) return cmd_train_face(g);
        if (enroll->parsed()) {
            if (enroll_split != "train" && enroll_split != "val") {
                std::cerr << "--split must be train or val\n";
                return 1;
            }
            return cmd_enroll(g, enroll_oracle, enroll_split == "train" ? 0 : 1);
        }
        if (tasd->parsed()) return cmd_train_asd(g, scan_mode_flag, library_flag);
        if (ev->parsed()) return cmd_eval(g, eval_model_flag, eval_library_flag);
        if (ablate->parsed()) return cmd_ablate(g, seeds_csv, arms_csv, lambda_csv);
        if (rep->parsed()) return cmd_report(g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
