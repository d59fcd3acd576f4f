#include "asd/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "asd/checkpoint.hpp"
#include "asd/errors.hpp"

namespace asd {

namespace {

using json = nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string params_digest(const ParameterStore& params) {
    std::string bytes;
    for (auto& [name, t] : params) {
        bytes += name;
        for (double v : t.data()) append_le_double(bytes, v);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

int audio_feature_dim(const ExperimentConfig& cfg) {
    const long long ws =
        std::llround(cfg.asd.window_seconds * cfg.corpus.scenario.sample_rate);
    return static_cast<int>(ws / cfg.asd.decimation);
}

double eer_probe(const SpeakerEmbedder& embedder, const Corpus& corpus, uint64_t seed) {
    const EmissionModel em = corpus.emission();
    const int ws = corpus.scenario_cfg.sample_rate;  // 1 s windows
    Rng rng(Rng::mix(seed, Rng::hash_str("eer_probe")));
    std::vector<std::vector<std::vector<double>>> windows(corpus.speakers.size());
    for (size_t s = 0; s < corpus.speakers.size(); ++s)
        for (int i = 0; i < 3; ++i)
            windows[s].push_back(synthesize_clean_window(corpus.speakers[s], em, ws, rng));
    std::vector<TrialPair> trials;
    for (size_t s = 0; s < windows.size(); ++s)
        for (size_t i = 0; i < windows[s].size(); ++i)
            for (size_t j = i + 1; j < windows[s].size(); ++j)
                trials.push_back({windows[s][i], windows[s][j], true});
    for (size_t a = 0; a < windows.size(); ++a)
        for (size_t b = a + 1; b < windows.size(); ++b)
            trials.push_back({windows[a][0], windows[b][0], false});
    return verification_eer(embedder, trials);
}

struct LibrarySet {
    IdentitySpeechLibrary hyp_train, hyp_val, oracle_train, oracle_val;
};

}  // namespace

std::vector<ArmSpec> default_arms(ScanMode scan_mode) {
    const ScanMode mode = scan_mode == ScanMode::Off ? ScanMode::AuxFuse : scan_mode;
    return {{"baseline", ScanMode::Off, false},
            {"scan_hyp", mode, false},
            {"scan_oracle", mode, true}};
}

std::vector<ArmSpec> arms_from_names(const std::vector<std::string>& names, ScanMode scan_mode) {
    std::vector<ArmSpec> all = default_arms(scan_mode);
    std::vector<ArmSpec> out;
    for (auto& n : names) {
        auto it = std::find_if(all.begin(), all.end(), [&](auto& a) { return a.name == n; });
        if (it == all.end())
            throw ConfigError("unknown arm '" + n +
                              "' (expected baseline|scan_hyp|scan_oracle)");
        out.push_back(*it);
    }
    if (out.empty()) throw ConfigError("no arms selected");
    return out;
}

IdentitySpeechLibrary enroll_library(const FaceModel& model, const Corpus& corpus, int split,
                                     double threshold, double min_segment_s,
                                     AggregationMode mode) {
    std::vector<TrackEmbedding> embeddings;
    for (auto& sc : corpus.scenarios) {
        if (sc.split != split) continue;
        for (auto& tr : sc.tracks)
            embeddings.push_back({tr.track_id, model.identity_embedding(tr)});
    }
    std::sort(embeddings.begin(), embeddings.end(),
              [](auto& a, auto& b) { return a.track_id < b.track_id; });
    IdentityClusters clusters = aggregate_identities(embeddings, threshold, mode);
    return build_library(clusters, corpus, min_segment_s, threshold);
}

EvalResult evaluate_asd(const AsdModel& model, const Corpus& corpus, int split,
                        const SpeakerEmbedder* embedder, const IdentitySpeechLibrary* library,
                        int max_reference_segments, uint64_t seed, const std::string& arm_name) {
    const bool wants_reference = model.config().scan_mode != ScanMode::Off;
    if (wants_reference && (!embedder || !embedder->frozen()))
        throw ConfigError("evaluate_asd: SCAN model needs a frozen embedder");

    EvalResult result;
    result.arm = arm_name;
    ScoredFrameSet pooled;
    for (auto& sc : corpus.scenarios) {
        if (sc.split != split) continue;
        Tensor queries;
        bool have_queries = false;
        for (auto& tr : sc.tracks) {
            const Tensor* q = nullptr;
            Tensor refs;
            const Tensor* refs_ptr = nullptr;
            if (wants_reference) {
                if (!have_queries) {
                    queries = scenario_scan_queries(*embedder, sc, tr.fps, tr.length(),
                                                    model.config().window_seconds);
                    have_queries = true;
                }
                q = &queries;
                const IdentityEntry* entry =
                    library ? library->usable_by_track(tr.track_id) : nullptr;
                if (entry) {
                    Rng rng(Rng::mix(seed, static_cast<uint64_t>(tr.track_id)));
                    ReferenceSpeech sampled = sample_reference(
                        *library, entry->identity_id, rng, max_reference_segments, corpus);
                    refs = embed_reference(*embedder, sampled);
                    refs_ptr = &refs;
                } else {
                    ++result.fallback_tracks;  // baseline-mode forward
                }
            }
            FramePredictions pred = asd_forward(model, tr, sc.mixed_audio, q, refs_ptr);
            bool any_positive = false;
            ScoredFrameSet track_frames;
            for (size_t t = 0; t < pred.scores.size(); ++t) {
                const bool label = pred.labels[t] != 0;
                any_positive |= label;
                pooled.push_back({pred.scores[t], label});
                track_frames.push_back({pred.scores[t], label});
            }
            if (any_positive)
                result.track_ap.push_back({tr.track_id, average_precision(track_frames)});
            result.predictions.push_back(std::move(pred));
        }
    }
    result.pooled_ap = average_precision(pooled);
    double sum = 0.0;
    for (auto& [id, ap] : result.track_ap) sum += ap;
    result.mean_track_ap =
        result.track_ap.empty() ? 0.0 : sum / static_cast<double>(result.track_ap.size());
    return result;
}

bool libraries_equivalent(const IdentitySpeechLibrary& a, const IdentitySpeechLibrary& b) {
    struct Canon {
        std::vector<int> members;
        std::vector<std::tuple<int, double, double>> segments;
        bool operator<(const Canon& o) const {
            return std::tie(members, segments) < std::tie(o.members, o.segments);
        }
        bool operator==(const Canon& o) const {
            return members == o.members && segments == o.segments;
        }
    };
    auto canon = [](const IdentitySpeechLibrary& lib) {
        std::vector<Canon> out;
        for (auto& e : lib.entries) {
            Canon c;
            c.members = e.member_tracks;
            std::sort(c.members.begin(), c.members.end());
            for (auto& s : e.segments) c.segments.push_back({s.scenario_id, s.start_s, s.end_s});
            std::sort(c.segments.begin(), c.segments.end());
            out.push_back(std::move(c));
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    return canon(a) == canon(b);
}

namespace {

struct SeedArtifacts {
    std::map<std::string, AsdModel> models;
    LibrarySet libraries;
    Corpus corpus;
    SpeakerEmbedder embedder;
    FaceModel face;
};

Diagnostics compute_diagnostics(const ExperimentConfig& cfg, uint64_t seed,
                                const SeedArtifacts& art, const AsdModel* baseline,
                                const AsdModel* scan_model,
                                const IdentitySpeechLibrary* scan_library) {
    Diagnostics diag;

    // Library quality on the validation fold: temporal-context embeddings
    // against plain per-frame means, ground-truth identities as labels.
    std::vector<Tensor> temporal, framewise;
    std::vector<int> labels;
    for (auto& sc : art.corpus.scenarios) {
        if (sc.split != 1) continue;
        for (auto& tr : sc.tracks) {
            temporal.push_back(art.face.identity_embedding(tr));
            framewise.push_back(art.face.framewise_identity_embedding(tr));
            labels.push_back(tr.speaker_id);
        }
    }
    {
        std::vector<int> unique_labels = labels;
        std::sort(unique_labels.begin(), unique_labels.end());
        unique_labels.erase(std::unique(unique_labels.begin(), unique_labels.end()),
                            unique_labels.end());
        if (unique_labels.size() >= 2) {
            diag.silhouette_temporal =
                silhouette({temporal, labels, DistanceMetric::Cosine});
            diag.silhouette_framewise =
                silhouette({framewise, labels, DistanceMetric::Cosine});
            diag.histogram = similarity_histogram(temporal, labels, cfg.histogram_bins);
        }
    }

    if (!baseline || !scan_model || !scan_library) return diag;

    // Fully occluded video with off-screen speech: the false-positive trap.
    // Same seed, same speaker pool, and same per-scenario speaker subsets as
    // the main corpus; only the occlusion and confuser knobs move.
    CorpusConfig diag_cfg = cfg.corpus;
    diag_cfg.scenario.occlusion_rate = 1.0;
    diag_cfg.scenario.blur_rate = 0.0;
    diag_cfg.scenario.confuser_prob = std::max(0.6, diag_cfg.scenario.confuser_prob);
    Corpus probe = generate_corpus(diag_cfg, seed);

    // Map a probe speaker to its library entry through any validation track
    // of that speaker in the main corpus.
    std::map<int, const IdentityEntry*> entry_by_speaker;
    for (auto& sc : art.corpus.scenarios) {
        if (sc.split != 1) continue;
        for (auto& tr : sc.tracks)
            if (!entry_by_speaker.count(tr.speaker_id))
                entry_by_speaker[tr.speaker_id] = scan_library->usable_by_track(tr.track_id);
    }

    double base_sum = 0.0, scan_sum = 0.0;
    int frames = 0;
    for (auto& sc : probe.scenarios) {
        if (sc.split != 1) continue;
        std::vector<int> tracked_ids;
        for (auto& tr : sc.tracks) tracked_ids.push_back(tr.speaker_id);
        auto confuser_active = [&](double t) {
            for (auto& u : sc.timeline) {
                if (std::find(tracked_ids.begin(), tracked_ids.end(), u.speaker_id) !=
                    tracked_ids.end())
                    continue;
                if (t >= u.start_s && t < u.end_s) return true;
            }
            return false;
        };
        Tensor queries;
        bool have_queries = false;
        for (auto& tr : sc.tracks) {
            auto it = entry_by_speaker.find(tr.speaker_id);
            if (it == entry_by_speaker.end() || it->second == nullptr) continue;
            if (!have_queries) {
                queries = scenario_scan_queries(art.embedder, sc, tr.fps, tr.length(),
                                                scan_model->config().window_seconds);
                have_queries = true;
            }
            Rng rng(Rng::mix(Rng::mix(seed, Rng::hash_str("probe")),
                             static_cast<uint64_t>(tr.track_id)));
            ReferenceSpeech sampled =
                sample_reference(*scan_library, it->second->identity_id, rng,
                                 cfg.asd_train.max_reference_segments, art.corpus);
            Tensor refs = embed_reference(art.embedder, sampled);
            FramePredictions base_pred = asd_forward(*baseline, tr, sc.mixed_audio);
            FramePredictions scan_pred =
                asd_forward(*scan_model, tr, sc.mixed_audio, &queries, &refs);
            for (int t = 0; t < tr.length(); ++t) {
                if (tr.frame_labels[static_cast<size_t>(t)]) continue;
                if (!confuser_active((t + 0.5) / tr.fps)) continue;
                base_sum += base_pred.scores[static_cast<size_t>(t)];
                scan_sum += scan_pred.scores[static_cast<size_t>(t)];
                ++frames;
            }
        }
    }
    if (frames > 0) {
        diag.baseline_confuser_score = base_sum / frames;
        diag.scan_confuser_score = scan_sum / frames;
        diag.confuser_frames = frames;
    }
    return diag;
}

}  // namespace

ExperimentReport run_ablation(const ExperimentConfig& cfg, const std::vector<uint64_t>& seeds,
                              const AblationOptions& options) {
    cfg.validate();
    if (seeds.empty()) throw ConfigError("run_ablation needs at least one seed");
    const std::vector<ArmSpec>& arms = options.arms;
    if (arms.empty()) throw ConfigError("run_ablation needs at least one arm");

    namespace fs = std::filesystem;
    const bool persist = !options.out_dir.empty();
    if (persist) fs::create_directories(options.out_dir);

    ExperimentReport report;
    report.config_digest = config_hash(cfg);

    for (uint64_t seed : seeds) {
        auto t0 = std::chrono::steady_clock::now();
        SeedRun run;
        run.seed = seed;

        SeedArtifacts art;
        art.corpus = generate_corpus(cfg.corpus, seed);
        std::cerr << "[seed " << seed << "] corpus generated (" << seconds_since(t0) << " s)\n";

        art.embedder = train_embedder(art.corpus, cfg.embedder,
                                      Rng::mix(seed, Rng::hash_str("embedder")),
                                      &run.embedder_report);
        const std::string embedder_digest = params_digest(art.embedder.params());
        run.embedder_eer = eer_probe(art.embedder, art.corpus, seed);
        std::cerr << "[seed " << seed << "] embedder trained, heldout acc "
                  << run.embedder_report.heldout_accuracy << ", eer " << run.embedder_eer << " ("
                  << seconds_since(t0) << " s)\n";

        const int pixels =
            cfg.corpus.scenario.frame_height * cfg.corpus.scenario.frame_width;
        art.face = FaceModel(pixels, cfg.face, Rng::mix(seed, Rng::hash_str("face")));
        run.vbfr_report = vbfr_train(art.face, art.corpus, cfg.face_train,
                                     Rng::mix(seed, Rng::hash_str("vbfr")));
        std::cerr << "[seed " << seed << "] face model trained, heldout frame acc "
                  << run.vbfr_report.heldout_frame_accuracy << " (" << seconds_since(t0)
                  << " s)\n";

        art.libraries.hyp_train = enroll_library(art.face, art.corpus, 0, cfg.library_threshold,
                                                 cfg.library_min_segment_s, cfg.aggregation);
        art.libraries.hyp_val = enroll_library(art.face, art.corpus, 1, cfg.library_threshold,
                                               cfg.library_min_segment_s, cfg.aggregation);
        art.libraries.oracle_train =
            build_library_oracle(art.corpus, 0, cfg.library_min_segment_s);
        art.libraries.oracle_val = build_library_oracle(art.corpus, 1, cfg.library_min_segment_s);
        run.library_matches_oracle =
            libraries_equivalent(art.libraries.hyp_val, art.libraries.oracle_val);

        std::string seed_dir;
        if (persist) {
            seed_dir = options.out_dir + "/seed_" + std::to_string(seed);
            fs::create_directories(seed_dir);
            save_embedder(seed_dir + "/embedder.ckpt", art.embedder);
            save_face_model(seed_dir + "/face_model.ckpt", art.face);
            save_library(seed_dir + "/library_hyp_train.txt", art.libraries.hyp_train);
            save_library(seed_dir + "/library_hyp_val.txt", art.libraries.hyp_val);
            save_library(seed_dir + "/library_oracle_train.txt", art.libraries.oracle_train);
            save_library(seed_dir + "/library_oracle_val.txt", art.libraries.oracle_val);
        }

        for (const ArmSpec& arm : arms) {
            try {
                AsdConfig acfg = cfg.asd;
                acfg.scan_mode = arm.scan_mode;
                AsdModel model(pixels, audio_feature_dim(cfg), acfg,
                               Rng::mix(seed, Rng::hash_str("asd")));
                const IdentitySpeechLibrary* train_lib = nullptr;
                const IdentitySpeechLibrary* eval_lib = nullptr;
                const SpeakerEmbedder* emb = nullptr;
                if (arm.scan_mode != ScanMode::Off) {
                    train_lib = arm.oracle_library ? &art.libraries.oracle_train
                                                   : &art.libraries.hyp_train;
                    eval_lib = arm.oracle_library ? &art.libraries.oracle_val
                                                  : &art.libraries.hyp_val;
                    emb = &art.embedder;
                }
                train_asd(model, art.corpus, emb, train_lib, cfg.asd_train,
                          Rng::mix(seed, Rng::hash_str("asd_train")));
                EvalResult res =
                    evaluate_asd(model, art.corpus, 1, &art.embedder, eval_lib,
                                 cfg.asd_train.max_reference_segments,
                                 Rng::mix(seed, Rng::hash_str("eval")), arm.name);
                std::cerr << "[seed " << seed << "] arm " << arm.name << " AP "
                          << res.pooled_ap << " (" << seconds_since(t0) << " s)\n";
                if (persist) {
                    save_asd_model(seed_dir + "/asd_" + arm.name + ".ckpt", model);
                    if (options.write_predictions)
                        write_predictions(seed_dir + "/predictions_" + arm.name + ".txt",
                                          res.predictions, report.config_digest);
                }
                art.models.emplace(arm.name, std::move(model));
                run.arms.push_back(std::move(res));
            } catch (const std::exception& e) {
                std::cerr << "[seed " << seed << "] arm " << arm.name << " failed: " << e.what()
                          << "\n";
                EvalResult failed;
                failed.arm = arm.name + " (failed: " + e.what() + ")";
                failed.pooled_ap = -1.0;
                run.arms.push_back(std::move(failed));
            }
        }

        run.embedder_frozen_intact = params_digest(art.embedder.params()) == embedder_digest;

        if (options.diagnostics) {
            const AsdModel* baseline =
                art.models.count("baseline") ? &art.models.at("baseline") : nullptr;
            const AsdModel* scan_model = nullptr;
            const IdentitySpeechLibrary* scan_lib = nullptr;
            if (art.models.count("scan_oracle")) {
                scan_model = &art.models.at("scan_oracle");
                scan_lib = &art.libraries.oracle_val;
            } else if (art.models.count("scan_hyp")) {
                scan_model = &art.models.at("scan_hyp");
                scan_lib = &art.libraries.hyp_val;
            }
            run.diagnostics =
                compute_diagnostics(cfg, seed, art, baseline, scan_model, scan_lib);
            run.has_diagnostics = true;
            std::cerr << "[seed " << seed << "] diagnostics done (" << seconds_since(t0)
                      << " s)\n";
        }

        report.runs.push_back(std::move(run));
    }

    if (persist) {
        write_file(options.out_dir + "/report.txt", render_report_text(report));
        write_file(options.out_dir + "/report.json", render_report_json(report));
    }
    return report;
}

namespace {

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

struct ArmAggregate {
    double mean_ap = 0.0;
    double std_ap = 0.0;
    double mean_track_ap = 0.0;
    int n = 0;
};

std::map<std::string, ArmAggregate> aggregate_arms(const ExperimentReport& report) {
    std::map<std::string, std::vector<const EvalResult*>> by_arm;
    for (auto& run : report.runs)
        for (auto& arm : run.arms)
            if (arm.pooled_ap >= 0.0) by_arm[arm.arm].push_back(&arm);
    std::map<std::string, ArmAggregate> out;
    for (auto& [name, results] : by_arm) {
        ArmAggregate agg;
        agg.n = static_cast<int>(results.size());
        for (auto* r : results) {
            agg.mean_ap += r->pooled_ap;
            agg.mean_track_ap += r->mean_track_ap;
        }
        agg.mean_ap /= agg.n;
        agg.mean_track_ap /= agg.n;
        for (auto* r : results)
            agg.std_ap += (r->pooled_ap - agg.mean_ap) * (r->pooled_ap - agg.mean_ap);
        agg.std_ap = agg.n > 1 ? std::sqrt(agg.std_ap / (agg.n - 1)) : 0.0;
        out[name] = agg;
    }
    return out;
}

const char* library_label(const std::string& arm) {
    if (arm == "baseline") return "-";
    if (arm == "scan_hyp") return "hypothesised";
    if (arm == "scan_oracle") return "oracle";
    return "?";
}

}  // namespace

std::string render_report_text(const ExperimentReport& report) {
    std::ostringstream out;
    out << "ablation report\n";
    out << "config " << report.config_digest << "\n";
    out << "seeds";
    for (auto& run : report.runs) out << " " << run.seed;
    out << "\n\n";

    out << "arm           library       AP%[pooled]      AP%[mean-track]\n";
    auto aggregates = aggregate_arms(report);
    for (const char* name : {"baseline", "scan_hyp", "scan_oracle"}) {
        auto it = aggregates.find(name);
        if (it == aggregates.end()) continue;
        const ArmAggregate& a = it->second;
        char line[160];
        std::snprintf(line, sizeof(line), "%-13s %-13s %6.2f +- %-5.2f  %6.2f\n", name,
                      library_label(name), 100.0 * a.mean_ap, 100.0 * a.std_ap,
                      100.0 * a.mean_track_ap);
        out << line;
    }
    out << "\nper-seed AP (=mAP, single class), pooled frames\n";
    for (auto& run : report.runs) {
        out << "seed " << run.seed << ":";
        for (auto& arm : run.arms) {
            out << "  " << arm.arm << "=";
            out << (arm.pooled_ap >= 0.0 ? fmt(arm.pooled_ap) : std::string("failed"));
            if (arm.fallback_tracks > 0) out << " (fallback " << arm.fallback_tracks << ")";
        }
        out << "\n";
    }
    out << "\nper-track AP\n";
    for (auto& run : report.runs)
        for (auto& arm : run.arms) {
            if (arm.track_ap.empty()) continue;
            out << "seed " << run.seed << " " << arm.arm << ":";
            for (auto& [id, ap] : arm.track_ap) out << " " << id << "=" << fmt(ap);
            out << "\n";
        }
    out << "\nstage quality\n";
    for (auto& run : report.runs) {
        out << "seed " << run.seed << ": embedder acc=" << fmt(run.embedder_report.heldout_accuracy)
            << " eer=" << fmt(run.embedder_eer)
            << " vbfr acc=" << fmt(run.vbfr_report.heldout_frame_accuracy)
            << " frozen=" << (run.embedder_frozen_intact ? "intact" : "VIOLATED")
            << " hyp==oracle:" << (run.library_matches_oracle ? "yes" : "no") << "\n";
    }
    bool any_diag = false;
    for (auto& run : report.runs) any_diag |= run.has_diagnostics;
    if (any_diag) {
        out << "\ndiagnostics\n";
        for (auto& run : report.runs) {
            if (!run.has_diagnostics) continue;
            const Diagnostics& d = run.diagnostics;
            out << "seed " << run.seed << ": occluded-confuser score baseline="
                << fmt(d.baseline_confuser_score) << " scan=" << fmt(d.scan_confuser_score)
                << " over " << d.confuser_frames << " frames; silhouette temporal="
                << fmt(d.silhouette_temporal) << " framewise=" << fmt(d.silhouette_framewise)
                << "; similarity mean same=" << fmt(d.histogram.same_mean)
                << " diff=" << fmt(d.histogram.different_mean) << "\n";
            if (d.histogram.bins > 0) {
                out << "seed " << run.seed << " histogram same:";
                for (int c : d.histogram.same_identity) out << " " << c;
                out << "\nseed " << run.seed << " histogram diff:";
                for (int c : d.histogram.different_identity) out << " " << c;
                out << "\n";
            }
        }
    }
    return out.str();
}

std::string render_report_json(const ExperimentReport& report) {
    json j;
    j["config"] = report.config_digest;
    j["runs"] = json::array();
    for (auto& run : report.runs) {
        json r;
        r["seed"] = run.seed;
        r["embedder"] = {{"heldout_accuracy", run.embedder_report.heldout_accuracy},
                         {"eer", run.embedder_eer},
                         {"initial_loss", run.embedder_report.initial_loss},
                         {"final_loss", run.embedder_report.final_loss}};
        r["vbfr"] = {{"heldout_frame_accuracy", run.vbfr_report.heldout_frame_accuracy},
                     {"initial_loss", run.vbfr_report.initial_loss},
                     {"final_loss", run.vbfr_report.final_loss}};
        r["embedder_frozen_intact"] = run.embedder_frozen_intact;
        r["library_matches_oracle"] = run.library_matches_oracle;
        r["arms"] = json::array();
        for (auto& arm : run.arms) {
            json a;
            a["name"] = arm.arm;
            a["pooled_ap"] = arm.pooled_ap;
            a["mean_track_ap"] = arm.mean_track_ap;
            a["fallback_tracks"] = arm.fallback_tracks;
            json per_track = json::array();
            for (auto& [id, ap] : arm.track_ap) per_track.push_back({{"track", id}, {"ap", ap}});
            a["track_ap"] = per_track;
            r["arms"].push_back(a);
        }
        if (run.has_diagnostics) {
            const Diagnostics& d = run.diagnostics;
            r["diagnostics"] = {{"baseline_confuser_score", d.baseline_confuser_score},
                                {"scan_confuser_score", d.scan_confuser_score},
                                {"confuser_frames", d.confuser_frames},
                                {"silhouette_temporal", d.silhouette_temporal},
                                {"silhouette_framewise", d.silhouette_framewise},
                                {"similarity_same_mean", d.histogram.same_mean},
                                {"similarity_diff_mean", d.histogram.different_mean},
                                {"histogram_same", d.histogram.same_identity},
                                {"histogram_diff", d.histogram.different_identity}};
        }
        j["runs"].push_back(r);
    }
    return j.dump(2) + "\n";
}

void write_predictions(const std::string& path, const std::vector<FramePredictions>& predictions,
                       const std::string& config_digest) {
    std::ostringstream out;
    out << "# predictions v1\n";
    out << "# config " << config_digest << "\n";
    out << "# columns: track_id frame_index score label\n";
    char line[96];
    for (auto& pred : predictions)
        for (size_t t = 0; t < pred.scores.size(); ++t) {
            std::snprintf(line, sizeof(line), "%d %zu %.17g %d\n", pred.track_id, t,
                          pred.scores[t], pred.labels[t] ? 1 : 0);
            out << line;
        }
    write_file(path, out.str());
}

}  // namespace asd
