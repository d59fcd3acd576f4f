// Acceptance suite: one pass/fail line per criterion, every tolerance
// pinned in code. Runs the fast numeric oracles first, then the full
// three-seed ablation on the hard synthetic corpus.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <vector>

#include "asd/checkpoint.hpp"
#include "asd/experiment.hpp"
#include "asd/gradcheck.hpp"

using namespace asd;

namespace {

int failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

// ---------------------------------------------------------------- 1 ----
// Finite-difference gradient checks: full baseline ASD net, SCAN forward +
// auxiliary BCE, facelib transformer stack. Central differences, eps 1e-5,
// max relative error < 1e-4 on tiny instances, 20 seeds each.
void criterion_1() {
    const double tol = 1e-4;
    const double eps = 1e-5;
    double worst = 0.0;
    std::string worst_site;
    auto track_worst = [&](const GradCheckReport& r, const std::string& site) {
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_site = site + "/" + r.worst_param;
        }
    };

    for (int s = 0; s < 20; ++s) {
        Rng rng(5100 + 17 * s);
        const int T = 2 + rng.uniform_int(5);  // <= 6

        {  // (a) full baseline ASD net, tiny dims
            AsdConfig cfg;
            cfg.encoder_dim = 3 + rng.uniform_int(3);
            cfg.decoder_dim = 4 + rng.uniform_int(3);
            cfg.fusion = s % 2 == 0 ? FusionMode::Concat : FusionMode::Sum;
            const int pixels = 8, audio_dim = 7;
            AsdModel model(pixels, audio_dim, cfg, 6200 + 13 * s);
            Tensor audio = Tensor::randn({T, audio_dim}, rng, 0.5);
            Tensor video = Tensor::randn({T, pixels}, rng, 0.5);
            Tensor targets({T, 1});
            for (int t = 0; t < T; ++t) targets(t, 0) = rng.uniform() < 0.5 ? 1.0 : 0.0;
            LossFn f = [&](ParameterStore& p, GradMap* grads) {
                AsdModel local = AsdModel::from_params(p, pixels, audio_dim, cfg);
                ComputationTape tape;
                auto out = local.forward_on_tape(tape, audio, video, nullptr, nullptr);
                Value loss = tape.bce_mean(out.scores, tape.leaf(targets));
                if (grads) {
                    tape.backward(loss);
                    *grads = tape.param_grads();
                }
                return tape.value(loss)[0];
            };
            track_worst(finite_diff_check(f, model.params(), eps), "asd");
        }
        {  // (b) SCAN forward + auxiliary BCE
            const int d_phi = 4 + rng.uniform_int(5);  // <= 8
            const int feat = 4 + rng.uniform_int(4);
            const int K = 1 + rng.uniform_int(4);
            Tensor queries = Tensor::randn({T, d_phi}, rng);
            Tensor refs = Tensor::randn({K, d_phi}, rng);
            std::vector<uint8_t> labels(static_cast<size_t>(T));
            for (auto& l : labels) l = rng.uniform() < 0.5 ? 1 : 0;
            ParameterStore params;
            init_scan_params(params, d_phi, feat, 7300 + 11 * s);
            LossFn f = [&](ParameterStore& p, GradMap* grads) {
                ComputationTape tape;
                ScanTapeOutput out = scan_forward_on_tape(tape, p, "scan.", queries, refs);
                Value loss = scan_aux_loss(tape, out.aux_scores, labels);
                if (grads) {
                    tape.backward(loss);
                    *grads = tape.param_grads();
                }
                return tape.value(loss)[0];
            };
            track_worst(finite_diff_check(f, params, eps), "scan");
        }
        {  // (c) facelib transformer stack
            FaceModelConfig cfg;
            cfg.frame_dim = cfg.model_dim = 4 + 2 * rng.uniform_int(3);  // 4, 6, 8
            cfg.heads = 2;
            cfg.layers = 1 + rng.uniform_int(2);
            cfg.ff_dim = 6 + rng.uniform_int(3);
            const int pixels = 8;
            FaceModel model(pixels, cfg, 8400 + 7 * s);
            Tensor frames = Tensor::randn({T, pixels}, rng, 0.4);
            Tensor targets({T, 1});
            for (int t = 0; t < T; ++t) targets(t, 0) = rng.uniform() < 0.5 ? 1.0 : 0.0;
            LossFn f = [&](ParameterStore& p, GradMap* grads) {
                FaceModel local = FaceModel::from_params(p, pixels, cfg);
                ComputationTape tape;
                auto out = local.forward_on_tape(tape, frames);
                Value loss = tape.bce_mean(out.native_probs, tape.leaf(targets));
                if (grads) {
                    tape.backward(loss);
                    *grads = tape.param_grads();
                }
                return tape.value(loss)[0];
            };
            track_worst(finite_diff_check(f, model.params(), eps), "face");
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail), "max rel error %.3g at %s, tolerance %.0e, %.1f s",
                  worst, worst_site.c_str(), tol, now_seconds());
    report(1, "gradient correctness", worst < tol, detail);
}

// ---------------------------------------------------------------- 2 ----
// Attention equals the directly-coded softmax(QK^T/sqrt(d)) KV oracle
// within 1e-12 on 100 random instances; K=1 copies reference rows exactly.
void criterion_2() {
    Rng rng(777);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int T = 1 + rng.uniform_int(5);
        const int K = 1 + rng.uniform_int(4);
        const int d = 2 + rng.uniform_int(7);
        Tensor q = Tensor::randn({T, d}, rng);
        Tensor kv = Tensor::randn({K, d}, rng);
        PlainAttention att = attention_plain(q, kv, kv);
        // oracle, coded directly from the formula
        for (int t = 0; t < T; ++t) {
            std::vector<double> logits(static_cast<size_t>(K));
            double mx = -1e300;
            for (int k = 0; k < K; ++k) {
                double s = 0.0;
                for (int j = 0; j < d; ++j) s += q(t, j) * kv(k, j);
                logits[static_cast<size_t>(k)] = s / std::sqrt(static_cast<double>(d));
                mx = std::max(mx, logits[static_cast<size_t>(k)]);
            }
            double sum = 0.0;
            for (auto& l : logits) {
                l = std::exp(l - mx);
                sum += l;
            }
            for (int j = 0; j < d; ++j) {
                double o = 0.0;
                for (int k = 0; k < K; ++k) o += logits[static_cast<size_t>(k)] / sum * kv(k, j);
                worst = std::max(worst, std::abs(o - att.out(t, j)));
            }
        }
    }
    bool k1_exact = true;
    for (int trial = 0; trial < 20; ++trial) {
        Tensor q = Tensor::randn({4, 6}, rng);
        Tensor kv = Tensor::randn({1, 6}, rng);
        PlainAttention att = attention_plain(q, kv, kv);
        for (int t = 0; t < 4; ++t)
            for (int j = 0; j < 6; ++j) k1_exact &= att.out(t, j) == kv(0, j);
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "max |diff| %.3g over 100 instances, K=1 exact: %s",
                  worst, k1_exact ? "yes" : "no");
    report(2, "cross-attention oracle", worst <= 1e-12 && k1_exact, detail);
}

// ---------------------------------------------------------------- 3 ----
// AP equals the naive all-thresholds oracle within 1e-12 on 500 random
// frame sets (n <= 12); the two hand cases reproduce exactly.
double ap_oracle(const ScoredFrameSet& frames) {
    std::vector<size_t> order(frames.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return frames[a].score > frames[b].score; });
    size_t positives = 0;
    for (auto& f : frames) positives += f.label ? 1 : 0;
    std::vector<double> precision, recall;
    size_t tp = 0;
    for (size_t r = 0; r < order.size(); ++r) {
        tp += frames[order[r]].label ? 1 : 0;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    }
    std::vector<double> distinct = recall;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    double ap = 0.0, prev = 0.0;
    for (double r : distinct) {
        if (r <= 0.0) continue;
        double pmax = 0.0;
        for (size_t cut = 0; cut < precision.size(); ++cut)
            if (recall[cut] >= r) pmax = std::max(pmax, precision[cut]);
        ap += (r - prev) * pmax;
        prev = r;
    }
    return ap;
}

void criterion_3() {
    Rng rng(888);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + rng.uniform_int(12);
        ScoredFrameSet frames;
        bool any = false;
        for (int i = 0; i < n; ++i) {
            frames.push_back({rng.uniform_int(6) / 5.0, rng.uniform() < 0.5});
            any |= frames.back().label;
        }
        if (!any) frames[static_cast<size_t>(rng.uniform_int(n))].label = true;
        worst = std::max(worst, std::abs(average_precision(frames) - ap_oracle(frames)));
    }
    const double hand1 = average_precision({{0.9, true}, {0.8, false}, {0.7, true}});
    const double hand2 = average_precision({{0.9, false}, {0.8, true}});
    const bool hands_ok = hand1 == 0.5 * 1.0 + 0.5 * (2.0 / 3.0) && hand2 == 0.5;
    char detail[128];
    std::snprintf(detail, sizeof(detail),
                  "max |diff| %.3g over 500 sets; hand cases %.10f and %.4f", worst, hand1,
                  hand2);
    report(3, "average-precision oracle", worst <= 1e-12 && hands_ok, detail);
}

// ------------------------------------------------------------ 4,5,6 ----
// The hard-corpus ablation: SCAN payoff, the occluded-confuser mechanism,
// and library quality, three seeds each.
ExperimentConfig hard_config() {
    ExperimentConfig cfg;
    cfg.corpus.n_speakers_pool = 8;
    cfg.corpus.scenarios_train = 8;
    cfg.corpus.scenarios_val = 8;
    cfg.corpus.scenario.n_speakers = 2;
    cfg.corpus.scenario.n_confusers = 2;
    cfg.corpus.scenario.duration_s = 8.0;
    cfg.corpus.scenario.occlusion_rate = 0.4;  // the hard benchmark
    cfg.corpus.scenario.confuser_prob = 0.5;
    cfg.corpus.scenario.snr_db = 5.0;
    cfg.corpus.scenario.overlap_prob = 0.15;
    cfg.embedder.steps = 300;
    cfg.asd_train.steps = 550;
    cfg.asd_train.max_reference_segments = 6;
    cfg.face_train.steps = 700;
    cfg.face_train.crop_frames = 140;
    return cfg;
}

void criteria_4_5_6() {
    const std::vector<uint64_t> seeds{7, 8, 9};
    ExperimentConfig cfg = hard_config();
    AblationOptions options;
    options.arms = default_arms(cfg.asd.scan_mode);
    options.diagnostics = true;
    options.write_predictions = false;
    const double t0 = now_seconds();
    ExperimentReport rep = run_ablation(cfg, seeds, options);
    const double elapsed = now_seconds() - t0;

    auto arm_ap = [&](const SeedRun& run, const std::string& name) {
        for (auto& a : run.arms)
            if (a.arm == name) return a.pooled_ap;
        return -1.0;
    };

    // 4: mean AP(scan_oracle) - AP(baseline) >= 5 points; ordering
    //    baseline < scan_hyp <= scan_oracle in at least 2 of 3 seeds.
    double payoff = 0.0;
    int ordering_holds = 0;
    for (auto& run : rep.runs) {
        const double base = arm_ap(run, "baseline");
        const double hyp = arm_ap(run, "scan_hyp");
        const double oracle = arm_ap(run, "scan_oracle");
        payoff += oracle - base;
        if (base < hyp && hyp <= oracle) ++ordering_holds;
    }
    payoff /= static_cast<double>(rep.runs.size());
    {
        char detail[192];
        std::snprintf(detail, sizeof(detail),
                      "mean AP gain (oracle-library SCAN vs baseline) %+.1f points (need >= +5); "
                      "ordering holds in %d/3 seeds (need >= 2); %.0f s (cap 1200)",
                      100.0 * payoff, ordering_holds, elapsed);
        report(4, "SCAN payoff on the hard corpus",
               payoff >= 0.05 && ordering_holds >= 2 && elapsed <= 1200.0, detail);
    }

    // 5: on fully occluded tracks with active confuser speech, the baseline
    //    scores non-speaking frames >= 0.1 higher than the SCAN model.
    double fp_gap = 0.0;
    int diag_runs = 0;
    for (auto& run : rep.runs) {
        if (!run.has_diagnostics || run.diagnostics.confuser_frames == 0) continue;
        fp_gap += run.diagnostics.baseline_confuser_score - run.diagnostics.scan_confuser_score;
        ++diag_runs;
    }
    fp_gap /= std::max(1, diag_runs);
    {
        char detail[160];
        std::snprintf(detail, sizeof(detail),
                      "mean score gap on occluded confuser frames %.3f over %d seeds (need >= 0.1)",
                      fp_gap, diag_runs);
        report(5, "false-positive mechanism", diag_runs == 3 && fp_gap >= 0.1, detail);
    }

    // 6: temporal-context identity embeddings beat per-frame means by >= 0.1
    //    cosine silhouette; same-identity similarity mean above different.
    double sil_gap = 0.0;
    bool hist_ok = true;
    for (auto& run : rep.runs) {
        sil_gap += run.diagnostics.silhouette_temporal - run.diagnostics.silhouette_framewise;
        hist_ok &= run.diagnostics.histogram.same_mean > run.diagnostics.histogram.different_mean;
    }
    sil_gap /= static_cast<double>(rep.runs.size());
    {
        char detail[160];
        std::snprintf(detail, sizeof(detail),
                      "mean silhouette gap %+.3f (need >= +0.1); same>diff similarity: %s",
                      sil_gap, hist_ok ? "yes" : "no");
        report(6, "identity-speech library quality", sil_gap >= 0.1 && hist_ok, detail);
    }
}

// ---------------------------------------------------------------- 7 ----
// Held-out impostor-frame accuracy >= 0.9 at defaults; pollution
// round-trip recovers parents exactly on 1000 random cases.
void criterion_7() {
    ExperimentConfig cfg;  // defaults
    Corpus corpus = generate_corpus(cfg.corpus, 97);
    const int pixels = cfg.corpus.scenario.frame_height * cfg.corpus.scenario.frame_width;
    FaceModel model(pixels, cfg.face, Rng::mix(97, Rng::hash_str("face")));
    VbfrTrainReport rep =
        vbfr_train(model, corpus, cfg.face_train, Rng::mix(97, Rng::hash_str("vbfr")));

    Rng rng(9999);
    bool roundtrip_ok = true;
    for (int trial = 0; trial < 1000 && roundtrip_ok; ++trial) {
        const int T = 3 + rng.uniform_int(14);
        Track parent;
        parent.track_id = 1;
        parent.speaker_id = 0;
        parent.fps = 30;
        parent.frames = Tensor::randn({T, 4, 4}, rng);
        parent.frame_labels.assign(static_cast<size_t>(T), 0);
        parent.corruption_mask.assign(static_cast<size_t>(T), 0);
        Track other = parent;
        other.track_id = 2;
        other.speaker_id = 1;
        other.frames = Tensor::randn({9, 4, 4}, rng);
        other.frame_labels.assign(9, 0);
        other.corruption_mask.assign(9, 0);
        PollutedTrack polluted = pollute_track(parent, {&other}, rng.uniform(), rng.next_u64());
        int native = 0;
        for (int slot = 0; slot < polluted.frames.extent(0); ++slot) {
            if (!polluted.native_mask[static_cast<size_t>(slot)]) continue;
            for (int p = 0; p < 16; ++p)
                roundtrip_ok &= polluted.frames.data()[static_cast<size_t>(slot) * 16 + p] ==
                                parent.frames.data()[static_cast<size_t>(native) * 16 + p];
            ++native;
        }
        roundtrip_ok &= native == T;
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "heldout impostor-frame accuracy %.3f at rate %.2f (need >= 0.9); "
                  "1000 pollution round-trips exact: %s",
                  rep.heldout_frame_accuracy, cfg.face_train.impostor_rate,
                  roundtrip_ok ? "yes" : "no");
    report(7, "self-supervised objective sanity",
           rep.heldout_frame_accuracy >= 0.9 && roundtrip_ok, detail);
}

// ---------------------------------------------------------------- 8 ----
// Enrollment rules: 0.9 threshold and 2.5 s minimum enforced; the
// hypothesised library matches the oracle one on an easy corpus.
void criterion_8() {
    bool threshold_ok = true;
    {
        auto unit = [](double x, double y) {
            Tensor t({2}, {x, y});
            const double n = t.l2_norm();
            for (auto& v : t.data()) v /= n;
            return t;
        };
        // at, below, and above the 0.9 threshold
        IdentityClusters at =
            aggregate_identities({{1, unit(1, 0)}, {2, unit(0.9, std::sqrt(1 - 0.81))}}, 0.9);
        threshold_ok &= at.members.size() == 1;  // similarity >= threshold joins
        IdentityClusters below =
            aggregate_identities({{1, unit(1, 0)}, {2, unit(0.85, std::sqrt(1 - 0.7225))}}, 0.9);
        threshold_ok &= below.members.size() == 2;
        IdentityClusters above =
            aggregate_identities({{1, unit(1, 0)}, {2, unit(0.95, std::sqrt(1 - 0.9025))}}, 0.9);
        threshold_ok &= above.members.size() == 1;
    }

    bool duration_ok = true;
    {
        CorpusConfig ccfg;
        ccfg.scenario.duration_s = 8.0;
        ccfg.n_speakers_pool = 4;
        ccfg.scenarios_train = 4;
        ccfg.scenarios_val = 0;
        Corpus corpus = generate_corpus(ccfg, 881);
        IdentitySpeechLibrary lib = build_library_oracle(corpus, 0, 2.5);
        size_t segments = 0;
        for (auto& e : lib.entries) {
            for (auto& s : e.segments) duration_ok &= s.duration_s() >= 2.5;
            segments += e.segments.size();
            duration_ok &= e.speechless == e.segments.empty();
        }
        duration_ok &= segments > 0;
    }

    // easy corpus: no occlusion, enrollment must match the oracle partition
    ExperimentConfig cfg;
    cfg.corpus.scenario.occlusion_rate = 0.0;
    cfg.corpus.scenario.blur_rate = 0.0;
    cfg.corpus.n_speakers_pool = 4;
    cfg.corpus.scenarios_train = 4;
    cfg.corpus.scenarios_val = 4;
    cfg.face_train.steps = 300;
    cfg.face_train.crop_frames = 90;
    const int pixels = cfg.corpus.scenario.frame_height * cfg.corpus.scenario.frame_width;
    Corpus corpus = generate_corpus(cfg.corpus, 882);
    FaceModel model(pixels, cfg.face, Rng::mix(882, Rng::hash_str("face")));
    vbfr_train(model, corpus, cfg.face_train, Rng::mix(882, Rng::hash_str("vbfr")));
    IdentitySpeechLibrary hyp = enroll_library(model, corpus, 1, cfg.library_threshold,
                                               cfg.library_min_segment_s, cfg.aggregation);
    IdentitySpeechLibrary oracle = build_library_oracle(corpus, 1, cfg.library_min_segment_s);
    const bool equal = libraries_equivalent(hyp, oracle);

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "threshold boundary: %s; 2.5 s minimum: %s; easy-corpus hyp==oracle: %s "
                  "(%zu vs %zu identities)",
                  threshold_ok ? "ok" : "broken", duration_ok ? "ok" : "broken",
                  equal ? "yes" : "no", hyp.entries.size(), oracle.entries.size());
    report(8, "enrollment rules", threshold_ok && duration_ok && equal, detail);
}

// ---------------------------------------------------------------- 9 ----
// Determinism: two ablations with the same config and seed produce
// byte-identical reports; the frozen embedder never changes under ASD
// training.
void criterion_9() {
    namespace fs = std::filesystem;
    ExperimentConfig cfg;
    cfg.corpus.n_speakers_pool = 4;
    cfg.corpus.scenarios_train = 2;
    cfg.corpus.scenarios_val = 2;
    cfg.corpus.scenario.duration_s = 4.0;
    cfg.corpus.scenario.confuser_prob = 0.4;
    cfg.embedder.steps = 80;
    cfg.face_train.steps = 60;
    cfg.face_train.crop_frames = 40;
    cfg.asd_train.steps = 60;

    const std::string dir_a = (fs::temp_directory_path() / "asd_accept_a").string();
    const std::string dir_b = (fs::temp_directory_path() / "asd_accept_b").string();
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    AblationOptions options;
    options.arms = arms_from_names({"baseline", "scan_oracle"}, cfg.asd.scan_mode);
    options.diagnostics = false;
    options.out_dir = dir_a;
    ExperimentReport rep_a = run_ablation(cfg, {13}, options);
    options.out_dir = dir_b;
    ExperimentReport rep_b = run_ablation(cfg, {13}, options);

    const bool reports_equal =
        read_file(dir_a + "/report.txt") == read_file(dir_b + "/report.txt") &&
        read_file(dir_a + "/report.json") == read_file(dir_b + "/report.json");
    const bool artifacts_equal =
        read_file(dir_a + "/seed_13/embedder.ckpt") ==
            read_file(dir_b + "/seed_13/embedder.ckpt") &&
        read_file(dir_a + "/seed_13/asd_scan_oracle.ckpt") ==
            read_file(dir_b + "/seed_13/asd_scan_oracle.ckpt");
    bool frozen_ok = true;
    for (auto& run : rep_a.runs) frozen_ok &= run.embedder_frozen_intact;
    for (auto& run : rep_b.runs) frozen_ok &= run.embedder_frozen_intact;
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "reports byte-identical: %s; checkpoints byte-identical: %s; "
                  "frozen embedder intact: %s",
                  reports_equal ? "yes" : "no", artifacts_equal ? "yes" : "no",
                  frozen_ok ? "yes" : "no");
    report(9, "end-to-end determinism", reports_equal && artifacts_equal && frozen_ok, detail);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_1();
    criterion_2();
    criterion_3();
    criteria_4_5_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::printf("%d of 9 criteria passed (%.0f s total)\n", 9 - failures, now_seconds());
    return failures == 0 ? 0 : 1;
}
