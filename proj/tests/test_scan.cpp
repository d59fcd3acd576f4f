#include <doctest.h>

#include <cmath>

#include "asd/gradcheck.hpp"
#include "asd/identity_library.hpp"
#include "asd/scan.hpp"

using namespace asd;

namespace {

// Eq-style oracle, coded directly: softmax(q k^T / sqrt(d)) k.
Tensor attention_oracle(const Tensor& q, const Tensor& kv) {
    const int T = q.rows(), K = kv.rows(), d = q.cols();
    Tensor out({T, kv.cols()});
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
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < kv.cols(); ++j)
                out(t, j) += logits[static_cast<size_t>(k)] / sum * kv(k, j);
    }
    return out;
}

ParameterStore scan_store(int d_phi, int feature_dim, uint64_t seed) {
    ParameterStore store;
    init_scan_params(store, d_phi, feature_dim, seed);
    return store;
}

double entropy_of_rows(const Tensor& weights) {
    double h = 0.0;
    for (int i = 0; i < weights.rows(); ++i)
        for (int j = 0; j < weights.cols(); ++j) {
            const double p = weights(i, j);
            if (p > 0) h -= p * std::log(p);
        }
    return h / weights.rows();
}

}  // namespace

TEST_SUITE("scan") {

TEST_CASE("raw attention equals the directly-coded oracle within 1e-12") {
    Rng rng(600);
    for (int trial = 0; trial < 100; ++trial) {
        const int T = 1 + rng.uniform_int(5);
        const int K = 1 + rng.uniform_int(4);
        const int d = 2 + rng.uniform_int(7);
        Tensor q = Tensor::randn({T, d}, rng);
        Tensor kv = Tensor::randn({K, d}, rng);
        PlainAttention att = attention_plain(q, kv, kv);
        Tensor want = attention_oracle(q, kv);
        for (size_t i = 0; i < want.numel(); ++i)
            CHECK(std::abs(att.out[i] - want[i]) <= 1e-12);
    }
}

TEST_CASE("K=1 degenerates to an exact copy of the reference row") {
    Rng rng(601);
    Tensor q = Tensor::randn({6, 8}, rng);
    Tensor kv = Tensor::randn({1, 8}, rng);
    PlainAttention att = attention_plain(q, kv, kv);
    for (int t = 0; t < 6; ++t) {
        CHECK(att.weights(t, 0) == 1.0);
        for (int j = 0; j < 8; ++j) CHECK(att.out(t, j) == kv(0, j));
    }
    // and the projected features are identical across frames
    ParameterStore store = scan_store(8, 8, 602);
    ScanOutput out = scan_forward_from_embeddings(store, "scan.", q, kv);
    for (int t = 1; t < 6; ++t)
        for (int j = 0; j < 8; ++j) CHECK(out.features(t, j) == out.features(0, j));
}

TEST_CASE("zero projection with zero head bias scores 0.5 everywhere") {
    ParameterStore store;
    store.insert("scan.proj.w", Tensor({4, 6}));
    store.insert("scan.proj.b", Tensor({1, 6}));
    store.insert("scan.head.w", Tensor({6, 1}));
    store.insert("scan.head.b", Tensor({1, 1}));
    Rng rng(603);
    ScanOutput out = scan_forward_from_embeddings(store, "scan.", Tensor::randn({5, 4}, rng),
                                                  Tensor::randn({2, 4}, rng));
    for (double s : out.aux_scores) CHECK(s == doctest::Approx(0.5));
}

TEST_CASE("attention is row-stochastic and permutation-symmetric in the reference") {
    Rng rng(604);
    Tensor q = Tensor::randn({4, 6}, rng);
    Tensor kv = Tensor::randn({3, 6}, rng);
    ParameterStore store = scan_store(6, 8, 605);
    ScanOutput base = scan_forward_from_embeddings(store, "scan.", q, kv);
    for (int i = 0; i < 4; ++i) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j) s += base.attention(i, j);
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
    // permute reference rows: columns permute, features unchanged
    Tensor kv_perm({3, 6});
    const int perm[3] = {2, 0, 1};
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 6; ++j) kv_perm(k, j) = kv(perm[k], j);
    ScanOutput permuted = scan_forward_from_embeddings(store, "scan.", q, kv_perm);
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 3; ++k)
            CHECK(permuted.attention(i, k) == doctest::Approx(base.attention(i, perm[k])));
    for (size_t i = 0; i < base.features.numel(); ++i)
        CHECK(permuted.features[i] == doctest::Approx(base.features[i]).epsilon(1e-12));
}

TEST_CASE("queries align with matching reference keys on synthetic pairs") {
    // candidate speech windows attend more to a reference of the same
    // synthetic speaker than to a different-speaker reference
    CorpusConfig cfg;
    cfg.scenario.duration_s = 8.0;
    cfg.n_speakers_pool = 4;
    cfg.scenarios_train = 4;
    cfg.scenarios_val = 0;
    Corpus corpus = generate_corpus(cfg, 620);
    EmbedderTrainConfig ecfg;
    ecfg.steps = 200;
    SpeakerEmbedder emb = train_embedder(corpus, ecfg, 621);
    EmissionModel em = corpus.emission();
    Rng rng(622);

    double matching_weight = 0.0;
    long frames = 0;
    double entropy_sum = 0.0;
    for (auto& sc : corpus.scenarios) {
        for (auto& tr : sc.tracks) {
            Tensor ref_same = emb.embed(
                synthesize_clean_window(corpus.speaker(tr.speaker_id), em, 16000, rng));
            int other = -1;
            for (auto& s : corpus.speakers)
                if (s.id != tr.speaker_id) other = s.id;
            Tensor ref_other =
                emb.embed(synthesize_clean_window(corpus.speaker(other), em, 16000, rng));
            Tensor kv({2, emb.embed_dim()});
            for (int j = 0; j < emb.embed_dim(); ++j) {
                kv(0, j) = ref_same[static_cast<size_t>(j)];
                kv(1, j) = ref_other[static_cast<size_t>(j)];
            }
            WindowedAudio w = window_audio(sc.mixed_audio, tr.length(), tr.fps, 1.0);
            PlainAttention att = attention_plain(emb.embed_windows(w), kv, kv);
            entropy_sum += entropy_of_rows(att.weights);
            for (int t = 0; t < tr.length(); ++t) {
                if (!tr.frame_labels[static_cast<size_t>(t)]) continue;
                matching_weight += att.weights(t, 0);
                ++frames;
            }
        }
    }
    REQUIRE(frames > 200);
    CHECK(matching_weight / static_cast<double>(frames) > 0.5);
    // weights stay near-uniform in this regime; the alignment is first-order
    CHECK(entropy_sum / 8.0 > 0.69);
}

TEST_CASE("aux loss values") {
    SUBCASE("perfect clipped scores") {
        std::vector<double> scores{1.0 - 1e-7, 1e-7, 1.0 - 1e-7};
        std::vector<uint8_t> labels{1, 0, 1};
        CHECK(scan_aux_loss_value(scores, labels) <= 1e-6 + 1e-6);
    }
    SUBCASE("all 0.5 scores give ln 2") {
        std::vector<double> scores(7, 0.5);
        std::vector<uint8_t> labels{1, 0, 1, 0, 1, 1, 0};
        CHECK(scan_aux_loss_value(scores, labels) == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("random scores vs random labels beat the chance bound") {
        Rng rng(607);
        std::vector<double> scores(1000);
        std::vector<uint8_t> labels(1000);
        for (int i = 0; i < 1000; ++i) {
            scores[static_cast<size_t>(i)] = rng.uniform();
            labels[static_cast<size_t>(i)] = rng.uniform() < 0.5 ? 1 : 0;
        }
        CHECK(scan_aux_loss_value(scores, labels) > std::log(2.0) - 0.1);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(scan_aux_loss_value({0.5}, {1, 0}), ShapeError);
    }
}

TEST_CASE("gradcheck through scan forward + aux loss, embedder buffers absent") {
    Rng rng(608);
    Tensor q = Tensor::randn({4, 6}, rng);
    Tensor kv = Tensor::randn({3, 6}, rng);
    std::vector<uint8_t> labels{1, 0, 0, 1};
    ParameterStore params = scan_store(6, 5, 609);
    LossFn f = [&](ParameterStore& p, GradMap* grads) {
        ComputationTape tape;
        ScanTapeOutput out = scan_forward_on_tape(tape, p, "scan.", q, kv);
        Value loss = scan_aux_loss(tape, out.aux_scores, labels);
        if (grads) {
            tape.backward(loss);
            *grads = tape.param_grads();
        }
        return tape.value(loss)[0];
    };
    GradCheckReport report = finite_diff_check(f, params, 1e-5);
    CHECK(report.max_rel_error < 1e-4);
    GradMap grads;
    f(params, &grads);
    for (auto& [name, g] : grads) CHECK(name.rfind("scan.", 0) == 0);
}

TEST_CASE("reference gain invariance: scaled segment leaves features unchanged") {
    SpeakerEmbedder emb(160, 16, 24, 610);
    emb.freeze();
    Rng rng(611);
    ReferenceSpeech ref;
    for (int k = 0; k < 2; ++k) {
        ReferenceSegment seg;
        seg.identity_id = 0;
        seg.waveform.resize(4800);
        for (auto& x : seg.waveform) x = rng.normal() * 0.2;
        ref.segments.push_back(std::move(seg));
    }
    AudioSignal audio;
    audio.sample_rate = 16000;
    audio.samples.resize(16000);
    for (auto& x : audio.samples) x = rng.normal() * 0.1;
    WindowedAudio windows = window_audio(audio, 5, 30, 1.0);

    ParameterStore store = scan_store(24, 8, 612);
    ScanOutput base = scan_forward(store, "scan.", emb, windows, ref);
    ReferenceSpeech scaled = ref;
    for (auto& x : scaled.segments[0].waveform) x *= 0.5;
    ScanOutput out = scan_forward(store, "scan.", emb, windows, scaled);
    double max_diff = 0.0;
    for (size_t i = 0; i < base.features.numel(); ++i)
        max_diff = std::max(max_diff, std::abs(base.features[i] - out.features[i]));
    CHECK(max_diff < 1e-2);
}

TEST_CASE("empty reference is an error") {
    SpeakerEmbedder emb(160, 16, 24, 613);
    emb.freeze();
    AudioSignal audio;
    audio.sample_rate = 16000;
    audio.samples.assign(16000, 0.01);
    WindowedAudio windows = window_audio(audio, 3, 30, 1.0);
    ParameterStore store = scan_store(24, 8, 614);
    CHECK_THROWS_AS(scan_forward(store, "scan.", emb, windows, ReferenceSpeech{}), ShapeError);
}

TEST_CASE("sample_reference contracts") {
    // a small synthetic library over one corpus
    CorpusConfig cfg;
    cfg.scenario.duration_s = 6.0;
    cfg.scenario.utterance_min_s = 2.6;
    cfg.scenario.utterance_max_s = 3.0;
    cfg.n_speakers_pool = 3;
    cfg.scenarios_train = 3;
    cfg.scenarios_val = 0;
    Corpus corpus = generate_corpus(cfg, 615);
    IdentitySpeechLibrary lib = build_library_oracle(corpus, 0, 2.5);
    REQUIRE_FALSE(lib.entries.empty());
    const IdentityEntry* entry = nullptr;
    for (auto& e : lib.entries)
        if (e.segments.size() >= 2) entry = &e;
    REQUIRE(entry != nullptr);

    SUBCASE("single-segment entry returns that segment for any rng") {
        const IdentityEntry* single = nullptr;
        for (auto& e : lib.entries)
            if (e.segments.size() == 1) single = &e;
        if (single) {
            Rng rng(1);
            ReferenceSpeech r = sample_reference(lib, single->identity_id, rng, 4, corpus);
            CHECK(r.segments.size() == 1);
            CHECK(r.segments[0].start_s == single->segments[0].start_s);
        }
    }
    SUBCASE("without replacement: K=2 from many gives 2 distinct") {
        Rng rng(2);
        ReferenceSpeech r = sample_reference(lib, entry->identity_id, rng, 2, corpus);
        CHECK(r.segments.size() == 2);
        const bool same = r.segments[0].scenario_id == r.segments[1].scenario_id &&
                          r.segments[0].start_s == r.segments[1].start_s;
        CHECK_FALSE(same);
    }
    SUBCASE("fixed rng seed reproduces the selection") {
        Rng r1(3), r2(3);
        ReferenceSpeech a = sample_reference(lib, entry->identity_id, r1, 3, corpus);
        ReferenceSpeech b = sample_reference(lib, entry->identity_id, r2, 3, corpus);
        REQUIRE(a.segments.size() == b.segments.size());
        for (size_t i = 0; i < a.segments.size(); ++i) {
            CHECK(a.segments[i].scenario_id == b.segments[i].scenario_id);
            CHECK(a.segments[i].start_s == b.segments[i].start_s);
        }
    }
    SUBCASE("unknown identity") {
        Rng rng(4);
        CHECK_THROWS_AS(sample_reference(lib, 999, rng, 2, corpus), ShapeError);
    }
    SUBCASE("every segment is at least the minimum duration") {
        for (auto& e : lib.entries)
            for (auto& s : e.segments) CHECK(s.duration_s() >= 2.5);
    }
}

}  // TEST_SUITE
