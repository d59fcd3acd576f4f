#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "asd/face_model.hpp"
#include "asd/gradcheck.hpp"

using namespace asd;

namespace {

Track make_track(int id, int speaker, int T, int hw, Rng& rng) {
    Track tr;
    tr.track_id = id;
    tr.speaker_id = speaker;
    tr.fps = 30;
    tr.frames = Tensor::randn({T, hw, hw}, rng, 0.3);
    tr.frame_labels.assign(static_cast<size_t>(T), 0);
    tr.corruption_mask.assign(static_cast<size_t>(T), 0);
    return tr;
}

FaceModelConfig tiny_face_cfg() {
    FaceModelConfig cfg;
    cfg.frame_dim = 8;
    cfg.model_dim = 8;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.ff_dim = 12;
    return cfg;
}

CorpusConfig face_corpus_cfg() {
    CorpusConfig cfg;
    cfg.scenario.duration_s = 6.0;
    cfg.scenario.occlusion_rate = 0.1;
    cfg.n_speakers_pool = 4;
    cfg.scenarios_train = 4;
    cfg.scenarios_val = 2;
    return cfg;
}

}  // namespace

TEST_SUITE("face") {

TEST_CASE("pollution: rate zero returns the parent, mask all native") {
    Rng rng(800);
    Track parent = make_track(1, 0, 10, 4, rng);
    Track other = make_track(2, 1, 10, 4, rng);
    PollutedTrack out = pollute_track(parent, {&other}, 0.0, 5);
    CHECK(out.frames == parent.frames);
    for (uint8_t m : out.native_mask) CHECK(m == 1);
}

TEST_CASE("pollution: T=10 at rate 0.3 inserts 3 frames, length 13") {
    Rng rng(801);
    Track parent = make_track(1, 0, 10, 4, rng);
    Track other = make_track(2, 1, 20, 4, rng);
    PollutedTrack out = pollute_track(parent, {&other}, 0.3, 6);
    CHECK(out.frames.extent(0) == 13);
    int impostors = 0;
    for (uint8_t m : out.native_mask) impostors += m ? 0 : 1;
    CHECK(impostors == 3);
    CHECK(out.impostor_track_ids.size() == 3);
}

TEST_CASE("pollution round trip: removing impostor slots recovers the parent") {
    Rng rng(802);
    for (int trial = 0; trial < 1000; ++trial) {
        const int T = 4 + rng.uniform_int(12);
        Track parent = make_track(1, 0, T, 4, rng);
        Track other = make_track(2, 1, 8, 4, rng);
        const double rate = rng.uniform(0.0, 1.0);
        PollutedTrack out = pollute_track(parent, {&other}, rate, rng.next_u64());
        const int px = 16;
        int native = 0;
        for (int slot = 0; slot < out.frames.extent(0); ++slot) {
            if (!out.native_mask[static_cast<size_t>(slot)]) continue;
            for (int p = 0; p < px; ++p)
                REQUIRE(out.frames.data()[static_cast<size_t>(slot) * px + p] ==
                        parent.frames.data()[static_cast<size_t>(native) * px + p]);
            ++native;
        }
        REQUIRE(native == T);
    }
}

TEST_CASE("pollution: empty pool with positive rate is an error") {
    Rng rng(803);
    Track parent = make_track(1, 0, 10, 4, rng);
    CHECK_THROWS_AS(pollute_track(parent, {}, 0.3, 7), ShapeError);
}

TEST_CASE("single-frame forward works; attention over one frame is identity mixing") {
    Rng rng(804);
    FaceModel model(16, tiny_face_cfg(), 805);
    Track tr = make_track(1, 0, 1, 4, rng);
    VbfrOutput out = model.forward(tr);
    CHECK(out.impostor_prob.size() == 1);
    CHECK(out.last_states.rows() == 1);
}

TEST_CASE("permutation equivariance without positional encoding") {
    Rng rng(806);
    FaceModel model(16, tiny_face_cfg(), 807);
    Track tr = make_track(1, 0, 6, 4, rng);
    VbfrOutput base = model.forward(tr);
    // reverse the frames
    Track reversed = tr;
    const int px = 16;
    for (int t = 0; t < 6; ++t)
        for (int p = 0; p < px; ++p)
            reversed.frames.data()[static_cast<size_t>(t) * px + p] =
                tr.frames.data()[static_cast<size_t>(5 - t) * px + p];
    VbfrOutput perm = model.forward(reversed);
    for (int t = 0; t < 6; ++t) {
        CHECK(perm.impostor_prob[static_cast<size_t>(t)] ==
              doctest::Approx(base.impostor_prob[static_cast<size_t>(5 - t)]).epsilon(1e-10));
        for (int j = 0; j < 8; ++j)
            CHECK(perm.last_states(t, j) ==
                  doctest::Approx(base.last_states(5 - t, j)).epsilon(1e-10));
    }
}

TEST_CASE("identity embedding properties") {
    Rng rng(808);
    FaceModel model(16, tiny_face_cfg(), 809);
    SUBCASE("identical frames: embedding equals the single-frame state") {
        Track tr = make_track(1, 0, 5, 4, rng);
        const int px = 16;
        for (int t = 1; t < 5; ++t)
            for (int p = 0; p < px; ++p)
                tr.frames.data()[static_cast<size_t>(t) * px + p] =
                    tr.frames.data()[static_cast<size_t>(p)];
        Track single = tr;
        single.frames = Tensor({1, 4, 4});
        for (int p = 0; p < px; ++p) single.frames.data()[static_cast<size_t>(p)] =
            tr.frames.data()[static_cast<size_t>(p)];
        single.frame_labels.assign(1, 0);
        single.corruption_mask.assign(1, 0);
        Tensor a = model.identity_embedding(tr);
        Tensor b = model.identity_embedding(single);
        for (size_t j = 0; j < a.numel(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-10));
    }
    SUBCASE("frame permutation leaves the embedding unchanged") {
        Track tr = make_track(1, 0, 7, 4, rng);
        Track shuffled = tr;
        const int px = 16;
        std::vector<int> perm{3, 0, 6, 1, 5, 2, 4};
        for (int t = 0; t < 7; ++t)
            for (int p = 0; p < px; ++p)
                shuffled.frames.data()[static_cast<size_t>(t) * px + p] =
                    tr.frames.data()[static_cast<size_t>(perm[t]) * px + p];
        Tensor a = model.identity_embedding(tr);
        Tensor b = model.identity_embedding(shuffled);
        for (size_t j = 0; j < a.numel(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-10));
    }
    SUBCASE("unit norm") {
        Track tr = make_track(1, 0, 5, 4, rng);
        CHECK(std::abs(model.identity_embedding(tr).l2_norm() - 1.0) < 1e-9);
    }
    SUBCASE("empty track is an error") {
        Track tr;
        CHECK_THROWS_AS(model.identity_embedding(tr), ShapeError);
    }
}

TEST_CASE("transformer stack passes the finite-difference gradient check") {
    FaceModelConfig cfg = tiny_face_cfg();
    FaceModel model(9, cfg, 810);
    Rng rng(811);
    Tensor frames = Tensor::randn({4, 9}, rng, 0.4);
    Tensor targets({4, 1}, {1.0, 0.0, 1.0, 1.0});
    LossFn f = [&](ParameterStore& p, GradMap* grads) {
        FaceModel local = FaceModel::from_params(p, 9, cfg);
        ComputationTape tape;
        auto out = local.forward_on_tape(tape, frames);
        Value loss = tape.bce_mean(out.native_probs, tape.leaf(targets));
        if (grads) {
            tape.backward(loss);
            *grads = tape.param_grads();
        }
        return tape.value(loss)[0];
    };
    GradCheckReport report = finite_diff_check(f, model.params(), 1e-5);
    CAPTURE(report.worst_param);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("vbfr_train: heldout accuracy, inversion control, determinism") {
    Corpus corpus = generate_corpus(face_corpus_cfg(), 812);
    FaceModelConfig mcfg;  // default desk-scale 4x8x32
    VbfrTrainConfig tcfg;
    tcfg.steps = 350;
    tcfg.crop_frames = 80;

    FaceModel model(256, mcfg, 813);
    VbfrTrainReport report = vbfr_train(model, corpus, tcfg, 814);
    CHECK(report.heldout_frame_accuracy >= 0.9);
    CHECK(report.final_loss < report.initial_loss);

    SUBCASE("same seed reproduces parameters exactly") {
        FaceModel again(256, mcfg, 813);
        vbfr_train(again, corpus, tcfg, 814);
        CHECK(again.params() == model.params());
    }
}

TEST_CASE("vbfr_train rejects single-identity corpora") {
    CorpusConfig cfg = face_corpus_cfg();
    cfg.n_speakers_pool = 1;
    cfg.scenario.n_speakers = 1;
    Corpus corpus = generate_corpus(cfg, 815);
    FaceModel model(256, tiny_face_cfg(), 816);
    VbfrTrainConfig tcfg;
    tcfg.steps = 5;
    CHECK_THROWS_AS(vbfr_train(model, corpus, tcfg, 817), ShapeError);
}

TEST_CASE("face model checkpoint round trip") {
    FaceModel model(16, tiny_face_cfg(), 818);
    const std::string path = "/tmp/asd_test_face.ckpt";
    save_face_model(path, model);
    FaceModel back = load_face_model(path);
    CHECK(back.params() == model.params());
    CHECK(back.config().layers == 2);
    std::remove(path.c_str());
}

}  // TEST_SUITE
