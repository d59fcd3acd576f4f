#include <doctest.h>

#include <cmath>

#include "asd/experiment.hpp"
#include "asd/identity_library.hpp"

using namespace asd;

namespace {

Tensor unit2(double x, double y) {
    Tensor t({2}, {x, y});
    const double n = t.l2_norm();
    for (auto& v : t.data()) v /= n;
    return t;
}

}  // namespace

TEST_SUITE("library") {

TEST_CASE("aggregation: identical embeddings fuse into one identity") {
    std::vector<TrackEmbedding> e{{10, unit2(1, 0)}, {11, unit2(1, 0)}};
    IdentityClusters c = aggregate_identities(e, 0.9);
    CHECK(c.members.size() == 1);
    CHECK(c.members[0] == std::vector<int>{10, 11});
}

TEST_CASE("aggregation: orthogonal embeddings stay apart at threshold 0.9") {
    std::vector<TrackEmbedding> e{{10, unit2(1, 0)}, {11, unit2(0, 1)}};
    IdentityClusters c = aggregate_identities(e, 0.9);
    CHECK(c.members.size() == 2);
}

TEST_CASE("aggregation: hand-checkable three-track case") {
    // cos(e1,e2) ~ 0.95, e3 orthogonal to both -> {t1,t2},{t3}
    Tensor e1 = unit2(1.0, 0.0);
    Tensor e2 = unit2(1.0, std::tan(std::acos(0.95)));
    Tensor e3 = unit2(0.0, 1.0);
    CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.95));
    std::vector<TrackEmbedding> e{{1, e1}, {2, e2}, {3, e3}};
    IdentityClusters c = aggregate_identities(e, 0.9);
    REQUIRE(c.members.size() == 2);
    CHECK(c.members[0] == std::vector<int>{1, 2});
    CHECK(c.members[1] == std::vector<int>{3});
}

TEST_CASE("aggregation idempotence on its own centroids") {
    Rng rng(900);
    std::vector<TrackEmbedding> e;
    for (int i = 0; i < 12; ++i) {
        Tensor v = Tensor::randn({6}, rng);
        const double n = v.l2_norm();
        for (auto& x : v.data()) x /= n;
        e.push_back({i, v});
    }
    IdentityClusters first = aggregate_identities(e, 0.6);
    std::vector<TrackEmbedding> centroids;
    for (size_t i = 0; i < first.centroids.size(); ++i)
        centroids.push_back({static_cast<int>(i), first.centroids[i]});
    IdentityClusters second = aggregate_identities(centroids, 0.6);
    CHECK(second.members.size() == first.members.size());
}

TEST_CASE("union-find mode matches centroid mode on well-separated data") {
    std::vector<TrackEmbedding> e{{1, unit2(1, 0)},  {2, unit2(0.999, 0.04)},
                                  {3, unit2(0, 1)},  {4, unit2(0.03, 0.999)},
                                  {5, unit2(-1, 0)}, {6, unit2(-0.999, -0.04)}};
    IdentityClusters a = aggregate_identities(e, 0.9, AggregationMode::Centroid);
    IdentityClusters b = aggregate_identities(e, 0.9, AggregationMode::UnionFind);
    CHECK(a.members.size() == 3);
    CHECK(b.members.size() == 3);
}

TEST_CASE("threshold bounds are enforced") {
    std::vector<TrackEmbedding> e{{1, unit2(1, 0)}};
    CHECK_THROWS_AS(aggregate_identities(e, -1.5), ConfigError);
    CHECK_THROWS_AS(aggregate_identities(e, 1.5), ConfigError);
}

TEST_CASE("build_library: segment rules and speechless flag") {
    CorpusConfig cfg;
    cfg.scenario.duration_s = 8.0;
    cfg.scenario.utterance_min_s = 1.0;
    cfg.scenario.utterance_max_s = 3.4;
    cfg.n_speakers_pool = 3;
    cfg.scenarios_train = 4;
    cfg.scenarios_val = 0;
    Corpus corpus = generate_corpus(cfg, 901);
    IdentitySpeechLibrary lib = build_library_oracle(corpus, 0, 2.5);

    SUBCASE("every kept segment is >= 2.5 s") {
        for (auto& e : lib.entries)
            for (auto& s : e.segments) CHECK(s.duration_s() >= 2.5);
    }
    SUBCASE("library segments partition the corpus's long diarised segments") {
        size_t long_segments = 0;
        for (auto& sc : corpus.scenarios) {
            std::vector<int> tracked;
            for (auto& tr : sc.tracks) tracked.push_back(tr.speaker_id);
            for (auto& u : sc.diarised)
                if (u.end_s - u.start_s >= 2.5 &&
                    std::find(tracked.begin(), tracked.end(), u.speaker_id) != tracked.end())
                    ++long_segments;
        }
        size_t in_library = 0;
        for (auto& e : lib.entries) in_library += e.segments.size();
        CHECK(in_library == long_segments);
    }
    SUBCASE("member counts follow the generator's tracks") {
        size_t members = 0;
        for (auto& e : lib.entries) members += e.member_tracks.size();
        size_t tracks = 0;
        for (auto& sc : corpus.scenarios) tracks += sc.tracks.size();
        CHECK(members == tracks);
    }
    SUBCASE("short-speech identities are flagged speechless, not dropped") {
        IdentitySpeechLibrary strict = build_library_oracle(corpus, 0, 1e6);
        CHECK(strict.entries.size() == lib.entries.size());
        for (auto& e : strict.entries) {
            CHECK(e.speechless);
            CHECK(e.segments.empty());
        }
    }
}

TEST_CASE("every member track is assigned to exactly one identity") {
    CorpusConfig cfg;
    cfg.scenario.duration_s = 6.0;
    cfg.n_speakers_pool = 4;
    cfg.scenarios_train = 3;
    cfg.scenarios_val = 0;
    Corpus corpus = generate_corpus(cfg, 902);
    IdentitySpeechLibrary lib = build_library_oracle(corpus, 0, 2.5);
    std::map<int, int> seen;
    for (auto& e : lib.entries)
        for (int t : e.member_tracks) seen[t]++;
    for (auto& [track, count] : seen) CHECK(count == 1);
    for (auto& sc : corpus.scenarios)
        for (auto& tr : sc.tracks) CHECK(seen.count(tr.track_id) == 1);
}

TEST_CASE("library persistence round-trips exactly") {
    CorpusConfig cfg;
    cfg.scenario.duration_s = 6.0;
    cfg.n_speakers_pool = 3;
    cfg.scenarios_train = 2;
    cfg.scenarios_val = 0;
    Corpus corpus = generate_corpus(cfg, 903);
    IdentitySpeechLibrary lib = build_library_oracle(corpus, 0, 2.5);
    // attach a centroid so the hex path is exercised
    Rng rng(904);
    for (auto& e : lib.entries) {
        e.centroid = Tensor::randn({8}, rng);
        const double n = e.centroid.l2_norm();
        for (auto& v : e.centroid.data()) v /= n;
    }
    const std::string text = serialize_library(lib);
    IdentitySpeechLibrary back = deserialize_library(text);
    CHECK(serialize_library(back) == text);
    REQUIRE(back.entries.size() == lib.entries.size());
    for (size_t i = 0; i < lib.entries.size(); ++i) {
        CHECK(back.entries[i].member_tracks == lib.entries[i].member_tracks);
        CHECK(back.entries[i].centroid == lib.entries[i].centroid);
        REQUIRE(back.entries[i].segments.size() == lib.entries[i].segments.size());
        for (size_t s = 0; s < lib.entries[i].segments.size(); ++s) {
            CHECK(back.entries[i].segments[s].start_s == lib.entries[i].segments[s].start_s);
            CHECK(back.entries[i].segments[s].end_s == lib.entries[i].segments[s].end_s);
        }
    }
    SUBCASE("truncated file is rejected") {
        CHECK_THROWS_AS(deserialize_library(text.substr(0, text.size() - 5)), IoError);
    }
    SUBCASE("bad magic is rejected") {
        CHECK_THROWS_AS(deserialize_library("WRONG 1\nend\n"), IoError);
    }
}

TEST_CASE("libraries_equivalent compares partitions and segments") {
    CorpusConfig cfg;
    cfg.scenario.duration_s = 6.0;
    cfg.n_speakers_pool = 3;
    cfg.scenarios_train = 2;
    cfg.scenarios_val = 0;
    Corpus corpus = generate_corpus(cfg, 905);
    IdentitySpeechLibrary a = build_library_oracle(corpus, 0, 2.5);
    IdentitySpeechLibrary b = build_library_oracle(corpus, 0, 2.5);
    // relabel identities: equivalence must survive
    std::reverse(b.entries.begin(), b.entries.end());
    for (size_t i = 0; i < b.entries.size(); ++i) b.entries[i].identity_id = 100 + (int)i;
    CHECK(libraries_equivalent(a, b));
    if (a.entries.size() > 1) {
        // moving a track across identities breaks equivalence
        IdentitySpeechLibrary c = build_library_oracle(corpus, 0, 2.5);
        int moved = c.entries[0].member_tracks.back();
        c.entries[0].member_tracks.pop_back();
        c.entries[1].member_tracks.push_back(moved);
        CHECK_FALSE(libraries_equivalent(a, c));
    }
}

}  // TEST_SUITE
