#include "asd/identity_library.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "asd/checkpoint.hpp"
#include "asd/errors.hpp"

namespace asd {

namespace {

Tensor normalized_mean(const std::vector<const Tensor*>& members) {
    Tensor sum(members.front()->shape());
    for (const Tensor* m : members)
        for (size_t i = 0; i < sum.numel(); ++i) sum[i] += (*m)[i];
    const double norm = sum.l2_norm();
    if (norm > 1e-12)
        for (auto& x : sum.data()) x /= norm;
    return sum;
}

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(size_t n) : parent(n) {
        for (size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
    }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

const IdentityEntry* IdentitySpeechLibrary::find(int identity_id) const {
    for (auto& e : entries)
        if (e.identity_id == identity_id) return &e;
    return nullptr;
}

const IdentityEntry* IdentitySpeechLibrary::find_by_track(int track_id) const {
    for (auto& e : entries)
        for (int t : e.member_tracks)
            if (t == track_id) return &e;
    return nullptr;
}

const IdentityEntry* IdentitySpeechLibrary::usable_by_track(int track_id) const {
    const IdentityEntry* e = find_by_track(track_id);
    return (e && !e->speechless && !e->segments.empty()) ? e : nullptr;
}

IdentityClusters aggregate_identities(const std::vector<TrackEmbedding>& embeddings,
                                      double threshold, AggregationMode mode) {
    if (threshold <= -1.0 || threshold > 1.0)
        throw ConfigError("aggregation threshold must lie in (-1, 1]");
    IdentityClusters out;
    if (embeddings.empty()) return out;

    if (mode == AggregationMode::Centroid) {
        std::vector<std::vector<const Tensor*>> member_embeddings;
        for (auto& te : embeddings) {
            int best = -1;
            double best_sim = -2.0;
            for (size_t c = 0; c < out.centroids.size(); ++c) {
                const double sim = cosine_similarity(te.embedding, out.centroids[c]);
                if (sim > best_sim) {
                    best_sim = sim;
                    best = static_cast<int>(c);
                }
            }
            if (best >= 0 && best_sim >= threshold) {
                out.members[best].push_back(te.track_id);
                member_embeddings[best].push_back(&te.embedding);
                out.centroids[best] = normalized_mean(member_embeddings[best]);
            } else {
                out.members.push_back({te.track_id});
                member_embeddings.push_back({&te.embedding});
                out.centroids.push_back(te.embedding);
            }
        }
        return out;
    }

    // Union-find over all pairs at or above threshold.
    DisjointSet ds(embeddings.size());
    for (size_t i = 0; i < embeddings.size(); ++i)
        for (size_t j = i + 1; j < embeddings.size(); ++j)
            if (cosine_similarity(embeddings[i].embedding, embeddings[j].embedding) >= threshold)
                ds.unite(static_cast<int>(i), static_cast<int>(j));
    std::vector<int> root_to_cluster(embeddings.size(), -1);
    std::vector<std::vector<const Tensor*>> member_embeddings;
    for (size_t i = 0; i < embeddings.size(); ++i) {
        const int root = ds.find(static_cast<int>(i));
        if (root_to_cluster[root] < 0) {
            root_to_cluster[root] = static_cast<int>(out.members.size());
            out.members.emplace_back();
            member_embeddings.emplace_back();
        }
        const int c = root_to_cluster[root];
        out.members[c].push_back(embeddings[i].track_id);
        member_embeddings[c].push_back(&embeddings[i].embedding);
    }
    for (auto& me : member_embeddings) out.centroids.push_back(normalized_mean(me));
    return out;
}

IdentitySpeechLibrary build_library(const IdentityClusters& clusters, const Corpus& corpus,
                                    double min_duration_s, double threshold) {
    IdentitySpeechLibrary lib;
    lib.min_segment_s = min_duration_s;
    lib.threshold = threshold;
    for (size_t c = 0; c < clusters.members.size(); ++c) {
        IdentityEntry entry;
        entry.identity_id = static_cast<int>(c);
        if (c < clusters.centroids.size()) entry.centroid = clusters.centroids[c];
        entry.member_tracks = clusters.members[c];
        for (int track_id : entry.member_tracks) {
            const Track* tr = corpus.find_track(track_id);
            if (!tr) throw ShapeError("library cluster references unknown track " +
                                      std::to_string(track_id));
            // locate the track's scenario
            for (auto& sc : corpus.scenarios) {
                bool here = false;
                for (auto& t : sc.tracks)
                    if (t.track_id == track_id) here = true;
                if (!here) continue;
                for (auto& u : sc.diarised) {
                    if (u.speaker_id != tr->speaker_id) continue;
                    if (u.end_s - u.start_s < min_duration_s) continue;
                    LibrarySegmentRef ref{sc.scenario_id, u.start_s, u.end_s};
                    const bool dup = std::any_of(
                        entry.segments.begin(), entry.segments.end(), [&](const auto& s) {
                            return s.scenario_id == ref.scenario_id && s.start_s == ref.start_s &&
                                   s.end_s == ref.end_s;
                        });
                    if (!dup) entry.segments.push_back(ref);
                }
            }
        }
        entry.speechless = entry.segments.empty();
        lib.entries.push_back(std::move(entry));
    }
    return lib;
}

IdentitySpeechLibrary build_library_oracle(const Corpus& corpus, int split,
                                           double min_duration_s) {
    // Clusters keyed by generator speaker id, in speaker-id order.
    std::vector<std::pair<int, std::vector<int>>> by_speaker;
    for (auto& sc : corpus.scenarios) {
        if (sc.split != split) continue;
        for (auto& tr : sc.tracks) {
            auto it = std::find_if(by_speaker.begin(), by_speaker.end(),
                                   [&](auto& p) { return p.first == tr.speaker_id; });
            if (it == by_speaker.end())
                by_speaker.push_back({tr.speaker_id, {tr.track_id}});
            else
                it->second.push_back(tr.track_id);
        }
    }
    std::sort(by_speaker.begin(), by_speaker.end(),
              [](auto& a, auto& b) { return a.first < b.first; });
    IdentityClusters clusters;
    for (auto& [spk, tracks] : by_speaker) clusters.members.push_back(tracks);
    return build_library(clusters, corpus, min_duration_s);
}

ReferenceSegment materialize_segment(const Corpus& corpus, int identity_id,
                                     const LibrarySegmentRef& ref) {
    const Scenario& sc = corpus.scenario_by_id(ref.scenario_id);
    const int sr = sc.mixed_audio.sample_rate;
    const auto n = static_cast<long long>(sc.mixed_audio.samples.size());
    long long s0 = std::max(0LL, std::llround(ref.start_s * sr));
    long long s1 = std::min(n, std::llround(ref.end_s * sr));
    ReferenceSegment seg;
    seg.identity_id = identity_id;
    seg.scenario_id = ref.scenario_id;
    seg.start_s = ref.start_s;
    seg.end_s = ref.end_s;
    seg.waveform.assign(sc.mixed_audio.samples.begin() + s0, sc.mixed_audio.samples.begin() + s1);
    return seg;
}

ReferenceSpeech sample_reference(const IdentitySpeechLibrary& library, int identity_id, Rng& rng,
                                 int max_segments, const Corpus& corpus) {
    const IdentityEntry* entry = library.find(identity_id);
    if (!entry) throw ShapeError("unknown identity " + std::to_string(identity_id));
    if (entry->segments.empty())
        throw ShapeError("identity " + std::to_string(identity_id) + " has no reference speech");
    const int avail = static_cast<int>(entry->segments.size());
    const int k = std::min(max_segments, avail);
    ReferenceSpeech out;
    for (int i : rng.sample_without_replacement(avail, k))
        out.segments.push_back(materialize_segment(corpus, identity_id, entry->segments[i]));
    return out;
}

std::string serialize_library(const IdentitySpeechLibrary& lib) {
    std::ostringstream out;
    out << "ASDLIB 1\n";
    out << "min_segment_s " << double_to_hex(lib.min_segment_s) << "\n";
    out << "threshold " << double_to_hex(lib.threshold) << "\n";
    for (auto& e : lib.entries) {
        out << "entry " << e.identity_id << " " << (e.speechless ? 1 : 0) << "\n";
        out << "centroid " << e.centroid.numel();
        for (double v : e.centroid.data()) out << " " << double_to_hex(v);
        out << "\n";
        out << "members " << e.member_tracks.size();
        for (int t : e.member_tracks) out << " " << t;
        out << "\n";
        for (auto& s : e.segments)
            out << "segment " << s.scenario_id << " " << double_to_hex(s.start_s) << " "
                << double_to_hex(s.end_s) << "\n";
    }
    out << "end\n";
    return out.str();
}

IdentitySpeechLibrary deserialize_library(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "ASDLIB 1")
        throw IoError("library file: bad magic or unsupported version");
    IdentitySpeechLibrary lib;
    bool saw_end = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "min_segment_s") {
            std::string h;
            ls >> h;
            lib.min_segment_s = hex_to_double(h);
        } else if (kind == "threshold") {
            std::string h;
            ls >> h;
            lib.threshold = hex_to_double(h);
        } else if (kind == "entry") {
            IdentityEntry e;
            int speechless;
            ls >> e.identity_id >> speechless;
            e.speechless = speechless != 0;
            lib.entries.push_back(std::move(e));
        } else if (kind == "centroid") {
            if (lib.entries.empty()) throw IoError("library file: centroid before entry");
            size_t n;
            ls >> n;
            if (n > 0) {
                Tensor c({static_cast<int>(n)});
                for (size_t i = 0; i < n; ++i) {
                    std::string h;
                    ls >> h;
                    c[i] = hex_to_double(h);
                }
                lib.entries.back().centroid = std::move(c);
            }
        } else if (kind == "members") {
            if (lib.entries.empty()) throw IoError("library file: members before entry");
            size_t n;
            ls >> n;
            for (size_t i = 0; i < n; ++i) {
                int t;
                ls >> t;
                lib.entries.back().member_tracks.push_back(t);
            }
        } else if (kind == "segment") {
            if (lib.entries.empty()) throw IoError("library file: segment before entry");
            LibrarySegmentRef s{};
            std::string h0, h1;
            ls >> s.scenario_id >> h0 >> h1;
            s.start_s = hex_to_double(h0);
            s.end_s = hex_to_double(h1);
            lib.entries.back().segments.push_back(s);
        } else if (kind == "end") {
            saw_end = true;
            break;
        } else if (!kind.empty()) {
            throw IoError("library file: unknown line '" + kind + "'");
        }
    }
    if (!saw_end) throw IoError("library file: truncated (missing end marker)");
    return lib;
}

void save_library(const std::string& path, const IdentitySpeechLibrary& library) {
    write_file(path, serialize_library(library));
}

IdentitySpeechLibrary load_library(const std::string& path) {
    return deserialize_library(read_file(path));
}

}  // namespace asd
