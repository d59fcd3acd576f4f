#pragma once

#include <string>
#include <vector>

#include "asd/corpus.hpp"
#include "asd/speaker_embedder.hpp"
#include "asd/tensor.hpp"

namespace asd {

struct LibrarySegmentRef {
    int scenario_id;
    double start_s;
    double end_s;
    double duration_s() const { return end_s - start_s; }
};

struct IdentityEntry {
    int identity_id = -1;
    Tensor centroid;  // unit norm; empty for oracle-built entries
    std::vector<int> member_tracks;
    std::vector<LibrarySegmentRef> segments;  // each >= the library minimum
    bool speechless = false;                  // enrolled but no usable speech
};

// Mapping from enrolled identities to their reference speech segments.
// Every member track belongs to exactly one identity.
struct IdentitySpeechLibrary {
    double min_segment_s = 2.5;
    double threshold = 0.9;
    std::vector<IdentityEntry> entries;

    const IdentityEntry* find(int identity_id) const;
    const IdentityEntry* find_by_track(int track_id) const;
    // Identity usable for SCAN: enrolled, not speechless.
    const IdentityEntry* usable_by_track(int track_id) const;
};

struct TrackEmbedding {
    int track_id;
    Tensor embedding;  // unit norm
};

struct IdentityClusters {
    std::vector<std::vector<int>> members;  // track ids per cluster
    std::vector<Tensor> centroids;          // unit norm, may be empty for oracle clusters
};

enum class AggregationMode { Centroid, UnionFind };

// Incremental enrollment in input order: join the existing identity whose
// centroid similarity is highest and >= threshold (centroid = renormalized
// running mean), otherwise open a new identity. UnionFind mode instead
// links every pair with similarity >= threshold and takes components.
IdentityClusters aggregate_identities(const std::vector<TrackEmbedding>& embeddings,
                                      double threshold = 0.9,
                                      AggregationMode mode = AggregationMode::Centroid);

// Attach each identity's diarised speech: for every member track, the
// segments spoken by that track's candidate in its scenario, dropping those
// shorter than min_duration_s. Identities left with no segments stay
// enrolled but are flagged speechless.
IdentitySpeechLibrary build_library(const IdentityClusters& clusters, const Corpus& corpus,
                                    double min_duration_s = 2.5, double threshold = 0.9);

// Ground-truth variant: clusters taken from the generator's speaker ids
// over the given split's tracks.
IdentitySpeechLibrary build_library_oracle(const Corpus& corpus, int split,
                                           double min_duration_s = 2.5);

// Waveform slice for a library segment, cut from the scenario's mixed audio.
ReferenceSegment materialize_segment(const Corpus& corpus, int identity_id,
                                     const LibrarySegmentRef& ref);

// Uniform sample without replacement of min(max_segments, available)
// segments for an enrolled identity; deterministic given the rng state.
ReferenceSpeech sample_reference(const IdentitySpeechLibrary& library, int identity_id, Rng& rng,
                                 int max_segments, const Corpus& corpus);

// Structured-text persistence with base-16 doubles; round-trips exactly.
void save_library(const std::string& path, const IdentitySpeechLibrary& library);
IdentitySpeechLibrary load_library(const std::string& path);
std::string serialize_library(const IdentitySpeechLibrary& library);
IdentitySpeechLibrary deserialize_library(const std::string& text);

}  // namespace asd
