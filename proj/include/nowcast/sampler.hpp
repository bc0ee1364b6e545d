#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nowcast/gridio.hpp"

namespace nowcast {

struct SamplerConfig {
    int top_k_per_year = 1000;
    int sequence_len = 22;
    int64_t cadence_s = 300;
    int input_frames = 4;
    int output_frames = 18;
    int n_folds = 8;
    int test_year = 0;                      // 0 = last year present in the index
    int64_t cutoff_start = 1475280000;      // 2016-10-01T00:00:00Z; <0 disables
};

void validate_sampler_config(const SamplerConfig& config);

// Maps frame timestamps to the rain/ETH file pair for that instant.
struct FrameIndexEntry {
    std::string rain_path;
    std::string eth_path;
};

struct FrameIndex {
    std::map<int64_t, FrameIndexEntry> entries;
    std::string base_dir;  // directory the index file lives in, for relative paths
};

// Text format, one line per timestamp: unix<TAB>rain_path<TAB>eth_path.
void write_frame_index(const FrameIndex& index, const std::string& path);
FrameIndex read_frame_index(const std::string& path);

// w = sum over pixels of max(dBZ, 0)^2; nodata contributes 0.
double event_weight(const GridFrame& frame);

struct Candidate {
    int64_t timestamp;
    double weight;
};

// Per calendar year (UTC), the K highest-weight timestamps in descending
// weight order, ties broken by earlier timestamp. Frames before
// cutoff_start are excluded.
std::vector<Candidate> rank_candidates(const std::vector<Candidate>& weighted_frames,
                                       const SamplerConfig& config);

struct BuildResult {
    SequenceManifest manifest;
    int dropped = 0;  // candidate starts lacking a complete 22-frame run
};

BuildResult build_sequences(const std::vector<Candidate>& starts,
                            const FrameIndex& index, const SamplerConfig& config);

// Labels test-year sequences TEST, groups the rest by UTC calendar day of
// their start, shuffles the days with the seed, and deals them round-robin
// into n_folds folds.
SequenceManifest assign_folds(const SequenceManifest& manifest, uint64_t seed,
                              const SamplerConfig& config);

int year_of_unix(int64_t timestamp);
int64_t day_index_of_unix(int64_t timestamp);

}  // namespace nowcast
