#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nowcast/gridio.hpp"
#include "nowcast/sampler.hpp"

namespace nowcast {

// Generator parameters for one synthetic event. Cell growth acts
// multiplicatively on rain intensity but additively on the ETH offset, so
// the growth rate of a cell is readable from a single ETH frame while no
// single rain frame encodes it.
struct SynthEventParams {
    uint64_t seed = 1;
    uint32_t rows = 64;
    uint32_t cols = 64;
    int min_cells = 1;
    int max_cells = 4;
    int frames = 22;
    int64_t start_timestamp = 0;
    double amplitude_min = 2.0;   // mm/h
    double amplitude_max = 20.0;
    double sigma_min = 3.0;       // px
    double sigma_max = 8.0;
    double speed_max = 1.0;       // px/step, per axis
    double growth_min = -0.08;    // 1/step
    double growth_max = 0.08;
    double eth_base = 3.0;        // km
    double eth_gain = 60.0;       // km*step; ETH offset = eth_gain * growth
    double eth_noise_sd = 0.3;    // km
    double rain_floor = 0.01;     // mm/h; values below clip to 0
    double eth_rain_threshold = 0.1;  // mm/h; ETH defined where rain exceeds this
    bool artifact_rings = false;  // concentric ETH ceiling bands
};

// Ground truth of one generated cell, kept for tests and diagnostics.
struct SynthCell {
    double center_r, center_c;  // position at t=0
    double vel_r, vel_c;        // px/step
    double amplitude;           // mm/h at t=0
    double sigma;               // px
    double growth;              // 1/step
};

struct SynthEvent {
    std::vector<GridFrame> rain;  // frames rain fields, mm/h
    std::vector<GridFrame> eth;   // paired ETH fields, km
    std::vector<SynthCell> cells;
};

SynthEvent gen_event(const SynthEventParams& params);

struct DatasetConfig {
    int n_train_events = 16;
    int n_test_events = 4;
    uint64_t seed = 1;
    SynthEventParams event;         // template; per-event seed/start override
    SamplerConfig sampler;          // fold assignment etc.
    int64_t train_start = 1609502400;  // 2021-01-01T12:00:00Z, one event per day
    int64_t test_start = 1641038400;   // 2022-01-01T12:00:00Z
    int jobs = 1;
};

struct DatasetPaths {
    std::string index_path;
    std::string manifest_path;
    std::string frames_dir;
    int n_sequences = 0;
    int dropped = 0;
};

// Generates train events (one per day, first year) and test events (next
// year), writes RFGD frames plus the frame index, then runs the sampler
// chain (weights, ranking, sequence building, fold assignment) to produce
// the manifest. Event i uses seed + i.
DatasetPaths gen_dataset(const DatasetConfig& config, const std::string& out_dir);

}  // namespace nowcast
