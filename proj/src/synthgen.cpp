#include "nowcast/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "nowcast/errors.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/preprocess.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

namespace {

// ETH ceiling bands mimicking the decreasing maximum observable altitude
// of outer radar sweeps: full height near the center, hard cutoffs with
// range. Radii scale with the grid so small demo grids band too.
double ring_ceiling(double dist, double half_extent) {
    const double rel = dist / half_extent;
    if (rel < 0.45) return 16.0;
    if (rel < 0.60) return 10.0;
    if (rel < 0.80) return 6.0;
    return 2.0;
}

}  // namespace

SynthEvent gen_event(const SynthEventParams& params) {
    if (params.rows == 0 || params.cols == 0)
        throw ArgumentError("grid must be non-empty");
    if (params.min_cells < 1 || params.max_cells < params.min_cells)
        throw ArgumentError("bad cell count range");
    if (params.sigma_min <= 0.0 || params.amplitude_min <= 0.0)
        throw ArgumentError("sigma and amplitude must be positive");

    Rng rng(params.seed);
    SynthEvent ev;
    const int n_cells =
        params.min_cells + int(rng.next_below(uint64_t(params.max_cells - params.min_cells + 1)));
    for (int i = 0; i < n_cells; ++i) {
        SynthCell cell;
        cell.center_r = rng.uniform(0.25, 0.75) * params.rows;
        cell.center_c = rng.uniform(0.25, 0.75) * params.cols;
        cell.vel_r = rng.uniform(-params.speed_max, params.speed_max);
        cell.vel_c = rng.uniform(-params.speed_max, params.speed_max);
        cell.amplitude = rng.uniform(params.amplitude_min, params.amplitude_max);
        cell.sigma = rng.uniform(params.sigma_min, params.sigma_max);
        cell.growth = rng.uniform(params.growth_min, params.growth_max);
        ev.cells.push_back(cell);
    }

    const double half_extent = 0.5 * std::min(params.rows, params.cols);
    const double mid_r = 0.5 * (params.rows - 1), mid_c = 0.5 * (params.cols - 1);

    for (int t = 0; t < params.frames; ++t) {
        const int64_t ts = params.start_timestamp + int64_t(t) * kCadenceSeconds;
        GridFrame rain = make_frame(Variable::RainMmh, ts, params.rows, params.cols);
        GridFrame eth = make_frame(Variable::EthKm, ts, params.rows, params.cols);

        std::vector<double> amp(static_cast<size_t>(n_cells));
        std::vector<double> pos_r(static_cast<size_t>(n_cells)), pos_c(static_cast<size_t>(n_cells));
        std::vector<double> inv2s2(static_cast<size_t>(n_cells));
        for (int j = 0; j < n_cells; ++j) {
            const SynthCell& cell = ev.cells[size_t(j)];
            amp[size_t(j)] = cell.amplitude * std::exp(cell.growth * t);
            pos_r[size_t(j)] = cell.center_r + cell.vel_r * t;
            pos_c[size_t(j)] = cell.center_c + cell.vel_c * t;
            inv2s2[size_t(j)] = 1.0 / (2.0 * cell.sigma * cell.sigma);
        }

        for (uint32_t r = 0; r < params.rows; ++r) {
            for (uint32_t c = 0; c < params.cols; ++c) {
                double total = 0.0, dominant = 0.0;
                int dom_cell = 0;
                for (int j = 0; j < n_cells; ++j) {
                    const double dr = double(r) - pos_r[size_t(j)];
                    const double dc = double(c) - pos_c[size_t(j)];
                    const double contrib =
                        amp[size_t(j)] * std::exp(-(dr * dr + dc * dc) * inv2s2[size_t(j)]);
                    total += contrib;
                    if (contrib > dominant) {
                        dominant = contrib;
                        dom_cell = j;
                    }
                }
                if (total < params.rain_floor) total = 0.0;
                rain.at(r, c) = float(total);

                if (total > params.eth_rain_threshold) {
                    double h = params.eth_base +
                               params.eth_gain * ev.cells[size_t(dom_cell)].growth +
                               rng.normal(0.0, params.eth_noise_sd);
                    if (params.artifact_rings) {
                        const double dr = double(r) - mid_r, dc = double(c) - mid_c;
                        h = std::min(h, ring_ceiling(std::sqrt(dr * dr + dc * dc), half_extent));
                    }
                    eth.at(r, c) = float(std::clamp(h, 0.0, 16.0));
                }
            }
        }
        ev.rain.push_back(std::move(rain));
        ev.eth.push_back(std::move(eth));
    }
    return ev;
}

DatasetPaths gen_dataset(const DatasetConfig& config, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (config.n_train_events < 1) throw ArgumentError("need at least one train event");
    if (config.n_test_events < 1)
        throw ArgumentError("need at least one test event; the last year present "
                            "becomes the test year");
    fs::create_directories(fs::path(out_dir) / "frames");

    struct EventSlot {
        int64_t start;
        uint64_t seed;
    };
    std::vector<EventSlot> slots;
    for (int i = 0; i < config.n_train_events; ++i)
        slots.push_back({config.train_start + int64_t(i) * 86400, config.seed + uint64_t(i)});
    for (int i = 0; i < config.n_test_events; ++i)
        slots.push_back({config.test_start + int64_t(i) * 86400,
                         config.seed + uint64_t(config.n_train_events + i)});

    std::vector<std::vector<std::pair<int64_t, FrameIndexEntry>>> per_event(slots.size());
    parallel_for(slots.size(), config.jobs, [&](size_t i) {
        SynthEventParams ep = config.event;
        ep.seed = slots[i].seed;
        ep.start_timestamp = slots[i].start;
        SynthEvent ev = gen_event(ep);
        for (int t = 0; t < ep.frames; ++t) {
            const int64_t ts = ev.rain[size_t(t)].timestamp;
            const std::string rain_rel = "frames/rain_" + std::to_string(ts) + ".rfgd";
            const std::string eth_rel = "frames/eth_" + std::to_string(ts) + ".rfgd";
            write_frame(ev.rain[size_t(t)], (fs::path(out_dir) / rain_rel).string());
            write_frame(ev.eth[size_t(t)], (fs::path(out_dir) / eth_rel).string());
            per_event[i].push_back({ts, {rain_rel, eth_rel}});
        }
    });

    FrameIndex index;
    index.base_dir = out_dir;
    for (const auto& frames : per_event)
        for (const auto& [ts, entry] : frames) index.entries[ts] = entry;

    DatasetPaths paths;
    paths.frames_dir = (fs::path(out_dir) / "frames").string();
    paths.index_path = (fs::path(out_dir) / "index.txt").string();
    write_frame_index(index, paths.index_path);

    // weights on the reflectivity conversion of each frame; every frame is
    // a candidate so event starts can never fall out of the top-K
    std::vector<Candidate> weighted(index.entries.size());
    std::vector<int64_t> stamps;
    stamps.reserve(index.entries.size());
    for (const auto& [ts, entry] : index.entries) stamps.push_back(ts);
    parallel_for(stamps.size(), config.jobs, [&](size_t i) {
        const GridFrame rain =
            read_frame(resolve_path(out_dir, index.entries.at(stamps[i]).rain_path));
        weighted[i] = {stamps[i], event_weight(rain_to_dbz(rain))};
    });

    SamplerConfig sampler = config.sampler;
    sampler.top_k_per_year = std::max<int>(sampler.top_k_per_year, int(stamps.size()));
    validate_sampler_config(sampler);

    std::vector<Candidate> starts = rank_candidates(weighted, sampler);
    BuildResult built = build_sequences(starts, index, sampler);
    SequenceManifest manifest = assign_folds(built.manifest, config.seed, sampler);

    // manifest rows ordered by start for byte-stable output
    std::sort(manifest.records.begin(), manifest.records.end(),
              [](const SequenceRecord& a, const SequenceRecord& b) {
                  return a.start_timestamp < b.start_timestamp;
              });

    paths.manifest_path = (fs::path(out_dir) / "manifest.tsv").string();
    write_manifest(manifest, paths.manifest_path);
    paths.n_sequences = int(manifest.records.size());
    paths.dropped = built.dropped;
    return paths;
}

}  // namespace nowcast
