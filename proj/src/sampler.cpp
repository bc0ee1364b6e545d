#include "nowcast/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "nowcast/errors.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

void validate_sampler_config(const SamplerConfig& config) {
    if (config.input_frames + config.output_frames != config.sequence_len)
        throw ConfigError("input_frames + output_frames must equal sequence_len");
    if (config.n_folds < 2) throw ConfigError("n_folds must be >= 2");
    if (config.top_k_per_year <= 0) throw ConfigError("top_k_per_year must be positive");
    if (config.cadence_s <= 0) throw ConfigError("cadence_s must be positive");
}

void write_frame_index(const FrameIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageError("cannot create " + path);
    for (const auto& [ts, entry] : index.entries)
        out << ts << '\t' << entry.rain_path << '\t' << entry.eth_path << '\n';
    out.flush();
    if (!out) throw StorageError("write failure on " + path);
}

FrameIndex read_frame_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open " + path);
    FrameIndex index;
    size_t slash = path.find_last_of('/');
    index.base_dir = slash == std::string::npos ? std::string() : path.substr(0, slash);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw DataError("frame index parse error at line " + std::to_string(lineno));
        int64_t ts;
        try {
            ts = std::stoll(line.substr(0, t1));
        } catch (const std::exception&) {
            throw DataError("frame index parse error at line " + std::to_string(lineno) +
                            ": bad timestamp");
        }
        FrameIndexEntry entry;
        entry.rain_path = line.substr(t1 + 1, t2 - t1 - 1);
        entry.eth_path = line.substr(t2 + 1);
        if (entry.rain_path.empty() || entry.eth_path.empty())
            throw DataError("frame index parse error at line " + std::to_string(lineno) +
                            ": empty path");
        index.entries[ts] = std::move(entry);
    }
    return index;
}

double event_weight(const GridFrame& frame) {
    if (frame.variable != Variable::ReflectivityDbz)
        throw ArgumentError("event_weight expects a reflectivity frame, got " +
                            std::string(variable_name(frame.variable)));
    double w = 0.0;
    for (float v : frame.values) {
        if (v == frame.nodata || v <= 0.0f) continue;
        w += double(v) * double(v);
    }
    return w;
}

namespace {

// Days-from-epoch to civil year, Gregorian proleptic (Hinnant's algorithm).
int year_of_days(int64_t z) {
    z += 719468;
    int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    int64_t doe = z - era * 146097;
    int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    int64_t y = yoe + era * 400;
    int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    int64_t mp = (5 * doy + 2) / 153;
    return int(y + (mp >= 10 ? 1 : 0));
}

}  // namespace

int64_t day_index_of_unix(int64_t timestamp) {
    // floor division so pre-1970 timestamps land on the right day
    int64_t d = timestamp / 86400;
    if (timestamp % 86400 < 0) --d;
    return d;
}

int year_of_unix(int64_t timestamp) {
    return year_of_days(day_index_of_unix(timestamp));
}

std::vector<Candidate> rank_candidates(const std::vector<Candidate>& weighted_frames,
                                       const SamplerConfig& config) {
    validate_sampler_config(config);
    std::map<int, std::vector<Candidate>> by_year;
    for (const Candidate& c : weighted_frames) {
        if (config.cutoff_start >= 0 && c.timestamp < config.cutoff_start) continue;
        by_year[year_of_unix(c.timestamp)].push_back(c);
    }
    std::vector<Candidate> out;
    for (auto& [year, cands] : by_year) {
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            return a.timestamp < b.timestamp;
        });
        size_t k = std::min(cands.size(), size_t(config.top_k_per_year));
        out.insert(out.end(), cands.begin(), cands.begin() + std::ptrdiff_t(k));
    }
    return out;
}

BuildResult build_sequences(const std::vector<Candidate>& starts,
                            const FrameIndex& index, const SamplerConfig& config) {
    validate_sampler_config(config);
    BuildResult result;
    for (const Candidate& start : starts) {
        SequenceRecord rec;
        rec.start_timestamp = start.timestamp;
        rec.event_weight = start.weight;
        bool complete = true;
        for (int i = 0; i < config.sequence_len; ++i) {
            int64_t ts = start.timestamp + int64_t(i) * config.cadence_s;
            auto it = index.entries.find(ts);
            if (it == index.entries.end()) {
                complete = false;
                break;
            }
            rec.rain_paths.push_back(it->second.rain_path);
            rec.eth_paths.push_back(it->second.eth_path);
        }
        if (!complete) {
            ++result.dropped;
            continue;
        }
        result.manifest.records.push_back(std::move(rec));
    }
    return result;
}

SequenceManifest assign_folds(const SequenceManifest& manifest, uint64_t seed,
                              const SamplerConfig& config) {
    validate_sampler_config(config);
    int test_year = config.test_year;
    if (test_year == 0) {
        for (const SequenceRecord& rec : manifest.records)
            test_year = std::max(test_year, year_of_unix(rec.start_timestamp));
    }

    std::set<int64_t> day_set;
    for (const SequenceRecord& rec : manifest.records) {
        if (year_of_unix(rec.start_timestamp) == test_year) continue;
        day_set.insert(day_index_of_unix(rec.start_timestamp));
    }
    if (int(day_set.size()) < config.n_folds)
        throw ConfigError("fold assignment needs at least " +
                          std::to_string(config.n_folds) + " distinct non-test days, have " +
                          std::to_string(day_set.size()));

    std::vector<int64_t> days(day_set.begin(), day_set.end());
    Rng rng(seed);
    shuffle_vec(days, rng);
    std::map<int64_t, int> fold_of_day;
    for (size_t i = 0; i < days.size(); ++i)
        fold_of_day[days[i]] = int(i % size_t(config.n_folds));

    SequenceManifest out = manifest;
    for (SequenceRecord& rec : out.records) {
        if (year_of_unix(rec.start_timestamp) == test_year)
            rec.fold = kFoldTest;
        else
            rec.fold = fold_of_day.at(day_index_of_unix(rec.start_timestamp));
    }
    return out;
}

}  // namespace nowcast
