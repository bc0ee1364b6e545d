#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nowcast/gridio.hpp"

namespace nowcast {

// Metrics can be undefined (empty denominators, no valid pixels); the
// reason travels with the value instead of letting NaN leak into means.
struct MetricValue {
    double value = 0.0;
    bool defined = false;
    std::string reason;  // set when undefined

    static MetricValue of(double v) { return {v, true, {}}; }
    static MetricValue undefined(std::string why) { return {0.0, false, std::move(why)}; }
};

struct PixelMetrics {
    MetricValue mae, mse, me;
    uint64_t valid_pixels = 0;
};

struct ContingencyTable {
    uint64_t hits = 0;
    uint64_t misses = 0;
    uint64_t false_alarms = 0;
    uint64_t correct_negatives = 0;
    double threshold = 0.0;

    uint64_t total() const { return hits + misses + false_alarms + correct_negatives; }
    ContingencyTable& operator+=(const ContingencyTable& other);
};

struct VerifyConfig {
    std::vector<double> categorical_thresholds = {0.1, 1.0, 2.5, 5.0};  // mm/h
    std::vector<double> fss_thresholds = {0.1, 1.0, 2.5, 5.0, 10.0};    // mm/h
    std::vector<int> fss_radii = {1, 4, 16};                            // pixels
    std::vector<int> fss_report_leads_min = {20, 40, 60, 80};           // minutes
};

void validate_verify_config(const VerifyConfig& config);

// MAE/MSE/ME over pairwise-valid pixels; undefined when none are valid.
PixelMetrics pixel_metrics(const GridFrame& pred, const GridFrame& obs);

// Event = value > threshold, counted over pairwise-valid pixels.
ContingencyTable contingency(const GridFrame& pred, const GridFrame& obs,
                             double threshold);

MetricValue precision(const ContingencyTable& t);
MetricValue recall(const ContingencyTable& t);
MetricValue equitable_threat_score(const ContingencyTable& t);

// Fractions skill score: binarize both fields at the threshold, take
// neighborhood fractions over (2r+1)^2 windows with border-clipped area
// normalization (summed-area tables inside), then
// FSS = 1 - sum((Pf-Po)^2) / (sum(Pf^2) + sum(Po^2)).
MetricValue fss(const GridFrame& pred, const GridFrame& obs, double threshold,
                int radius);

// Neighborhood fraction field of a binary event grid; exposed so the naive
// oracle in the tests can pin the exact definition.
std::vector<double> fraction_field(const GridFrame& frame, double threshold, int radius);

struct JointHistogram {
    std::vector<double> edges_a;  // strictly increasing bin edges
    std::vector<double> edges_b;
    std::vector<uint64_t> counts;  // (len_a-1) x (len_b-1), row-major in a
    uint64_t overflow = 0;         // valid pairs outside the bin ranges
    uint64_t total_pairs = 0;      // valid (both non-nodata) pixel pairs

    uint64_t at(size_t ia, size_t ib) const {
        return counts[ia * (edges_b.size() - 1) + ib];
    }
};

// Counts co-occurring valid pixel pairs of two paired frame lists; value v
// lands in bin i when edge[i] <= v < edge[i+1].
JointHistogram joint_histogram(const std::vector<GridFrame>& frames_a,
                               const std::vector<GridFrame>& frames_b,
                               const std::vector<double>& edges_a,
                               const std::vector<double>& edges_b);

void write_joint_histogram(const JointHistogram& hist, const std::string& path);

// Per-lead metric series for one model/metric/threshold/radius combination.
struct MetricCurve {
    std::string metric;
    double threshold = -1.0;  // <0 = not applicable
    int radius = -1;          // <0 = not applicable
    std::vector<MetricValue> values;  // indexed by lead 1..n (0-based)
    std::vector<uint64_t> samples;    // defined samples per lead
    std::vector<uint64_t> undefined;  // undefined samples per lead

    std::string key() const;
};

struct AggregateCurve {
    std::string metric;
    double threshold = -1.0;
    int radius = -1;
    std::vector<MetricValue> mean;
    std::vector<MetricValue> stddev;
    std::vector<uint64_t> effective_k;  // models contributing per lead
};

// Cross-model mean and sample standard deviation (divisor k-1) per lead,
// skipping undefined entries.
AggregateCurve aggregate_models(const std::vector<MetricCurve>& curves);

// Observed severity plus per-lead pixel metrics for one test sample.
struct SampleMetrics {
    int64_t start_timestamp = 0;
    double obs_max_rain = 0.0;   // at the ranking lead
    double obs_mean_rain = 0.0;
    std::vector<PixelMetrics> per_lead;  // length out_frames
};

struct RankingRow {
    int64_t start_timestamp;
    double max_rain;
    double mean_rain;
    double mse, mae, me;
};

// Fig-6-style table: observed max/mean at the given lead (1-based; 6 =
// +30 min) and the sample's pixel metrics at that lead.
std::vector<RankingRow> per_sample_ranking(const std::vector<SampleMetrics>& samples,
                                           int lead = 6);

}  // namespace nowcast
