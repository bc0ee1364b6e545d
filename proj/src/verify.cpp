#include "nowcast/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nowcast/errors.hpp"
#include "nowcast/num_format.hpp"

namespace nowcast {

ContingencyTable& ContingencyTable::operator+=(const ContingencyTable& other) {
    hits += other.hits;
    misses += other.misses;
    false_alarms += other.false_alarms;
    correct_negatives += other.correct_negatives;
    return *this;
}

void validate_verify_config(const VerifyConfig& config) {
    auto strictly_increasing = [](const std::vector<double>& v) {
        for (size_t i = 1; i < v.size(); ++i)
            if (v[i] <= v[i - 1]) return false;
        return true;
    };
    if (config.categorical_thresholds.empty() || config.fss_thresholds.empty())
        throw ConfigError("threshold lists must be non-empty");
    if (!strictly_increasing(config.categorical_thresholds) ||
        !strictly_increasing(config.fss_thresholds))
        throw ConfigError("thresholds must be strictly increasing");
    for (int r : config.fss_radii)
        if (r < 0) throw ConfigError("fss radii must be >= 0");
}

namespace {

void check_same_shape(const GridFrame& a, const GridFrame& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw ArgumentError("frame shapes differ: " + std::to_string(a.rows) + "x" +
                            std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                            "x" + std::to_string(b.cols));
}

}  // namespace

PixelMetrics pixel_metrics(const GridFrame& pred, const GridFrame& obs) {
    check_same_shape(pred, obs);
    double abs_sum = 0.0, sq_sum = 0.0, sum = 0.0;
    uint64_t n = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const float p = pred.values[i], o = obs.values[i];
        if (p == pred.nodata || o == obs.nodata) continue;
        const double d = double(p) - double(o);
        abs_sum += std::fabs(d);
        sq_sum += d * d;
        sum += d;
        ++n;
    }
    PixelMetrics m;
    m.valid_pixels = n;
    if (n == 0) {
        m.mae = m.mse = m.me = MetricValue::undefined("no valid pixels");
    } else {
        m.mae = MetricValue::of(abs_sum / double(n));
        m.mse = MetricValue::of(sq_sum / double(n));
        m.me = MetricValue::of(sum / double(n));
    }
    return m;
}

ContingencyTable contingency(const GridFrame& pred, const GridFrame& obs,
                             double threshold) {
    check_same_shape(pred, obs);
    ContingencyTable t;
    t.threshold = threshold;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const float p = pred.values[i], o = obs.values[i];
        if (p == pred.nodata || o == obs.nodata) continue;
        const bool fe = double(p) > threshold;
        const bool oe = double(o) > threshold;
        if (fe && oe) ++t.hits;
        else if (!fe && oe) ++t.misses;
        else if (fe && !oe) ++t.false_alarms;
        else ++t.correct_negatives;
    }
    return t;
}

MetricValue precision(const ContingencyTable& t) {
    const uint64_t denom = t.hits + t.false_alarms;
    if (denom == 0) return MetricValue::undefined("no predicted events");
    return MetricValue::of(double(t.hits) / double(denom));
}

MetricValue recall(const ContingencyTable& t) {
    const uint64_t denom = t.hits + t.misses;
    if (denom == 0) return MetricValue::undefined("no observed events");
    return MetricValue::of(double(t.hits) / double(denom));
}

MetricValue equitable_threat_score(const ContingencyTable& t) {
    const uint64_t total = t.total();
    if (total == 0) return MetricValue::undefined("empty table");
    const double hr = double(t.hits + t.misses) * double(t.hits + t.false_alarms) /
                      double(total);
    const double denom = double(t.hits + t.misses + t.false_alarms) - hr;
    if (denom == 0.0) return MetricValue::undefined("degenerate table");
    return MetricValue::of((double(t.hits) - hr) / denom);
}

std::vector<double> fraction_field(const GridFrame& frame, double threshold, int radius) {
    const int rows = int(frame.rows), cols = int(frame.cols);
    // summed-area table with a zero top row/left column
    std::vector<double> sat(size_t(rows + 1) * size_t(cols + 1), 0.0);
    for (int r = 0; r < rows; ++r) {
        const float* row = frame.values.data() + size_t(r) * size_t(cols);
        double run = 0.0;
        for (int c = 0; c < cols; ++c) {
            const float v = row[c];
            run += (v != frame.nodata && double(v) > threshold) ? 1.0 : 0.0;
            sat[size_t(r + 1) * size_t(cols + 1) + size_t(c + 1)] =
                sat[size_t(r) * size_t(cols + 1) + size_t(c + 1)] + run;
        }
    }
    std::vector<double> frac(size_t(rows) * size_t(cols));
    for (int r = 0; r < rows; ++r) {
        const int r0 = std::max(0, r - radius), r1 = std::min(rows - 1, r + radius);
        for (int c = 0; c < cols; ++c) {
            const int c0 = std::max(0, c - radius), c1 = std::min(cols - 1, c + radius);
            const double s = sat[size_t(r1 + 1) * size_t(cols + 1) + size_t(c1 + 1)] -
                             sat[size_t(r0) * size_t(cols + 1) + size_t(c1 + 1)] -
                             sat[size_t(r1 + 1) * size_t(cols + 1) + size_t(c0)] +
                             sat[size_t(r0) * size_t(cols + 1) + size_t(c0)];
            const double area = double(r1 - r0 + 1) * double(c1 - c0 + 1);
            frac[size_t(r) * size_t(cols) + size_t(c)] = s / area;
        }
    }
    return frac;
}

MetricValue fss(const GridFrame& pred, const GridFrame& obs, double threshold,
                int radius) {
    check_same_shape(pred, obs);
    if (radius < 0) throw ArgumentError("fss radius must be >= 0");
    const std::vector<double> pf = fraction_field(pred, threshold, radius);
    const std::vector<double> po = fraction_field(obs, threshold, radius);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < pf.size(); ++i) {
        const double d = pf[i] - po[i];
        num += d * d;
        den += pf[i] * pf[i] + po[i] * po[i];
    }
    if (den == 0.0) return MetricValue::undefined("no events in either field");
    return MetricValue::of(1.0 - num / den);
}

JointHistogram joint_histogram(const std::vector<GridFrame>& frames_a,
                               const std::vector<GridFrame>& frames_b,
                               const std::vector<double>& edges_a,
                               const std::vector<double>& edges_b) {
    if (frames_a.size() != frames_b.size())
        throw ArgumentError("joint histogram needs paired frame lists");
    if (edges_a.size() < 2 || edges_b.size() < 2)
        throw ArgumentError("bin edge lists need at least 2 entries");
    for (size_t i = 1; i < edges_a.size(); ++i)
        if (edges_a[i] <= edges_a[i - 1])
            throw ArgumentError("bin edges must be strictly increasing");
    for (size_t i = 1; i < edges_b.size(); ++i)
        if (edges_b[i] <= edges_b[i - 1])
            throw ArgumentError("bin edges must be strictly increasing");

    JointHistogram h;
    h.edges_a = edges_a;
    h.edges_b = edges_b;
    const size_t na = edges_a.size() - 1, nb = edges_b.size() - 1;
    h.counts.assign(na * nb, 0);

    auto bin_of = [](const std::vector<double>& edges, double v) -> ptrdiff_t {
        if (v < edges.front() || v >= edges.back()) return -1;
        const auto it = std::upper_bound(edges.begin(), edges.end(), v);
        return (it - edges.begin()) - 1;
    };

    for (size_t f = 0; f < frames_a.size(); ++f) {
        const GridFrame& a = frames_a[f];
        const GridFrame& b = frames_b[f];
        check_same_shape(a, b);
        for (size_t i = 0; i < a.values.size(); ++i) {
            const float va = a.values[i], vb = b.values[i];
            if (va == a.nodata || vb == b.nodata) continue;
            ++h.total_pairs;
            const ptrdiff_t ia = bin_of(edges_a, double(va));
            const ptrdiff_t ib = bin_of(edges_b, double(vb));
            if (ia < 0 || ib < 0) {
                ++h.overflow;
                continue;
            }
            ++h.counts[size_t(ia) * nb + size_t(ib)];
        }
    }
    return h;
}

void write_joint_histogram(const JointHistogram& hist, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageError("cannot create " + path);
    out << "# edges_a:";
    for (double e : hist.edges_a) out << ' ' << format_double(e);
    out << "\n# edges_b:";
    for (double e : hist.edges_b) out << ' ' << format_double(e);
    out << "\n# overflow: " << hist.overflow << "\n# total_pairs: " << hist.total_pairs
        << '\n';
    const size_t nb = hist.edges_b.size() - 1;
    for (size_t ia = 0; ia < hist.edges_a.size() - 1; ++ia) {
        for (size_t ib = 0; ib < nb; ++ib) {
            if (ib) out << ',';
            out << hist.counts[ia * nb + ib];
        }
        out << '\n';
    }
    out.flush();
    if (!out) throw StorageError("write failure on " + path);
}

std::string MetricCurve::key() const {
    std::string k = metric;
    if (threshold >= 0.0) k += "@" + format_double(threshold);
    if (radius >= 0) k += "/r" + std::to_string(radius);
    return k;
}

AggregateCurve aggregate_models(const std::vector<MetricCurve>& curves) {
    if (curves.size() < 2)
        throw ArgumentError("aggregation needs at least 2 model curves");
    const MetricCurve& first = curves[0];
    for (const MetricCurve& c : curves) {
        if (c.metric != first.metric || c.threshold != first.threshold ||
            c.radius != first.radius)
            throw ArgumentError("cannot aggregate curves with different keys: " +
                                c.key() + " vs " + first.key());
        if (c.values.size() != first.values.size())
            throw ArgumentError("cannot aggregate curves of different lengths");
    }
    AggregateCurve agg;
    agg.metric = first.metric;
    agg.threshold = first.threshold;
    agg.radius = first.radius;
    const size_t leads = first.values.size();
    for (size_t lead = 0; lead < leads; ++lead) {
        std::vector<double> vals;
        for (const MetricCurve& c : curves)
            if (c.values[lead].defined) vals.push_back(c.values[lead].value);
        agg.effective_k.push_back(vals.size());
        if (vals.empty()) {
            agg.mean.push_back(MetricValue::undefined("all models undefined"));
            agg.stddev.push_back(MetricValue::undefined("all models undefined"));
            continue;
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= double(vals.size());
        agg.mean.push_back(MetricValue::of(mean));
        if (vals.size() < 2) {
            agg.stddev.push_back(MetricValue::undefined("single defined model"));
        } else {
            double ss = 0.0;
            for (double v : vals) ss += (v - mean) * (v - mean);
            agg.stddev.push_back(MetricValue::of(std::sqrt(ss / double(vals.size() - 1))));
        }
    }
    return agg;
}

std::vector<RankingRow> per_sample_ranking(const std::vector<SampleMetrics>& samples,
                                           int lead) {
    std::vector<RankingRow> rows;
    for (const SampleMetrics& s : samples) {
        if (lead < 1 || size_t(lead) > s.per_lead.size())
            throw DataError("ranking lead " + std::to_string(lead) +
                            " outside the available " + std::to_string(s.per_lead.size()) +
                            " leads");
        const PixelMetrics& m = s.per_lead[size_t(lead) - 1];
        RankingRow row;
        row.start_timestamp = s.start_timestamp;
        row.max_rain = s.obs_max_rain;
        row.mean_rain = s.obs_mean_rain;
        row.mse = m.mse.defined ? m.mse.value : std::nan("");
        row.mae = m.mae.defined ? m.mae.value : std::nan("");
        row.me = m.me.defined ? m.me.value : std::nan("");
        rows.push_back(row);
    }
    return rows;
}

}  // namespace nowcast
