#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

// A scalar-valued computation exposed for finite-difference checking.
// loss() must be a pure deterministic function of the registered
// coordinates; backward() recomputes and fills every gradient buffer.
template <typename S>
struct GradCheckTarget {
    struct Coords {
        std::string name;
        S* values;
        S* grads;
        size_t count;
    };
    std::function<double()> loss;
    std::function<void()> backward;
    std::vector<Coords> coords;
};

struct GradCheckEntry {
    std::string name;
    size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    size_t checked = 0;
    std::vector<GradCheckEntry> worst;  // descending rel_error, at most 5

    bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

// Central differences with step eps against the analytic gradients.
// rel = |a - n| / max(|a|, |n|, 1e-8) per coordinate.
template <typename S>
GradCheckReport gradcheck(GradCheckTarget<S>& target, double eps = 1e-5) {
    static_assert(sizeof(S) == 8, "gradient checks require the 64-bit instantiation");
    target.backward();
    std::vector<std::vector<double>> analytic;
    for (const auto& c : target.coords) {
        std::vector<double> g(c.count);
        for (size_t i = 0; i < c.count; ++i) g[i] = double(c.grads[i]);
        analytic.push_back(std::move(g));
    }

    GradCheckReport report;
    for (size_t ci = 0; ci < target.coords.size(); ++ci) {
        auto& c = target.coords[ci];
        for (size_t i = 0; i < c.count; ++i) {
            const S saved = c.values[i];
            c.values[i] = saved + S(eps);
            double up = target.loss();
            c.values[i] = saved - S(eps);
            double down = target.loss();
            c.values[i] = saved;
            double numeric = (up - down) / (2.0 * eps);
            double a = analytic[ci][i];
            double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            ++report.checked;
            if (rel >= report.max_rel_error) report.max_rel_error = rel;
            GradCheckEntry entry{c.name, i, a, numeric, rel};
            report.worst.push_back(entry);
            std::sort(report.worst.begin(), report.worst.end(),
                      [](const GradCheckEntry& x, const GradCheckEntry& y) {
                          return x.rel_error > y.rel_error;
                      });
            if (report.worst.size() > 5) report.worst.resize(5);
        }
    }
    return report;
}

}  // namespace nowcast
