#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment buffers plus shared step count for one parameter set.
template <typename S>
struct AdamState {
    std::vector<Tensor<S>> m;
    std::vector<Tensor<S>> v;
    uint64_t step = 0;

    explicit AdamState(const std::vector<Parameter<S>*>& params) {
        for (const Parameter<S>* p : params) {
            m.emplace_back(p->value.shape);
            v.emplace_back(p->value.shape);
        }
    }
};

// Standard Adam update with bias correction. Throws NumericError naming the
// parameter if any gradient is non-finite; parameters are untouched in that
// case.
template <typename S>
void adam_step(const std::vector<Parameter<S>*>& params, AdamState<S>& state,
               const AdamConfig& cfg) {
    for (size_t i = 0; i < params.size(); ++i) {
        const Tensor<S>& g = params[i]->grad;
        for (size_t j = 0; j < g.data.size(); ++j)
            if (!std::isfinite(double(g.data[j])))
                throw NumericError("non-finite gradient in parameter " + params[i]->name);
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        S* p = params[i]->value.ptr();
        const S* g = params[i]->grad.ptr();
        S* m = state.m[i].ptr();
        S* v = state.v[i].ptr();
        const size_t n = params[i]->value.numel();
        const S b1 = S(cfg.beta1), b2 = S(cfg.beta2);
        for (size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (S(1) - b1) * g[j];
            v[j] = b2 * v[j] + (S(1) - b2) * g[j] * g[j];
            double mhat = double(m[j]) / bc1;
            double vhat = double(v[j]) / bc2;
            p[j] = S(double(p[j]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

}  // namespace nowcast
