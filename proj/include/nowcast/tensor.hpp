#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nowcast/errors.hpp"

namespace nowcast {

// Dense row-major tensor, up to 5 axes (batch, channel, time, height,
// width). Scalar type is float or double; 64-bit instantiations back the
// finite-difference gradient checks, the pipeline default is set by the
// build (see nowcast/real.hpp).
template <typename S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_, S fill = S(0)) : shape(std::move(shape_)) {
        data.assign(numel_of(shape), fill);
    }

    static size_t numel_of(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ArgumentError("tensor axes must be positive");
            n *= size_t(d);
        }
        return n;
    }

    size_t numel() const { return data.size(); }
    int dim(size_t axis) const { return shape[axis]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }
};

template <typename S>
void check_finite(const Tensor<S>& t, const std::string& context) {
    for (size_t i = 0; i < t.data.size(); ++i) {
        if (!std::isfinite(double(t.data[i])))
            throw NumericError("non-finite value in " + context + " at index " +
                               std::to_string(i));
    }
}

// Trainable tensor with its gradient buffer.
template <typename S>
struct Parameter {
    std::string name;
    Tensor<S> value;
    Tensor<S> grad;

    Parameter() = default;
    Parameter(std::string name_, std::vector<int> shape)
        : name(std::move(name_)), value(shape), grad(std::move(shape)) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), S(0)); }
};

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace nowcast
