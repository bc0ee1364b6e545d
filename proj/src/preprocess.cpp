#include "nowcast/preprocess.hpp"

#include <cmath>

#include "nowcast/errors.hpp"

namespace nowcast {

namespace {

void check_params(const ZRParams& p) {
    if (p.a <= 0.0 || p.b <= 0.0)
        throw ArgumentError("Z-R parameters must be positive");
}

}  // namespace

GridFrame dbz_to_rain(const GridFrame& frame, const ZRParams& params) {
    check_params(params);
    if (frame.variable != Variable::ReflectivityDbz)
        throw ArgumentError("dbz_to_rain expects a reflectivity frame, got " +
                            std::string(variable_name(frame.variable)));
    GridFrame out = frame;
    out.variable = Variable::RainMmh;
    double inv_b = 1.0 / params.b;
    for (float& v : out.values) {
        if (v == frame.nodata) {
            v = 0.0f;
        } else {
            double z = std::pow(10.0, double(v) / 10.0);
            v = float(std::pow(z / params.a, inv_b));
        }
    }
    return out;
}

GridFrame rain_to_dbz(const GridFrame& frame, const ZRParams& params) {
    check_params(params);
    if (frame.variable != Variable::RainMmh)
        throw ArgumentError("rain_to_dbz expects a rain frame, got " +
                            std::string(variable_name(frame.variable)));
    GridFrame out = frame;
    out.variable = Variable::ReflectivityDbz;
    for (size_t i = 0; i < out.values.size(); ++i) {
        float v = out.values[i];
        if (v == frame.nodata || v == 0.0f) {
            out.values[i] = out.nodata;
        } else if (v < 0.0f) {
            throw DataError("negative rain value at index " + std::to_string(i));
        } else {
            out.values[i] = float(10.0 * std::log10(params.a * std::pow(double(v), params.b)));
        }
    }
    return out;
}

namespace {

// Erode/dilate share one kernel scan; for erosion the pixel survives only
// if every element-covered neighbor is 1 (outside-grid counts as 0), for
// dilation it lights up if any covered neighbor is 1.
BinaryGrid morph(const BinaryGrid& in, StructuringElement element, bool erosion) {
    BinaryGrid out;
    out.rows = in.rows;
    out.cols = in.cols;
    out.values.assign(in.size(), 0);
    const int rows = int(in.rows), cols = int(in.cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            uint8_t acc = erosion ? 1 : 0;
            for (int dr = -1; dr <= 1 && (erosion ? acc : !acc); ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (element == StructuringElement::Cross3 && dr != 0 && dc != 0)
                        continue;
                    int rr = r + dr, cc = c + dc;
                    uint8_t v = (rr < 0 || rr >= rows || cc < 0 || cc >= cols)
                                    ? 0
                                    : in.values[size_t(rr) * in.cols + size_t(cc)];
                    if (erosion) {
                        if (!v) {
                            acc = 0;
                            break;
                        }
                    } else if (v) {
                        acc = 1;
                        break;
                    }
                }
            }
            out.values[size_t(r) * out.cols + size_t(c)] = acc;
        }
    }
    return out;
}

}  // namespace

BinaryGrid erode(const BinaryGrid& in, StructuringElement element) {
    return morph(in, element, true);
}

BinaryGrid dilate(const BinaryGrid& in, StructuringElement element) {
    return morph(in, element, false);
}

BinaryGrid clutter_mask(const GridFrame& frame, const ClutterParams& params) {
    if (frame.variable != Variable::RainMmh)
        throw ArgumentError("clutter_mask expects a rain frame, got " +
                            std::string(variable_name(frame.variable)));
    if (params.rain_threshold_mmh <= 0.0)
        throw ArgumentError("rain threshold must be positive");
    if (params.erosion_iters < 0 || params.dilation_iters < 0)
        throw ArgumentError("morphology iteration counts must be >= 0");
    BinaryGrid mask;
    mask.rows = frame.rows;
    mask.cols = frame.cols;
    mask.values.resize(frame.size());
    for (size_t i = 0; i < frame.values.size(); ++i) {
        float v = frame.values[i];
        mask.values[i] = (v != frame.nodata && double(v) > params.rain_threshold_mmh) ? 1 : 0;
    }
    for (int i = 0; i < params.erosion_iters; ++i) mask = erode(mask, params.element);
    for (int i = 0; i < params.dilation_iters; ++i) mask = dilate(mask, params.element);
    return mask;
}

GridFrame apply_mask(const GridFrame& frame, const BinaryGrid& mask) {
    if (frame.rows != mask.rows || frame.cols != mask.cols)
        throw ArgumentError("mask shape " + std::to_string(mask.rows) + "x" +
                            std::to_string(mask.cols) + " does not match frame " +
                            std::to_string(frame.rows) + "x" + std::to_string(frame.cols));
    GridFrame out = frame;
    for (size_t i = 0; i < out.values.size(); ++i)
        if (!mask.values[i]) out.values[i] = 0.0f;
    return out;
}

}  // namespace nowcast
