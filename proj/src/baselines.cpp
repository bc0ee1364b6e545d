#include "nowcast/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "nowcast/errors.hpp"

namespace nowcast {

std::vector<GridFrame> persistence(const GridFrame& frame, int n) {
    std::vector<GridFrame> out;
    out.reserve(size_t(n));
    for (int k = 1; k <= n; ++k) {
        GridFrame f = frame;
        f.timestamp = frame.timestamp + int64_t(k) * kCadenceSeconds;
        out.push_back(std::move(f));
    }
    return out;
}

namespace {

struct BlockEstimate {
    float u = 0.0f;
    float v = 0.0f;
    bool valid = false;
};

// Normalized cross-correlation between a block of `a` anchored at
// (r0,c0) and the same-size block of `b` shifted by (dy,dx). Returns
// -2 when the shifted window leaves the domain or variance vanishes.
double block_ncc(const GridFrame& a, const GridFrame& b, int r0, int c0, int size,
                 int dy, int dx, double min_variance) {
    const int rows = int(a.rows), cols = int(a.cols);
    if (r0 + dy < 0 || c0 + dx < 0 || r0 + dy + size > rows || c0 + dx + size > cols)
        return -2.0;
    double sum_a = 0.0, sum_b = 0.0;
    const int n = size * size;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            sum_a += double(a.at(uint32_t(r0 + r), uint32_t(c0 + c)));
            sum_b += double(b.at(uint32_t(r0 + dy + r), uint32_t(c0 + dx + c)));
        }
    }
    const double mean_a = sum_a / n, mean_b = sum_b / n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            double da = double(a.at(uint32_t(r0 + r), uint32_t(c0 + c))) - mean_a;
            double db = double(b.at(uint32_t(r0 + dy + r), uint32_t(c0 + dx + c))) - mean_b;
            cov += da * db;
            var_a += da * da;
            var_b += db * db;
        }
    }
    if (var_a < min_variance || var_b < min_variance) return -2.0;
    return cov / std::sqrt(var_a * var_b);
}

// Best displacement for one block of the earlier frame. Ties prefer the
// smaller displacement by (|d|^2, dy, dx).
BlockEstimate match_block(const GridFrame& a, const GridFrame& b, int r0, int c0,
                          int size, const MotionParams& params) {
    BlockEstimate best;
    double best_ncc = -2.0;
    long best_key[3] = {0, 0, 0};
    for (int dy = -params.search_radius; dy <= params.search_radius; ++dy) {
        for (int dx = -params.search_radius; dx <= params.search_radius; ++dx) {
            double ncc = block_ncc(a, b, r0, c0, size, dy, dx, params.min_variance);
            if (ncc < -1.5) continue;
            long key[3] = {long(dy) * dy + long(dx) * dx, dy, dx};
            bool better = ncc > best_ncc ||
                          (ncc == best_ncc &&
                           (key[0] < best_key[0] ||
                            (key[0] == best_key[0] &&
                             (key[1] < best_key[1] ||
                              (key[1] == best_key[1] && key[2] < best_key[2])))));
            if (better) {
                best_ncc = ncc;
                best_key[0] = key[0];
                best_key[1] = key[1];
                best_key[2] = key[2];
                best.u = float(dx);
                best.v = float(dy);
            }
        }
    }
    best.valid = best_ncc >= params.min_correlation;
    if (!best.valid) {
        best.u = 0.0f;
        best.v = 0.0f;
    }
    return best;
}

float median_of(std::vector<float>& v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5f * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MotionField estimate_motion(const std::vector<GridFrame>& frames,
                            const MotionParams& params) {
    if (frames.size() < 2)
        throw ArgumentError("motion estimation needs at least 2 frames");
    const uint32_t rows = frames[0].rows, cols = frames[0].cols;
    for (const GridFrame& f : frames)
        if (f.rows != rows || f.cols != cols)
            throw ArgumentError("motion estimation frames differ in shape");
    if (params.block < 2 || params.search_radius < 1)
        throw ArgumentError("bad motion parameters");

    const int size = std::min({params.block, int(rows), int(cols)});
    const int brows = std::max(1, int(rows) / size);
    const int bcols = std::max(1, int(cols) / size);

    std::vector<float> acc_u(size_t(brows) * bcols, 0.0f);
    std::vector<float> acc_v(size_t(brows) * bcols, 0.0f);
    const int pairs = int(frames.size()) - 1;

    for (int p = 0; p < pairs; ++p) {
        const GridFrame& a = frames[size_t(p)];
        const GridFrame& b = frames[size_t(p) + 1];
        std::vector<BlockEstimate> est(size_t(brows) * bcols);
        for (int br = 0; br < brows; ++br) {
            for (int bc = 0; bc < bcols; ++bc) {
                int r0 = br * size, c0 = bc * size;
                if (r0 + size > int(rows)) r0 = int(rows) - size;
                if (c0 + size > int(cols)) c0 = int(cols) - size;
                est[size_t(br) * bcols + size_t(bc)] = match_block(a, b, r0, c0, size, params);
            }
        }
        // invalid blocks inherit the median of their valid 8-neighbors
        for (int br = 0; br < brows; ++br) {
            for (int bc = 0; bc < bcols; ++bc) {
                BlockEstimate& e = est[size_t(br) * bcols + size_t(bc)];
                float u = e.u, v = e.v;
                if (!e.valid) {
                    std::vector<float> nu, nv;
                    for (int dr = -1; dr <= 1; ++dr) {
                        for (int dc = -1; dc <= 1; ++dc) {
                            if (!dr && !dc) continue;
                            int rr = br + dr, cc = bc + dc;
                            if (rr < 0 || rr >= brows || cc < 0 || cc >= bcols) continue;
                            const BlockEstimate& ne = est[size_t(rr) * bcols + size_t(cc)];
                            if (ne.valid) {
                                nu.push_back(ne.u);
                                nv.push_back(ne.v);
                            }
                        }
                    }
                    u = nu.empty() ? 0.0f : median_of(nu);
                    v = nv.empty() ? 0.0f : median_of(nv);
                }
                acc_u[size_t(br) * bcols + size_t(bc)] += u;
                acc_v[size_t(br) * bcols + size_t(bc)] += v;
            }
        }
    }

    // average pairs, then bilinear-interpolate block centers to pixels
    for (float& x : acc_u) x /= float(pairs);
    for (float& x : acc_v) x /= float(pairs);

    MotionField field;
    field.rows = rows;
    field.cols = cols;
    field.u.resize(size_t(rows) * cols);
    field.v.resize(size_t(rows) * cols);
    const double half = (size - 1) * 0.5;
    for (uint32_t r = 0; r < rows; ++r) {
        // block-grid coordinates of this pixel, clamped to the center hull
        double gy = (double(r) - half) / size;
        gy = std::clamp(gy, 0.0, double(brows - 1));
        const int y0 = int(gy) < brows - 1 ? int(gy) : std::max(0, brows - 2);
        const double fy = brows > 1 ? gy - y0 : 0.0;
        for (uint32_t c = 0; c < cols; ++c) {
            double gx = (double(c) - half) / size;
            gx = std::clamp(gx, 0.0, double(bcols - 1));
            const int x0 = int(gx) < bcols - 1 ? int(gx) : std::max(0, bcols - 2);
            const double fx = bcols > 1 ? gx - x0 : 0.0;
            const int x1 = std::min(x0 + 1, bcols - 1);
            const int y1 = std::min(y0 + 1, brows - 1);
            auto lerp2 = [&](const std::vector<float>& g) {
                double v00 = g[size_t(y0) * bcols + size_t(x0)];
                double v01 = g[size_t(y0) * bcols + size_t(x1)];
                double v10 = g[size_t(y1) * bcols + size_t(x0)];
                double v11 = g[size_t(y1) * bcols + size_t(x1)];
                return float((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                             fy * ((1 - fx) * v10 + fx * v11));
            };
            field.u[size_t(r) * cols + c] = lerp2(acc_u);
            field.v[size_t(r) * cols + c] = lerp2(acc_v);
        }
    }
    return field;
}

std::vector<GridFrame> extrapolate(const GridFrame& frame, const MotionField& motion,
                                   int n) {
    if (motion.rows != frame.rows || motion.cols != frame.cols)
        throw ArgumentError("motion field shape does not match frame");
    for (float x : motion.u)
        if (!std::isfinite(x)) throw ArgumentError("non-finite motion field");
    for (float x : motion.v)
        if (!std::isfinite(x)) throw ArgumentError("non-finite motion field");

    const int rows = int(frame.rows), cols = int(frame.cols);
    std::vector<GridFrame> out;
    out.reserve(size_t(n));
    for (int k = 1; k <= n; ++k) {
        GridFrame f = make_frame(frame.variable, frame.timestamp + int64_t(k) * kCadenceSeconds,
                                 frame.rows, frame.cols);
        f.pixel_km = frame.pixel_km;
        f.nodata = frame.nodata;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                const size_t i = size_t(r) * size_t(cols) + size_t(c);
                const double sy = double(r) - double(k) * double(motion.v[i]);
                const double sx = double(c) - double(k) * double(motion.u[i]);
                const double fy = std::floor(sy), fx = std::floor(sx);
                const int y0 = int(fy), x0 = int(fx);
                const double wy = sy - fy, wx = sx - fx;
                if (wy == 0.0 && wx == 0.0) {
                    // integer displacement: exact copy, no interpolation error
                    f.values[i] = (y0 >= 0 && y0 < rows && x0 >= 0 && x0 < cols)
                                      ? frame.at(uint32_t(y0), uint32_t(x0))
                                      : 0.0f;
                    continue;
                }
                auto sample = [&](int y, int x) -> double {
                    if (y < 0 || y >= rows || x < 0 || x >= cols) return 0.0;
                    return double(frame.at(uint32_t(y), uint32_t(x)));
                };
                const double v = (1 - wy) * ((1 - wx) * sample(y0, x0) + wx * sample(y0, x0 + 1)) +
                                 wy * ((1 - wx) * sample(y0 + 1, x0) + wx * sample(y0 + 1, x0 + 1));
                f.values[i] = float(v);
            }
        }
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace nowcast
