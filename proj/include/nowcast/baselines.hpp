#pragma once

#include <vector>

#include "nowcast/gridio.hpp"

namespace nowcast {

// Per-pixel displacement in pixels per 5-minute step. u is the column
// (x) component, v the row (y) component.
struct MotionField {
    uint32_t rows = 0;
    uint32_t cols = 0;
    std::vector<float> u;
    std::vector<float> v;
};

struct MotionParams {
    int block = 16;          // block size in pixels
    int search_radius = 8;   // max displacement in pixels
    double min_correlation = 0.3;
    double min_variance = 1e-6;
};

// Eulerian persistence: n copies of the frame with advanced timestamps.
std::vector<GridFrame> persistence(const GridFrame& frame, int n = 18);

// Block matching between consecutive frames: per block, the displacement
// maximizing normalized cross-correlation within the search radius. Blocks
// with low correlation or near-zero variance inherit the median of their
// valid neighbors (0 if none). The block grid is bilinearly interpolated to
// full resolution; with more than two frames, displacements are averaged
// over consecutive pairs.
MotionField estimate_motion(const std::vector<GridFrame>& frames,
                            const MotionParams& params = {});

// Backward semi-Lagrangian advection: output_k(x) = frame(x - k*d(x)) with
// bilinear sampling; out-of-domain samples are 0.
std::vector<GridFrame> extrapolate(const GridFrame& frame, const MotionField& motion,
                                   int n = 18);

}  // namespace nowcast
