#pragma once

#include <cstdint>
#include <vector>

#include "nowcast/gridio.hpp"

namespace nowcast {

// Z-R power law Z = a * R^b with Z in linear reflectivity units,
// dBZ = 10*log10(Z). Defaults are the Marshall-Palmer constants.
struct ZRParams {
    double a = 200.0;
    double b = 1.6;
};

enum class StructuringElement : uint8_t {
    Square3 = 0,  // 3x3 all ones
    Cross3 = 1,   // 3x3 plus shape
};

struct ClutterParams {
    double rain_threshold_mmh = 0.1;
    int erosion_iters = 3;
    int dilation_iters = 3;
    StructuringElement element = StructuringElement::Square3;
};

// Binary mask companion to GridFrame; 1 = keep, 0 = remove.
struct BinaryGrid {
    uint32_t rows = 0;
    uint32_t cols = 0;
    std::vector<uint8_t> values;

    uint8_t at(uint32_t r, uint32_t c) const { return values[size_t(r) * cols + c]; }
    size_t size() const { return size_t(rows) * cols; }
};

// Per pixel R = (10^(dBZ/10) / a)^(1/b); nodata maps to 0 mm/h.
GridFrame dbz_to_rain(const GridFrame& frame, const ZRParams& params = {});

// Per pixel dBZ = 10*log10(a * R^b) for R > 0; R = 0 maps to nodata.
GridFrame rain_to_dbz(const GridFrame& frame, const ZRParams& params = {});

// Morphological opening of the thresholded rain field:
// dilate^k(erode^k(rain > threshold)); outside-grid treated as 0.
BinaryGrid clutter_mask(const GridFrame& frame, const ClutterParams& params = {});

// Zeroes pixels where mask = 0; leaves the rest untouched.
GridFrame apply_mask(const GridFrame& frame, const BinaryGrid& mask);

BinaryGrid erode(const BinaryGrid& in, StructuringElement element);
BinaryGrid dilate(const BinaryGrid& in, StructuringElement element);

}  // namespace nowcast
