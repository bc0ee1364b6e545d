#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nowcast {

enum class Variable : uint8_t {
    ReflectivityDbz = 0,
    RainMmh = 1,
    EthKm = 2,
};

const char* variable_name(Variable v);

// One 2D radar field. Immutable by convention after construction; all
// pipeline stages produce new frames rather than mutating in place.
struct GridFrame {
    Variable variable = Variable::RainMmh;
    int64_t timestamp = 0;  // seconds since Unix epoch
    uint32_t rows = 0;
    uint32_t cols = 0;
    float pixel_km = 1.0f;
    float nodata = -9999.0f;
    std::vector<float> values;  // row-major, rows*cols

    float at(uint32_t r, uint32_t c) const { return values[size_t(r) * cols + c]; }
    float& at(uint32_t r, uint32_t c) { return values[size_t(r) * cols + c]; }
    bool is_nodata(float v) const { return v == nodata; }
    size_t size() const { return size_t(rows) * cols; }
};

GridFrame make_frame(Variable var, int64_t timestamp, uint32_t rows, uint32_t cols,
                     float fill = 0.0f);

// Throws DataError if the frame violates the per-variable invariants
// (size mismatch, negative rain, ETH outside [0, 16] km).
void validate_frame(const GridFrame& frame);

// Header-only view of a frame file, used for cadence checks without
// loading pixel payloads.
struct FrameHeader {
    Variable variable;
    int64_t timestamp;
    uint32_t rows;
    uint32_t cols;
    float pixel_km;
    float nodata;
};

// "RFGD" binary format, little-endian:
//   magic "RFGD"; u16 version (=1); u8 variable tag; i64 timestamp;
//   u32 rows; u32 cols; f32 pixel_km; f32 nodata; rows*cols f32 values.
void write_frame(const GridFrame& frame, const std::string& path);
GridFrame read_frame(const std::string& path);
FrameHeader read_frame_header(const std::string& path);

GridFrame crop(const GridFrame& frame, uint32_t row_off, uint32_t col_off,
               uint32_t out_rows, uint32_t out_cols);

constexpr int kSequenceLen = 22;
constexpr int64_t kCadenceSeconds = 300;
constexpr int kFoldTest = -1;
constexpr int kFoldUnassigned = -2;

struct SequenceRecord {
    int64_t start_timestamp = 0;
    double event_weight = 0.0;
    int fold = kFoldUnassigned;  // 0..n_folds-1, kFoldTest, or kFoldUnassigned
    std::vector<std::string> rain_paths;  // exactly 22
    std::vector<std::string> eth_paths;   // exactly 22
};

struct SequenceManifest {
    std::vector<SequenceRecord> records;
};

// One record per line:
//   start_unix<TAB>weight<TAB>fold<TAB>rain_1;...;rain_22<TAB>eth_1;...;eth_22
// fold is "TEST" or a non-negative integer; weight uses 6 significant digits.
void write_manifest(const SequenceManifest& manifest, const std::string& path);
SequenceManifest read_manifest(const std::string& path);

// Opens the 22 rain and 22 eth frame headers of a record (paths resolved
// against base_dir when relative) and checks the exact 300 s cadence.
// Throws DataError on violation.
void check_record_cadence(const SequenceRecord& record, const std::string& base_dir);

// Resolves a manifest/index-relative path against the directory of the
// file it was read from. Absolute paths pass through.
std::string resolve_path(const std::string& base_dir, const std::string& path);

}  // namespace nowcast
