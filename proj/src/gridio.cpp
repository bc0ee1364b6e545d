#include "nowcast/gridio.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nowcast/errors.hpp"

namespace nowcast {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'G', 'D'};
constexpr uint16_t kVersion = 1;

void put_bytes(std::string& out, const void* p, size_t n) {
    out.append(static_cast<const char*>(p), n);
}

void put_u16(std::string& out, uint16_t v) {
    char b[2] = {char(v & 0xff), char(v >> 8)};
    put_bytes(out, b, 2);
}

void put_u32(std::string& out, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    put_bytes(out, b, 4);
}

void put_u64(std::string& out, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    put_bytes(out, b, 8);
}

void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<uint32_t>(v));
}

class ByteReader {
public:
    ByteReader(const char* data, size_t n, const std::string& path)
        : p_(data), end_(data + n), path_(path) {}

    void need(size_t n) const {
        if (size_t(end_ - p_) < n)
            throw FormatError("truncated frame file: " + path_);
    }
    uint8_t u8() {
        need(1);
        return uint8_t(*p_++);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(uint8_t(p_[0])) | uint16_t(uint8_t(p_[1])) << 8;
        p_ += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(p_[i])) << (8 * i);
        p_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(p_[i])) << (8 * i);
        p_ += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    const char* cursor() const { return p_; }
    size_t remaining() const { return size_t(end_ - p_); }
    void skip(size_t n) {
        need(n);
        p_ += n;
    }

private:
    const char* p_;
    const char* end_;
    std::string path_;
};

std::string read_file_bytes(const std::string& path, size_t max_bytes = SIZE_MAX) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open " + path);
    std::string data;
    if (max_bytes == SIZE_MAX) {
        std::ostringstream ss;
        ss << in.rdbuf();
        data = ss.str();
        if (in.bad()) throw StorageError("read failure on " + path);
    } else {
        data.resize(max_bytes);
        in.read(data.data(), std::streamsize(max_bytes));
        data.resize(size_t(in.gcount()));
    }
    return data;
}

void write_file_bytes(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot create " + path);
    out.write(data.data(), std::streamsize(data.size()));
    out.flush();
    if (!out) throw StorageError("write failure on " + path);
}

FrameHeader parse_header(ByteReader& r, const std::string& path) {
    char magic[4];
    r.need(4);
    std::memcpy(magic, r.cursor(), 4);
    r.skip(4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad magic in " + path);
    uint16_t version = r.u16();
    if (version != kVersion)
        throw FormatError("unsupported frame version " + std::to_string(version) +
                          " in " + path);
    uint8_t tag = r.u8();
    if (tag > 2) throw FormatError("unknown variable tag in " + path);
    FrameHeader h;
    h.variable = Variable(tag);
    h.timestamp = int64_t(r.u64());
    h.rows = r.u32();
    h.cols = r.u32();
    h.pixel_km = r.f32();
    h.nodata = r.f32();
    return h;
}

}  // namespace

const char* variable_name(Variable v) {
    switch (v) {
        case Variable::ReflectivityDbz: return "dBZ";
        case Variable::RainMmh: return "rain_mmh";
        case Variable::EthKm: return "eth_km";
    }
    return "?";
}

GridFrame make_frame(Variable var, int64_t timestamp, uint32_t rows, uint32_t cols,
                     float fill) {
    GridFrame f;
    f.variable = var;
    f.timestamp = timestamp;
    f.rows = rows;
    f.cols = cols;
    f.values.assign(size_t(rows) * cols, fill);
    return f;
}

void validate_frame(const GridFrame& frame) {
    if (frame.rows == 0 || frame.cols == 0)
        throw DataError("frame dimensions must be positive");
    if (frame.values.size() != frame.size())
        throw DataError("frame value count " + std::to_string(frame.values.size()) +
                        " != rows*cols " + std::to_string(frame.size()));
    if (frame.variable == Variable::RainMmh) {
        for (size_t i = 0; i < frame.values.size(); ++i) {
            float v = frame.values[i];
            if (v != frame.nodata && v < 0.0f)
                throw DataError("negative rain value at index " + std::to_string(i));
        }
    } else if (frame.variable == Variable::EthKm) {
        for (size_t i = 0; i < frame.values.size(); ++i) {
            float v = frame.values[i];
            if (v != frame.nodata && (v < 0.0f || v > 16.0f))
                throw DataError("ETH value out of [0,16] km at index " +
                                std::to_string(i));
        }
    }
}

void write_frame(const GridFrame& frame, const std::string& path) {
    validate_frame(frame);
    std::string buf;
    buf.reserve(31 + 4 * frame.size());
    put_bytes(buf, kMagic, 4);
    put_u16(buf, kVersion);
    buf.push_back(char(uint8_t(frame.variable)));
    put_u64(buf, uint64_t(frame.timestamp));
    put_u32(buf, frame.rows);
    put_u32(buf, frame.cols);
    put_f32(buf, frame.pixel_km);
    put_f32(buf, frame.nodata);
    if constexpr (std::endian::native == std::endian::little) {
        put_bytes(buf, frame.values.data(), 4 * frame.values.size());
    } else {
        for (float v : frame.values) put_f32(buf, v);
    }
    write_file_bytes(path, buf);
}

GridFrame read_frame(const std::string& path) {
    std::string data = read_file_bytes(path);
    ByteReader r(data.data(), data.size(), path);
    FrameHeader h = parse_header(r, path);
    GridFrame f;
    f.variable = h.variable;
    f.timestamp = h.timestamp;
    f.rows = h.rows;
    f.cols = h.cols;
    f.pixel_km = h.pixel_km;
    f.nodata = h.nodata;
    size_t n = size_t(h.rows) * h.cols;
    if (r.remaining() != 4 * n)
        throw FormatError("payload size mismatch in " + path + ": expected " +
                          std::to_string(4 * n) + " bytes, have " +
                          std::to_string(r.remaining()));
    f.values.resize(n);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(f.values.data(), r.cursor(), 4 * n);
    } else {
        for (size_t i = 0; i < n; ++i) f.values[i] = r.f32();
    }
    validate_frame(f);
    return f;
}

FrameHeader read_frame_header(const std::string& path) {
    std::string data = read_file_bytes(path, 31);
    ByteReader r(data.data(), data.size(), path);
    return parse_header(r, path);
}

GridFrame crop(const GridFrame& frame, uint32_t row_off, uint32_t col_off,
               uint32_t out_rows, uint32_t out_cols) {
    if (out_rows == 0 || out_cols == 0)
        throw ArgumentError("crop size must be positive");
    if (uint64_t(row_off) + out_rows > frame.rows ||
        uint64_t(col_off) + out_cols > frame.cols)
        throw ArgumentError("crop window " + std::to_string(out_rows) + "x" +
                            std::to_string(out_cols) + " at (" +
                            std::to_string(row_off) + "," + std::to_string(col_off) +
                            ") exceeds frame " + std::to_string(frame.rows) + "x" +
                            std::to_string(frame.cols));
    GridFrame out;
    out.variable = frame.variable;
    out.timestamp = frame.timestamp;
    out.rows = out_rows;
    out.cols = out_cols;
    out.pixel_km = frame.pixel_km;
    out.nodata = frame.nodata;
    out.values.resize(size_t(out_rows) * out_cols);
    for (uint32_t r = 0; r < out_rows; ++r) {
        const float* src = frame.values.data() + size_t(r + row_off) * frame.cols + col_off;
        std::memcpy(out.values.data() + size_t(r) * out_cols, src, 4 * out_cols);
    }
    return out;
}

namespace {

std::string format_weight(double w) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", w);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t pos = 0;
    for (;;) {
        size_t next = s.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

}  // namespace

void write_manifest(const SequenceManifest& manifest, const std::string& path) {
    std::string buf;
    for (const SequenceRecord& rec : manifest.records) {
        if (rec.rain_paths.size() != kSequenceLen || rec.eth_paths.size() != kSequenceLen)
            throw DataError("manifest record must carry exactly 22 rain and 22 eth paths");
        if (rec.fold == kFoldUnassigned)
            throw DataError("manifest record has unassigned fold");
        buf += std::to_string(rec.start_timestamp);
        buf += '\t';
        buf += format_weight(rec.event_weight);
        buf += '\t';
        buf += rec.fold == kFoldTest ? "TEST" : std::to_string(rec.fold);
        buf += '\t';
        for (int i = 0; i < kSequenceLen; ++i) {
            if (i) buf += ';';
            buf += rec.rain_paths[size_t(i)];
        }
        buf += '\t';
        for (int i = 0; i < kSequenceLen; ++i) {
            if (i) buf += ';';
            buf += rec.eth_paths[size_t(i)];
        }
        buf += '\n';
    }
    write_file_bytes(path, buf);
}

SequenceManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open " + path);
    SequenceManifest manifest;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 5)
            throw DataError("manifest parse error at line " + std::to_string(lineno) +
                            ": expected 5 tab-separated fields, got " +
                            std::to_string(cols.size()));
        SequenceRecord rec;
        try {
            rec.start_timestamp = std::stoll(cols[0]);
            rec.event_weight = std::stod(cols[1]);
        } catch (const std::exception&) {
            throw DataError("manifest parse error at line " + std::to_string(lineno) +
                            ": bad number");
        }
        if (cols[2] == "TEST") {
            rec.fold = kFoldTest;
        } else {
            try {
                rec.fold = std::stoi(cols[2]);
            } catch (const std::exception&) {
                throw DataError("manifest parse error at line " + std::to_string(lineno) +
                                ": bad fold label '" + cols[2] + "'");
            }
            if (rec.fold < 0)
                throw DataError("manifest parse error at line " + std::to_string(lineno) +
                                ": bad fold label '" + cols[2] + "'");
        }
        rec.rain_paths = split(cols[3], ';');
        rec.eth_paths = split(cols[4], ';');
        if (rec.rain_paths.size() != kSequenceLen)
            throw DataError("manifest parse error at line " + std::to_string(lineno) +
                            ": expected 22 rain paths, got " +
                            std::to_string(rec.rain_paths.size()));
        if (rec.eth_paths.size() != kSequenceLen)
            throw DataError("manifest parse error at line " + std::to_string(lineno) +
                            ": expected 22 eth paths, got " +
                            std::to_string(rec.eth_paths.size()));
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

void check_record_cadence(const SequenceRecord& record, const std::string& base_dir) {
    for (int list = 0; list < 2; ++list) {
        const auto& paths = list == 0 ? record.rain_paths : record.eth_paths;
        for (int i = 0; i < kSequenceLen; ++i) {
            FrameHeader h = read_frame_header(resolve_path(base_dir, paths[size_t(i)]));
            int64_t expect = record.start_timestamp + int64_t(i) * kCadenceSeconds;
            if (h.timestamp != expect)
                throw DataError("cadence violation in sequence starting " +
                                std::to_string(record.start_timestamp) + ": frame " +
                                std::to_string(i) + " has timestamp " +
                                std::to_string(h.timestamp) + ", expected " +
                                std::to_string(expect));
        }
    }
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace nowcast
