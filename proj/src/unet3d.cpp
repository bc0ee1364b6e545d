#include "nowcast/unet3d.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nowcast/errors.hpp"
#include "nowcast/num_format.hpp"

namespace nowcast {

void validate_model_config(const ModelConfig& config) {
    if (config.in_channels != 1 && config.in_channels != 2)
        throw ConfigError("in_channels must be 1 or 2");
    if (config.in_frames < 1 || config.out_frames < 1)
        throw ConfigError("frame counts must be positive");
    if (config.levels < 1) throw ConfigError("levels must be >= 1");
    if (config.base_channels < 1) throw ConfigError("base_channels must be >= 1");
    if (config.kernel < 1 || config.kernel % 2 == 0)
        throw ConfigError("kernel must be odd and positive");
    if (config.eth_scale <= 0.0) throw ConfigError("eth_scale must be positive");
}

std::string serialize_model_config(const ModelConfig& config) {
    std::ostringstream out;
    out << "in_channels=" << config.in_channels << '\n'
        << "in_frames=" << config.in_frames << '\n'
        << "out_frames=" << config.out_frames << '\n'
        << "levels=" << config.levels << '\n'
        << "base_channels=" << config.base_channels << '\n'
        << "kernel=" << config.kernel << '\n'
        << "seed=" << config.seed << '\n'
        << "rain_transform="
        << (config.rain_transform == RainTransform::Log1p ? "LOG1P" : "RAW") << '\n'
        << "eth_scale=" << format_double(config.eth_scale) << '\n';
    return out.str();
}

ModelConfig parse_model_config(const std::string& text) {
    ModelConfig config;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("bad model config line: " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        try {
            if (key == "in_channels") config.in_channels = std::stoi(value);
            else if (key == "in_frames") config.in_frames = std::stoi(value);
            else if (key == "out_frames") config.out_frames = std::stoi(value);
            else if (key == "levels") config.levels = std::stoi(value);
            else if (key == "base_channels") config.base_channels = std::stoi(value);
            else if (key == "kernel") config.kernel = std::stoi(value);
            else if (key == "seed") config.seed = std::stoull(value);
            else if (key == "rain_transform") {
                if (value == "RAW") config.rain_transform = RainTransform::Raw;
                else if (value == "LOG1P") config.rain_transform = RainTransform::Log1p;
                else throw FormatError("unknown rain_transform '" + value + "'");
            } else if (key == "eth_scale") config.eth_scale = std::stod(value);
            else throw FormatError("unknown model config key '" + key + "'");
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError("bad value for model config key '" + key + "'");
        }
    }
    validate_model_config(config);
    return config;
}

namespace {

constexpr char kMagic[4] = {'U', 'N', 'C', 'K'};
constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char(v >> 8));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

struct Cursor {
    const char* p;
    const char* end;
    const std::string& path;

    void need(size_t n) const {
        if (size_t(end - p) < n) throw FormatError("truncated checkpoint: " + path);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(uint8_t(p[0])) | uint16_t(uint8_t(p[1])) << 8;
        p += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(p[i])) << (8 * i);
        p += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(p[i])) << (8 * i);
        p += 8;
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s(p, n);
        p += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u16(buf, kVersion);
    std::string cfg = serialize_model_config(ckpt.config);
    put_u32(buf, uint32_t(cfg.size()));
    buf += cfg;
    put_u32(buf, uint32_t(ckpt.params.size()));
    for (const CheckpointParam& p : ckpt.params) {
        put_u32(buf, uint32_t(p.name.size()));
        buf += p.name;
        put_u32(buf, uint32_t(p.shape.size()));
        size_t n = 1;
        for (int d : p.shape) {
            put_u32(buf, uint32_t(d));
            n *= size_t(d);
        }
        if (n != p.values.size())
            throw DataError("checkpoint parameter " + p.name + " shape/value mismatch");
        if constexpr (std::endian::native == std::endian::little) {
            buf.append(reinterpret_cast<const char*>(p.values.data()), 4 * n);
        } else {
            for (float v : p.values) put_u32(buf, std::bit_cast<uint32_t>(v));
        }
    }
    put_u64(buf, ckpt.steps);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot create " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
    out.flush();
    if (!out) throw StorageError("write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string data = ss.str();
    Cursor c{data.data(), data.data() + data.size(), path};

    c.need(4);
    if (std::memcmp(c.p, kMagic, 4) != 0) throw FormatError("bad magic in " + path);
    c.p += 4;
    uint16_t version = c.u16();
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    uint32_t cfg_len = c.u32();
    ckpt.config = parse_model_config(c.bytes(cfg_len));
    uint32_t n_params = c.u32();
    for (uint32_t i = 0; i < n_params; ++i) {
        CheckpointParam p;
        uint32_t name_len = c.u32();
        p.name = c.bytes(name_len);
        uint32_t axes = c.u32();
        if (axes == 0 || axes > 5)
            throw FormatError("bad axis count in checkpoint parameter " + p.name);
        size_t n = 1;
        for (uint32_t a = 0; a < axes; ++a) {
            uint32_t d = c.u32();
            if (d == 0) throw FormatError("zero axis in checkpoint parameter " + p.name);
            p.shape.push_back(int(d));
            n *= d;
        }
        c.need(4 * n);
        p.values.resize(n);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(p.values.data(), c.p, 4 * n);
            c.p += 4 * n;
        } else {
            for (size_t j = 0; j < n; ++j) p.values[j] = std::bit_cast<float>(c.u32());
        }
        ckpt.params.push_back(std::move(p));
    }
    ckpt.steps = c.u64();
    if (c.p != c.end) throw FormatError("trailing bytes in checkpoint " + path);
    return ckpt;
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageError("cannot create " + path);
    out << "round,epoch,train_mse,val_mse,lr\n";
    for (const TrainLogRow& row : log)
        out << row.round << ',' << row.epoch << ',' << format_double(row.train_mse) << ','
            << format_double(row.val_mse) << ',' << format_double(row.lr) << '\n';
    out.flush();
    if (!out) throw StorageError("write failure on " + path);
}

std::vector<GridFrame> predict_sequence(const Checkpoint& ckpt,
                                        const std::vector<GridFrame>& rain_in,
                                        const std::vector<GridFrame>& eth_in) {
    UNet3d<real_t> model(ckpt.config);
    model.load_parameters(ckpt);
    return predict_with_model(model, rain_in, eth_in);
}

std::vector<GridFrame> predict_with_model(const UNet3d<real_t>& model,
                                          const std::vector<GridFrame>& rain_in,
                                          const std::vector<GridFrame>& eth_in) {
    const ModelConfig& config = model.config();
    Tensor<real_t> input = assemble_input<real_t>(rain_in, eth_in, config);
    UNetActs<real_t> acts;
    Tensor<real_t> out = model.forward(input, acts);

    const GridFrame& last = rain_in.back();
    std::vector<GridFrame> frames;
    const size_t plane = size_t(last.rows) * last.cols;
    for (int k = 0; k < config.out_frames; ++k) {
        GridFrame f = make_frame(Variable::RainMmh,
                                 last.timestamp + int64_t(k + 1) * kCadenceSeconds,
                                 last.rows, last.cols);
        f.pixel_km = last.pixel_km;
        f.nodata = last.nodata;
        const real_t* src = out.ptr() + size_t(k) * plane;
        for (size_t i = 0; i < plane; ++i) f.values[i] = float(src[i]);
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace nowcast
