#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nowcast/baselines.hpp"
#include "nowcast/preprocess.hpp"
#include "nowcast/sampler.hpp"
#include "nowcast/synthgen.hpp"
#include "nowcast/unet3d.hpp"
#include "nowcast/verify.hpp"

namespace nowcast {

struct ConfigKeyInfo {
    std::string key;
    std::string default_value;
    std::string help;
};

// Every recognized `module.key`; unknown keys are rejected on sight.
const std::vector<ConfigKeyInfo>& config_registry();

// Line-oriented `key = value` file with '#' comments. Values from the file
// override defaults; set() overrides both (CLI flags land there).
class Config {
public:
    static Config defaults();
    static Config from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    void apply_overrides(const std::vector<std::string>& key_value_pairs);

    const std::string& get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    int64_t get_int64(const std::string& key) const;
    uint64_t get_uint64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::vector<uint64_t> get_uint64_list(const std::string& key) const;

    // Typed views assembled from the per-module keys.
    ZRParams zr_params() const;
    ClutterParams clutter_params() const;
    SamplerConfig sampler_config() const;
    ModelConfig model_config() const;
    HyperParams hyper_params() const;
    VerifyConfig verify_config() const;
    MotionParams motion_params() const;
    SynthEventParams synth_event_params() const;
    DatasetConfig dataset_config() const;
    int jobs() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace nowcast
