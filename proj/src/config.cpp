#include "nowcast/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "nowcast/errors.hpp"

namespace nowcast {

const std::vector<ConfigKeyInfo>& config_registry() {
    static const std::vector<ConfigKeyInfo> registry = {
        {"cli.jobs", "1", "worker count for data-parallel stages"},

        {"preprocess.zr_a", "200", "Z-R multiplier a in Z = a*R^b"},
        {"preprocess.zr_b", "1.6", "Z-R exponent b"},
        {"preprocess.rain_threshold_mmh", "0.1", "clutter mask rain threshold (mm/h)"},
        {"preprocess.erosion_iters", "3", "erosion iterations of the opening"},
        {"preprocess.dilation_iters", "3", "dilation iterations of the opening"},
        {"preprocess.element", "square3", "structuring element: square3 or cross3"},
        {"preprocess.crop_enabled", "false", "apply the central crop"},
        {"preprocess.crop_row_off", "214", "crop row offset (centered-floor default)"},
        {"preprocess.crop_col_off", "214", "crop column offset"},
        {"preprocess.crop_rows", "336", "crop height in rows"},
        {"preprocess.crop_cols", "272", "crop width in columns"},

        {"sampler.top_k_per_year", "1000", "event starts kept per calendar year"},
        {"sampler.n_folds", "8", "validation fold count"},
        {"sampler.test_year", "0", "test year (0 = last year present)"},
        {"sampler.cutoff_start", "1475280000",
         "ignore frames before this unix time (-1 disables)"},
        {"sampler.seed", "1", "fold-shuffle seed"},

        {"synthgen.n_events", "16", "training events (one per day)"},
        {"synthgen.n_test_events", "4", "test-year events"},
        {"synthgen.seed", "1", "dataset seed; event i uses seed+i"},
        {"synthgen.rows", "64", "grid rows"},
        {"synthgen.cols", "64", "grid columns"},
        {"synthgen.min_cells", "1", "minimum storm cells per event"},
        {"synthgen.max_cells", "4", "maximum storm cells per event"},
        {"synthgen.amplitude_min", "2", "cell peak rain lower bound (mm/h)"},
        {"synthgen.amplitude_max", "20", "cell peak rain upper bound (mm/h)"},
        {"synthgen.sigma_min", "3", "cell radius lower bound (px)"},
        {"synthgen.sigma_max", "8", "cell radius upper bound (px)"},
        {"synthgen.speed_max", "1", "max cell speed per axis (px/step)"},
        {"synthgen.growth_min", "-0.08", "growth rate lower bound (1/step)"},
        {"synthgen.growth_max", "0.08", "growth rate upper bound (1/step)"},
        {"synthgen.eth_base", "3", "ETH base level (km)"},
        {"synthgen.eth_gain", "60", "ETH offset per unit growth (km*step)"},
        {"synthgen.eth_noise_sd", "0.3", "ETH noise standard deviation (km)"},
        {"synthgen.artifact_rings", "false", "inject concentric ETH ceiling bands"},

        {"unet3d.in_channels", "1", "1 = rain only, 2 = rain + ETH"},
        {"unet3d.levels", "3", "encoder depth"},
        {"unet3d.base_channels", "8", "channels of the first encoder level"},
        {"unet3d.seed", "1", "parameter init / training shuffle seed"},
        {"unet3d.rain_transform", "RAW", "rain input transform: RAW or LOG1P"},
        {"unet3d.eth_scale", "16", "ETH normalization divisor (km)"},

        {"train.lr", "0.001", "Adam learning rate"},
        {"train.batch", "2", "batch size"},
        {"train.max_epochs", "50", "epoch cap"},
        {"train.patience_early", "8", "validation rounds without improvement before stop"},
        {"train.plateau_patience", "3", "non-improving rounds before an lr cut"},
        {"train.plateau_factor", "0.5", "lr multiplier on plateau"},
        {"train.val_every", "1", "epochs per validation round"},

        {"verify.categorical_thresholds", "0.1,1,2.5,5",
         "precision/recall/ETS thresholds (mm/h)"},
        {"verify.fss_thresholds", "0.1,1,2.5,5,10", "FSS thresholds (mm/h)"},
        {"verify.fss_radii", "1,4,16", "FSS window radii (px)"},
        {"verify.fss_report_leads", "20,40,60,80", "FSS matrix lead times (min)"},

        {"baseline.block", "16", "block-matching block size (px)"},
        {"baseline.search_radius", "8", "block-matching search radius (px)"},
        {"baseline.min_correlation", "0.3", "NCC floor below which a block is invalid"},

        {"experiment.n_models", "8", "models per group"},
        {"experiment.seeds", "", "comma list of per-model seeds (empty = 1..n)"},
    };
    return registry;
}

namespace {

bool known_key(const std::string& key) {
    for (const ConfigKeyInfo& info : config_registry())
        if (info.key == key) return true;
    return false;
}

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::defaults() {
    Config c;
    for (const ConfigKeyInfo& info : config_registry())
        c.values_[info.key] = info.default_value;
    return c;
}

Config Config::from_file(const std::string& path) {
    Config c = defaults();
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!known_key(key))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" +
                              key + "'");
        c.values_[key] = value;
    }
    return c;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

void Config::apply_overrides(const std::vector<std::string>& key_value_pairs) {
    for (const std::string& kv : key_value_pairs) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + kv + "' is not of the form key=value");
        set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
}

const std::string& Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

double Config::get_double(const std::string& key) const {
    try {
        size_t used = 0;
        double v = std::stod(get_string(key), &used);
        if (used != get_string(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + get_string(key) + "'");
    }
}

int Config::get_int(const std::string& key) const {
    try {
        size_t used = 0;
        int v = std::stoi(get_string(key), &used);
        if (used != get_string(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": '" + get_string(key) + "'");
    }
}

int64_t Config::get_int64(const std::string& key) const {
    try {
        size_t used = 0;
        int64_t v = std::stoll(get_string(key), &used);
        if (used != get_string(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": '" + get_string(key) + "'");
    }
}

uint64_t Config::get_uint64(const std::string& key) const {
    try {
        size_t used = 0;
        uint64_t v = std::stoull(get_string(key), &used);
        if (used != get_string(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": '" + get_string(key) + "'");
    }
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get_string(key);
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError("bad boolean value for " + key + ": '" + v + "'");
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    size_t pos = 0;
    for (;;) {
        size_t next = s.find(',', pos);
        if (next == std::string::npos) {
            out.push_back(trim(s.substr(pos)));
            return out;
        }
        out.push_back(trim(s.substr(pos, next - pos)));
        pos = next + 1;
    }
}

}  // namespace

std::vector<double> Config::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : split_list(get_string(key))) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("bad list value for " + key + ": '" + item + "'");
        }
    }
    return out;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& item : split_list(get_string(key))) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("bad list value for " + key + ": '" + item + "'");
        }
    }
    return out;
}

std::vector<uint64_t> Config::get_uint64_list(const std::string& key) const {
    std::vector<uint64_t> out;
    for (const std::string& item : split_list(get_string(key))) {
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw ConfigError("bad list value for " + key + ": '" + item + "'");
        }
    }
    return out;
}

ZRParams Config::zr_params() const {
    ZRParams p;
    p.a = get_double("preprocess.zr_a");
    p.b = get_double("preprocess.zr_b");
    return p;
}

ClutterParams Config::clutter_params() const {
    ClutterParams p;
    p.rain_threshold_mmh = get_double("preprocess.rain_threshold_mmh");
    p.erosion_iters = get_int("preprocess.erosion_iters");
    p.dilation_iters = get_int("preprocess.dilation_iters");
    const std::string& el = get_string("preprocess.element");
    if (el == "square3") p.element = StructuringElement::Square3;
    else if (el == "cross3") p.element = StructuringElement::Cross3;
    else throw ConfigError("preprocess.element must be square3 or cross3, got '" + el + "'");
    return p;
}

SamplerConfig Config::sampler_config() const {
    SamplerConfig c;
    c.top_k_per_year = get_int("sampler.top_k_per_year");
    c.n_folds = get_int("sampler.n_folds");
    c.test_year = get_int("sampler.test_year");
    c.cutoff_start = get_int64("sampler.cutoff_start");
    validate_sampler_config(c);
    return c;
}

ModelConfig Config::model_config() const {
    ModelConfig c;
    c.in_channels = get_int("unet3d.in_channels");
    c.levels = get_int("unet3d.levels");
    c.base_channels = get_int("unet3d.base_channels");
    c.seed = get_uint64("unet3d.seed");
    const std::string& t = get_string("unet3d.rain_transform");
    if (t == "RAW") c.rain_transform = RainTransform::Raw;
    else if (t == "LOG1P") c.rain_transform = RainTransform::Log1p;
    else throw ConfigError("unet3d.rain_transform must be RAW or LOG1P, got '" + t + "'");
    c.eth_scale = get_double("unet3d.eth_scale");
    validate_model_config(c);
    return c;
}

HyperParams Config::hyper_params() const {
    HyperParams h;
    h.lr = get_double("train.lr");
    h.batch = get_int("train.batch");
    h.max_epochs = get_int("train.max_epochs");
    h.patience_early = get_int("train.patience_early");
    h.plateau_patience = get_int("train.plateau_patience");
    h.plateau_factor = get_double("train.plateau_factor");
    h.val_every = get_int("train.val_every");
    return h;
}

VerifyConfig Config::verify_config() const {
    VerifyConfig v;
    v.categorical_thresholds = get_double_list("verify.categorical_thresholds");
    v.fss_thresholds = get_double_list("verify.fss_thresholds");
    v.fss_radii = get_int_list("verify.fss_radii");
    v.fss_report_leads_min = get_int_list("verify.fss_report_leads");
    validate_verify_config(v);
    return v;
}

MotionParams Config::motion_params() const {
    MotionParams p;
    p.block = get_int("baseline.block");
    p.search_radius = get_int("baseline.search_radius");
    p.min_correlation = get_double("baseline.min_correlation");
    return p;
}

SynthEventParams Config::synth_event_params() const {
    SynthEventParams p;
    p.rows = uint32_t(get_int("synthgen.rows"));
    p.cols = uint32_t(get_int("synthgen.cols"));
    p.min_cells = get_int("synthgen.min_cells");
    p.max_cells = get_int("synthgen.max_cells");
    p.amplitude_min = get_double("synthgen.amplitude_min");
    p.amplitude_max = get_double("synthgen.amplitude_max");
    p.sigma_min = get_double("synthgen.sigma_min");
    p.sigma_max = get_double("synthgen.sigma_max");
    p.speed_max = get_double("synthgen.speed_max");
    p.growth_min = get_double("synthgen.growth_min");
    p.growth_max = get_double("synthgen.growth_max");
    p.eth_base = get_double("synthgen.eth_base");
    p.eth_gain = get_double("synthgen.eth_gain");
    p.eth_noise_sd = get_double("synthgen.eth_noise_sd");
    p.artifact_rings = get_bool("synthgen.artifact_rings");
    return p;
}

DatasetConfig Config::dataset_config() const {
    DatasetConfig c;
    c.n_train_events = get_int("synthgen.n_events");
    c.n_test_events = get_int("synthgen.n_test_events");
    c.seed = get_uint64("synthgen.seed");
    c.event = synth_event_params();
    c.sampler = sampler_config();
    c.jobs = jobs();
    return c;
}

int Config::jobs() const {
    return std::max(1, get_int("cli.jobs"));
}

}  // namespace nowcast
