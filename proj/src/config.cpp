#include "heatcast/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "heatcast/errors.hpp"

namespace heatcast {

namespace {

enum class ValueType { Bool, Int, Real, String, RealList, IntList };

struct KeySpec {
    const char* key;
    ValueType type;
    const char* default_value;
    const char* constraint;  // human-readable; empty when the type check suffices
    bool (*check)(const Config&, const std::string&);
};

bool always_ok(const Config&, const std::string&) { return true; }

bool parse_int(const std::string& s, int64_t& out) {
    char* end = nullptr;
    out = std::strtoll(s.c_str(), &end, 10);
    return end && *end == '\0' && !s.empty();
}

bool parse_real(const std::string& s, double& out) {
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end && *end == '\0' && !s.empty();
}

bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "1") {
        out = true;
        return true;
    }
    if (s == "false" || s == "0") {
        out = false;
        return true;
    }
    return false;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

template <double Lo, double Hi, bool LoOpen = false, bool HiOpen = false>
bool in_range(const Config&, const std::string& v) {
    double x;
    if (!parse_real(v, x)) return false;
    if (LoOpen ? !(x > Lo) : !(x >= Lo)) return false;
    if (HiOpen ? !(x < Hi) : !(x <= Hi)) return false;
    return true;
}

bool positive_int(const Config&, const std::string& v) {
    int64_t x;
    return parse_int(v, x) && x > 0;
}

bool nonneg_int(const Config&, const std::string& v) {
    int64_t x;
    return parse_int(v, x) && x >= 0;
}

bool valid_levels(const Config&, const std::string& v) {
    double prev = 1.0;
    for (const std::string& part : split_list(v)) {
        double x;
        if (!parse_real(part, x) || !(x > 0.0 && x < 1.0) || !(x < prev)) return false;
        prev = x;
    }
    return true;
}

bool valid_taus(const Config&, const std::string& v) {
    for (const std::string& part : split_list(v)) {
        int64_t x;
        if (!parse_int(part, x) || x < 0) return false;
    }
    return true;
}

bool valid_epoch_list(const Config&, const std::string& v) {
    for (const std::string& part : split_list(v)) {
        int64_t x;
        if (!parse_int(part, x) || x < 0) return false;
    }
    return true;
}

bool valid_mode(const Config&, const std::string& v) {
    return v == "P1" || v == "P2" || v == "P3" || v == "P4" || v == "AND" || v == "CHAIN";
}

bool valid_scale(const Config&, const std::string& v) { return v == "desk" || v == "full"; }

bool valid_ratio(const Config&, const std::string& v) {
    double x;
    return parse_real(v, x) && x >= 0.0;
}

const KeySpec kSchema[] = {
    {"scale", ValueType::String, "desk", "one of desk|full", valid_scale},
    {"grid.n_lat", ValueType::Int, "32", ">= 2", [](const Config&, const std::string& v) { int64_t x; return parse_int(v, x) && x >= 2; }},
    {"grid.n_lon", ValueType::Int, "32", ">= 2", [](const Config&, const std::string& v) { int64_t x; return parse_int(v, x) && x >= 2; }},
    {"grid.lat_min_deg", ValueType::Real, "-90", "in [-90, 90]", in_range<-90.0, 90.0>},
    {"grid.lat_max_deg", ValueType::Real, "90", "in [-90, 90]", in_range<-90.0, 90.0>},
    {"grid.samples_per_day", ValueType::Int, "8", "> 0 and dividing 86400", [](const Config&, const std::string& v) { int64_t x; return parse_int(v, x) && x > 0 && 86400 % x == 0; }},
    {"grid.days_per_season", ValueType::Int, "90", "> 0", positive_int},
    {"grid.days_before_season", ValueType::Int, "32", ">= 0", nonneg_int},
    {"grid.days_after_season", ValueType::Int, "16", ">= 0", nonneg_int},
    {"synth.n_years", ValueType::Int, "100", ">= 2", [](const Config&, const std::string& v) { int64_t x; return parse_int(v, x) && x >= 2; }},
    {"synth.seed", ValueType::Int, "42", ">= 0", nonneg_int},
    {"synth.correlation_days", ValueType::Real, "4.0", "> 0", in_range<0.0, 1e9, true>},
    {"synth.coupling_strength", ValueType::Real, "0.6", "in [0, 1]", in_range<0.0, 1.0>},
    {"synth.coupling_lead_days", ValueType::Real, "10.0", ">= 0", in_range<0.0, 1e9>},
    {"synth.noise_sigma", ValueType::Real, "1.0", "> 0", in_range<0.0, 1e9, true>},
    {"synth.spatial_corr_cells", ValueType::Real, "4.0", "> 0", in_range<0.0, 1e9, true>},
    {"synth.zg_pattern_amp_m", ValueType::Real, "60.0", ">= 0", in_range<0.0, 1e9>},
    {"synth.zg_noise_sigma_m", ValueType::Real, "40.0", "> 0", in_range<0.0, 1e9, true>},
    {"synth.ts_base_kelvin", ValueType::Real, "288.0", "", always_ok},
    {"synth.ts_pole_drop_kelvin", ValueType::Real, "30.0", "", always_ok},
    {"synth.ts_seasonal_amp_kelvin", ValueType::Real, "10.0", "", always_ok},
    {"region.target_lat_lo", ValueType::Real, "40.0", "in [-90, 90]", in_range<-90.0, 90.0>},
    {"region.target_lat_hi", ValueType::Real, "55.0", "in [-90, 90]", in_range<-90.0, 90.0>},
    {"region.target_lon_lo", ValueType::Real, "0.0", "", always_ok},
    {"region.target_lon_hi", ValueType::Real, "25.0", "", always_ok},
    {"region.predictor_lat_lo", ValueType::Real, "-45.0", "in [-90, 90]", in_range<-90.0, 90.0>},
    {"region.predictor_lat_hi", ValueType::Real, "90.0", "in [-90, 90]", in_range<-90.0, 90.0>},
    {"region.cos_weighting", ValueType::Bool, "true", "", always_ok},
    {"label.d_days", ValueType::Int, "14", ">= 1", positive_int},
    {"label.levels", ValueType::RealList, "0.05,0.025,0.0125",
     "strictly decreasing fractions in (0, 1)", valid_levels},
    {"features.spectral_rows", ValueType::Int, "16", ">= 2", [](const Config&, const std::string& v) { int64_t x; return parse_int(v, x) && x >= 2; }},
    {"features.spectral_cols", ValueType::Int, "16", ">= 2", [](const Config&, const std::string& v) { int64_t x; return parse_int(v, x) && x >= 2; }},
    {"features.tau_days", ValueType::Int, "0", ">= 0", nonneg_int},
    {"features.allow_row_crop", ValueType::Bool, "true", "", always_ok},
    {"features.dump_level_index", ValueType::Int, "0", ">= 0", nonneg_int},
    {"net.conv_channels", ValueType::Int, "8", "> 0", positive_int},
    {"net.dense_hidden", ValueType::Int, "32", "> 0", positive_int},
    {"net.kernel1", ValueType::Int, "3", ">= 1", positive_int},
    {"net.kernel2", ValueType::Int, "3", ">= 1", positive_int},
    {"net.dropout_rate", ValueType::Real, "0.3", "in [0, 1)", in_range<0.0, 1.0, false, true>},
    {"train.protocol", ValueType::String, "P4", "one of P1|P2|P3|P4|AND|CHAIN", valid_mode},
    {"train.epochs", ValueType::Int, "10", ">= 0", nonneg_int},
    {"train.chain_epochs", ValueType::IntList, "10,5,5", "nonnegative ints", valid_epoch_list},
    {"train.batch_size", ValueType::Int, "64", ">= 2", [](const Config&, const std::string& v) { int64_t x; return parse_int(v, x) && x >= 2; }},
    {"train.eval_batch_size", ValueType::Int, "512", "> 0", positive_int},
    {"train.learning_rate", ValueType::Real, "2e-4", "> 0", in_range<0.0, 1e9, true>},
    {"train.beta1", ValueType::Real, "0.5", "in [0, 1)", in_range<0.0, 1.0, false, true>},
    {"train.beta2", ValueType::Real, "0.999", "in [0, 1)", in_range<0.0, 1.0, false, true>},
    {"train.epsilon", ValueType::Real, "1e-8", "> 0", in_range<0.0, 1.0, true>},
    {"train.level_index", ValueType::Int, "0", ">= 0", nonneg_int},
    {"train.ratio", ValueType::Real, "2", ">= 0 (0 disables undersampling)", valid_ratio},
    {"split.n_train_years", ValueType::Int, "90", "> 0", positive_int},
    {"split.n_test_years", ValueType::Int, "10", "> 0", positive_int},
    {"split.proportion_tolerance", ValueType::Real, "0.10", "> 0", in_range<0.0, 10.0, true>},
    {"trials.n", ValueType::Int, "10", ">= 1", positive_int},
    {"trials.master_seed", ValueType::Int, "1234", ">= 0", nonneg_int},
    {"sweep.taus", ValueType::IntList, "0,5,10,20", "nonnegative ints", valid_taus},
    {"paths.archive", ValueType::String, "archive.hcst", "", always_ok},
    {"paths.oracle", ValueType::String, "oracle.hcst", "", always_ok},
};

const KeySpec* find_spec(const std::string& key) {
    for (const KeySpec& s : kSchema)
        if (key == s.key) return &s;
    return nullptr;
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

const char* type_name(ValueType t) {
    switch (t) {
        case ValueType::Bool: return "bool";
        case ValueType::Int: return "integer";
        case ValueType::Real: return "real";
        case ValueType::String: return "string";
        case ValueType::RealList: return "comma-separated reals";
        case ValueType::IntList: return "comma-separated integers";
    }
    return "?";
}

bool type_ok(ValueType t, const std::string& v) {
    int64_t i;
    double r;
    bool b;
    switch (t) {
        case ValueType::Bool: return parse_bool(v, b);
        case ValueType::Int: return parse_int(v, i);
        case ValueType::Real: return parse_real(v, r);
        case ValueType::String: return !v.empty();
        case ValueType::RealList:
            for (const std::string& p : split_list(v))
                if (!parse_real(p, r)) return false;
            return true;
        case ValueType::IntList:
            for (const std::string& p : split_list(v))
                if (!parse_int(p, i)) return false;
            return true;
    }
    return false;
}

}  // namespace

Config Config::defaults() {
    Config c;
    for (const KeySpec& s : kSchema) c.values_[s.key] = s.default_value;
    return c;
}

Config Config::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open '" + path + "'");
    Config c = defaults();
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            c.parse_errors_.push_back("line " + std::to_string(lineno) +
                                      ": expected key = value");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!find_spec(key)) {
            c.parse_errors_.push_back("unknown key '" + key + "'");
            continue;
        }
        c.values_[key] = value;
    }
    return c;
}

void Config::apply_override(const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + assignment + "' is not KEY=VALUE");
    const std::string key = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    if (!find_spec(key)) {
        std::string msg = "unknown key '" + key + "'; valid keys:";
        for (const KeySpec& s : kSchema) msg += std::string("\n  ") + s.key;
        throw ConfigError(msg);
    }
    values_[key] = value;
}

std::vector<std::string> Config::validate() const {
    std::vector<std::string> errors = parse_errors_;
    for (const KeySpec& s : kSchema) {
        const auto it = values_.find(s.key);
        if (it == values_.end()) {
            errors.push_back(std::string(s.key) + ": missing");
            continue;
        }
        if (!type_ok(s.type, it->second)) {
            errors.push_back(std::string(s.key) + " = '" + it->second + "': expected " +
                             type_name(s.type));
            continue;
        }
        if (!s.check(*this, it->second)) {
            errors.push_back(std::string(s.key) + " = '" + it->second +
                             "': violates constraint " + s.constraint);
        }
    }
    // Cross-key checks.
    auto geti = [&](const char* k) { return std::strtoll(values_.at(k).c_str(), nullptr, 10); };
    if (errors.empty()) {
        if (geti("split.n_train_years") + geti("split.n_test_years") > geti("synth.n_years"))
            errors.push_back("split.n_train_years + split.n_test_years exceeds synth.n_years");
        if (std::strtod(values_.at("grid.lat_max_deg").c_str(), nullptr) <=
            std::strtod(values_.at("grid.lat_min_deg").c_str(), nullptr))
            errors.push_back("grid.lat_max_deg must exceed grid.lat_min_deg");
    }
    return errors;
}

std::string Config::normalized() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
}

uint64_t Config::hash64() const {
    const std::string text = normalized();
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<std::string> Config::known_keys() {
    std::vector<std::string> keys;
    for (const KeySpec& s : kSchema) keys.push_back(s.key);
    return keys;
}

const std::string& Config::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: no key '" + key + "'");
    return it->second;
}

int64_t Config::get_int(const std::string& key) const {
    int64_t x;
    if (!parse_int(raw(key), x)) throw ConfigError("config: '" + key + "' is not an integer");
    return x;
}

double Config::get_real(const std::string& key) const {
    double x;
    if (!parse_real(raw(key), x)) throw ConfigError("config: '" + key + "' is not a real");
    return x;
}

bool Config::get_bool(const std::string& key) const {
    bool x;
    if (!parse_bool(raw(key), x)) throw ConfigError("config: '" + key + "' is not a bool");
    return x;
}

std::vector<double> Config::get_reals(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& p : split_list(raw(key))) {
        double x;
        if (!parse_real(p, x)) throw ConfigError("config: '" + key + "' has a non-real entry");
        out.push_back(x);
    }
    return out;
}

std::vector<int> Config::get_ints(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& p : split_list(raw(key))) {
        int64_t x;
        if (!parse_int(p, x)) throw ConfigError("config: '" + key + "' has a non-integer entry");
        out.push_back(int(x));
    }
    return out;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!find_spec(key)) throw ConfigError("config: no key '" + key + "'");
    values_[key] = value;
}

ExperimentSetup materialize(const Config& c) {
    const std::vector<std::string> errors = c.validate();
    if (!errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const std::string& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }

    ExperimentSetup s;
    s.grid.n_lat = int(c.get_int("grid.n_lat"));
    s.grid.n_lon = int(c.get_int("grid.n_lon"));
    s.grid.lat_min_deg = c.get_real("grid.lat_min_deg");
    s.grid.lat_max_deg = c.get_real("grid.lat_max_deg");
    s.grid.samples_per_day = int(c.get_int("grid.samples_per_day"));
    s.grid.seconds_per_sample = 86400 / s.grid.samples_per_day;
    s.grid.days_per_season = int(c.get_int("grid.days_per_season"));
    s.grid.days_before_season = int(c.get_int("grid.days_before_season"));
    s.grid.days_after_season = int(c.get_int("grid.days_after_season"));
    s.grid.validate();

    s.synth.spec = s.grid;
    s.synth.seed = uint64_t(c.get_int("synth.seed"));
    s.synth.correlation_days = c.get_real("synth.correlation_days");
    s.synth.coupling_strength = c.get_real("synth.coupling_strength");
    s.synth.coupling_lead_days = c.get_real("synth.coupling_lead_days");
    s.synth.noise_sigma = c.get_real("synth.noise_sigma");
    s.synth.spatial_corr_cells = c.get_real("synth.spatial_corr_cells");
    s.synth.zg_pattern_amp_m = c.get_real("synth.zg_pattern_amp_m");
    s.synth.zg_noise_sigma_m = c.get_real("synth.zg_noise_sigma_m");
    s.synth.ts_base_kelvin = c.get_real("synth.ts_base_kelvin");
    s.synth.ts_pole_drop_kelvin = c.get_real("synth.ts_pole_drop_kelvin");
    s.synth.ts_seasonal_amp_kelvin = c.get_real("synth.ts_seasonal_amp_kelvin");
    s.synth.target_lat_lo = c.get_real("region.target_lat_lo");
    s.synth.target_lat_hi = c.get_real("region.target_lat_hi");
    s.synth.target_lon_lo = c.get_real("region.target_lon_lo");
    s.synth.target_lon_hi = c.get_real("region.target_lon_hi");
    s.synth.cos_weighting = c.get_bool("region.cos_weighting");
    s.synth.validate();
    s.n_years = int(c.get_int("synth.n_years"));

    s.target_region = s.synth.target_region();
    s.predictor_region = make_region_latlon(
        s.grid, c.get_real("region.predictor_lat_lo"), c.get_real("region.predictor_lat_hi"),
        0.0, 360.0 - 1e-9, s.synth.cos_weighting);

    s.heatwave.region = s.target_region;
    s.heatwave.d_days = int(c.get_int("label.d_days"));
    s.heatwave.levels = c.get_reals("label.levels");
    s.heatwave.validate();

    s.features.predictor_region = s.predictor_region;
    s.features.spectral_rows = int(c.get_int("features.spectral_rows"));
    s.features.spectral_cols = int(c.get_int("features.spectral_cols"));
    s.features.tau_days = int(c.get_int("features.tau_days"));
    s.features.allow_row_crop = c.get_bool("features.allow_row_crop");
    s.features.protocol = Protocol::P4_Stacked;
    s.features.validate();

    s.arch.conv_channels = int(c.get_int("net.conv_channels"));
    s.arch.dense_hidden = int(c.get_int("net.dense_hidden"));
    s.arch.kernel1 = int(c.get_int("net.kernel1"));
    s.arch.kernel2 = int(c.get_int("net.kernel2"));
    s.arch.dropout_rate = c.get_real("net.dropout_rate");
    s.arch.input_rows = s.features.spectral_rows;
    s.arch.input_cols = s.features.spectral_cols;

    s.opt.learning_rate = c.get_real("train.learning_rate");
    s.opt.beta1 = c.get_real("train.beta1");
    s.opt.beta2 = c.get_real("train.beta2");
    s.opt.epsilon = c.get_real("train.epsilon");

    s.split.n_train_years = int(c.get_int("split.n_train_years"));
    s.split.n_test_years = int(c.get_int("split.n_test_years"));
    s.split.proportion_tolerance = c.get_real("split.proportion_tolerance");

    s.train_mode = c.raw("train.protocol");
    s.epochs = int(c.get_int("train.epochs"));
    s.chain_epochs = c.get_ints("train.chain_epochs");
    s.ratio = c.get_real("train.ratio");
    s.level_index = int(c.get_int("train.level_index"));
    if (s.level_index >= int(s.heatwave.levels.size()))
        throw ConfigError("train.level_index exceeds label.levels length");
    s.n_trials = int(c.get_int("trials.n"));
    s.master_seed = uint64_t(c.get_int("trials.master_seed"));
    s.taus = c.get_ints("sweep.taus");
    s.dump_level_index = int(c.get_int("features.dump_level_index"));
    if (s.dump_level_index >= int(s.heatwave.levels.size()))
        throw ConfigError("features.dump_level_index exceeds label.levels length");
    s.archive_name = c.raw("paths.archive");
    s.oracle_name = c.raw("paths.oracle");
    return s;
}

}  // namespace heatcast
