#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "heatcast/features.hpp"
#include "heatcast/grid.hpp"
#include "heatcast/labeling.hpp"
#include "heatcast/nn.hpp"
#include "heatcast/pipeline.hpp"
#include "heatcast/synth.hpp"

namespace heatcast {

/// Flat key=value configuration with a fixed schema, desk-scale defaults,
/// and full-scale values accepted everywhere. Precedence: CLI overrides >
/// file > defaults.
class Config {
public:
    /// All keys at their desk-scale defaults.
    static Config defaults();

    /// Parses `key = value` lines ('#' comments, blank lines allowed).
    /// Unknown keys and malformed lines are recorded as violations rather
    /// than thrown, so validate() can report everything at once.
    static Config from_file(const std::string& path);

    /// Applies one KEY=VALUE override (CLI --set).
    void apply_override(const std::string& assignment);

    /// Every violated constraint, one message each; empty means valid.
    std::vector<std::string> validate() const;

    /// Sorted `key = value` lines; the reproducibility anchor.
    std::string normalized() const;

    /// FNV-1a of the normalized form.
    uint64_t hash64() const;

    static std::vector<std::string> known_keys();

    const std::string& raw(const std::string& key) const;
    int64_t get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_reals(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key) const;

    void set(const std::string& key, const std::string& value);

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> parse_errors_;
};

/// Domain objects materialized from a validated Config.
struct ExperimentSetup {
    GridSpec grid;
    SynthConfig synth;
    int n_years = 100;
    Region target_region;
    Region predictor_region;
    HeatwaveConfig heatwave;
    FeatureConfig features;
    nn::NetArch arch;
    AmsGradConfig opt;
    SplitConfig split;
    std::string train_mode;  // P1 | P2 | P3 | P4 | AND | CHAIN
    int epochs = 10;
    std::vector<int> chain_epochs = {10, 5, 5};
    double ratio = 2.0;
    int level_index = 0;
    int n_trials = 10;
    uint64_t master_seed = 1234;
    std::vector<int> taus;
    int dump_level_index = 0;
    std::string archive_name;
    std::string oracle_name;
};

/// Throws ConfigError listing every violation when the config is invalid.
ExperimentSetup materialize(const Config& config);

}  // namespace heatcast
