#include "heatcast/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "heatcast/errors.hpp"

namespace heatcast {

void HeatwaveConfig::validate() const {
    if (d_days < 1) throw ConfigError("labeling: d_days must be >= 1");
    if (levels.empty()) throw ConfigError("labeling: need at least one level");
    double prev = 1.0;
    for (double p : levels) {
        if (!(p > 0.0 && p < 1.0))
            throw ConfigError("labeling: levels must lie in (0, 1)");
        if (!(p < prev))
            throw ConfigError("labeling: levels must be strictly decreasing");
        prev = p;
    }
}

double compute_Y(std::span<const double> series, int t, int d_days, int samples_per_day) {
    const int64_t window = int64_t(d_days) * samples_per_day;
    if (t < 0 || t + window > int64_t(series.size()))
        throw BoundsError("compute_Y: window [t, t + D) leaves the series");
    double acc = 0.0;
    for (int64_t k = 0; k < window; ++k) acc += series[size_t(t) + k];
    return acc / double(window);
}

double empirical_threshold(std::span<const double> y_values, double p_a) {
    if (y_values.empty()) throw InsufficientDataError("threshold: no Y samples");
    if (!(p_a > 0.0 && p_a < 1.0))
        throw ConfigError("threshold: level must lie in (0, 1)");
    const int64_t n = int64_t(y_values.size());
    const int64_t k = int64_t(std::floor(p_a * double(n)));
    if (k < 1)
        throw LevelTooExtremeError("threshold: floor(p*N) < 1, level too extreme for dataset");
    std::vector<double> sorted(y_values.begin(), y_values.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    return sorted[size_t(k)];  // (k+1)-th largest
}

std::vector<double> regional_anomaly_series(const FieldArchive& archive, int var,
                                            const Climatology& clim, const Region& region) {
    const GridSpec& spec = archive.spec;
    if (!(clim.spec == spec))
        throw DimensionError("regional series: climatology grid mismatch");
    const int spy = spec.samples_per_year();
    std::vector<double> series(size_t(archive.n_years) * spy);
    for (int y = 0; y < archive.n_years; ++y) {
        for (int t = 0; t < spy; ++t) {
            const std::span<const float> f = archive.field(var, y, t);
            const std::span<const double> c = clim.slice(t);
            double acc = 0.0;
            for (size_t i = 0; i < f.size(); ++i)
                if (region.mask[i]) acc += region.weights[i] * (double(f[i]) - c[i]);
            series[size_t(y) * spy + t] = acc;
        }
    }
    return series;
}

LabelSet make_labels(const FieldArchive& archive, const Climatology& clim_ts,
                     const HeatwaveConfig& config) {
    config.validate();
    const GridSpec& spec = archive.spec;
    const int spy = spec.samples_per_year();
    const int window = config.d_days * spec.samples_per_day;
    const int season_start = spec.season_start_sample();
    const int season_samples = spec.season_samples();
    if (season_start + season_samples - 1 + window > spy)
        throw BoundsError(
            "make_labels: archive window does not extend D days past the season end");

    const int var_ts = archive.variable_index(kVarTs);
    const std::vector<double> series =
        regional_anomaly_series(archive, var_ts, clim_ts, config.region);

    LabelSet out;
    out.n_years = archive.n_years;
    out.season_start = season_start;
    out.season_samples = season_samples;
    out.samples_per_day = spec.samples_per_day;
    out.y.resize(size_t(out.n_samples()));
    for (int y = 0; y < archive.n_years; ++y) {
        const std::span<const double> year_series{series.data() + size_t(y) * spy, size_t(spy)};
        for (int s = 0; s < season_samples; ++s)
            out.y[out.index(y, s)] =
                compute_Y(year_series, season_start + s, config.d_days, spec.samples_per_day);
    }

    for (double level : config.levels) {
        LevelThreshold th;
        th.level = level;
        th.n_total = out.n_samples();
        th.a_kelvin = empirical_threshold(out.y, level);
        std::vector<uint8_t> z(out.y.size());
        int64_t positives = 0;
        for (size_t i = 0; i < out.y.size(); ++i) {
            z[i] = out.y[i] > th.a_kelvin ? 1 : 0;
            positives += z[i];
        }
        th.n_positive = positives;
        th.degenerate = positives != int64_t(std::floor(level * double(th.n_total)));
        out.thresholds.push_back(th);
        out.z.push_back(std::move(z));
    }
    return out;
}

void write_labels(const LabelSet& labels, const std::string& out_dir,
                  const std::string& comment_line) {
    std::filesystem::create_directories(out_dir);
    for (size_t li = 0; li < labels.thresholds.size(); ++li) {
        char name[64];
        std::snprintf(name, sizeof(name), "labels_%g.csv",
                      labels.thresholds[li].level * 100.0);
        std::ofstream f(std::filesystem::path(out_dir) / name);
        if (!f) throw IoError("labels: cannot write CSV in " + out_dir);
        f << "year,t,Y_kelvin,label\n";
        f << "# " << comment_line << "\n";
        char line[128];
        for (int y = 0; y < labels.n_years; ++y) {
            for (int s = 0; s < labels.season_samples; ++s) {
                std::snprintf(line, sizeof(line), "%d,%d,%.9g,%d\n", y, labels.label_t(s),
                              labels.y[labels.index(y, s)], int(labels.label(int(li), y, s)));
                f << line;
            }
        }
    }

    nlohmann::json j;
    j["comment"] = comment_line;
    j["levels"] = nlohmann::json::array();
    for (const LevelThreshold& th : labels.thresholds) {
        j["levels"].push_back({{"level", th.level},
                               {"a_kelvin", th.a_kelvin},
                               {"n_positive", th.n_positive},
                               {"n_total", th.n_total},
                               {"degenerate", th.degenerate}});
    }
    std::ofstream jf(std::filesystem::path(out_dir) / "thresholds.json");
    if (!jf) throw IoError("labels: cannot write thresholds.json in " + out_dir);
    jf << j.dump(2) << "\n";
}

}  // namespace heatcast
