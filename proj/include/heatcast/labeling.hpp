#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "heatcast/archive.hpp"
#include "heatcast/grid.hpp"

namespace heatcast {

/// Event definition: D-day mean of the region-averaged anomaly exceeding an
/// empirical quantile threshold.
struct HeatwaveConfig {
    Region region;
    int d_days = 14;
    std::vector<double> levels = {0.05, 0.025, 0.0125};  // strictly decreasing

    void validate() const;
};

struct LevelThreshold {
    double level = 0.0;
    double a_kelvin = 0.0;
    int64_t n_positive = 0;
    int64_t n_total = 0;
    // Ties at the threshold value broke the exact floor(p*N) count.
    bool degenerate = false;
};

/// Per-(year, in-season sample) Y values and binary labels for every level.
struct LabelSet {
    int n_years = 0;
    int season_start = 0;     // intra-year sample index of the first in-season sample
    int season_samples = 0;
    int samples_per_day = 8;
    std::vector<double> y;                  // [year][s], s in [0, season_samples)
    std::vector<LevelThreshold> thresholds;
    std::vector<std::vector<uint8_t>> z;    // [level][year * season_samples + s]

    int64_t n_samples() const { return int64_t(n_years) * season_samples; }
    size_t index(int year, int s) const { return size_t(year) * season_samples + s; }
    uint8_t label(int level, int year, int s) const { return z[level][index(year, s)]; }
    int label_t(int s) const { return season_start + s; }  // intra-year index
};

/// Mean of the series over [t, t + d_days * samples_per_day); throws
/// BoundsError if the window leaves the series.
double compute_Y(std::span<const double> series, int t, int d_days, int samples_per_day);

/// Value a with exactly floor(p_a * N) samples strictly above it, i.e. the
/// (floor(p_a * N) + 1)-th largest value. Ties at a count as negatives and
/// can reduce the exceedance count; callers detect that via the returned
/// counts in make_labels. Throws LevelTooExtremeError when floor(p_a*N) < 1.
double empirical_threshold(std::span<const double> y_values, double p_a);

/// Region-averaged anomaly per (year, intra-year t), ordered [year][t].
std::vector<double> regional_anomaly_series(const FieldArchive& archive, int var,
                                            const Climatology& clim, const Region& region);

/// Full labeling pass: Y for every in-season sample of every year, thresholds
/// pooled over all years, binary labels per level.
LabelSet make_labels(const FieldArchive& archive, const Climatology& clim_ts,
                     const HeatwaveConfig& config);

/// Label export: one CSV per level (year, t, Y_kelvin, label) plus a JSON
/// threshold summary. comment_line goes verbatim after each CSV header.
void write_labels(const LabelSet& labels, const std::string& out_dir,
                  const std::string& comment_line);

}  // namespace heatcast
