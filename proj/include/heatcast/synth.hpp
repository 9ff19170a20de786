#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "heatcast/archive.hpp"
#include "heatcast/grid.hpp"

namespace heatcast {

/// Generator settings. The planted structure is linear-Gaussian:
///
///   regional mean T_s anomaly  A(t) = c * P(t - lead) + (1 - c) * eta(t)
///
/// where P (the precursor, unit variance) and eta (std noise_sigma) are
/// independent AR(1) processes with e-folding time correlation_days. P is
/// imprinted onto Z_g as a fixed bump pattern upstream of the target region,
/// so Z_g anticipates the regional temperature response by coupling_lead_days.
/// Both fields additionally carry spatially smooth red noise and a
/// deterministic base (latitude profile plus a seasonal sinusoid for T_s)
/// that plays the role of the true climatology.
struct SynthConfig {
    GridSpec spec{.n_lat = 32, .n_lon = 32};
    uint64_t seed = 42;
    double correlation_days = 4.0;
    double coupling_strength = 0.6;   // c in [0, 1]
    double coupling_lead_days = 10.0;
    double noise_sigma = 1.0;         // Kelvin
    double spatial_corr_cells = 4.0;

    // Target area whose mean anomaly carries the coupling. Must match the
    // region handed to the labeler.
    double target_lat_lo = 40.0;
    double target_lat_hi = 55.0;
    double target_lon_lo = 0.0;
    double target_lon_hi = 25.0;
    bool cos_weighting = true;

    // Z_g imprint scales (meters). The per-snapshot signal-to-noise of the
    // precursor pattern is pattern_amp/noise for cells near the bump center.
    double zg_pattern_amp_m = 60.0;
    double zg_noise_sigma_m = 40.0;

    // Deterministic background (the generative climatology). Configurable so
    // tests can zero the large Kelvin offset, which would otherwise swamp
    // sub-1e-6 checks with float32 absorption error.
    double ts_base_kelvin = 288.0;
    double ts_pole_drop_kelvin = 30.0;
    double ts_seasonal_amp_kelvin = 10.0;

    void validate() const;
    Region target_region() const;
};

/// Latent precursor amplitude per generated sample, [year][t].
struct OracleSet {
    GridSpec spec;
    int n_years = 0;
    std::vector<float> values;

    float at(int year, int t) const {
        return values[size_t(year) * spec.samples_per_year() + t];
    }

    /// Sidecar file reuses the field-archive format on a 1x1 grid with the
    /// single variable "ORACLE".
    void save(const std::string& path) const;
    static OracleSet load(const std::string& path);
};

struct SynthOutput {
    FieldArchive archive;  // variables TS, ZG
    OracleSet oracle;
};

/// Deterministic generation of n_years of coupled (T_s, Z_g) fields.
/// Identical config and n_years give a byte-identical archive; worker count
/// only affects wall time. Throws InsufficientDataError for n_years < 2.
SynthOutput generate(const SynthConfig& config, int n_years, int workers = 0);

/// The generative climatology (deterministic base component).
double deterministic_ts(const SynthConfig& config, int t, int row, int col);
double deterministic_zg(const SynthConfig& config, int row, int col);

/// Probability under the generative model that Y(t) (the D-day mean of the
/// regional anomaly starting at t) exceeds threshold_kelvin, conditioned on
/// the precursor value observed tau_days earlier. Closed form from the
/// Gaussian decomposition of Y.
double oracle_score(const SynthConfig& config, const OracleSet& oracle, int year, int t,
                    double tau_days, int d_days, double threshold_kelvin);

/// Mean and variance of Y(t) given the precursor at t - tau (same math as
/// oracle_score, exposed for calibration work).
struct OracleMoments {
    double mean_coeff;  // conditional mean = mean_coeff * precursor value
    double variance;
};
OracleMoments oracle_moments(const SynthConfig& config, double tau_days, int d_days);

}  // namespace heatcast
