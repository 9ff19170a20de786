#include "heatcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "heatcast/errors.hpp"
#include "heatcast/rng.hpp"

namespace heatcast {

namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr double kPrecursorSigma = 1.0;
// Calendar constants for the seasonal sinusoid (30-day months).
constexpr double kSeasonStartDoy = 150.0;
constexpr double kSeasonalPeakDoy = 196.0;
constexpr double kZgBase = 5600.0;
constexpr double kZgPoleDrop = 300.0;
constexpr double kBumpUpstreamDeg = 45.0;  // bump center west of the target

double day_of_year(const GridSpec& spec, int t) {
    return kSeasonStartDoy - spec.days_before_season + double(t) / spec.samples_per_day;
}

/// Smooth low-wavenumber noise field: a sum of Fourier modes whose
/// amplitudes follow a Gaussian spectrum with e-folding length ~corr cells,
/// each driven by two independent AR(1) processes in time.
struct SpatialModes {
    struct Mode {
        double amp;
        std::vector<float> cos_tab;  // per cell
        std::vector<float> sin_tab;
    };
    std::vector<Mode> modes;

    SpatialModes(const GridSpec& spec, double corr_cells, double sigma) {
        const int max_p = spec.n_lon / 2;
        const int max_q = spec.n_lat / 2;
        double energy = 0.0;
        for (int p = 0; p <= max_p; ++p) {
            for (int q = (p == 0 ? 1 : -max_q); q <= max_q; ++q) {
                const double k = 2.0 * M_PI *
                                 std::sqrt(double(p) * p / (double(spec.n_lon) * spec.n_lon) +
                                           double(q) * q / (double(spec.n_lat) * spec.n_lat));
                const double amp = std::exp(-0.25 * k * k * corr_cells * corr_cells);
                if (amp < 0.02) continue;
                Mode m;
                m.amp = amp;
                m.cos_tab.resize(size_t(spec.cells()));
                m.sin_tab.resize(size_t(spec.cells()));
                for (int i = 0; i < spec.n_lat; ++i) {
                    for (int j = 0; j < spec.n_lon; ++j) {
                        const double phase =
                            2.0 * M_PI * (double(p) * j / spec.n_lon + double(q) * i / spec.n_lat);
                        m.cos_tab[size_t(i) * spec.n_lon + j] = float(std::cos(phase));
                        m.sin_tab[size_t(i) * spec.n_lon + j] = float(std::sin(phase));
                    }
                }
                energy += amp * amp;
                modes.push_back(std::move(m));
            }
        }
        const double scale = sigma / std::sqrt(energy);
        for (Mode& m : modes) m.amp *= scale;
    }
};

/// Time-marching state for one field's noise: two AR(1) coefficients per
/// mode, all innovations drawn from one stream in fixed order.
struct ModeProcess {
    std::vector<double> u, v;

    ModeProcess(size_t n_modes, Rng& rng) : u(n_modes), v(n_modes) {
        for (size_t m = 0; m < n_modes; ++m) {
            u[m] = rng.normal();
            v[m] = rng.normal();
        }
    }
    void step(double alpha, double innov, Rng& rng) {
        for (size_t m = 0; m < u.size(); ++m) {
            u[m] = alpha * u[m] + innov * rng.normal();
            v[m] = alpha * v[m] + innov * rng.normal();
        }
    }
    void render(const SpatialModes& basis, std::vector<float>& out) const {
        std::fill(out.begin(), out.end(), 0.0f);
        for (size_t m = 0; m < u.size(); ++m) {
            const float cu = float(basis.modes[m].amp * u[m]);
            const float cv = float(basis.modes[m].amp * v[m]);
            const float* ct = basis.modes[m].cos_tab.data();
            const float* st = basis.modes[m].sin_tab.data();
            for (size_t c = 0; c < out.size(); ++c) out[c] += cu * ct[c] + cv * st[c];
        }
    }
};

/// Gaussian bump in cell coordinates with cyclic longitude distance.
std::vector<float> make_bump(const GridSpec& spec, double lat_c, double lon_c, double width_cells) {
    std::vector<float> bump(size_t(spec.cells()));
    const double dlat = (spec.lat_max_deg - spec.lat_min_deg) / (spec.n_lat - 1);
    const double dlon = 360.0 / spec.n_lon;
    const double row_c = (lat_c - spec.lat_min_deg) / dlat;
    const double col_c = lon_c / dlon;
    const double w2 = 2.0 * width_cells * width_cells;
    for (int i = 0; i < spec.n_lat; ++i) {
        for (int j = 0; j < spec.n_lon; ++j) {
            const double dr = i - row_c;
            double dc = std::fmod(j - col_c, double(spec.n_lon));
            if (dc > spec.n_lon / 2.0) dc -= spec.n_lon;
            if (dc < -spec.n_lon / 2.0) dc += spec.n_lon;
            bump[size_t(i) * spec.n_lon + j] = float(std::exp(-(dr * dr + dc * dc) / w2));
        }
    }
    return bump;
}

struct GeneratorTables {
    Region target;
    std::vector<float> coupling_pattern;  // g(r), regional average 1
    std::vector<float> zg_pattern;        // psi(r), peak 1
    std::vector<float> ts_det_lat;        // per row
    std::vector<float> zg_det;            // per cell
    SpatialModes ts_modes;
    SpatialModes zg_modes;
    double alpha;       // AR coefficient per sample
    double innov;       // sqrt(1 - alpha^2)
    int lead_samples;

    explicit GeneratorTables(const SynthConfig& cfg)
        : target(cfg.target_region()),
          ts_modes(cfg.spec, cfg.spatial_corr_cells, cfg.noise_sigma),
          zg_modes(cfg.spec, cfg.spatial_corr_cells, cfg.zg_noise_sigma_m) {
        const GridSpec& spec = cfg.spec;
        const double lat_c = 0.5 * (cfg.target_lat_lo + cfg.target_lat_hi);
        const double lon_c = 0.5 * (cfg.target_lon_lo + cfg.target_lon_hi);
        const double width = std::max(cfg.spatial_corr_cells, 1.0);

        coupling_pattern = make_bump(spec, lat_c, lon_c, width);
        const double gbar =
            region_average(std::span<const float>(coupling_pattern), target);
        for (float& g : coupling_pattern) g = float(g / gbar);

        zg_pattern = make_bump(spec, lat_c, lon_c - kBumpUpstreamDeg, width);

        ts_det_lat.resize(size_t(spec.n_lat));
        zg_det.resize(size_t(spec.cells()));
        for (int i = 0; i < spec.n_lat; ++i) {
            const double s = std::sin(spec.latitude_deg(i) * kDegToRad);
            ts_det_lat[size_t(i)] =
                float(cfg.ts_base_kelvin - cfg.ts_pole_drop_kelvin * s * s);
            for (int j = 0; j < spec.n_lon; ++j)
                zg_det[size_t(i) * spec.n_lon + j] = float(kZgBase - kZgPoleDrop * s * s);
        }

        alpha = std::exp(-1.0 / (cfg.correlation_days * spec.samples_per_day));
        innov = std::sqrt(1.0 - alpha * alpha);
        lead_samples = int(std::llround(cfg.coupling_lead_days * spec.samples_per_day));
    }
};

double seasonal_ts(const SynthConfig& cfg, int t) {
    return cfg.ts_seasonal_amp_kelvin *
           std::cos(2.0 * M_PI * (day_of_year(cfg.spec, t) - kSeasonalPeakDoy) / 360.0);
}

void generate_year(const SynthConfig& cfg, const GeneratorTables& tab, int year,
                   std::span<float> ts_out, std::span<float> zg_out,
                   std::span<float> oracle_out) {
    const GridSpec& spec = cfg.spec;
    const int spy = spec.samples_per_year();
    const size_t cells = size_t(spec.cells());
    const int lead = tab.lead_samples;
    const double c = cfg.coupling_strength;

    // Precursor over [-lead, spy); stationary start, then AR recursion.
    Rng rng_p(cfg.seed, seed_fold(rng_stream::precursor, uint64_t(year)));
    std::vector<double> precursor(size_t(spy + lead));
    precursor[0] = kPrecursorSigma * rng_p.normal();
    for (size_t k = 1; k < precursor.size(); ++k)
        precursor[k] = tab.alpha * precursor[k - 1] +
                       kPrecursorSigma * tab.innov * rng_p.normal();

    Rng rng_eta(cfg.seed, seed_fold(rng_stream::regional_noise, uint64_t(year)));
    std::vector<double> eta(static_cast<size_t>(spy));
    eta[0] = cfg.noise_sigma * rng_eta.normal();
    for (int k = 1; k < spy; ++k)
        eta[size_t(k)] = tab.alpha * eta[size_t(k - 1)] +
                         cfg.noise_sigma * tab.innov * rng_eta.normal();

    Rng rng_ts(cfg.seed, seed_fold(rng_stream::field_noise_ts, uint64_t(year)));
    Rng rng_zg(cfg.seed, seed_fold(rng_stream::field_noise_zg, uint64_t(year)));
    ModeProcess ts_noise(tab.ts_modes.modes.size(), rng_ts);
    ModeProcess zg_noise(tab.zg_modes.modes.size(), rng_zg);

    std::vector<float> ts_field(cells);
    std::vector<float> zg_field(cells);
    for (int t = 0; t < spy; ++t) {
        if (t > 0) {
            ts_noise.step(tab.alpha, tab.innov, rng_ts);
            zg_noise.step(tab.alpha, tab.innov, rng_zg);
        }
        ts_noise.render(tab.ts_modes, ts_field);
        zg_noise.render(tab.zg_modes, zg_field);

        const double p_now = precursor[size_t(t + lead)];
        const double p_lagged = precursor[size_t(t)];
        const double a_t = c * p_lagged + (1.0 - c) * eta[size_t(t)];
        // Remove the noise field's own regional mean so the target-region
        // mean anomaly equals a_t exactly.
        const double noise_regional =
            region_average(std::span<const float>(ts_field), tab.target);
        const double seasonal = seasonal_ts(cfg, t);

        float* ts = ts_out.data() + size_t(t) * cells;
        float* zg = zg_out.data() + size_t(t) * cells;
        for (int i = 0; i < spec.n_lat; ++i) {
            const float det = tab.ts_det_lat[size_t(i)] + float(seasonal);
            for (int j = 0; j < spec.n_lon; ++j) {
                const size_t idx = size_t(i) * spec.n_lon + j;
                ts[idx] = det + ts_field[idx] +
                          float((a_t - noise_regional) * tab.coupling_pattern[idx]);
                zg[idx] = tab.zg_det[idx] + zg_field[idx] +
                          float(cfg.zg_pattern_amp_m * p_now * tab.zg_pattern[idx]);
            }
        }
        oracle_out[size_t(t)] = float(p_now);
    }
}

}  // namespace

void SynthConfig::validate() const {
    spec.validate();
    if (!(correlation_days > 0.0))
        throw ConfigError("synth: correlation_days must be > 0");
    if (coupling_strength < 0.0 || coupling_strength > 1.0)
        throw ConfigError("synth: coupling_strength must be in [0, 1]");
    if (!(noise_sigma > 0.0))
        throw ConfigError("synth: noise_sigma must be > 0");
    if (coupling_lead_days < 0.0)
        throw ConfigError("synth: coupling_lead_days must be >= 0");
    if (!(spatial_corr_cells > 0.0))
        throw ConfigError("synth: spatial_corr_cells must be > 0");
}

Region SynthConfig::target_region() const {
    return make_region_latlon(spec, target_lat_lo, target_lat_hi, target_lon_lo,
                              target_lon_hi, cos_weighting);
}

double deterministic_ts(const SynthConfig& config, int t, int row, int col) {
    (void)col;
    const double s = std::sin(config.spec.latitude_deg(row) * kDegToRad);
    return config.ts_base_kelvin - config.ts_pole_drop_kelvin * s * s +
           seasonal_ts(config, t);
}

double deterministic_zg(const SynthConfig& config, int row, int col) {
    (void)col;
    const double s = std::sin(config.spec.latitude_deg(row) * kDegToRad);
    return kZgBase - kZgPoleDrop * s * s;
}

SynthOutput generate(const SynthConfig& config, int n_years, int workers) {
    config.validate();
    if (n_years < 2)
        throw InsufficientDataError("synth: need n_years >= 2");

    const GridSpec& spec = config.spec;
    const int spy = spec.samples_per_year();
    const size_t cells = size_t(spec.cells());
    const GeneratorTables tables(config);

    SynthOutput out;
    out.archive.spec = spec;
    out.archive.n_years = n_years;
    out.archive.variables = {kVarTs, kVarZg};
    out.archive.data.resize(2);
    out.archive.data[0].resize(size_t(n_years) * spy * cells);
    out.archive.data[1].resize(size_t(n_years) * spy * cells);
    out.oracle.spec = spec;
    out.oracle.n_years = n_years;
    out.oracle.values.resize(size_t(n_years) * spy);

    if (workers <= 0)
        workers = int(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, n_years);

    auto run_years = [&](int begin, int end) {
        for (int y = begin; y < end; ++y) {
            const size_t off = size_t(y) * spy * cells;
            generate_year(config, tables, y,
                          {out.archive.data[0].data() + off, size_t(spy) * cells},
                          {out.archive.data[1].data() + off, size_t(spy) * cells},
                          {out.oracle.values.data() + size_t(y) * spy, size_t(spy)});
        }
    };
    if (workers == 1) {
        run_years(0, n_years);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n_years + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(n_years, begin + chunk);
            if (begin < end) pool.emplace_back(run_years, begin, end);
        }
        for (std::thread& th : pool) th.join();
    }
    return out;
}

void OracleSet::save(const std::string& path) const {
    FieldArchive a;
    a.spec = spec;
    a.spec.n_lat = 1;
    a.spec.n_lon = 1;
    a.n_years = n_years;
    a.variables = {kVarOracle};
    a.data = {values};
    a.save(path);
}

OracleSet OracleSet::load(const std::string& path) {
    FieldArchive a = FieldArchive::load(path);
    if (a.variables.size() != 1 || a.variables[0] != kVarOracle)
        throw IoError("oracle sidecar: expected single variable ORACLE");
    OracleSet o;
    o.spec = a.spec;
    o.n_years = a.n_years;
    o.values = std::move(a.data[0]);
    return o;
}

OracleMoments oracle_moments(const SynthConfig& config, double tau_days, int d_days) {
    const GridSpec& spec = config.spec;
    const int spd = spec.samples_per_day;
    const int n = d_days * spd;
    const int lead = int(std::llround(config.coupling_lead_days * spd));
    const int tau_s = int(std::llround(tau_days * spd));
    const double alpha = std::exp(-1.0 / (config.correlation_days * spd));
    const double c = config.coupling_strength;

    // Window sums of the AR correlation alpha^|i-j|; s0 is the conditioning
    // sample expressed relative to the start of the precursor window.
    double s2 = 0.0;
    for (int d = 1; d < n; ++d) s2 += (n - d) * std::pow(alpha, d);
    s2 = n + 2.0 * s2;

    // Precursor times are u - lead for u in [t, t+n); conditioning time is
    // t - tau_s. Offsets below are relative to t.
    double b = 0.0;
    for (int u = 0; u < n; ++u) b += std::pow(alpha, std::abs(u - lead + tau_s));

    OracleMoments m;
    m.mean_coeff = c * b / n;
    const double var_p = std::max(
        0.0, kPrecursorSigma * kPrecursorSigma * (s2 - b * b) / (double(n) * n));
    const double var_eta =
        config.noise_sigma * config.noise_sigma * s2 / (double(n) * n);
    m.variance = c * c * var_p + (1.0 - c) * (1.0 - c) * var_eta;
    return m;
}

double oracle_score(const SynthConfig& config, const OracleSet& oracle, int year, int t,
                    double tau_days, int d_days, double threshold_kelvin) {
    const GridSpec& spec = config.spec;
    const int spd = spec.samples_per_day;
    const int spy = spec.samples_per_year();
    const int tau_s = int(std::llround(tau_days * spd));
    if (year < 0 || year >= oracle.n_years)
        throw BoundsError("oracle_score: year out of range");
    if (t - tau_s < 0 || t + d_days * spd > spy)
        throw BoundsError("oracle_score: records do not cover [t - tau, t + D]");

    const OracleMoments m = oracle_moments(config, tau_days, d_days);
    const double p = oracle.at(year, t - tau_s);
    const double mu = m.mean_coeff * p;
    if (m.variance <= 0.0) return threshold_kelvin < mu ? 1.0 : 0.0;
    return 0.5 * std::erfc((threshold_kelvin - mu) / std::sqrt(2.0 * m.variance));
}

}  // namespace heatcast
