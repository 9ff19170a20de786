#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"

#include "heatcast/errors.hpp"
#include "heatcast/labeling.hpp"
#include "heatcast/rng.hpp"
#include "heatcast/synth.hpp"

using namespace heatcast;

namespace {

SynthConfig small_config() {
    SynthConfig cfg;
    cfg.spec.n_lat = 16;
    cfg.spec.n_lon = 16;
    cfg.spec.days_before_season = 4;
    cfg.spec.days_after_season = 16;
    cfg.target_lat_lo = 30.0;
    cfg.target_lat_hi = 60.0;
    cfg.target_lon_lo = 0.0;
    cfg.target_lon_hi = 50.0;
    return cfg;
}

/// Regional mean of (T_s - deterministic background) for every (year, t):
/// the generative anomaly the coupling is planted in.
std::vector<double> generative_regional_series(const SynthConfig& cfg,
                                               const FieldArchive& archive) {
    const Region region = cfg.target_region();
    const GridSpec& spec = cfg.spec;
    const int spy = spec.samples_per_year();
    std::vector<double> series(size_t(archive.n_years) * spy);
    const int var_ts = archive.variable_index(kVarTs);
    for (int y = 0; y < archive.n_years; ++y) {
        for (int t = 0; t < spy; ++t) {
            const auto f = archive.field(var_ts, y, t);
            double acc = 0.0;
            for (int i = 0; i < spec.n_lat; ++i)
                for (int j = 0; j < spec.n_lon; ++j) {
                    const size_t c = size_t(i) * spec.n_lon + j;
                    if (region.mask[c])
                        acc += region.weights[c] *
                               (double(f[c]) - deterministic_ts(cfg, t, i, j));
                }
            series[size_t(y) * spy + t] = acc;
        }
    }
    return series;
}

}  // namespace

TEST_CASE("generation is deterministic and byte-identical on disk") {
    SynthConfig cfg = small_config();
    cfg.spec.days_per_season = 10;
    const SynthOutput a = generate(cfg, 3, 2);
    const SynthOutput b = generate(cfg, 3, 1);  // different worker count
    CHECK(a.archive.data == b.archive.data);
    CHECK(a.oracle.values == b.oracle.values);

    namespace fs = std::filesystem;
    const std::string p1 = (fs::temp_directory_path() / "hc_synth_a.hcst").string();
    const std::string p2 = (fs::temp_directory_path() / "hc_synth_b.hcst").string();
    a.archive.save(p1);
    b.archive.save(p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string bytes1((std::istreambuf_iterator<char>(f1)), {});
    const std::string bytes2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(bytes1 == bytes2);
    CHECK(!bytes1.empty());
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("generate rejects fewer than two years") {
    CHECK_THROWS_AS(generate(small_config(), 1), InsufficientDataError);
}

TEST_CASE("zero coupling decorrelates the precursor from the regional anomaly") {
    SynthConfig cfg = small_config();
    cfg.coupling_strength = 0.0;
    const int n_years = 20;
    const SynthOutput out = generate(cfg, n_years, 2);
    const std::vector<double> series = generative_regional_series(cfg, out.archive);
    const int spy = cfg.spec.samples_per_year();
    const int lead = int(std::llround(cfg.coupling_lead_days * cfg.spec.samples_per_day));

    // Correlation between P(t) and the regional anomaly at t + lead; samples
    // one day apart to tame serial correlation.
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    int64_t n = 0;
    for (int y = 0; y < n_years; ++y)
        for (int t = 0; t + lead < spy; t += 8) {
            const double x = out.oracle.at(y, t);
            const double v = series[size_t(y) * spy + t + lead];
            sx += x;
            sy += v;
            sxx += x * x;
            syy += v * v;
            sxy += x * v;
            ++n;
        }
    const double cov = sxy / n - (sx / n) * (sy / n);
    const double r = cov / std::sqrt((sxx / n - (sx / n) * (sx / n)) *
                                     (syy / n - (sy / n) * (sy / n)));
    CHECK(std::abs(r) < 3.0 / std::sqrt(double(n)));
}

TEST_CASE("full coupling with vanishing noise reproduces the lagged precursor") {
    SynthConfig cfg = small_config();
    cfg.coupling_strength = 1.0;
    cfg.noise_sigma = 1e-9;
    cfg.zg_noise_sigma_m = 1e-9;
    cfg.ts_base_kelvin = 0.0;
    cfg.ts_pole_drop_kelvin = 0.0;
    cfg.ts_seasonal_amp_kelvin = 0.0;
    const SynthOutput out = generate(cfg, 2, 1);
    const std::vector<double> series = generative_regional_series(cfg, out.archive);
    const int spy = cfg.spec.samples_per_year();
    const int lead = int(std::llround(cfg.coupling_lead_days * cfg.spec.samples_per_day));
    for (int y = 0; y < 2; ++y)
        for (int t = lead; t < spy; t += 7) {
            const double expected = out.oracle.at(y, t - lead);
            CHECK(series[size_t(y) * spy + t] ==
                  doctest::Approx(expected).epsilon(1e-6).scale(1.0));
        }
}

TEST_CASE("lag-one-day autocorrelation of the regional anomaly matches the process") {
    SynthConfig cfg = small_config();
    cfg.spec.n_lat = 8;
    cfg.spec.n_lon = 8;
    cfg.target_lat_lo = 20.0;
    cfg.target_lat_hi = 70.0;
    cfg.target_lon_lo = 0.0;
    cfg.target_lon_hi = 100.0;
    const int n_years = 50;
    const SynthOutput out = generate(cfg, n_years, 2);
    const std::vector<double> series = generative_regional_series(cfg, out.archive);
    const int spy = cfg.spec.samples_per_year();
    const int lag = cfg.spec.samples_per_day;  // one day

    double s0 = 0, s1 = 0, c0 = 0, c1 = 0;
    int64_t n = 0;
    for (int y = 0; y < n_years; ++y)
        for (int t = 0; t + lag < spy; ++t) {
            const double a = series[size_t(y) * spy + t];
            const double b = series[size_t(y) * spy + t + lag];
            s0 += a;
            s1 += b;
            c0 += a * a;
            c1 += a * b;
            ++n;
        }
    const double mean = s0 / n;
    const double autocorr = (c1 / n - mean * (s1 / n)) / (c0 / n - mean * mean);
    CHECK(autocorr == doctest::Approx(std::exp(-1.0 / cfg.correlation_days)).epsilon(0.15));
}

TEST_CASE("per-year mean of the regional anomaly is stationary across years") {
    SynthConfig cfg = small_config();
    const int n_years = 30;
    const SynthOutput out = generate(cfg, n_years, 2);
    const std::vector<double> series = generative_regional_series(cfg, out.archive);
    const int spy = cfg.spec.samples_per_year();
    std::vector<double> year_means(size_t(n_years), 0.0);
    for (int y = 0; y < n_years; ++y) {
        double acc = 0.0;
        for (int t = 0; t < spy; ++t) acc += series[size_t(y) * spy + t];
        year_means[size_t(y)] = acc / spy;
    }
    double mean = 0.0;
    for (double m : year_means) mean += m;
    mean /= n_years;
    double var = 0.0;
    for (double m : year_means) var += (m - mean) * (m - mean);
    const double sd = std::sqrt(var / n_years);
    CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(double(n_years)));
}

TEST_CASE("oracle sidecar round-trips with the ORACLE variable") {
    SynthConfig cfg = small_config();
    cfg.spec.days_per_season = 5;
    const SynthOutput out = generate(cfg, 2, 1);
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "hc_oracle.hcst").string();
    out.oracle.save(path);
    const OracleSet back = OracleSet::load(path);
    CHECK(back.n_years == out.oracle.n_years);
    CHECK(back.values == out.oracle.values);
    std::remove(path.c_str());
}

TEST_CASE("zero coupling makes the oracle score a constant unconditional probability") {
    SynthConfig cfg = small_config();
    cfg.coupling_strength = 0.0;
    const SynthOutput out = generate(cfg, 3, 1);
    const int t0 = cfg.spec.season_start_sample();
    const double a = 0.25;
    const OracleMoments m = oracle_moments(cfg, 0.0, 14);
    const double expected = 0.5 * std::erfc(a / std::sqrt(2.0 * m.variance));
    for (int k = 0; k < 20; ++k) {
        const double s = oracle_score(cfg, out.oracle, 1, t0 + 13 * k, 0.0, 14, a);
        CHECK(s == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("a huge precursor value drives the oracle score to one") {
    SynthConfig cfg = small_config();
    SynthOutput out = generate(cfg, 2, 1);
    const int t0 = cfg.spec.season_start_sample();
    out.oracle.values[size_t(0) * cfg.spec.samples_per_year() + t0] = 1e6f;
    const double s = oracle_score(cfg, out.oracle, 0, t0, 0.0, 14, 3.0);
    CHECK(s > 1.0 - 1e-12);
}

TEST_CASE("oracle score rejects out-of-range samples") {
    SynthConfig cfg = small_config();
    const SynthOutput out = generate(cfg, 2, 1);
    CHECK_THROWS_AS(oracle_score(cfg, out.oracle, 0, 3, 1.0, 14, 0.3), BoundsError);
    const int spy = cfg.spec.samples_per_year();
    CHECK_THROWS_AS(oracle_score(cfg, out.oracle, 0, spy - 5, 0.0, 14, 0.3), BoundsError);
}

TEST_CASE("oracle score matches a conditional Monte-Carlo simulation") {
    SynthConfig cfg = small_config();
    cfg.spec.samples_per_day = 4;  // keeps the simulation cheap
    cfg.spec.seconds_per_sample = 21600;
    const int d_days = 6;
    const double tau_days = 2.0;
    const SynthOutput out = generate(cfg, 2, 1);

    const int spd = cfg.spec.samples_per_day;
    const int n = d_days * spd;
    const int lead = int(std::llround(cfg.coupling_lead_days * spd));
    const int tau_s = int(std::llround(tau_days * spd));
    const double alpha = std::exp(-1.0 / (cfg.correlation_days * spd));
    const double innov = std::sqrt(1.0 - alpha * alpha);
    const double c = cfg.coupling_strength;

    Rng rng(2024);
    const int t0 = cfg.spec.season_start_sample() + tau_s;
    for (int k = 0; k < 10; ++k) {
        const int t = t0 + 11 * k;
        const double p0 = out.oracle.at(0, t - tau_s);
        const double a = 0.15 + 0.05 * k;
        const double score = oracle_score(cfg, out.oracle, 0, t, tau_days, d_days, a);

        // Simulate P conditioned on P(t - tau_s) = p0 by running the AR(1)
        // recursion forward and (by time reversibility) backward from that
        // sample, plus an independent stationary eta path over the Y window.
        const int s0 = t - tau_s;
        const int w_lo = t - lead;
        const int w_hi = t - lead + n;  // one past the last precursor time
        const int base = std::min(w_lo, s0);
        const int top = std::max(w_hi, s0 + 1);
        std::vector<double> p(size_t(top - base));
        int64_t exceed = 0;
        const int64_t draws = 100000;
        for (int64_t d = 0; d < draws; ++d) {
            p[size_t(s0 - base)] = p0;
            for (int s = s0 + 1; s < top; ++s)
                p[size_t(s - base)] = alpha * p[size_t(s - base - 1)] + innov * rng.normal();
            for (int s = s0 - 1; s >= base; --s)
                p[size_t(s - base)] = alpha * p[size_t(s - base + 1)] + innov * rng.normal();
            double sum_p = 0.0;
            for (int s = w_lo; s < w_hi; ++s) sum_p += p[size_t(s - base)];
            double eta = cfg.noise_sigma * rng.normal();
            double sum_eta = eta;
            for (int u = 1; u < n; ++u) {
                eta = alpha * eta + cfg.noise_sigma * innov * rng.normal();
                sum_eta += eta;
            }
            const double y = c * sum_p / n + (1.0 - c) * sum_eta / n;
            if (y > a) ++exceed;
        }
        const double freq = double(exceed) / double(draws);
        CHECK(std::abs(freq - score) < 0.02);
    }
}

TEST_CASE("oracle scores are calibrated against generated exceedances") {
    SynthConfig cfg = small_config();
    cfg.spec.n_lat = 8;
    cfg.spec.n_lon = 8;
    cfg.target_lat_lo = 20.0;
    cfg.target_lat_hi = 70.0;
    cfg.target_lon_lo = 0.0;
    cfg.target_lon_hi = 100.0;
    const int n_years = 100;
    const int d_days = 14;
    const SynthOutput out = generate(cfg, n_years, 2);
    const std::vector<double> series = generative_regional_series(cfg, out.archive);
    const GridSpec& spec = cfg.spec;
    const int spy = spec.samples_per_year();

    std::vector<double> ys, scores;
    const double threshold = 0.35;
    for (int y = 0; y < n_years; ++y) {
        const std::span<const double> year_series{series.data() + size_t(y) * spy,
                                                  size_t(spy)};
        for (int s = 0; s < spec.season_samples(); ++s) {
            const int t = spec.season_start_sample() + s;
            ys.push_back(compute_Y(year_series, t, d_days, spec.samples_per_day));
            scores.push_back(oracle_score(cfg, out.oracle, y, t, 0.0, d_days, threshold));
        }
    }

    // Decile bins by score; empirical exceedance per bin vs bin-mean score.
    std::vector<size_t> idx(ys.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    const size_t per_bin = idx.size() / 10;
    for (int bin = 0; bin < 10; ++bin) {
        double mean_score = 0.0, freq = 0.0;
        for (size_t k = size_t(bin) * per_bin; k < size_t(bin + 1) * per_bin; ++k) {
            mean_score += scores[idx[k]];
            freq += ys[idx[k]] > threshold ? 1.0 : 0.0;
        }
        mean_score /= double(per_bin);
        freq /= double(per_bin);
        CHECK(std::abs(freq - mean_score) < 0.05);
    }
}
