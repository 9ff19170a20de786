#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "heatcast/errors.hpp"
#include "heatcast/labeling.hpp"
#include "heatcast/rng.hpp"

using namespace heatcast;

namespace {

GridSpec label_spec() {
    GridSpec s;
    s.n_lat = 4;
    s.n_lon = 8;
    s.days_per_season = 30;
    s.days_before_season = 2;
    s.days_after_season = 15;
    return s;
}

/// Archive with seeded random TS values (continuous, so thresholds are
/// tie-free) on a small grid.
FieldArchive random_archive(const GridSpec& spec, int n_years, uint64_t seed) {
    FieldArchive a;
    a.spec = spec;
    a.n_years = n_years;
    a.variables = {kVarTs};
    Rng rng(seed);
    std::vector<float> block(a.samples_per_variable());
    for (float& v : block) v = float(rng.normal());
    a.data.push_back(std::move(block));
    return a;
}

HeatwaveConfig config_for(const GridSpec& spec, int d_days = 14) {
    HeatwaveConfig cfg;
    cfg.region = make_region_latlon(spec, -30.0, 30.0, 0.0, 120.0);
    cfg.d_days = d_days;
    return cfg;
}

}  // namespace

TEST_CASE("Y of a constant series is that constant") {
    std::vector<double> series(400, 2.0);
    CHECK(compute_Y(series, 10, 14, 8) == doctest::Approx(2.0));
    CHECK(compute_Y(series, 0, 1, 8) == doctest::Approx(2.0));
}

TEST_CASE("Y of a tiny series is its mean") {
    const std::vector<double> series = {1.0, 2.0, 3.0, 4.0};
    CHECK(compute_Y(series, 0, 2, 2) == doctest::Approx(2.5));
}

TEST_CASE("Y matches a naive per-sample mean on a seeded series") {
    Rng rng(77);
    std::vector<double> series(90 * 8);
    for (double& v : series) v = rng.normal();
    const int d_days = 14, spd = 8;
    for (int t = 0; t <= int(series.size()) - d_days * spd; t += 37) {
        double acc = 0.0;
        for (int k = 0; k < d_days * spd; ++k) acc += series[size_t(t + k)];
        CHECK(compute_Y(series, t, d_days, spd) ==
              doctest::Approx(acc / (d_days * spd)).epsilon(1e-12));
    }
}

TEST_CASE("Y window leaving the series is a bounds error, never a truncation") {
    std::vector<double> series(100, 1.0);
    CHECK_THROWS_AS(compute_Y(series, 50, 14, 8), BoundsError);
    CHECK_THROWS_AS(compute_Y(series, -1, 1, 8), BoundsError);
}

TEST_CASE("threshold puts exactly floor(p*N) samples above it") {
    // Values 1..100 at the 5% level: floor = 5, a is the 6th largest (95)
    // and exactly 96..100 exceed it.
    std::vector<double> ys(100);
    for (int i = 0; i < 100; ++i) ys[size_t(i)] = double(i + 1);
    const double a = empirical_threshold(ys, 0.05);
    CHECK(a == doctest::Approx(95.0));
    const int64_t exceed = std::count_if(ys.begin(), ys.end(), [&](double y) { return y > a; });
    CHECK(exceed == 5);

    // Sort-based oracle on seeded continuous data.
    Rng rng(31);
    std::vector<double> ys2(997);
    for (double& v : ys2) v = rng.normal();
    for (double p : {0.05, 0.025, 0.2}) {
        const double thr = empirical_threshold(ys2, p);
        std::vector<double> sorted = ys2;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        const int64_t k = int64_t(std::floor(p * double(ys2.size())));
        CHECK(thr == doctest::Approx(sorted[size_t(k)]));
        CHECK(std::count_if(ys2.begin(), ys2.end(), [&](double y) { return y > thr; }) == k);
    }
}

TEST_CASE("all-equal Y values yield a zero-positive degenerate outcome") {
    std::vector<double> ys(200, 1.5);
    const double a = empirical_threshold(ys, 0.05);
    CHECK(a == doctest::Approx(1.5));
    CHECK(std::count_if(ys.begin(), ys.end(), [&](double y) { return y > a; }) == 0);
}

TEST_CASE("level too extreme for the sample count is an error") {
    std::vector<double> ys(10, 0.0);
    CHECK_THROWS_AS(empirical_threshold(ys, 0.05), LevelTooExtremeError);
}

TEST_CASE("large-sample 5% threshold approaches the normal 95th percentile") {
    Rng rng(4242);
    std::vector<double> ys(10000);
    for (double& v : ys) v = rng.normal();
    CHECK(empirical_threshold(ys, 0.05) == doctest::Approx(1.645).epsilon(0.05 / 1.645));
}

TEST_CASE("all-zero anomalies give all-zero labels flagged degenerate") {
    const GridSpec spec = label_spec();
    FieldArchive a;
    a.spec = spec;
    a.n_years = 3;
    a.variables = {kVarTs};
    a.data.push_back(std::vector<float>(a.samples_per_variable(), 7.5f));
    const Climatology clim = compute_climatology(a, 0);
    const LabelSet labels = make_labels(a, clim, config_for(spec));
    for (const auto& z : labels.z)
        for (uint8_t v : z) CHECK(v == 0);
    for (const LevelThreshold& th : labels.thresholds) {
        CHECK(th.n_positive == 0);
        CHECK(th.degenerate);
    }
}

TEST_CASE("positive counts are exactly floor(p*N) and labels nest") {
    const GridSpec spec = label_spec();
    const FieldArchive a = random_archive(spec, 6, 2025);
    const Climatology clim = compute_climatology(a, 0);
    const LabelSet labels = make_labels(a, clim, config_for(spec));
    const int64_t n = labels.n_samples();
    REQUIRE(labels.thresholds.size() == 3);
    for (const LevelThreshold& th : labels.thresholds) {
        CHECK(th.n_positive == int64_t(std::floor(th.level * double(n))));
        CHECK_FALSE(th.degenerate);
    }
    // Nesting: a positive at a rarer level is positive at every wider level.
    for (size_t i = 0; i < labels.z[0].size(); ++i) {
        if (labels.z[2][i]) CHECK(labels.z[1][i]);
        if (labels.z[1][i]) CHECK(labels.z[0][i]);
    }
    // Thresholds increase as levels tighten.
    CHECK(labels.thresholds[0].a_kelvin < labels.thresholds[1].a_kelvin);
    CHECK(labels.thresholds[1].a_kelvin < labels.thresholds[2].a_kelvin);
}

TEST_CASE("shifting every anomaly by a constant shifts Y and thresholds, not labels") {
    const GridSpec spec = label_spec();
    const FieldArchive a = random_archive(spec, 4, 555);
    const Climatology clim = compute_climatology(a, 0);
    const HeatwaveConfig cfg = config_for(spec);
    const LabelSet base = make_labels(a, clim, cfg);

    FieldArchive shifted = a;
    const float c = 2.5f;
    for (float& v : shifted.data[0]) v += c;
    // Same climatology: anomalies gain exactly +c everywhere.
    const LabelSet moved = make_labels(shifted, clim, cfg);

    for (size_t i = 0; i < base.y.size(); ++i)
        CHECK(moved.y[i] == doctest::Approx(base.y[i] + double(c)).epsilon(1e-5));
    for (size_t li = 0; li < base.thresholds.size(); ++li) {
        CHECK(moved.thresholds[li].a_kelvin ==
              doctest::Approx(base.thresholds[li].a_kelvin + double(c)).epsilon(1e-5));
        CHECK(moved.z[li] == base.z[li]);
    }
}

TEST_CASE("missing trailing margin is a bounds error") {
    GridSpec spec = label_spec();
    spec.days_after_season = 5;  // < D = 14
    const FieldArchive a = random_archive(spec, 3, 9);
    const Climatology clim = compute_climatology(a, 0);
    CHECK_THROWS_AS(make_labels(a, clim, config_for(spec)), BoundsError);
}

TEST_CASE("heatwave config validation") {
    const GridSpec spec = label_spec();
    HeatwaveConfig cfg = config_for(spec);
    cfg.levels = {0.05, 0.05};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.levels = {0.0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.levels = {0.05};
    cfg.d_days = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
