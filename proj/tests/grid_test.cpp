#include <cmath>
#include <vector>

#include "doctest.h"

#include "heatcast/errors.hpp"
#include "heatcast/grid.hpp"
#include "heatcast/rng.hpp"

using namespace heatcast;

namespace {

GridSpec tiny_spec() {
    GridSpec s;
    s.n_lat = 4;
    s.n_lon = 6;
    s.days_per_season = 1;
    s.days_before_season = 0;
    s.days_after_season = 0;
    s.samples_per_day = 2;
    s.seconds_per_sample = 43200;
    return s;
}

std::vector<GridField> seeded_fields(const GridSpec& spec, int n_years, uint64_t seed) {
    std::vector<GridField> fields;
    Rng rng(seed);
    for (int y = 0; y < n_years; ++y)
        for (int t = 0; t < spec.samples_per_year(); ++t) {
            GridField f = make_field(spec, y, t);
            for (float& v : f.values) v = float(rng.normal());
            fields.push_back(std::move(f));
        }
    return fields;
}

}  // namespace

TEST_CASE("climatology of constant fields is that constant") {
    const GridSpec spec = tiny_spec();
    std::vector<GridField> fields;
    for (int y = 0; y < 3; ++y)
        for (int t = 0; t < spec.samples_per_year(); ++t)
            fields.push_back(make_field(spec, y, t, 5.0f));
    const Climatology clim = compute_climatology(fields);
    CHECK(clim.years_used == 3);
    for (double v : clim.values) CHECK(v == doctest::Approx(5.0));
}

TEST_CASE("climatology of two constant years is the midpoint") {
    const GridSpec spec = tiny_spec();
    std::vector<GridField> fields;
    for (int t = 0; t < spec.samples_per_year(); ++t) {
        fields.push_back(make_field(spec, 0, t, 1.0f));
        fields.push_back(make_field(spec, 1, t, 3.0f));
    }
    const Climatology clim = compute_climatology(fields);
    for (double v : clim.values) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("climatology matches an independent re-summation oracle") {
    const GridSpec spec = tiny_spec();
    const std::vector<GridField> fields = seeded_fields(spec, 4, 99);
    const Climatology clim = compute_climatology(fields);

    // Oracle: direct four-term accumulation per (t, cell), independent order.
    for (int t = 0; t < spec.samples_per_year(); ++t) {
        for (int c = 0; c < spec.cells(); ++c) {
            double sum = 0.0;
            int n = 0;
            for (const GridField& f : fields)
                if (f.t == t) {
                    sum += f.values[size_t(c)];
                    ++n;
                }
            REQUIRE(n == 4);
            CHECK(clim.values[size_t(t) * spec.cells() + c] == doctest::Approx(sum / 4.0));
        }
    }
}

TEST_CASE("climatology input errors") {
    const GridSpec spec = tiny_spec();
    std::vector<GridField> fields = seeded_fields(spec, 2, 7);
    SUBCASE("duplicate (year, t)") {
        fields.push_back(fields.front());
        CHECK_THROWS_AS(compute_climatology(fields), IncompleteDatasetError);
    }
    SUBCASE("missing (year, t)") {
        fields.pop_back();
        CHECK_THROWS_AS(compute_climatology(fields), IncompleteDatasetError);
    }
    SUBCASE("single year") {
        std::vector<GridField> one;
        for (const GridField& f : fields)
            if (f.year == 0) one.push_back(f);
        CHECK_THROWS_AS(compute_climatology(one), InsufficientDataError);
    }
}

TEST_CASE("anomaly of a field equal to its climatology slice is zero") {
    const GridSpec spec = tiny_spec();
    const std::vector<GridField> fields = seeded_fields(spec, 3, 5);
    const Climatology clim = compute_climatology(fields);
    GridField f = make_field(spec, 0, 1);
    for (int c = 0; c < spec.cells(); ++c) f.values[size_t(c)] = float(clim.at(1, c / spec.n_lon, c % spec.n_lon));
    const GridField a = anomaly(f, clim);
    for (float v : a.values) CHECK(std::abs(v) < 1e-6f);
}

TEST_CASE("anomaly of climatology plus a constant is that constant") {
    const GridSpec spec = tiny_spec();
    const std::vector<GridField> fields = seeded_fields(spec, 3, 6);
    const Climatology clim = compute_climatology(fields);
    GridField f = make_field(spec, 2, 0);
    for (int c = 0; c < spec.cells(); ++c)
        f.values[size_t(c)] = float(clim.values[size_t(c)] + 1.5);
    const GridField a = anomaly(f, clim);
    for (float v : a.values) CHECK(v == doctest::Approx(1.5f).epsilon(1e-5));
}

TEST_CASE("anomaly matches the elementwise oracle and preserves indices") {
    const GridSpec spec = tiny_spec();
    const std::vector<GridField> fields = seeded_fields(spec, 2, 17);
    const Climatology clim = compute_climatology(fields);
    const GridField& f = fields[3];
    const GridField a = anomaly(f, clim);
    CHECK(a.year == f.year);
    CHECK(a.t == f.t);
    for (int i = 0; i < spec.n_lat; ++i)
        for (int j = 0; j < spec.n_lon; ++j)
            CHECK(a.at(i, j) ==
                  doctest::Approx(double(f.at(i, j)) - clim.at(f.t, i, j)).epsilon(1e-6));
}

TEST_CASE("anomaly shape mismatch is a dimension error") {
    const GridSpec spec = tiny_spec();
    const Climatology clim = compute_climatology(seeded_fields(spec, 2, 3));
    GridSpec other = spec;
    other.n_lon = 8;
    CHECK_THROWS_AS(anomaly(make_field(other, 0, 0), clim), DimensionError);
}

TEST_CASE("per-(location,t) mean of anomalies across years is zero") {
    const GridSpec spec = tiny_spec();
    const std::vector<GridField> fields = seeded_fields(spec, 5, 11);
    const Climatology clim = compute_climatology(fields);
    std::vector<double> sums(size_t(spec.samples_per_year()) * spec.cells(), 0.0);
    for (const GridField& f : fields) {
        const GridField a = anomaly(f, clim);
        for (int c = 0; c < spec.cells(); ++c)
            sums[size_t(f.t) * spec.cells() + c] += a.values[size_t(c)];
    }
    for (double s : sums) CHECK(std::abs(s / 5.0) < 1e-6);
}

TEST_CASE("region average of a constant on the mask ignores the outside") {
    const GridSpec spec = tiny_spec();
    std::vector<uint8_t> mask(size_t(spec.cells()), 0);
    mask[1] = mask[7] = mask[13] = 1;
    const Region region = make_region_mask(spec, mask);
    GridField f = make_field(spec, 0, 0, -77.0f);
    f.values[1] = f.values[7] = f.values[13] = 2.0f;
    CHECK(region_average(f, region) == doctest::Approx(2.0));
}

TEST_CASE("single-cell region returns that cell") {
    const GridSpec spec = tiny_spec();
    std::vector<uint8_t> mask(size_t(spec.cells()), 0);
    mask[size_t(2) * spec.n_lon + 3] = 1;
    const Region region = make_region_mask(spec, mask);
    GridField f = make_field(spec, 0, 0, 0.0f);
    f.at(2, 3) = 42.5f;
    CHECK(region_average(f, region) == doctest::Approx(42.5));
}

TEST_CASE("three-cell region matches hand-evaluated cosine weights") {
    // Rows at 0, 15, ..., 90 degrees; cells at 0, 45 and 60 degrees north.
    GridSpec spec;
    spec.n_lat = 7;
    spec.n_lon = 4;
    spec.lat_min_deg = 0.0;
    spec.lat_max_deg = 90.0;
    std::vector<uint8_t> mask(size_t(spec.cells()), 0);
    mask[size_t(0) * spec.n_lon + 0] = 1;  // 0 deg
    mask[size_t(3) * spec.n_lon + 0] = 1;  // 45 deg
    mask[size_t(4) * spec.n_lon + 0] = 1;  // 60 deg
    const Region region = make_region_mask(spec, mask);

    GridField f = make_field(spec, 0, 0);
    f.at(0, 0) = 1.0f;
    f.at(3, 0) = 2.0f;
    f.at(4, 0) = 3.0f;

    const double c0 = std::cos(0.0);
    const double c45 = std::cos(45.0 * M_PI / 180.0);
    const double c60 = std::cos(60.0 * M_PI / 180.0);
    const double expected = (1.0 * c0 + 2.0 * c45 + 3.0 * c60) / (c0 + c45 + c60);
    CHECK(region_average(f, region) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("region weights sum to one and constants average to themselves") {
    GridSpec spec;
    spec.n_lat = 16;
    spec.n_lon = 16;
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<uint8_t> mask(size_t(spec.cells()), 0);
        size_t n = 1 + rng.below(40);
        for (size_t k = 0; k < n; ++k) mask[rng.below(size_t(spec.cells()))] = 1;
        const Region region = make_region_mask(spec, mask);
        double total = 0.0;
        for (double w : region.weights) {
            CHECK(w >= 0.0);
            total += w;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
        const double c = rng.normal() * 10.0;
        const GridField f = make_field(spec, 0, 0, float(c));
        CHECK(region_average(f, region) == doctest::Approx(c).epsilon(1e-6));
    }
}

TEST_CASE("region average is linear") {
    GridSpec spec;
    spec.n_lat = 8;
    spec.n_lon = 8;
    const Region region = make_region_latlon(spec, -30.0, 60.0, 45.0, 200.0);
    Rng rng(55);
    GridField f = make_field(spec, 0, 0);
    GridField g = make_field(spec, 0, 0);
    for (int c = 0; c < spec.cells(); ++c) {
        f.values[size_t(c)] = float(rng.normal());
        g.values[size_t(c)] = float(rng.normal());
    }
    const double alpha = 0.7, beta = -2.25;
    GridField mix = make_field(spec, 0, 0);
    for (int c = 0; c < spec.cells(); ++c)
        mix.values[size_t(c)] = float(alpha * f.values[size_t(c)] + beta * g.values[size_t(c)]);
    const double lhs = region_average(mix, region);
    const double rhs = alpha * region_average(f, region) + beta * region_average(g, region);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("empty region mask is rejected") {
    const GridSpec spec = tiny_spec();
    std::vector<uint8_t> mask(size_t(spec.cells()), 0);
    CHECK_THROWS_AS(make_region_mask(spec, mask), EmptyRegionError);
}

TEST_CASE("uniform weighting flag disables the cosine factor") {
    GridSpec spec;
    spec.n_lat = 7;
    spec.n_lon = 4;
    spec.lat_min_deg = 0.0;
    spec.lat_max_deg = 90.0;
    std::vector<uint8_t> mask(size_t(spec.cells()), 0);
    mask[0] = 1;
    mask[size_t(4) * spec.n_lon] = 1;
    const Region region = make_region_mask(spec, mask, false);
    GridField f = make_field(spec, 0, 0);
    f.at(0, 0) = 1.0f;
    f.at(4, 0) = 3.0f;
    CHECK(region_average(f, region) == doctest::Approx(2.0));
}

TEST_CASE("grid spec invariants") {
    GridSpec s;
    s.validate();
    s.samples_per_day = 7;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = GridSpec{};
    s.n_lat = 1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}
