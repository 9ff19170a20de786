#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "heatcast/archive.hpp"
#include "heatcast/errors.hpp"
#include "heatcast/rng.hpp"

using namespace heatcast;

namespace {

FieldArchive tiny_archive(uint64_t seed) {
    FieldArchive a;
    a.spec.n_lat = 3;
    a.spec.n_lon = 5;
    a.spec.days_per_season = 2;
    a.spec.days_before_season = 1;
    a.spec.days_after_season = 1;
    a.spec.samples_per_day = 4;
    a.spec.seconds_per_sample = 21600;
    a.spec.lat_min_deg = -60.0;
    a.spec.lat_max_deg = 60.0;
    a.n_years = 3;
    a.variables = {"TS", "ZG"};
    Rng rng(seed);
    for (int v = 0; v < 2; ++v) {
        std::vector<float> block(a.samples_per_variable());
        for (float& x : block) x = float(rng.normal());
        a.data.push_back(std::move(block));
    }
    return a;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("archive round-trips through the binary format") {
    const FieldArchive a = tiny_archive(31);
    const std::string path = temp_path("heatcast_archive_test.hcst");
    a.save(path);
    const FieldArchive b = FieldArchive::load(path);
    CHECK(b.spec == a.spec);
    CHECK(b.n_years == a.n_years);
    CHECK(b.variables == a.variables);
    REQUIRE(b.data.size() == a.data.size());
    for (size_t v = 0; v < a.data.size(); ++v) CHECK(b.data[v] == a.data[v]);
    std::remove(path.c_str());
}

TEST_CASE("repeated saves are byte-identical") {
    const FieldArchive a = tiny_archive(32);
    const std::string p1 = temp_path("heatcast_archive_a.hcst");
    const std::string p2 = temp_path("heatcast_archive_b.hcst");
    a.save(p1);
    a.save(p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), {});
    const std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
    CHECK(!b1.empty());
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("bad magic is rejected") {
    const std::string path = temp_path("heatcast_archive_bad.hcst");
    std::ofstream f(path, std::ios::binary);
    f << "NOPErubbish";
    f.close();
    CHECK_THROWS_AS(FieldArchive::load(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("unknown variable name is an error") {
    const FieldArchive a = tiny_archive(33);
    CHECK(a.variable_index("TS") == 0);
    CHECK(a.variable_index("ZG") == 1);
    CHECK_THROWS_AS(a.variable_index("XX"), BoundsError);
}

TEST_CASE("archive climatology equals the field-vector climatology") {
    const FieldArchive a = tiny_archive(34);
    std::vector<GridField> fields;
    for (int y = 0; y < a.n_years; ++y)
        for (int t = 0; t < a.spec.samples_per_year(); ++t) {
            GridField f = make_field(a.spec, y, t);
            const auto src = a.field(0, y, t);
            std::copy(src.begin(), src.end(), f.values.begin());
            fields.push_back(std::move(f));
        }
    const Climatology c1 = compute_climatology(a, 0);
    const Climatology c2 = compute_climatology(fields);
    REQUIRE(c1.values.size() == c2.values.size());
    for (size_t i = 0; i < c1.values.size(); ++i)
        CHECK(c1.values[i] == doctest::Approx(c2.values[i]).epsilon(1e-12));
}

TEST_CASE("archive climatology needs two years") {
    FieldArchive a = tiny_archive(35);
    a.n_years = 1;
    a.data[0].resize(a.samples_per_variable());
    a.data[1].resize(a.samples_per_variable());
    CHECK_THROWS_AS(compute_climatology(a, 0), InsufficientDataError);
}
