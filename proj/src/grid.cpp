#include "heatcast/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "heatcast/errors.hpp"

namespace heatcast {

double GridSpec::latitude_deg(int row) const {
    if (n_lat == 1) return 0.5 * (lat_min_deg + lat_max_deg);
    return lat_min_deg + row * (lat_max_deg - lat_min_deg) / (n_lat - 1);
}

double GridSpec::longitude_deg(int col) const {
    return col * 360.0 / n_lon;
}

void GridSpec::validate() const {
    if (n_lat < 2 || n_lon < 2)
        throw ConfigError("grid: n_lat and n_lon must both be >= 2");
    if (lat_max_deg <= lat_min_deg)
        throw ConfigError("grid: lat_max_deg must exceed lat_min_deg");
    if (samples_per_day < 1 || seconds_per_sample < 1 ||
        samples_per_day * seconds_per_sample != 86400)
        throw ConfigError("grid: samples_per_day * seconds_per_sample must equal 86400");
    if (days_per_season < 1)
        throw ConfigError("grid: days_per_season must be >= 1");
    if (days_before_season < 0 || days_after_season < 0)
        throw ConfigError("grid: season margins must be >= 0");
}

GridField make_field(const GridSpec& spec, int year, int t, float fill) {
    GridField f;
    f.spec = spec;
    f.year = year;
    f.t = t;
    f.values.assign(size_t(spec.cells()), fill);
    return f;
}

namespace {

constexpr double kDegToRad = M_PI / 180.0;

/// Wrap an angle into [0, 360).
double wrap_lon(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w < 0) w += 360.0;
    return w;
}

bool lon_in_range(double lon, double lo, double hi) {
    // lo/hi already wrapped; a wrapped interval (lo > hi) covers the seam.
    if (lo <= hi) return lon >= lo && lon <= hi;
    return lon >= lo || lon <= hi;
}

void finish_region(Region& r, const GridSpec& spec, bool cos_weighting) {
    r.cell_count = 0;
    double total = 0.0;
    for (int i = 0; i < spec.n_lat; ++i) {
        const double w = cos_weighting
                             ? std::max(std::cos(spec.latitude_deg(i) * kDegToRad), 0.0)
                             : 1.0;
        for (int j = 0; j < spec.n_lon; ++j) {
            const size_t idx = size_t(i) * spec.n_lon + j;
            if (!r.mask[idx]) continue;
            r.weights[idx] = w;
            total += w;
            ++r.cell_count;
        }
    }
    if (r.cell_count == 0)
        throw EmptyRegionError("region: mask selects no cells");
    if (total <= 0.0)
        throw EmptyRegionError("region: total cell weight is zero (mask only at poles?)");
    for (double& w : r.weights) w /= total;

    // Bounding box; detect longitude wrap (mask non-contiguous in columns).
    int rlo = spec.n_lat, rhi = -1;
    std::set<int> cols;
    for (int i = 0; i < spec.n_lat; ++i)
        for (int j = 0; j < spec.n_lon; ++j)
            if (r.mask[size_t(i) * spec.n_lon + j]) {
                rlo = std::min(rlo, i);
                rhi = std::max(rhi, i);
                cols.insert(j);
            }
    r.row_lo = rlo;
    r.row_hi = rhi;
    const int cmin = *cols.begin();
    const int cmax = *cols.rbegin();
    if (int(cols.size()) == cmax - cmin + 1) {
        r.col_lo = cmin;
        r.col_hi = cmax;
    } else {
        r.col_lo = 0;
        r.col_hi = spec.n_lon - 1;
    }
}

}  // namespace

Region make_region_latlon(const GridSpec& spec, double lat_lo, double lat_hi,
                          double lon_lo, double lon_hi, bool cos_weighting) {
    Region r;
    r.n_lat = spec.n_lat;
    r.n_lon = spec.n_lon;
    r.mask.assign(size_t(spec.cells()), 0);
    r.weights.assign(size_t(spec.cells()), 0.0);
    const double wlo = wrap_lon(lon_lo);
    const double whi = wrap_lon(lon_hi);
    for (int i = 0; i < spec.n_lat; ++i) {
        const double lat = spec.latitude_deg(i);
        if (lat < lat_lo || lat > lat_hi) continue;
        for (int j = 0; j < spec.n_lon; ++j) {
            if (lon_in_range(spec.longitude_deg(j), wlo, whi))
                r.mask[size_t(i) * spec.n_lon + j] = 1;
        }
    }
    finish_region(r, spec, cos_weighting);
    return r;
}

Region make_region_mask(const GridSpec& spec, const std::vector<uint8_t>& mask,
                        bool cos_weighting) {
    if (mask.size() != size_t(spec.cells()))
        throw DimensionError("region: mask size does not match grid");
    Region r;
    r.n_lat = spec.n_lat;
    r.n_lon = spec.n_lon;
    r.mask = mask;
    r.weights.assign(size_t(spec.cells()), 0.0);
    finish_region(r, spec, cos_weighting);
    return r;
}

Climatology compute_climatology(const std::vector<GridField>& fields) {
    if (fields.empty())
        throw InsufficientDataError("climatology: no input fields");
    const GridSpec& spec = fields.front().spec;
    const int spy = spec.samples_per_year();

    std::set<int> years;
    std::set<std::pair<int, int>> seen;
    for (const GridField& f : fields) {
        if (!(f.spec == spec))
            throw DimensionError("climatology: inconsistent grid specs");
        if (f.t < 0 || f.t >= spy)
            throw BoundsError("climatology: intra-year index out of range");
        if (!seen.insert({f.year, f.t}).second)
            throw IncompleteDatasetError("climatology: duplicate (year, t) pair");
        years.insert(f.year);
    }
    if (years.size() < 2)
        throw InsufficientDataError("climatology: need at least 2 years");
    if (seen.size() != years.size() * size_t(spy))
        throw IncompleteDatasetError("climatology: missing (year, t) pairs");

    // Ordered accumulation: fields sorted by (t, year) so the per-cell sum is
    // reproducible whatever the caller's ordering.
    std::map<std::pair<int, int>, const GridField*> ordered;
    for (const GridField& f : fields) ordered[{f.t, f.year}] = &f;

    Climatology clim;
    clim.spec = spec;
    clim.years_used = int(years.size());
    clim.values.assign(size_t(spy) * spec.cells(), 0.0);
    for (const auto& [key, f] : ordered) {
        double* out = clim.values.data() + size_t(key.first) * spec.cells();
        for (int c = 0; c < spec.cells(); ++c) out[c] += f->values[c];
    }
    const double inv = 1.0 / clim.years_used;
    for (double& v : clim.values) v *= inv;
    return clim;
}

GridField anomaly(const GridField& field, const Climatology& clim) {
    if (!(field.spec == clim.spec))
        throw DimensionError("anomaly: field and climatology grids differ");
    if (field.t < 0 || field.t >= field.spec.samples_per_year())
        throw BoundsError("anomaly: field t outside climatology range");
    GridField out = field;
    const std::span<const double> slice = clim.slice(field.t);
    for (int c = 0; c < field.spec.cells(); ++c)
        out.values[c] = float(double(field.values[c]) - slice[c]);
    return out;
}

namespace {

template <typename T>
double region_average_impl(std::span<const T> values, const Region& region) {
    if (region.cell_count == 0)
        throw EmptyRegionError("region_average: empty region");
    if (values.size() != region.weights.size())
        throw DimensionError("region_average: field does not match region grid");
    double acc = 0.0;
    for (size_t i = 0; i < values.size(); ++i)
        if (region.mask[i]) acc += region.weights[i] * double(values[i]);
    return acc;
}

}  // namespace

double region_average(const GridField& field, const Region& region) {
    return region_average_impl<float>({field.values.data(), field.values.size()}, region);
}

double region_average(std::span<const float> values, const Region& region) {
    return region_average_impl<float>(values, region);
}

double region_average(std::span<const double> values, const Region& region) {
    return region_average_impl<double>(values, region);
}

}  // namespace heatcast
