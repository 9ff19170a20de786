#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace heatcast {

/// Equal-angle lat/lon grid plus the intra-year sampling layout.
///
/// A year window covers days_before_season + days_per_season +
/// days_after_season days; the leading margin exists so inputs at t - tau
/// are available for every in-season t, the trailing margin so the D-day
/// labeling window past the last in-season sample is available.
struct GridSpec {
    int n_lat = 64;
    int n_lon = 128;
    double lat_min_deg = -90.0;
    double lat_max_deg = 90.0;
    int seconds_per_sample = 10800;
    int samples_per_day = 8;
    int days_per_season = 90;
    int days_before_season = 32;
    int days_after_season = 16;

    int season_start_sample() const { return days_before_season * samples_per_day; }
    int season_samples() const { return days_per_season * samples_per_day; }
    int window_days() const { return days_before_season + days_per_season + days_after_season; }
    int samples_per_year() const { return window_days() * samples_per_day; }
    int cells() const { return n_lat * n_lon; }

    /// Row latitude, inclusive endpoints: row 0 at lat_min_deg, row n_lat-1
    /// at lat_max_deg.
    double latitude_deg(int row) const;
    /// Column longitude, cyclic with 360/n_lon spacing starting at 0.
    double longitude_deg(int col) const;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    bool operator==(const GridSpec&) const = default;
};

/// One horizontal scalar field at one time sample (Kelvin for T_s, meters
/// for Z_g). Row-major [lat][lon].
struct GridField {
    GridSpec spec;
    std::vector<float> values;
    int year = 0;
    int t = 0;  // intra-year sample index

    float& at(int row, int col) { return values[size_t(row) * spec.n_lon + col]; }
    float at(int row, int col) const { return values[size_t(row) * spec.n_lon + col]; }
};

GridField make_field(const GridSpec& spec, int year, int t, float fill = 0.0f);

/// Per-(location, intra-year sample) ensemble mean across years.
/// Layout [t][lat][lon], double precision.
struct Climatology {
    GridSpec spec;
    int years_used = 0;
    std::vector<double> values;

    double at(int t, int row, int col) const {
        return values[(size_t(t) * spec.n_lat + row) * spec.n_lon + col];
    }
    std::span<const double> slice(int t) const {
        return {values.data() + size_t(t) * spec.cells(), size_t(spec.cells())};
    }
};

/// Boolean mask over a grid with per-cell averaging weights.
/// Weights are proportional to cos(latitude) (or uniform when cosine
/// weighting is disabled) and normalized to sum to 1 over the mask.
struct Region {
    int n_lat = 0;
    int n_lon = 0;
    std::vector<uint8_t> mask;     // cells() entries
    std::vector<double> weights;   // cells() entries, 0 outside the mask
    size_t cell_count = 0;
    // Bounding box of the mask, rows/cols inclusive. When the mask spans a
    // longitude wrap the box covers all columns.
    int row_lo = 0, row_hi = -1, col_lo = 0, col_hi = -1;

    bool contains(int row, int col) const { return mask[size_t(row) * n_lon + col] != 0; }
    int box_rows() const { return row_hi - row_lo + 1; }
    int box_cols() const { return col_hi - col_lo + 1; }
};

/// Region from latitude/longitude bounds (degrees). Longitude bounds are
/// taken modulo 360 and may wrap. Throws EmptyRegionError if no cell falls
/// inside.
Region make_region_latlon(const GridSpec& spec, double lat_lo, double lat_hi,
                          double lon_lo, double lon_hi, bool cos_weighting = true);

/// Region from an explicit mask.
Region make_region_mask(const GridSpec& spec, const std::vector<uint8_t>& mask,
                        bool cos_weighting = true);

/// Ensemble mean over years at fixed (location, intra-year t).
/// Every (year, t) pair must be present exactly once and years_used >= 2;
/// accumulation is ordered by year index so results are reproducible.
Climatology compute_climatology(const std::vector<GridField>& fields);

/// Pointwise field minus climatology slice at the field's t; keeps year/t.
GridField anomaly(const GridField& field, const Climatology& clim);

/// Area-weighted average of the field over the region mask.
double region_average(const GridField& field, const Region& region);

/// Same, on a raw [lat][lon] slice belonging to the region's grid shape.
double region_average(std::span<const float> values, const Region& region);
double region_average(std::span<const double> values, const Region& region);

}  // namespace heatcast
