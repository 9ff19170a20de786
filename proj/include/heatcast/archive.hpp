#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "heatcast/grid.hpp"

namespace heatcast {

// Canonical archive variable names.
inline constexpr const char* kVarTs = "TS";
inline constexpr const char* kVarZg = "ZG";
inline constexpr const char* kVarOracle = "ORACLE";

/// Multi-year, multi-variable field store backing the binary archive format.
///
/// File layout (little-endian):
///   magic "HCST", version u32,
///   n_lat u32, n_lon u32, samples_per_day u32, days_per_season u32,
///   days_before_season u32, days_after_season u32,
///   lat_min_deg f64, lat_max_deg f64,
///   n_years u32, n_variables u32,
///   per variable: name length u32 + UTF-8 bytes,
///   payload float32 ordered [variable][year][t][lat][lon].
///
/// The season margins and latitude bounds live in the header because the
/// payload is not interpretable without them.
struct FieldArchive {
    GridSpec spec;
    int n_years = 0;
    std::vector<std::string> variables;
    std::vector<std::vector<float>> data;  // [var] -> [year][t][lat][lon]

    static constexpr uint32_t kFormatVersion = 1;

    int variable_index(const std::string& name) const;

    size_t samples_per_variable() const {
        return size_t(n_years) * spec.samples_per_year() * spec.cells();
    }

    /// One [lat][lon] slice.
    std::span<const float> field(int var, int year, int t) const {
        const size_t cells = size_t(spec.cells());
        return {data[var].data() + (size_t(year) * spec.samples_per_year() + t) * cells, cells};
    }
    std::span<float> field_mut(int var, int year, int t) {
        const size_t cells = size_t(spec.cells());
        return {data[var].data() + (size_t(year) * spec.samples_per_year() + t) * cells, cells};
    }

    void save(const std::string& path) const;
    static FieldArchive load(const std::string& path);
};

/// Ensemble mean per (location, intra-year t) for one archive variable,
/// accumulated in year order.
Climatology compute_climatology(const FieldArchive& archive, int var);

}  // namespace heatcast
