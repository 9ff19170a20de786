#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "heatcast/archive.hpp"
#include "heatcast/grid.hpp"
#include "heatcast/labeling.hpp"

namespace heatcast {

enum class Protocol { P1_Ts, P2_Zg, P3_Combined, P4_Stacked };

const char* protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

struct FeatureConfig {
    Region predictor_region;
    int spectral_rows = 16;
    int spectral_cols = 16;
    Protocol protocol = Protocol::P4_Stacked;
    int tau_days = 0;
    // When the predictor box has more rows than spectral_rows, the transform
    // keeps the spectral_rows rows nearest the box top (highest latitude).
    // With the flag off that situation is a configuration error.
    bool allow_row_crop = true;

    void validate() const;
};

/// 2-D DFT of one real box, double precision.
///
/// Rows are zero-padded (or top-cropped) to `rows`; all `rows` row
/// frequencies are kept in natural DFT order (DC at row 0). The column DFT
/// runs over the box width (zero-padded up to `cols` when narrower) and the
/// `cols` lowest column frequencies are kept in symmetric order, negative to
/// positive, so DC sits at column cols/2. Coefficients are divided by the
/// number of content cells, making a constant box produce exactly that
/// constant in the DC slot.
struct SpectralTensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> re;  // [rows][cols]
    std::vector<double> im;
};

SpectralTensor spectral_transform(const double* box, int box_rows, int box_cols,
                                  int rows, int cols, bool allow_row_crop);

/// Convenience overload: restricts the anomaly field to the predictor
/// region's bounding box first.
SpectralTensor spectral_transform(const GridField& anomaly_field, const FeatureConfig& cfg);

/// All in-season samples' spectral inputs, ordered by (year, in-season t).
/// Channels are fixed [Ts Re, Ts Im, Zg Re, Zg Im]; protocols select
/// channel subsets at batch-assembly time, which makes P4 = concat(P1, P2)
/// true by construction.
struct FeatureSet {
    int rows = 0;
    int cols = 0;
    int n = 0;
    int tau_days = 0;
    std::vector<float> data;       // [n][4][rows][cols]
    std::vector<int32_t> year;     // per sample
    std::vector<int32_t> t_label;  // intra-year label time index

    size_t sample_floats() const { return 4ull * rows * cols; }
    const float* sample(int i) const { return data.data() + size_t(i) * sample_floats(); }
};

/// Channel indices a protocol consumes (P3 is handled as the pair P1 + P2).
std::vector<int> protocol_channels(Protocol p);
int protocol_channel_count(Protocol p);

FeatureSet build_feature_set(const FieldArchive& archive, const Climatology& clim_ts,
                             const Climatology& clim_zg, const FeatureConfig& cfg,
                             const LabelSet& labels, int workers = 0);

/// Binary tensor dump: header {rows u32, cols u32, channels u32, n u64},
/// float32 payload sample-major, plus a parallel CSV (year, t, label) for the
/// given level.
void dump_features(const FeatureSet& features, const LabelSet& labels, int level_index,
                   const std::string& bin_path, const std::string& csv_path,
                   const std::string& comment_line);

}  // namespace heatcast
