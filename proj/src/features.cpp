#include "heatcast/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "heatcast/errors.hpp"

namespace heatcast {

const char* protocol_name(Protocol p) {
    switch (p) {
        case Protocol::P1_Ts: return "P1";
        case Protocol::P2_Zg: return "P2";
        case Protocol::P3_Combined: return "P3";
        case Protocol::P4_Stacked: return "P4";
    }
    return "?";
}

Protocol protocol_from_name(const std::string& name) {
    if (name == "P1") return Protocol::P1_Ts;
    if (name == "P2") return Protocol::P2_Zg;
    if (name == "P3") return Protocol::P3_Combined;
    if (name == "P4") return Protocol::P4_Stacked;
    throw ConfigError("features: unknown protocol '" + name + "' (P1|P2|P3|P4)");
}

void FeatureConfig::validate() const {
    if (spectral_rows < 2 || spectral_cols < 2)
        throw ConfigError("features: spectral dims must be >= 2");
    if (tau_days < 0) throw ConfigError("features: tau_days must be >= 0");
    if (predictor_region.cell_count == 0)
        throw EmptyRegionError("features: empty predictor region");
    if (predictor_region.box_rows() > spectral_rows && !allow_row_crop)
        throw ConfigError("features: predictor box taller than spectral grid and row crop disabled");
}

std::vector<int> protocol_channels(Protocol p) {
    switch (p) {
        case Protocol::P1_Ts: return {0, 1};
        case Protocol::P2_Zg: return {2, 3};
        case Protocol::P3_Combined: return {0, 1, 2, 3};
        case Protocol::P4_Stacked: return {0, 1, 2, 3};
    }
    return {};
}

int protocol_channel_count(Protocol p) {
    return p == Protocol::P4_Stacked ? 4 : 2;
}

namespace {

/// Twiddle tables for the separable DFT: column pass over length len_cols
/// keeping the `cols` symmetric frequencies, row pass over length `rows`.
struct DftPlan {
    int content_rows, content_cols;
    int rows, cols;
    int len_cols;  // column DFT length (box width, padded up to cols)
    std::vector<double> col_re, col_im;  // [cols][content_cols]
    std::vector<double> row_re, row_im;  // [rows][content_rows]
    double norm;

    DftPlan(int box_rows, int box_cols, int spectral_rows, int spectral_cols) {
        rows = spectral_rows;
        cols = spectral_cols;
        content_rows = std::min(box_rows, spectral_rows);
        content_cols = box_cols;
        len_cols = std::max(box_cols, spectral_cols);
        norm = 1.0 / (double(content_rows) * content_cols);

        col_re.resize(size_t(cols) * content_cols);
        col_im.resize(size_t(cols) * content_cols);
        for (int fc = 0; fc < cols; ++fc) {
            const int freq = fc - cols / 2;  // symmetric order, DC at cols/2
            for (int j = 0; j < content_cols; ++j) {
                const double ang = -2.0 * M_PI * double(freq) * j / len_cols;
                col_re[size_t(fc) * content_cols + j] = std::cos(ang);
                col_im[size_t(fc) * content_cols + j] = std::sin(ang);
            }
        }
        row_re.resize(size_t(rows) * content_rows);
        row_im.resize(size_t(rows) * content_rows);
        for (int fr = 0; fr < rows; ++fr) {
            for (int i = 0; i < content_rows; ++i) {
                const double ang = -2.0 * M_PI * double(fr) * i / rows;
                row_re[size_t(fr) * content_rows + i] = std::cos(ang);
                row_im[size_t(fr) * content_rows + i] = std::sin(ang);
            }
        }
    }

    /// box points at content_rows x content_cols values (already cropped).
    void execute(const double* box, double* out_re, double* out_im,
                 std::vector<double>& scratch) const {
        // Column pass: [content_rows][cols] interleaved (re, im).
        scratch.assign(size_t(content_rows) * cols * 2, 0.0);
        for (int i = 0; i < content_rows; ++i) {
            const double* src = box + size_t(i) * content_cols;
            for (int fc = 0; fc < cols; ++fc) {
                const double* cr = col_re.data() + size_t(fc) * content_cols;
                const double* ci = col_im.data() + size_t(fc) * content_cols;
                double acc_r = 0.0, acc_i = 0.0;
                for (int j = 0; j < content_cols; ++j) {
                    acc_r += src[j] * cr[j];
                    acc_i += src[j] * ci[j];
                }
                scratch[(size_t(i) * cols + fc) * 2] = acc_r;
                scratch[(size_t(i) * cols + fc) * 2 + 1] = acc_i;
            }
        }
        // Row pass.
        for (int fr = 0; fr < rows; ++fr) {
            const double* rr = row_re.data() + size_t(fr) * content_rows;
            const double* ri = row_im.data() + size_t(fr) * content_rows;
            for (int fc = 0; fc < cols; ++fc) {
                double acc_r = 0.0, acc_i = 0.0;
                for (int i = 0; i < content_rows; ++i) {
                    const double xr = scratch[(size_t(i) * cols + fc) * 2];
                    const double xi = scratch[(size_t(i) * cols + fc) * 2 + 1];
                    acc_r += xr * rr[i] - xi * ri[i];
                    acc_i += xr * ri[i] + xi * rr[i];
                }
                out_re[size_t(fr) * cols + fc] = acc_r * norm;
                out_im[size_t(fr) * cols + fc] = acc_i * norm;
            }
        }
    }
};

}  // namespace

SpectralTensor spectral_transform(const double* box, int box_rows, int box_cols,
                                  int rows, int cols, bool allow_row_crop) {
    if (box_rows < 1 || box_cols < 1)
        throw EmptyRegionError("spectral_transform: empty box");
    if (box_rows > rows && !allow_row_crop)
        throw ConfigError("spectral_transform: box taller than spectral grid and crop disabled");
    const int content_rows = std::min(box_rows, rows);
    // Keep the rows nearest the box top.
    const double* content = box + size_t(box_rows - content_rows) * box_cols;

    DftPlan plan(box_rows, box_cols, rows, cols);
    SpectralTensor out;
    out.rows = rows;
    out.cols = cols;
    out.re.resize(size_t(rows) * cols);
    out.im.resize(size_t(rows) * cols);
    std::vector<double> scratch;
    plan.execute(content, out.re.data(), out.im.data(), scratch);
    return out;
}

SpectralTensor spectral_transform(const GridField& anomaly_field, const FeatureConfig& cfg) {
    cfg.validate();
    const Region& reg = cfg.predictor_region;
    const int br = reg.box_rows();
    const int bc = reg.box_cols();
    std::vector<double> box(size_t(br) * bc);
    for (int i = 0; i < br; ++i)
        for (int j = 0; j < bc; ++j)
            box[size_t(i) * bc + j] = anomaly_field.at(reg.row_lo + i, reg.col_lo + j);
    return spectral_transform(box.data(), br, bc, cfg.spectral_rows, cfg.spectral_cols,
                              cfg.allow_row_crop);
}

FeatureSet build_feature_set(const FieldArchive& archive, const Climatology& clim_ts,
                             const Climatology& clim_zg, const FeatureConfig& cfg,
                             const LabelSet& labels, int workers) {
    cfg.validate();
    const GridSpec& spec = archive.spec;
    const Region& reg = cfg.predictor_region;
    const int shift = cfg.tau_days * spec.samples_per_day;
    if (labels.season_start - shift < 0)
        throw BoundsError("features: lead time reaches before the archive window");

    const int var_ts = archive.variable_index(kVarTs);
    const int var_zg = archive.variable_index(kVarZg);
    const int br = reg.box_rows();
    const int bc = reg.box_cols();
    const int content_rows = std::min(br, cfg.spectral_rows);
    const int crop_off = br - content_rows;  // rows skipped from the box bottom
    const DftPlan plan(br, bc, cfg.spectral_rows, cfg.spectral_cols);

    FeatureSet fs;
    fs.rows = cfg.spectral_rows;
    fs.cols = cfg.spectral_cols;
    fs.n = int(labels.n_samples());
    fs.tau_days = cfg.tau_days;
    fs.data.resize(size_t(fs.n) * fs.sample_floats());
    fs.year.resize(size_t(fs.n));
    fs.t_label.resize(size_t(fs.n));

    const size_t plane = size_t(fs.rows) * fs.cols;
    auto run_range = [&](int begin, int end) {
        std::vector<double> box(size_t(content_rows) * bc);
        std::vector<double> re(plane), im(plane), scratch;
        for (int idx = begin; idx < end; ++idx) {
            const int y = idx / labels.season_samples;
            const int s = idx % labels.season_samples;
            const int t_label = labels.season_start + s;
            const int t_in = t_label - shift;
            fs.year[size_t(idx)] = y;
            fs.t_label[size_t(idx)] = t_label;
            float* dst = fs.data.data() + size_t(idx) * fs.sample_floats();

            for (int v = 0; v < 2; ++v) {
                const std::span<const float> f =
                    archive.field(v == 0 ? var_ts : var_zg, y, t_in);
                const Climatology& clim = v == 0 ? clim_ts : clim_zg;
                const std::span<const double> c = clim.slice(t_in);
                for (int i = 0; i < content_rows; ++i) {
                    const int gi = reg.row_lo + crop_off + i;
                    for (int j = 0; j < bc; ++j) {
                        const size_t cell = size_t(gi) * spec.n_lon + reg.col_lo + j;
                        box[size_t(i) * bc + j] = double(f[cell]) - c[cell];
                    }
                }
                plan.execute(box.data(), re.data(), im.data(), scratch);
                float* ch_re = dst + size_t(2 * v) * plane;
                float* ch_im = dst + size_t(2 * v + 1) * plane;
                for (size_t k = 0; k < plane; ++k) {
                    ch_re[k] = float(re[k]);
                    ch_im[k] = float(im[k]);
                }
            }
        }
    };

    if (workers <= 0) workers = int(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::clamp(workers, 1, std::max(1, fs.n));
    if (workers == 1) {
        run_range(0, fs.n);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (fs.n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int b = w * chunk;
            const int e = std::min(fs.n, b + chunk);
            if (b < e) pool.emplace_back(run_range, b, e);
        }
        for (std::thread& th : pool) th.join();
    }
    return fs;
}

void dump_features(const FeatureSet& features, const LabelSet& labels, int level_index,
                   const std::string& bin_path, const std::string& csv_path,
                   const std::string& comment_line) {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw IoError("features: cannot write '" + bin_path + "'");
    const uint32_t rows = uint32_t(features.rows);
    const uint32_t cols = uint32_t(features.cols);
    const uint32_t channels = 4;
    const uint64_t n = uint64_t(features.n);
    bin.write(reinterpret_cast<const char*>(&rows), 4);
    bin.write(reinterpret_cast<const char*>(&cols), 4);
    bin.write(reinterpret_cast<const char*>(&channels), 4);
    bin.write(reinterpret_cast<const char*>(&n), 8);
    bin.write(reinterpret_cast<const char*>(features.data.data()),
              std::streamsize(features.data.size() * sizeof(float)));
    if (!bin) throw IoError("features: write failed for '" + bin_path + "'");

    std::ofstream csv(csv_path);
    if (!csv) throw IoError("features: cannot write '" + csv_path + "'");
    csv << "year,t,label\n";
    csv << "# " << comment_line << "\n";
    for (int i = 0; i < features.n; ++i) {
        const int y = features.year[size_t(i)];
        const int s = features.t_label[size_t(i)] - labels.season_start;
        csv << y << ',' << features.t_label[size_t(i)] << ','
            << int(labels.label(level_index, y, s)) << '\n';
    }
}

}  // namespace heatcast
