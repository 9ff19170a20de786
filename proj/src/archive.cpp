#include "heatcast/archive.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include "heatcast/errors.hpp"

namespace heatcast {

namespace {

constexpr char kMagic[4] = {'H', 'C', 'S', 'T'};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_u32(std::FILE* f, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    if (std::fwrite(b, 1, 4, f) != 4) throw IoError("archive: write failed");
}

uint32_t read_u32(std::FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw IoError("archive: truncated header");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

void write_f64(std::FILE* f, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (u >> (8 * i)) & 0xff;
    if (std::fwrite(b, 1, 8, f) != 8) throw IoError("archive: write failed");
}

double read_f64(std::FILE* f) {
    unsigned char b[8];
    if (std::fread(b, 1, 8, f) != 8) throw IoError("archive: truncated header");
    uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= uint64_t(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace

int FieldArchive::variable_index(const std::string& name) const {
    for (size_t i = 0; i < variables.size(); ++i)
        if (variables[i] == name) return int(i);
    throw BoundsError("archive: no variable named '" + name + "'");
}

void FieldArchive::save(const std::string& path) const {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("archive: cannot open '" + path + "' for writing");
    if (std::fwrite(kMagic, 1, 4, f.get()) != 4) throw IoError("archive: write failed");
    write_u32(f.get(), kFormatVersion);
    write_u32(f.get(), uint32_t(spec.n_lat));
    write_u32(f.get(), uint32_t(spec.n_lon));
    write_u32(f.get(), uint32_t(spec.samples_per_day));
    write_u32(f.get(), uint32_t(spec.days_per_season));
    write_u32(f.get(), uint32_t(spec.days_before_season));
    write_u32(f.get(), uint32_t(spec.days_after_season));
    write_f64(f.get(), spec.lat_min_deg);
    write_f64(f.get(), spec.lat_max_deg);
    write_u32(f.get(), uint32_t(n_years));
    write_u32(f.get(), uint32_t(variables.size()));
    for (const std::string& name : variables) {
        write_u32(f.get(), uint32_t(name.size()));
        if (!name.empty() &&
            std::fwrite(name.data(), 1, name.size(), f.get()) != name.size())
            throw IoError("archive: write failed");
    }
    const size_t per_var = samples_per_variable();
    for (const auto& block : data) {
        if (block.size() != per_var)
            throw DimensionError("archive: variable payload size mismatch");
        if (std::fwrite(block.data(), sizeof(float), block.size(), f.get()) != block.size())
            throw IoError("archive: write failed");
    }
    if (std::fflush(f.get()) != 0) throw IoError("archive: flush failed");
}

FieldArchive FieldArchive::load(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("archive: cannot open '" + path + "'");
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("archive: bad magic in '" + path + "'");
    const uint32_t version = read_u32(f.get());
    if (version != kFormatVersion)
        throw IoError("archive: unsupported format version");

    FieldArchive a;
    a.spec.n_lat = int(read_u32(f.get()));
    a.spec.n_lon = int(read_u32(f.get()));
    a.spec.samples_per_day = int(read_u32(f.get()));
    a.spec.days_per_season = int(read_u32(f.get()));
    a.spec.days_before_season = int(read_u32(f.get()));
    a.spec.days_after_season = int(read_u32(f.get()));
    a.spec.seconds_per_sample = 86400 / a.spec.samples_per_day;
    a.spec.lat_min_deg = read_f64(f.get());
    a.spec.lat_max_deg = read_f64(f.get());
    a.n_years = int(read_u32(f.get()));
    const uint32_t n_vars = read_u32(f.get());
    for (uint32_t i = 0; i < n_vars; ++i) {
        const uint32_t len = read_u32(f.get());
        std::string name(len, '\0');
        if (len > 0 && std::fread(name.data(), 1, len, f.get()) != len)
            throw IoError("archive: truncated variable table");
        a.variables.push_back(std::move(name));
    }
    const size_t per_var = a.samples_per_variable();
    a.data.resize(n_vars);
    for (uint32_t i = 0; i < n_vars; ++i) {
        a.data[i].resize(per_var);
        if (std::fread(a.data[i].data(), sizeof(float), per_var, f.get()) != per_var)
            throw IoError("archive: truncated payload");
    }
    return a;
}

Climatology compute_climatology(const FieldArchive& archive, int var) {
    if (archive.n_years < 2)
        throw InsufficientDataError("climatology: need at least 2 years");
    if (var < 0 || var >= int(archive.data.size()))
        throw BoundsError("climatology: variable index out of range");
    const GridSpec& spec = archive.spec;
    const int spy = spec.samples_per_year();
    const size_t cells = size_t(spec.cells());

    Climatology clim;
    clim.spec = spec;
    clim.years_used = archive.n_years;
    clim.values.assign(size_t(spy) * cells, 0.0);
    for (int y = 0; y < archive.n_years; ++y) {
        const float* src = archive.data[var].data() + size_t(y) * spy * cells;
        for (size_t i = 0; i < size_t(spy) * cells; ++i) clim.values[i] += src[i];
    }
    const double inv = 1.0 / archive.n_years;
    for (double& v : clim.values) v *= inv;
    return clim;
}

}  // namespace heatcast
