#include "heatcast/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "heatcast/errors.hpp"

namespace heatcast {

namespace {

constexpr char kMagic[4] = {'H', 'C', 'N', 'N'};
constexpr char kOptTag[4] = {'O', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::FILE* f, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    if (std::fwrite(b, 1, 4, f) != 4) throw IoError("checkpoint: write failed");
}

void put_u64(std::FILE* f, uint64_t v) {
    put_u32(f, uint32_t(v & 0xffffffffu));
    put_u32(f, uint32_t(v >> 32));
}

uint32_t get_u32(std::FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw CheckpointError("checkpoint: truncated file");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint64_t get_u64(std::FILE* f) {
    const uint64_t lo = get_u32(f);
    const uint64_t hi = get_u32(f);
    return lo | (hi << 32);
}

void put_floats(std::FILE* f, const float* data, size_t n) {
    if (std::fwrite(data, sizeof(float), n, f) != n)
        throw IoError("checkpoint: write failed");
}

void get_floats(std::FILE* f, float* data, size_t n) {
    if (std::fread(data, sizeof(float), n, f) != n)
        throw CheckpointError("checkpoint: truncated payload");
}

}  // namespace

void save_checkpoint(nn::Classifier<float>& model, uint32_t epoch,
                     const AmsGrad<float>* optimizer, const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    if (std::fwrite(kMagic, 1, 4, f.get()) != 4) throw IoError("checkpoint: write failed");
    put_u32(f.get(), kVersion);
    put_u32(f.get(), model.kind_tag());
    const auto stacks = model.stacks();
    put_u32(f.get(), uint32_t(stacks.size()));
    for (nn::Network<float>* stack : stacks) {
        put_u32(f.get(), uint32_t(stack->layer_count()));
        for (size_t i = 0; i < stack->layer_count(); ++i) {
            const auto& layer = stack->layer(i);
            put_u32(f.get(), uint32_t(layer.kind()));
            const auto shape = layer.shape_words();
            put_u32(f.get(), uint32_t(shape.size()));
            for (uint32_t wv : shape) put_u32(f.get(), wv);
        }
    }
    for (nn::Network<float>* stack : stacks) {
        for (size_t i = 0; i < stack->layer_count(); ++i) {
            for (const auto& p : stack->layer(i).params())
                put_floats(f.get(), p.data, p.size);
            for (const auto& p : stack->layer(i).state())
                put_floats(f.get(), p.data, p.size);
        }
    }
    put_u32(f.get(), epoch);
    if (optimizer) {
        if (std::fwrite(kOptTag, 1, 4, f.get()) != 4)
            throw IoError("checkpoint: write failed");
        put_u64(f.get(), optimizer->step_count());
        auto* opt = const_cast<AmsGrad<float>*>(optimizer);
        for (auto* bank : {&opt->moment1(), &opt->moment2(), &opt->moment2_max()})
            for (const auto& tensor : *bank)
                put_floats(f.get(), tensor.data(), tensor.size());
    }
    if (std::fflush(f.get()) != 0) throw IoError("checkpoint: flush failed");
}

CheckpointInfo load_checkpoint(nn::Classifier<float>& model, AmsGrad<float>* optimizer,
                               const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("checkpoint: bad magic in '" + path + "'");
    if (get_u32(f.get()) != kVersion)
        throw CheckpointError("checkpoint: unsupported version");
    if (get_u32(f.get()) != model.kind_tag())
        throw CheckpointError("checkpoint: classifier kind mismatch");
    const auto stacks = model.stacks();
    if (get_u32(f.get()) != stacks.size())
        throw CheckpointError("checkpoint: stack count mismatch");
    for (nn::Network<float>* stack : stacks) {
        if (get_u32(f.get()) != stack->layer_count())
            throw CheckpointError("checkpoint: layer count mismatch");
        for (size_t i = 0; i < stack->layer_count(); ++i) {
            const auto& layer = stack->layer(i);
            if (get_u32(f.get()) != uint32_t(layer.kind()))
                throw CheckpointError("checkpoint: layer kind mismatch at index " +
                                      std::to_string(i));
            const auto shape = layer.shape_words();
            if (get_u32(f.get()) != shape.size())
                throw CheckpointError("checkpoint: shape rank mismatch");
            for (uint32_t expect : shape)
                if (get_u32(f.get()) != expect)
                    throw CheckpointError("checkpoint: incompatible shapes at layer " +
                                          std::to_string(i));
        }
    }
    for (nn::Network<float>* stack : stacks) {
        for (size_t i = 0; i < stack->layer_count(); ++i) {
            for (auto& p : stack->layer(i).params()) get_floats(f.get(), p.data, p.size);
            for (auto& p : stack->layer(i).state()) get_floats(f.get(), p.data, p.size);
        }
    }
    CheckpointInfo info;
    info.epoch = get_u32(f.get());
    char tag[4];
    if (std::fread(tag, 1, 4, f.get()) == 4 && std::memcmp(tag, kOptTag, 4) == 0) {
        info.has_optimizer = true;
        const uint64_t k = get_u64(f.get());
        if (optimizer) {
            optimizer->set_step_count(k);
            for (auto* bank :
                 {&optimizer->moment1(), &optimizer->moment2(), &optimizer->moment2_max()})
                for (auto& tensor : *bank)
                    get_floats(f.get(), tensor.data(), tensor.size());
        }
    }
    return info;
}

}  // namespace heatcast
