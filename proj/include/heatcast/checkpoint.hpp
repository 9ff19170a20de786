#pragma once

#include <cstdint>
#include <string>

#include "heatcast/nn.hpp"
#include "heatcast/optimizer.hpp"

namespace heatcast {

/// Parameter checkpoint, the transfer-learning hand-off artifact.
///
/// Layout (little-endian): magic "HCNN", version u32, classifier kind u32
/// (1 single stack, 2 two towers), stack count u32, then per stack a layer
/// table (layer count u32; per layer kind u32, shape word count u32, shape
/// words u32). Payload: per layer, trainable tensors then persistent state
/// in declaration order, float32. Trailer: training epoch u32, then an
/// optional "OPT1" section with the optimizer step count u64 and m/v/vmax
/// float32 tensors per parameter.
struct CheckpointInfo {
    uint32_t epoch = 0;
    bool has_optimizer = false;
};

void save_checkpoint(nn::Classifier<float>& model, uint32_t epoch,
                     const AmsGrad<float>* optimizer, const std::string& path);

/// Loads into an already-built classifier; the layer table must match the
/// model structure exactly, else CheckpointError.
CheckpointInfo load_checkpoint(nn::Classifier<float>& model, AmsGrad<float>* optimizer,
                               const std::string& path);

}  // namespace heatcast
