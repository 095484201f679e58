#pragma once

#include <cstdint>
#include <string>

#include "arbiter/nn/modules.hpp"

namespace arbiter::io {

/**
 * Checkpoint container: self-describing binary file with a format version,
 * a JSON config snapshot, parameter arrays as float32 (optionally with Adam
 * state), batch-norm buffers, the best validation loss, and the step count.
 */
struct CheckpointMeta {
    std::uint32_t version = 1;
    std::string config_json;
    std::uint64_t step = 0;
    double val_loss = 0.0;
    bool has_optimizer = false;
    std::uint64_t optimizer_steps = 0;
};

void save_checkpoint(const std::string& path, const nn::ParamStore& store,
                     const CheckpointMeta& meta);

/// Loads all parameters and buffers into a store whose names must match the
/// file exactly. Returns the metadata.
CheckpointMeta load_checkpoint(const std::string& path, nn::ParamStore& store);

/// Reads only the header metadata.
CheckpointMeta read_checkpoint_meta(const std::string& path);

/// Copies the parameters/buffers whose names start with `prefix` into the
/// store (used to initialize a classifier encoder from a pretraining
/// checkpoint). Returns the number of arrays copied.
std::size_t load_checkpoint_prefix(const std::string& path, nn::ParamStore& store,
                                   const std::string& prefix);

} // namespace arbiter::io
