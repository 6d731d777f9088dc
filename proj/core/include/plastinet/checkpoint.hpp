#pragma once

#include <string>
#include <vector>

#include "plastinet/param_store.hpp"

namespace plastinet {

/// Architecture descriptor stored alongside the tensors so a loaded model can
/// be rebuilt (and then grown) without the original config.
struct CheckpointMeta {
    std::string kind;    // "rl" or "cl"
    std::string variant; // rl variant tag, or cl method label
    std::int64_t global_step = 0;
    std::int64_t episode_count = 0;
    std::vector<std::int64_t> experts_per_site;
    std::int64_t d = 0;
    std::int64_t expert_h = 0;
};

/// Directory layout: manifest.json + params.bin. The blob holds, per entry in
/// store order, the tensor values then both Adam moments as f64, so the round
/// trip preserves every parameter and optimizer bit.
void save_checkpoint(const ParamStore& params, const CheckpointMeta& meta, const std::string& dir);

struct LoadedCheckpoint {
    struct Entry {
        std::string name;
        Shape shape;
        ParamKind kind = ParamKind::weight;
        bool requires_grad = true;
        std::int64_t adam_t = 0;
        std::vector<double> value;
        std::vector<double> m;
        std::vector<double> v;
    };
    CheckpointMeta meta;
    std::vector<Entry> entries;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

/// Copies a loaded checkpoint into a freshly built store. Every checkpoint
/// entry must exist with a matching shape, and the store must not hold extra
/// parameters; mismatches raise ConfigError.
void apply_checkpoint(ParamStore& params, const LoadedCheckpoint& ckpt);

} // namespace plastinet
