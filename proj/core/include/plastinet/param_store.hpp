#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "plastinet/tensor.hpp"

namespace plastinet {

enum class ParamKind { weight, bias, router };

const char* param_kind_str(ParamKind kind);
ParamKind param_kind_from_str(const std::string& s);

/// Per-parameter Adam state. `t` counts steps taken on this tensor.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;
};

struct ParamEntry {
    std::string name;
    Tensor tensor;
    ParamKind kind = ParamKind::weight;
    AdamState adam;
};

/// Named, ordered collection of trainable tensors with per-parameter
/// optimizer state. The unit of checkpointing. Entries keep insertion order;
/// growth appends, so order stays deterministic across runs.
class ParamStore {
public:
    /// Registers a tensor under a unique name. Adam state starts zeroed.
    Tensor add(const std::string& name, Tensor tensor, ParamKind kind = ParamKind::weight);

    bool contains(const std::string& name) const;
    Tensor get(const std::string& name) const;
    ParamEntry& entry(const std::string& name);
    const ParamEntry& entry(const std::string& name) const;

    std::vector<ParamEntry>& entries() { return entries_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }

    /// Swaps in a resized tensor under an existing name. Optimizer moments of
    /// surviving scalars follow them via `old_to_new` (maps old flat index to
    /// new flat index, or -1 to drop); fresh entries start at zero. The step
    /// count is kept.
    void replace(const std::string& name, Tensor tensor,
                 const std::function<std::int64_t(std::int64_t)>& old_to_new);

    void zero_grads();

    std::size_t size() const { return entries_.size(); }

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Standard Adam with bias correction over every requires_grad entry.
/// Requires populated grads (error names the first parameter missing one);
/// zeroes grads afterwards. Frozen entries are skipped.
void adam_step(ParamStore& params, const AdamConfig& cfg);

struct CountOptions {
    bool include_bias = true; ///< when false, biases and router weights are excluded
    bool trainable_only = false;
};

/// Exact scalar-parameter count over the store, or over names starting with
/// `prefix`. include_bias=false drops biases and router weights, the
/// convention used for parameter-budget comparisons.
std::int64_t count_params(const ParamStore& params, const CountOptions& opts = {});
std::int64_t count_params_prefix(const ParamStore& params, const std::string& prefix,
                                 const CountOptions& opts = {});

/// Sets requires_grad on every entry whose name starts with `prefix`.
void set_trainable_prefix(ParamStore& params, const std::string& prefix, bool trainable);

} // namespace plastinet
