#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plastinet/layers.hpp"

namespace plastinet {

/// Expert of shape d -> h -> d. Input and output width stay d regardless of
/// how many experts share the layer.
struct BottleneckExpert {
    Tensor w_in;  // [h, d]
    Tensor b_in;  // [h] (optional)
    Tensor w_out; // [d, h]
    Tensor b_out; // [d] (optional)

    BottleneckExpert() = default;
    BottleneckExpert(ParamStore& params, const std::string& prefix, std::int64_t d, std::int64_t h,
                     bool with_bias, Rng& rng);

    Tensor forward(Graph& g, const Tensor& x) const;
};

/// Soft-routed mixture of bottleneck experts with runtime growth. Routing is
/// dense softmax over all experts, so every expert participates in every
/// forward pass and "active parameters" equals total expert parameters.
struct MoELayer {
    std::int64_t d = 0;
    std::int64_t h = 0;
    bool with_bias = true;
    std::string prefix;
    std::vector<BottleneckExpert> experts;
    Tensor router; // [E, d]

    MoELayer() = default;
    MoELayer(ParamStore& params, const std::string& prefix, std::int64_t d, std::int64_t h,
             std::int64_t n_experts, bool with_bias, Rng& rng);

    std::int64_t expert_count() const { return static_cast<std::int64_t>(experts.size()); }

    /// Softmax gate weights [batch, E]; rows sum to 1.
    Tensor gate_weights(Graph& g, const Tensor& x) const;

    /// y = sum_e gate_e(x) * expert_e(x), shape [batch, d]. When gates_out is
    /// given it receives the [batch, E] gate tensor (router telemetry).
    Tensor forward(Graph& g, const Tensor& x, Tensor* gates_out = nullptr) const;

    /// E*2*d*h expert weights, plus bias and router terms when flagged.
    std::int64_t active_param_count(bool include_bias, bool include_router) const;
};

/// Appends n_new freshly initialized experts and n_new zero rows to the
/// router. Every pre-existing expert and router parameter is left
/// bit-identical, optimizer moments included; new parameters start with
/// zeroed optimizer state. No function preservation is attempted.
void grow_experts(MoELayer& layer, ParamStore& params, std::int64_t n_new, Rng& rng);

/// Diagnostic variant: E parallel linear maps d -> d/E, outputs concatenated.
struct LinearExpertLayer {
    std::int64_t d = 0;
    std::vector<Tensor> experts; // each [d/E, d]

    LinearExpertLayer() = default;
    LinearExpertLayer(ParamStore& params, const std::string& prefix, std::int64_t d,
                      std::int64_t n_experts, Rng& rng);

    Tensor forward(Graph& g, const Tensor& x) const;
};

/// Residual block: x + inner(layernorm(x)). The inner path is either a plain
/// bottleneck MLP or an MoE layer of matching width.
struct ResidualBlock {
    Tensor ln_gain;
    Tensor ln_bias;
    std::optional<Mlp> plain;
    std::optional<MoELayer> moe;

    ResidualBlock() = default;
    /// Plain inner path d -> hidden -> d.
    ResidualBlock(ParamStore& params, const std::string& prefix, std::int64_t d,
                  std::int64_t hidden, Rng& rng);
    /// MoE inner path.
    ResidualBlock(ParamStore& params, const std::string& prefix, std::int64_t d,
                  std::int64_t expert_h, std::int64_t n_experts, Rng& rng);

    Tensor forward(Graph& g, const Tensor& x, Tensor* gates_out = nullptr) const;
    MoELayer* moe_site() { return moe ? &*moe : nullptr; }
    const MoELayer* moe_site() const { return moe ? &*moe : nullptr; }
};

} // namespace plastinet
