#pragma once

#include <string>
#include <vector>

#include "plastinet/graph.hpp"
#include "plastinet/param_store.hpp"

namespace plastinet {

/// Fully connected layer, weight stored [out, in].
struct LinearLayer {
    Tensor weight;
    Tensor bias; // undefined when constructed without bias

    LinearLayer() = default;
    LinearLayer(ParamStore& params, const std::string& prefix, std::int64_t in, std::int64_t out,
                bool with_bias, Rng& rng);

    Tensor forward(Graph& g, const Tensor& x) const;
    std::int64_t in_dim() const { return weight.dim(1); }
    std::int64_t out_dim() const { return weight.dim(0); }
};

/// Stack of linear layers with relu between them (none after the last).
/// widths() returns [in, hidden..., out].
struct Mlp {
    std::vector<LinearLayer> layers;
    std::string prefix;

    Mlp() = default;
    Mlp(ParamStore& params, const std::string& prefix, const std::vector<std::int64_t>& widths,
        bool with_bias, Rng& rng);

    Tensor forward(Graph& g, const Tensor& x) const;
    /// Forward that also exposes each hidden layer's post-relu activation.
    Tensor forward_with_hidden(Graph& g, const Tensor& x, std::vector<Tensor>* hidden) const;
    std::vector<std::int64_t> widths() const;
    bool with_bias() const { return layers.empty() ? false : layers.front().bias.defined(); }
};

struct ConvLayer {
    Tensor kernel; // [out_c, in_c, k, k]
    Tensor bias;
    int stride = 1;
    int padding = 0;

    ConvLayer() = default;
    ConvLayer(ParamStore& params, const std::string& prefix, std::int64_t in_c, std::int64_t out_c,
              int k, int stride, int padding, Rng& rng);

    Tensor forward(Graph& g, const Tensor& x) const;
};

struct BaseModelConfig {
    std::int64_t in_channels = 3;
    std::int64_t image_hw = 16;
    std::vector<std::int64_t> conv_widths = {16, 16, 32};
    int kernel = 3;
    std::vector<std::int64_t> mlp_hidden = {64, 64};
    std::int64_t classes = 20;
};

/// Three conv blocks (conv -> relu -> 2x2 maxpool) feeding a three-layer MLP.
struct BaseModel {
    BaseModelConfig cfg;
    std::vector<ConvLayer> convs;
    Mlp mlp;
    std::int64_t flat_dim = 0;

    BaseModel() = default;
    BaseModel(ParamStore& params, const std::string& prefix, const BaseModelConfig& cfg, Rng& rng);

    /// images [batch, C, H, W] -> logits [batch, classes].
    Tensor forward(Graph& g, const Tensor& images) const;

    /// Convolutional feature extraction only: images -> [batch, flat_dim].
    Tensor features(Graph& g, const Tensor& images) const;
};

/// Mean negative log-likelihood of integer labels under the logits.
Tensor cross_entropy(Graph& g, const Tensor& logits, const std::vector<std::int64_t>& labels);

/// Fraction of argmax-correct rows; ties break toward the lowest class index.
double accuracy_from_logits(const Tensor& logits, const std::vector<std::int64_t>& labels);

} // namespace plastinet
