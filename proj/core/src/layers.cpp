#include "plastinet/layers.hpp"

#include "plastinet/error.hpp"

namespace plastinet {

LinearLayer::LinearLayer(ParamStore& params, const std::string& prefix, std::int64_t in,
                         std::int64_t out, bool with_bias, Rng& rng) {
    weight = params.add(prefix + ".weight", Tensor::uniform_init({out, in}, in, rng));
    if (with_bias) {
        bias = params.add(prefix + ".bias", Tensor::uniform_init({out}, in, rng), ParamKind::bias);
    }
}

Tensor LinearLayer::forward(Graph& g, const Tensor& x) const {
    Tensor y = g.matmul(x, weight, false, true);
    if (bias.defined()) y = g.add(y, bias);
    return y;
}

Mlp::Mlp(ParamStore& params, const std::string& prefix_, const std::vector<std::int64_t>& widths,
         bool with_bias, Rng& rng)
    : prefix(prefix_) {
    if (widths.size() < 2) throw ConfigError("mlp: needs at least [in, out] widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layers.emplace_back(params, prefix + ".l" + std::to_string(i), widths[i], widths[i + 1],
                            with_bias, rng);
    }
}

Tensor Mlp::forward(Graph& g, const Tensor& x) const {
    return forward_with_hidden(g, x, nullptr);
}

Tensor Mlp::forward_with_hidden(Graph& g, const Tensor& x, std::vector<Tensor>* hidden) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(g, h);
        if (i + 1 < layers.size()) {
            h = g.relu(h);
            if (hidden) hidden->push_back(h);
        }
    }
    return h;
}

std::vector<std::int64_t> Mlp::widths() const {
    std::vector<std::int64_t> w;
    w.push_back(layers.front().in_dim());
    for (const auto& l : layers) w.push_back(l.out_dim());
    return w;
}

ConvLayer::ConvLayer(ParamStore& params, const std::string& prefix, std::int64_t in_c,
                     std::int64_t out_c, int k, int stride_, int padding_, Rng& rng)
    : stride(stride_), padding(padding_) {
    const std::int64_t fan_in = in_c * k * k;
    kernel = params.add(prefix + ".kernel", Tensor::uniform_init({out_c, in_c, k, k}, fan_in, rng));
    bias = params.add(prefix + ".bias", Tensor::uniform_init({out_c}, fan_in, rng), ParamKind::bias);
}

Tensor ConvLayer::forward(Graph& g, const Tensor& x) const {
    return g.conv2d(x, kernel, bias, stride, padding);
}

BaseModel::BaseModel(ParamStore& params, const std::string& prefix, const BaseModelConfig& cfg_,
                     Rng& rng)
    : cfg(cfg_) {
    std::int64_t c = cfg.in_channels;
    std::int64_t hw = cfg.image_hw;
    const int pad = cfg.kernel / 2;
    for (std::size_t i = 0; i < cfg.conv_widths.size(); ++i) {
        convs.emplace_back(params, prefix + ".conv" + std::to_string(i), c, cfg.conv_widths[i],
                           cfg.kernel, 1, pad, rng);
        c = cfg.conv_widths[i];
        if (hw % 2 != 0) throw ConfigError("base model: image side not divisible by pooling");
        hw /= 2;
    }
    flat_dim = c * hw * hw;
    std::vector<std::int64_t> widths;
    widths.push_back(flat_dim);
    widths.insert(widths.end(), cfg.mlp_hidden.begin(), cfg.mlp_hidden.end());
    widths.push_back(cfg.classes);
    mlp = Mlp(params, prefix + ".mlp", widths, true, rng);
}

Tensor BaseModel::features(Graph& g, const Tensor& images) const {
    Tensor h = images;
    for (const auto& conv : convs) {
        h = conv.forward(g, h);
        h = g.relu(h);
        h = g.maxpool2(h);
    }
    return g.reshape(h, {h.dim(0), flat_dim});
}

Tensor BaseModel::forward(Graph& g, const Tensor& images) const {
    return mlp.forward(g, features(g, images));
}

Tensor cross_entropy(Graph& g, const Tensor& logits, const std::vector<std::int64_t>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("cross_entropy: logits must be [batch, classes], got " +
                         shape_str(logits.shape()));
    }
    Tensor logp = g.log_softmax(logits);
    Tensor picked = g.gather(logp, labels); // bounds checked there
    Tensor nll = g.mul(picked, Tensor::scalar(-1.0));
    return g.mean(nll);
}

double accuracy_from_logits(const Tensor& logits, const std::vector<std::int64_t>& labels) {
    const std::int64_t n = logits.dim(0), c = logits.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != n) {
        throw ShapeError("accuracy: label count " + std::to_string(labels.size()) +
                         " != batch size " + std::to_string(n));
    }
    const auto& lv = logits.data();
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double* row = lv.data() + i * c;
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < c; ++j) {
            if (row[j] > row[best]) best = j; // strict: first max wins ties
        }
        if (best == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

} // namespace plastinet
