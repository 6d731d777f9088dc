#include "plastinet/moe.hpp"

#include "plastinet/error.hpp"

namespace plastinet {

BottleneckExpert::BottleneckExpert(ParamStore& params, const std::string& prefix, std::int64_t d,
                                   std::int64_t h, bool with_bias, Rng& rng) {
    w_in = params.add(prefix + ".w_in", Tensor::uniform_init({h, d}, d, rng));
    if (with_bias) {
        b_in = params.add(prefix + ".b_in", Tensor::uniform_init({h}, d, rng), ParamKind::bias);
    }
    w_out = params.add(prefix + ".w_out", Tensor::uniform_init({d, h}, h, rng));
    if (with_bias) {
        b_out = params.add(prefix + ".b_out", Tensor::uniform_init({d}, h, rng), ParamKind::bias);
    }
}

Tensor BottleneckExpert::forward(Graph& g, const Tensor& x) const {
    Tensor inner = g.matmul(x, w_in, false, true);
    if (b_in.defined()) inner = g.add(inner, b_in);
    inner = g.relu(inner);
    Tensor out = g.matmul(inner, w_out, false, true);
    if (b_out.defined()) out = g.add(out, b_out);
    return out;
}

MoELayer::MoELayer(ParamStore& params, const std::string& prefix_, std::int64_t d_, std::int64_t h_,
                   std::int64_t n_experts, bool with_bias_, Rng& rng)
    : d(d_), h(h_), with_bias(with_bias_), prefix(prefix_) {
    if (n_experts < 1) throw ConfigError("moe: expert count must be >= 1");
    for (std::int64_t e = 0; e < n_experts; ++e) {
        experts.emplace_back(params, prefix + ".expert" + std::to_string(e), d, h, with_bias, rng);
    }
    router = params.add(prefix + ".router", Tensor::uniform_init({n_experts, d}, d, rng),
                        ParamKind::router);
}

Tensor MoELayer::gate_weights(Graph& g, const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != d) {
        throw ShapeError("moe gate: input " + shape_str(x.shape()) + " must be [batch," +
                         std::to_string(d) + "]");
    }
    return g.softmax(g.matmul(x, router, false, true));
}

Tensor MoELayer::forward(Graph& g, const Tensor& x, Tensor* gates_out) const {
    Tensor gates = gate_weights(g, x); // validates width
    if (gates_out) *gates_out = gates;
    const std::int64_t batch = x.dim(0);
    Tensor y;
    for (std::int64_t e = 0; e < expert_count(); ++e) {
        std::vector<std::int64_t> col(static_cast<std::size_t>(batch), e);
        Tensor gate_e = g.gather(gates, col);               // [batch]
        Tensor weighted = g.mul(experts[e].forward(g, x), gate_e); // row scaling
        y = y.defined() ? g.add(y, weighted) : weighted;
    }
    return y;
}

std::int64_t MoELayer::active_param_count(bool include_bias, bool include_router) const {
    const std::int64_t e = expert_count();
    std::int64_t total = e * 2 * d * h;
    if (include_bias && with_bias) total += e * (h + d);
    if (include_router) total += e * d;
    return total;
}

void grow_experts(MoELayer& layer, ParamStore& params, std::int64_t n_new, Rng& rng) {
    if (n_new < 1) throw ConfigError("grow_experts: n_new must be >= 1");
    const std::int64_t old_e = layer.expert_count();
    for (std::int64_t k = 0; k < n_new; ++k) {
        layer.experts.emplace_back(params, layer.prefix + ".expert" + std::to_string(old_e + k),
                                   layer.d, layer.h, layer.with_bias, rng);
    }
    // Router gains zero rows: new experts start with a neutral logit. Old
    // rows keep their exact bits and optimizer moments (flat indices are
    // unchanged because rows append at the end).
    const std::int64_t new_e = old_e + n_new;
    Tensor grown = Tensor::zeros({new_e, layer.d}, true);
    const auto& old_w = layer.router.data();
    std::copy(old_w.begin(), old_w.end(), grown.data().begin());
    params.replace(layer.prefix + ".router", grown, [](std::int64_t i) { return i; });
    layer.router = grown;
}

LinearExpertLayer::LinearExpertLayer(ParamStore& params, const std::string& prefix, std::int64_t d_,
                                     std::int64_t n_experts, Rng& rng)
    : d(d_) {
    if (n_experts < 1 || d % n_experts != 0) {
        throw ConfigError("linear expert layer: expert count must divide width " +
                          std::to_string(d_));
    }
    const std::int64_t slice = d / n_experts;
    for (std::int64_t e = 0; e < n_experts; ++e) {
        experts.push_back(params.add(prefix + ".expert" + std::to_string(e) + ".weight",
                                     Tensor::uniform_init({slice, d}, d, rng)));
    }
}

Tensor LinearExpertLayer::forward(Graph& g, const Tensor& x) const {
    std::vector<Tensor> parts;
    parts.reserve(experts.size());
    for (const auto& w : experts) parts.push_back(g.matmul(x, w, false, true));
    return g.concat(parts, 1);
}

ResidualBlock::ResidualBlock(ParamStore& params, const std::string& prefix, std::int64_t d,
                             std::int64_t hidden, Rng& rng) {
    ln_gain = params.add(prefix + ".ln.gain", Tensor::full({d}, 1.0, true));
    ln_bias = params.add(prefix + ".ln.bias", Tensor::zeros({d}, true), ParamKind::bias);
    plain.emplace(params, prefix + ".inner", std::vector<std::int64_t>{d, hidden, d}, true, rng);
}

ResidualBlock::ResidualBlock(ParamStore& params, const std::string& prefix, std::int64_t d,
                             std::int64_t expert_h, std::int64_t n_experts, Rng& rng) {
    ln_gain = params.add(prefix + ".ln.gain", Tensor::full({d}, 1.0, true));
    ln_bias = params.add(prefix + ".ln.bias", Tensor::zeros({d}, true), ParamKind::bias);
    moe.emplace(params, prefix + ".inner", d, expert_h, n_experts, true, rng);
}

Tensor ResidualBlock::forward(Graph& g, const Tensor& x, Tensor* gates_out) const {
    Tensor normed = g.layernorm(x, ln_gain, ln_bias);
    Tensor inner = moe ? moe->forward(g, normed, gates_out) : plain->forward(g, normed);
    return g.add(x, inner);
}

} // namespace plastinet
