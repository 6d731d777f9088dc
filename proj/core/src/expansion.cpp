#include "plastinet/expansion.hpp"

#include <algorithm>

#include "plastinet/error.hpp"

namespace plastinet {

const char* method_str(MethodTag tag) {
    switch (tag) {
        case MethodTag::none: return "none";
        case MethodTag::net2wider: return "net2wider";
        case MethodTag::progressive: return "progressive";
        case MethodTag::injection: return "injection";
        case MethodTag::dynamic_moe: return "dynamic_moe";
    }
    return "none";
}

MethodTag method_from_str(const std::string& s) {
    if (s == "none") return MethodTag::none;
    if (s == "net2wider") return MethodTag::net2wider;
    if (s == "progressive") return MethodTag::progressive;
    if (s == "injection") return MethodTag::injection;
    if (s == "dynamic_moe") return MethodTag::dynamic_moe;
    throw ConfigError("unknown expansion method '" + s + "'");
}

// ---------------------------------------------------------------------------
// net2wider

namespace {

// Replaces one weight matrix [out, in] -> [new_out, new_in], old entries in
// the leading submatrix, new entries seeded. Moments follow old entries.
Tensor widen_matrix(ParamStore& params, const std::string& name, const Tensor& old,
                    std::int64_t new_out, std::int64_t new_in, Rng& rng) {
    const std::int64_t out = old.dim(0), in = old.dim(1);
    Tensor grown = Tensor::uniform_init({new_out, new_in}, new_in, rng);
    auto& gv = grown.data();
    const auto& ov = old.data();
    for (std::int64_t r = 0; r < out; ++r) {
        for (std::int64_t c = 0; c < in; ++c) gv[r * new_in + c] = ov[r * in + c];
    }
    params.replace(name, grown, [in, new_in, new_out](std::int64_t i) -> std::int64_t {
        const std::int64_t r = i / in, c = i % in;
        return r < new_out ? r * new_in + c : -1;
    });
    return grown;
}

Tensor widen_bias(ParamStore& params, const std::string& name, const Tensor& old,
                  std::int64_t new_out, std::int64_t fan_in, Rng& rng) {
    Tensor grown = Tensor::uniform_init({new_out}, fan_in, rng);
    std::copy(old.data().begin(), old.data().end(), grown.data().begin());
    params.replace(name, grown, [](std::int64_t i) { return i; });
    return grown;
}

} // namespace

void net2wider(Mlp& mlp, ParamStore& params, const std::vector<std::int64_t>& new_hidden,
               Rng& rng) {
    const auto widths = mlp.widths();
    if (new_hidden.size() + 2 != widths.size()) {
        throw ConfigError("net2wider: expected " + std::to_string(widths.size() - 2) +
                          " hidden widths, got " + std::to_string(new_hidden.size()));
    }
    std::vector<std::int64_t> target = widths;
    bool changed = false;
    for (std::size_t i = 0; i < new_hidden.size(); ++i) {
        if (new_hidden[i] < widths[i + 1]) {
            throw ConfigError("net2wider: cannot shrink hidden width " + std::to_string(widths[i + 1]) +
                              " to " + std::to_string(new_hidden[i]));
        }
        if (new_hidden[i] > widths[i + 1]) changed = true;
        target[i + 1] = new_hidden[i];
    }
    if (!changed) return;

    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        auto& layer = mlp.layers[l];
        const std::int64_t new_in = target[l];
        const std::int64_t new_out = target[l + 1];
        const std::string wname = mlp.prefix + ".l" + std::to_string(l) + ".weight";
        if (new_in != layer.in_dim() || new_out != layer.out_dim()) {
            layer.weight = widen_matrix(params, wname, layer.weight, new_out, new_in, rng);
            if (layer.bias.defined() && new_out != layer.bias.dim(0)) {
                const std::string bname = mlp.prefix + ".l" + std::to_string(l) + ".bias";
                layer.bias = widen_bias(params, bname, layer.bias, new_out, new_in, rng);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// progressive stack

ProgressiveStack::ProgressiveStack(ParamStore& params, const std::string& prefix_, std::int64_t in_,
                                   const std::vector<std::int64_t>& hidden, std::int64_t out_,
                                   bool with_bias_, Rng& rng)
    : prefix(prefix_), in(in_), out(out_), with_bias(with_bias_) {
    Column col;
    std::vector<std::int64_t> widths;
    widths.push_back(in);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out);
    col.mlp = Mlp(params, prefix + ".col0.mlp", widths, with_bias, rng);
    col.laterals.resize(widths.size() - 2 + 1); // one slot per layer l >= 1
    columns.push_back(std::move(col));
}

void ProgressiveStack::add_column(ParamStore& params, const std::vector<std::int64_t>& hidden,
                                  Rng& rng) {
    const std::int64_t k = column_count();
    // Everything before the new column stops learning.
    for (std::int64_t j = 0; j < k; ++j) {
        set_trainable_prefix(params, prefix + ".col" + std::to_string(j) + ".", false);
    }

    Column col;
    std::vector<std::int64_t> widths;
    widths.push_back(in);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out);
    const std::string cp = prefix + ".col" + std::to_string(k);
    col.mlp = Mlp(params, cp + ".mlp", widths, with_bias, rng);
    col.laterals.resize(widths.size() - 1);
    for (std::size_t l = 1; l + 1 <= widths.size() - 1; ++l) {
        // Lateral maps from every prior column's depth l-1 activation.
        for (std::int64_t j = 0; j < k; ++j) {
            const auto prior_widths = columns[j].mlp.widths();
            const std::int64_t src = prior_widths[l];
            Tensor w = params.add(cp + ".lat.l" + std::to_string(l) + ".from" + std::to_string(j),
                                  Tensor::uniform_init({widths[l + 1], src}, src, rng));
            col.laterals[l].push_back(w);
        }
    }
    columns.push_back(std::move(col));
}

Tensor ProgressiveStack::forward(Graph& g, const Tensor& x) const {
    // hidden[j][l]: post-relu activation of column j at depth l.
    std::vector<std::vector<Tensor>> hidden(columns.size());
    Tensor newest_out;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        const auto& col = columns[j];
        Tensor h = x;
        for (std::size_t l = 0; l < col.mlp.layers.size(); ++l) {
            Tensor pre = col.mlp.layers[l].forward(g, h);
            if (l >= 1 && l < col.laterals.size() && !col.laterals[l].empty()) {
                for (std::size_t p = 0; p < col.laterals[l].size(); ++p) {
                    pre = g.add(pre, g.matmul(hidden[p][l - 1], col.laterals[l][p], false, true));
                }
            }
            if (l + 1 < col.mlp.layers.size()) {
                h = g.relu(pre);
                hidden[j].push_back(h);
            } else {
                h = pre;
            }
        }
        newest_out = h;
    }
    return newest_out;
}

// ---------------------------------------------------------------------------
// plasticity injection

InjectedMlp::InjectedMlp(ParamStore& params, const std::string& prefix_,
                         const std::vector<std::int64_t>& widths, bool with_bias, Rng& rng)
    : prefix(prefix_) {
    base = Mlp(params, prefix + ".base", widths, with_bias, rng);
}

void InjectedMlp::inject(ParamStore& params, const std::vector<std::int64_t>& hidden, Rng& rng) {
    // Freeze the whole current function: base and every earlier branch.
    set_trainable_prefix(params, prefix + ".", false);

    const auto base_widths = base.widths();
    std::vector<std::int64_t> widths;
    widths.push_back(base_widths.front());
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(base_widths.back());

    const std::string bp = prefix + ".branch" + std::to_string(branches.size());
    Branch br;
    br.theta = Mlp(params, bp + ".theta", widths, base.with_bias(), rng);
    // theta0 is a frozen bit-copy of theta taken right now, which makes the
    // branch contribute exactly zero at injection time.
    br.theta0.prefix = bp + ".theta0";
    for (std::size_t l = 0; l < br.theta.layers.size(); ++l) {
        LinearLayer frozen;
        Tensor w = br.theta.layers[l].weight.clone();
        w.set_requires_grad(false);
        frozen.weight = params.add(bp + ".theta0.l" + std::to_string(l) + ".weight", w);
        if (br.theta.layers[l].bias.defined()) {
            Tensor b = br.theta.layers[l].bias.clone();
            b.set_requires_grad(false);
            frozen.bias =
                params.add(bp + ".theta0.l" + std::to_string(l) + ".bias", b, ParamKind::bias);
        }
        br.theta0.layers.push_back(std::move(frozen));
    }
    branches.push_back(std::move(br));
}

Tensor InjectedMlp::forward(Graph& g, const Tensor& x) const {
    Tensor y = base.forward(g, x);
    const Tensor neg_one = Tensor::scalar(-1.0);
    for (const auto& br : branches) {
        // theta - theta0 first: the pair cancels bit-exactly at injection.
        Tensor diff = g.add(br.theta.forward(g, x), g.mul(br.theta0.forward(g, x), neg_one));
        y = g.add(y, diff);
    }
    return y;
}

// ---------------------------------------------------------------------------
// site assembly and dispatch

Tensor ExpansionSite::forward(Graph& g, const Tensor& x) const {
    switch (tag) {
        case MethodTag::none:
        case MethodTag::net2wider: return bottleneck->forward(g, x);
        case MethodTag::progressive: return progressive->forward(g, x);
        case MethodTag::injection: return injected->forward(g, x);
        case MethodTag::dynamic_moe: return moe->forward(g, x);
    }
    throw Error("expansion site: invalid tag");
}

ExpansionSite build_site(ParamStore& params, const std::string& prefix,
                         const GrowthSchedule& schedule, Rng& rng) {
    ExpansionSite site;
    site.tag = schedule.method.tag;
    site.prefix = prefix;
    std::vector<std::int64_t> widths;
    widths.push_back(schedule.d);
    widths.insert(widths.end(), schedule.init_hidden.begin(), schedule.init_hidden.end());
    widths.push_back(schedule.d);
    switch (schedule.method.tag) {
        case MethodTag::none:
        case MethodTag::net2wider:
            site.bottleneck.emplace(params, prefix, widths, true, rng);
            break;
        case MethodTag::progressive:
            site.progressive.emplace(params, prefix, schedule.d, schedule.init_hidden, schedule.d,
                                     true, rng);
            break;
        case MethodTag::injection:
            site.injected.emplace(params, prefix, widths, true, rng);
            break;
        case MethodTag::dynamic_moe:
            site.moe.emplace(params, prefix, schedule.d, schedule.expert_h, schedule.init_experts,
                             true, rng);
            break;
    }
    return site;
}

std::int64_t apply_expansion(ExpansionSite& site, ParamStore& params,
                             const GrowthSchedule& schedule, int stage_index, Rng& rng) {
    if (stage_index < 1 || stage_index >= schedule.stages) {
        throw ConfigError("apply_expansion: stage index " + std::to_string(stage_index) +
                          " outside [1," + std::to_string(schedule.stages) + ")");
    }
    const StageAction& action = schedule.actions[static_cast<std::size_t>(stage_index)];
    switch (site.tag) {
        case MethodTag::none:
            break;
        case MethodTag::net2wider:
            net2wider(*site.bottleneck, params, action.target_hidden, rng);
            break;
        case MethodTag::progressive:
            site.progressive->add_column(params, action.column_hidden, rng);
            break;
        case MethodTag::injection:
            site.injected->inject(params, action.inject_hidden, rng);
            break;
        case MethodTag::dynamic_moe:
            grow_experts(*site.moe, params, action.add_experts, rng);
            break;
    }
    return site_weight_params(site, params);
}

std::int64_t site_weight_params(const ExpansionSite& site, const ParamStore& params) {
    CountOptions opts;
    opts.include_bias = false; // router excluded as well
    return count_params_prefix(params, site.prefix + ".", opts);
}

} // namespace plastinet
