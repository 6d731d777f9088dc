#include "plastinet/param_store.hpp"

#include <cmath>

#include "plastinet/error.hpp"

namespace plastinet {

const char* param_kind_str(ParamKind kind) {
    switch (kind) {
        case ParamKind::weight: return "weight";
        case ParamKind::bias: return "bias";
        case ParamKind::router: return "router";
    }
    return "weight";
}

ParamKind param_kind_from_str(const std::string& s) {
    if (s == "weight") return ParamKind::weight;
    if (s == "bias") return ParamKind::bias;
    if (s == "router") return ParamKind::router;
    throw ConfigError("unknown parameter kind '" + s + "'");
}

Tensor ParamStore::add(const std::string& name, Tensor tensor, ParamKind kind) {
    if (index_.count(name)) throw ConfigError("param store: duplicate parameter name '" + name + "'");
    if (!tensor.defined()) throw Error("param store: undefined tensor for '" + name + "'");
    index_[name] = entries_.size();
    ParamEntry e;
    e.name = name;
    e.tensor = tensor;
    e.kind = kind;
    e.adam.m.assign(static_cast<std::size_t>(tensor.numel()), 0.0);
    e.adam.v.assign(static_cast<std::size_t>(tensor.numel()), 0.0);
    entries_.push_back(std::move(e));
    return tensor;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) > 0; }

Tensor ParamStore::get(const std::string& name) const { return entry(name).tensor; }

ParamEntry& ParamStore::entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("param store: unknown parameter '" + name + "'");
    return entries_[it->second];
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("param store: unknown parameter '" + name + "'");
    return entries_[it->second];
}

void ParamStore::replace(const std::string& name, Tensor tensor,
                         const std::function<std::int64_t(std::int64_t)>& old_to_new) {
    ParamEntry& e = entry(name);
    const std::int64_t old_n = e.tensor.numel();
    const std::int64_t new_n = tensor.numel();
    AdamState fresh;
    fresh.m.assign(static_cast<std::size_t>(new_n), 0.0);
    fresh.v.assign(static_cast<std::size_t>(new_n), 0.0);
    fresh.t = e.adam.t;
    for (std::int64_t i = 0; i < old_n; ++i) {
        const std::int64_t j = old_to_new(i);
        if (j < 0) continue;
        if (j >= new_n) throw Error("param store: remap index out of range for '" + name + "'");
        fresh.m[j] = e.adam.m[i];
        fresh.v[j] = e.adam.v[i];
    }
    e.tensor = std::move(tensor);
    e.adam = std::move(fresh);
}

void ParamStore::zero_grads() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

void adam_step(ParamStore& params, const AdamConfig& cfg) {
    for (auto& e : params.entries()) {
        if (!e.tensor.requires_grad()) continue;
        if (!e.tensor.has_grad()) {
            throw Error("adam_step: missing gradient for parameter '" + e.name + "'");
        }
        auto& p = e.tensor.data();
        auto& g = e.tensor.grad();
        auto& st = e.adam;
        st.t += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
        for (std::size_t i = 0; i < p.size(); ++i) {
            st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
            st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = st.m[i] / bc1;
            const double vhat = st.v[i] / bc2;
            p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        e.tensor.zero_grad();
    }
}

namespace {
bool counted(const ParamEntry& e, const CountOptions& opts) {
    if (!opts.include_bias && (e.kind == ParamKind::bias || e.kind == ParamKind::router)) return false;
    if (opts.trainable_only && !e.tensor.requires_grad()) return false;
    return true;
}
} // namespace

std::int64_t count_params(const ParamStore& params, const CountOptions& opts) {
    std::int64_t total = 0;
    for (const auto& e : params.entries()) {
        if (counted(e, opts)) total += e.tensor.numel();
    }
    return total;
}

std::int64_t count_params_prefix(const ParamStore& params, const std::string& prefix,
                                 const CountOptions& opts) {
    std::int64_t total = 0;
    for (const auto& e : params.entries()) {
        if (e.name.rfind(prefix, 0) == 0 && counted(e, opts)) total += e.tensor.numel();
    }
    return total;
}

void set_trainable_prefix(ParamStore& params, const std::string& prefix, bool trainable) {
    for (auto& e : params.entries()) {
        if (e.name.rfind(prefix, 0) == 0) e.tensor.set_requires_grad(trainable);
    }
}

} // namespace plastinet
