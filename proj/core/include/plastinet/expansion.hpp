#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plastinet/moe.hpp"

namespace plastinet {

enum class MethodTag { none, net2wider, progressive, injection, dynamic_moe };

const char* method_str(MethodTag tag);
MethodTag method_from_str(const std::string& s);

struct ExpansionMethod {
    MethodTag tag = MethodTag::none;
    std::int64_t granularity = 1; // dynamic_moe: experts at start and per growth
};

/// What happens at the start of one stage. Exactly the fields for the
/// schedule's method are populated; stage 0 is construction, so actions[0]
/// is always empty.
struct StageAction {
    std::int64_t add_experts = 0;
    std::vector<std::int64_t> target_hidden; // net2wider: per-hidden-layer widths
    std::vector<std::int64_t> column_hidden; // progressive: hidden widths of the new column
    std::vector<std::int64_t> inject_hidden; // injection: hidden widths of the branch pair
    bool inject = false;
};

/// Solved growth plan: when and how capacity is added, with all hidden
/// dimensions fixed so the final stage lands on the parameter budget.
struct GrowthSchedule {
    ExpansionMethod method;
    std::int64_t d = 0;      // site input/output width
    std::int64_t budget = 0; // weight-parameter budget for the site
    int stages = 1;
    std::vector<std::int64_t> init_hidden; // bottleneck widths at stage 0 (non-moe)
    std::int64_t init_experts = 0;         // dynamic_moe
    std::int64_t expert_h = 0;             // dynamic_moe
    std::vector<StageAction> actions;      // length == stages
};

/// Widens an MLP's hidden layers in place. Old weights occupy the leading
/// submatrix bit-exactly, fresh entries are seeded random, and optimizer
/// moments follow surviving entries. Shrinking is rejected.
void net2wider(Mlp& mlp, ParamStore& params, const std::vector<std::int64_t>& new_hidden, Rng& rng);

/// Frozen prior columns feeding lateral inputs into a new trainable column.
/// Only the newest column's head produces output.
struct ProgressiveStack {
    std::string prefix;
    std::int64_t in = 0;
    std::int64_t out = 0;
    bool with_bias = true;

    struct Column {
        Mlp mlp;
        // laterals[l-1][j]: prior column j's post-relu activation at depth l-1
        // mapped into this column's layer-l preactivation.
        std::vector<std::vector<Tensor>> laterals;
    };
    std::vector<Column> columns;

    ProgressiveStack() = default;
    ProgressiveStack(ParamStore& params, const std::string& prefix, std::int64_t in,
                     const std::vector<std::int64_t>& hidden, std::int64_t out, bool with_bias,
                     Rng& rng);

    /// Appends a column and freezes everything that existed before it.
    void add_column(ParamStore& params, const std::vector<std::int64_t>& hidden, Rng& rng);

    Tensor forward(Graph& g, const Tensor& x) const;
    std::int64_t column_count() const { return static_cast<std::int64_t>(columns.size()); }
};

/// Function-preserving capacity injection: the current function is frozen and
/// a fresh branch pair g_theta - g_theta0 is added, where theta0 is a frozen
/// bit-copy of theta. Output is unchanged at the moment of injection; only
/// the newest theta trains afterwards.
struct InjectedMlp {
    std::string prefix;
    Mlp base;
    struct Branch {
        Mlp theta;
        Mlp theta0;
    };
    std::vector<Branch> branches;

    InjectedMlp() = default;
    InjectedMlp(ParamStore& params, const std::string& prefix,
                const std::vector<std::int64_t>& widths, bool with_bias, Rng& rng);

    void inject(ParamStore& params, const std::vector<std::int64_t>& hidden, Rng& rng);

    Tensor forward(Graph& g, const Tensor& x) const;
};

/// The expandable middle of a model. Holds whichever structure the method
/// uses; forward keeps width d on both sides.
struct ExpansionSite {
    MethodTag tag = MethodTag::none;
    std::string prefix;
    std::optional<Mlp> bottleneck; // none, net2wider
    std::optional<ProgressiveStack> progressive;
    std::optional<InjectedMlp> injected;
    std::optional<MoELayer> moe;

    Tensor forward(Graph& g, const Tensor& x) const;
    MoELayer* moe_site() { return moe ? &*moe : nullptr; }
};

/// Instantiates the stage-0 site for a schedule.
ExpansionSite build_site(ParamStore& params, const std::string& prefix,
                         const GrowthSchedule& schedule, Rng& rng);

/// Applies the schedule's action for `stage_index` (>= 1) to the site.
/// Dispatches to net2wider / add_column / inject / grow_experts; a no-op for
/// method none. Returns the site's new weight-parameter count so callers can
/// log the expansion record.
std::int64_t apply_expansion(ExpansionSite& site, ParamStore& params,
                             const GrowthSchedule& schedule, int stage_index, Rng& rng);

/// Site weight-parameter count (biases and router excluded), the quantity
/// the budget is defined over.
std::int64_t site_weight_params(const ExpansionSite& site, const ParamStore& params);

} // namespace plastinet
