#include "plastinet/budget.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "plastinet/csv.hpp"
#include "plastinet/error.hpp"

namespace plastinet {

std::int64_t solve_bottleneck_width(std::int64_t d, std::int64_t expert_param_budget,
                                    std::int64_t granularity, std::int64_t growths) {
    if (d < 1 || granularity < 1 || growths < 0) {
        throw ConfigError("solve_bottleneck_width: d and granularity must be >= 1, growths >= 0");
    }
    const std::int64_t final_experts = granularity * (growths + 1);
    const std::int64_t per_unit = 2 * d * final_experts;
    const std::int64_t h = expert_param_budget / per_unit;
    if (h < 1) {
        throw ConfigError("solve_bottleneck_width: budget " + std::to_string(expert_param_budget) +
                          " too small for h >= 1 with d=" + std::to_string(d) + ", g=" +
                          std::to_string(granularity) + ", growths=" + std::to_string(growths));
    }
    return h;
}

namespace {

// Greedy integer fit: widths start at a uniform floor and grow one unit at a
// time, most expensive component first, while the total stays within budget.
std::vector<std::int64_t> fit_linear_budget(const std::vector<std::int64_t>& unit_costs,
                                            std::int64_t budget) {
    const std::int64_t total_cost = std::accumulate(unit_costs.begin(), unit_costs.end(),
                                                    std::int64_t{0});
    if (total_cost > budget) {
        throw ConfigError("budget " + std::to_string(budget) +
                          " infeasible: minimum widths already cost " + std::to_string(total_cost));
    }
    std::vector<std::int64_t> widths(unit_costs.size(), budget / total_cost);
    std::int64_t used = widths[0] * total_cost;

    std::vector<std::size_t> order(unit_costs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return unit_costs[a] > unit_costs[b]; });
    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (std::size_t j : order) {
            if (used + unit_costs[j] <= budget) {
                ++widths[j];
                used += unit_costs[j];
                progressed = true;
            }
        }
    }
    return widths;
}

} // namespace

GrowthSchedule solve_method_dims(MethodTag tag, std::int64_t d, std::int64_t budget, int stages,
                                 std::int64_t granularity) {
    if (stages < 1) throw ConfigError("solve_method_dims: stages must be >= 1");
    if (d < 1 || budget < 1) throw ConfigError("solve_method_dims: d and budget must be positive");

    GrowthSchedule s;
    s.method.tag = tag;
    s.method.granularity = granularity;
    s.d = d;
    s.budget = budget;
    s.stages = stages;
    s.actions.resize(static_cast<std::size_t>(stages));

    switch (tag) {
        case MethodTag::none: {
            const std::int64_t h = budget / (2 * d);
            if (h < 1) throw ConfigError("solve_method_dims: budget too small for method none");
            s.init_hidden = {h};
            break;
        }
        case MethodTag::net2wider: {
            const std::int64_t h_final = budget / (2 * d);
            if (h_final < 1) {
                throw ConfigError("solve_method_dims: budget too small for net2wider");
            }
            std::vector<std::int64_t> widths(static_cast<std::size_t>(stages));
            for (int st = 0; st < stages; ++st) {
                const double frac = static_cast<double>(st + 1) / static_cast<double>(stages);
                widths[static_cast<std::size_t>(st)] =
                    std::max<std::int64_t>(1, std::llround(frac * static_cast<double>(h_final)));
            }
            widths.back() = h_final;
            s.init_hidden = {widths[0]};
            for (int st = 1; st < stages; ++st) {
                s.actions[static_cast<std::size_t>(st)].target_hidden = {
                    widths[static_cast<std::size_t>(st)]};
            }
            break;
        }
        case MethodTag::progressive: {
            // Column j costs d*(2 + feeds) per unit width, where feeds is the
            // number of later columns it sends a lateral into.
            std::vector<std::int64_t> costs(static_cast<std::size_t>(stages));
            for (int j = 0; j < stages; ++j) {
                costs[static_cast<std::size_t>(j)] = d * (2 + (stages - 1 - j));
            }
            const auto widths = fit_linear_budget(costs, budget);
            s.init_hidden = {widths[0]};
            for (int st = 1; st < stages; ++st) {
                s.actions[static_cast<std::size_t>(st)].column_hidden = {
                    widths[static_cast<std::size_t>(st)]};
            }
            break;
        }
        case MethodTag::injection: {
            // Base bottleneck costs 2d per unit; each branch pair costs 4d.
            std::vector<std::int64_t> costs(static_cast<std::size_t>(stages), 4 * d);
            costs[0] = 2 * d;
            const auto widths = fit_linear_budget(costs, budget);
            s.init_hidden = {widths[0]};
            for (int st = 1; st < stages; ++st) {
                auto& action = s.actions[static_cast<std::size_t>(st)];
                action.inject = true;
                action.inject_hidden = {widths[static_cast<std::size_t>(st)]};
            }
            break;
        }
        case MethodTag::dynamic_moe: {
            const std::int64_t h = solve_bottleneck_width(d, budget, granularity, stages - 1);
            s.expert_h = h;
            s.init_experts = granularity;
            for (int st = 1; st < stages; ++st) {
                s.actions[static_cast<std::size_t>(st)].add_experts = granularity;
            }
            break;
        }
    }
    return s;
}

std::int64_t predicted_site_params(const GrowthSchedule& s, int stage) {
    if (stage < 0 || stage >= s.stages) {
        throw ConfigError("predicted_site_params: stage out of range");
    }
    switch (s.method.tag) {
        case MethodTag::none:
            return 2 * s.d * s.init_hidden[0];
        case MethodTag::net2wider: {
            std::int64_t h = s.init_hidden[0];
            for (int st = 1; st <= stage; ++st) {
                h = s.actions[static_cast<std::size_t>(st)].target_hidden[0];
            }
            return 2 * s.d * h;
        }
        case MethodTag::progressive: {
            std::vector<std::int64_t> widths = {s.init_hidden[0]};
            for (int st = 1; st <= stage; ++st) {
                widths.push_back(s.actions[static_cast<std::size_t>(st)].column_hidden[0]);
            }
            std::int64_t total = 0;
            for (std::size_t j = 0; j < widths.size(); ++j) {
                const std::int64_t feeds = static_cast<std::int64_t>(widths.size()) - 1 -
                                           static_cast<std::int64_t>(j);
                total += s.d * widths[j] * (2 + feeds);
            }
            return total;
        }
        case MethodTag::injection: {
            std::int64_t total = 2 * s.d * s.init_hidden[0];
            for (int st = 1; st <= stage; ++st) {
                total += 4 * s.d * s.actions[static_cast<std::size_t>(st)].inject_hidden[0];
            }
            return total;
        }
        case MethodTag::dynamic_moe:
            return s.init_experts * static_cast<std::int64_t>(stage + 1) * 2 * s.d * s.expert_h;
    }
    throw Error("predicted_site_params: invalid tag");
}

std::string schedule_label(const GrowthSchedule& s) {
    std::string label = method_str(s.method.tag);
    if (s.method.tag == MethodTag::dynamic_moe) {
        label += "_g" + std::to_string(s.method.granularity);
    }
    return label;
}

ScheduleReport verify_schedule(const GrowthSchedule& schedule, std::uint64_t seed) {
    ScheduleReport report;
    Rng rng(seed);
    ParamStore params;
    ExpansionSite site = build_site(params, "site", schedule, rng);
    const std::string label = schedule_label(schedule);
    for (int stage = 0; stage < schedule.stages; ++stage) {
        if (stage > 0) apply_expansion(site, params, schedule, stage, rng);
        ScheduleReportRow row;
        row.stage = stage;
        row.method = label;
        row.params = site_weight_params(site, params);
        const bool is_final = stage == schedule.stages - 1;
        if (is_final) {
            const double off = std::abs(static_cast<double>(row.params - schedule.budget)) /
                               static_cast<double>(schedule.budget);
            row.violation = off > 0.02;
        }
        report.any_violation = report.any_violation || row.violation;
        report.rows.push_back(std::move(row));
    }
    return report;
}

void write_schedule_report_csv(const std::vector<ScheduleReport>& reports,
                               const std::string& path) {
    CsvWriter w(path, {"stage", "method", "params", "violation"});
    for (const auto& report : reports) {
        for (const auto& row : report.rows) {
            w.write_row({CsvWriter::field(static_cast<std::int64_t>(row.stage)), row.method,
                         CsvWriter::field(row.params), row.violation ? "1" : "0"});
        }
    }
}

void write_schedule_csv(const std::vector<GrowthSchedule>& schedules, const std::string& path) {
    CsvWriter w(path, {"method", "stage", "action", "predicted_params"});
    for (const auto& s : schedules) {
        const std::string label = schedule_label(s);
        for (int stage = 0; stage < s.stages; ++stage) {
            std::string action;
            if (stage == 0) {
                switch (s.method.tag) {
                    case MethodTag::none:
                    case MethodTag::net2wider:
                        action = "init_hidden=" + std::to_string(s.init_hidden[0]);
                        break;
                    case MethodTag::progressive:
                        action = "init_column=" + std::to_string(s.init_hidden[0]);
                        break;
                    case MethodTag::injection:
                        action = "init_base=" + std::to_string(s.init_hidden[0]);
                        break;
                    case MethodTag::dynamic_moe:
                        action = "init_experts=" + std::to_string(s.init_experts) + ";h=" +
                                 std::to_string(s.expert_h);
                        break;
                }
            } else {
                const auto& a = s.actions[static_cast<std::size_t>(stage)];
                switch (s.method.tag) {
                    case MethodTag::none: action = "noop"; break;
                    case MethodTag::net2wider:
                        action = "widen_to=" + std::to_string(a.target_hidden[0]);
                        break;
                    case MethodTag::progressive:
                        action = "add_column=" + std::to_string(a.column_hidden[0]);
                        break;
                    case MethodTag::injection:
                        action = "inject=" + std::to_string(a.inject_hidden[0]);
                        break;
                    case MethodTag::dynamic_moe:
                        action = "add_experts=" + std::to_string(a.add_experts);
                        break;
                }
            }
            w.write_row({label, CsvWriter::field(static_cast<std::int64_t>(stage)), action,
                         CsvWriter::field(predicted_site_params(s, stage))});
        }
    }
}

} // namespace plastinet
