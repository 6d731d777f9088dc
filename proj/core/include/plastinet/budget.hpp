#pragma once

#include <string>
#include <vector>

#include "plastinet/expansion.hpp"

namespace plastinet {

/// Largest inner width h with g*(N+1) final experts of 2*d*h weights within
/// the expert budget: h = floor(budget / (2*d*g*(N+1))). Never over-budget.
/// Throws if no h >= 1 fits.
std::int64_t solve_bottleneck_width(std::int64_t d, std::int64_t expert_param_budget,
                                    std::int64_t granularity, std::int64_t growths);

/// Solves every hidden dimension of a method so its final stage lands on the
/// site weight budget. Integer rounding is absorbed by greedily bumping the
/// widest-impact components, so the final count is exact whenever the budget
/// is reachable in steps of the smallest component cost.
GrowthSchedule solve_method_dims(MethodTag tag, std::int64_t d, std::int64_t budget, int stages,
                                 std::int64_t granularity = 1);

/// Closed-form site weight count the schedule predicts at a given stage.
std::int64_t predicted_site_params(const GrowthSchedule& schedule, int stage);

/// Label used in reports: method name, with granularity for dynamic_moe.
std::string schedule_label(const GrowthSchedule& schedule);

struct ScheduleReportRow {
    int stage = 0;
    std::string method;
    std::int64_t params = 0;
    bool violation = false;
};

struct ScheduleReport {
    std::vector<ScheduleReportRow> rows;
    bool any_violation = false;
};

/// Instantiates the site at every stage of the schedule, records exact
/// counts, and flags a violation when the final stage misses the budget by
/// more than 2%.
ScheduleReport verify_schedule(const GrowthSchedule& schedule, std::uint64_t seed = 7);

/// Appends the report rows for several schedules into one CSV with header
/// `stage,method,params,violation`.
void write_schedule_report_csv(const std::vector<ScheduleReport>& reports,
                               const std::string& path);

/// Writes the solved plan itself: per stage, the action and predicted count.
void write_schedule_csv(const std::vector<GrowthSchedule>& schedules, const std::string& path);

} // namespace plastinet
