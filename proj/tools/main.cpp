// plastinet: dynamic expert growth in bottleneck MoE networks, with prior
// network-expansion baselines, a chunked continual-learning harness and a
// staged-gridworld PPO harness.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plastinet/budget.hpp"
#include "plastinet/cl_runner.hpp"
#include "plastinet/config.hpp"
#include "plastinet/csv.hpp"
#include "plastinet/dataset.hpp"
#include "plastinet/error.hpp"
#include "plastinet/rl_runner.hpp"

namespace fs = std::filesystem;
using namespace plastinet;

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("PLASTINET_OUT");
    return env && *env ? env : ".";
}

std::vector<std::uint64_t> parse_seed_list(const std::string& seeds, std::uint64_t fallback) {
    if (seeds.empty()) return {fallback};
    std::vector<std::uint64_t> out;
    std::size_t pos = 0;
    while (pos < seeds.size()) {
        const std::size_t comma = seeds.find(',', pos);
        const std::string tok = seeds.substr(pos, comma == std::string::npos ? std::string::npos
                                                                             : comma - pos);
        if (!tok.empty()) out.push_back(std::stoull(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw ConfigError("--seeds: no seeds given");
    return out;
}

int run_cl_cmd(const std::string& config_path, const std::string& seeds_flag, bool seed_set,
               std::uint64_t seed_flag, const std::string& out_dir) {
    ExperimentConfig cfg = parse_experiment_file(config_path);
    if (cfg.kind != "cl") throw ConfigError(config_path + ": run-cl needs kind 'cl'");
    fs::create_directories(out_dir);
    const auto seeds = parse_seed_list(seeds_flag, seed_set ? seed_flag : cfg.cl.seed);
    for (std::uint64_t s : seeds) {
        CLConfig run_cfg = cfg.cl;
        run_cfg.seed = s;
        const CLRunLog log = run_cl(run_cfg);
        std::string label = method_str(run_cfg.method);
        if (run_cfg.method == MethodTag::dynamic_moe) {
            label += "_g" + std::to_string(run_cfg.granularity);
        }
        const std::string path =
            (fs::path(out_dir) / ("cl_" + label + "_seed" + std::to_string(s) + ".csv")).string();
        write_cl_log_csv(log, path);
        std::cout << path << "\n";
    }
    return 0;
}

int run_rl_cmd(const std::string& config_path, const std::string& seeds_flag, bool seed_set,
               std::uint64_t seed_flag, const std::string& out_dir) {
    ExperimentConfig cfg = parse_experiment_file(config_path);
    if (cfg.kind != "rl") throw ConfigError(config_path + ": run-rl needs kind 'rl'");
    fs::create_directories(out_dir);
    const auto seeds = parse_seed_list(seeds_flag, seed_set ? seed_flag : cfg.rl.seed);
    for (std::uint64_t s : seeds) {
        RLConfig run_cfg = cfg.rl;
        run_cfg.seed = s;
        run_cfg.out_dir = out_dir;
        const RLRunResult result = run_rl(run_cfg);
        const std::string label = variant_str(run_cfg.variant);
        const std::string path =
            (fs::path(out_dir) / ("rl_" + label + "_seed" + std::to_string(s) + ".csv")).string();
        write_rl_log_csv(result.log, path);
        std::cout << path << "\n";
        if (!result.trace.empty()) {
            const std::string tpath =
                (fs::path(out_dir) / ("trace_" + label + "_seed" + std::to_string(s) + ".csv"))
                    .string();
            write_trace_csv(result.trace, tpath);
            std::cout << tpath << "\n";
        }
        for (const auto& c : result.checkpoints_written) std::cout << c << "\n";
    }
    return 0;
}

int budget_cmd(const std::string& config_path, const std::string& out_dir, bool verify) {
    ExperimentConfig cfg = parse_experiment_file(config_path);
    if (cfg.kind != "budget") {
        throw ConfigError(config_path + ": budget/verify needs kind 'budget'");
    }
    fs::create_directories(out_dir);
    const auto schedules = solve_budget_job(cfg.budget);
    if (verify) {
        std::vector<ScheduleReport> reports;
        reports.reserve(schedules.size());
        for (const auto& s : schedules) reports.push_back(verify_schedule(s));
        const std::string path = (fs::path(out_dir) / "schedule_report.csv").string();
        write_schedule_report_csv(reports, path);
        std::cout << path << "\n";
        for (const auto& r : reports) {
            if (r.any_violation) {
                std::cerr << "budget violation in report\n";
                return 2;
            }
        }
    } else {
        const std::string path = (fs::path(out_dir) / "schedules.csv").string();
        write_schedule_csv(schedules, path);
        std::cout << path << "\n";
    }
    return 0;
}

int gen_data_cmd(const std::string& config_path, bool seed_set, std::uint64_t seed_flag,
                 const std::string& out_dir) {
    ExperimentConfig cfg = parse_experiment_file(config_path);
    if (cfg.kind != "gen-data") throw ConfigError(config_path + ": gen-data needs kind 'gen-data'");
    if (seed_set) cfg.gen_data.data.seed = seed_flag;
    const std::string dir = (fs::path(out_dir) / cfg.gen_data.name).string();
    save_dataset(gen_synthetic_chunks(cfg.gen_data.data), dir);
    std::cout << dir << "\n";
    return 0;
}

int plot_data_cmd(const std::vector<std::string>& group_specs, const std::string& metric,
                  const std::string& step_column, const std::string& out_dir) {
    std::vector<SeriesGroup> groups;
    for (const auto& spec : group_specs) {
        const std::size_t eq = spec.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--group expects name=file[,file...], got '" + spec + "'");
        }
        SeriesGroup g;
        g.name = spec.substr(0, eq);
        std::size_t pos = eq + 1;
        while (pos <= spec.size()) {
            const std::size_t comma = spec.find(',', pos);
            const std::string tok = spec.substr(pos, comma == std::string::npos
                                                         ? std::string::npos
                                                         : comma - pos);
            if (!tok.empty()) g.files.push_back(tok);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        groups.push_back(std::move(g));
    }
    if (groups.empty()) throw ConfigError("plot-data: at least one --group required");
    const auto rows = plot_data(groups, step_column, metric);
    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / ("plot_" + metric + ".csv")).string();
    write_aggregate_csv(rows, metric, path);
    std::cout << path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic expert growth for bottleneck MoE networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = default_out_dir();
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    std::string seeds_flag;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config) {
            cmd->add_option("--config", config_path, "JSON experiment config")->required();
        }
        cmd->add_option("--out", out_dir, "output directory (default: $PLASTINET_OUT or .)");
        cmd->add_option("--seed", seed_flag, "override the config seed")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--seeds", seeds_flag, "comma-separated seeds, run sequentially");
    };

    auto* cl_cmd = app.add_subcommand("run-cl", "run the chunked continual-learning protocol");
    add_common(cl_cmd, true);
    auto* rl_cmd = app.add_subcommand("run-rl", "run PPO on the staged gridworld");
    add_common(rl_cmd, true);
    auto* budget_sub = app.add_subcommand("budget", "solve parameter-matched growth schedules");
    add_common(budget_sub, true);
    auto* verify_sub =
        app.add_subcommand("verify", "instantiate schedules stage by stage and check the budget");
    add_common(verify_sub, true);
    auto* gen_sub = app.add_subcommand("gen-data", "generate a synthetic chunked dataset");
    add_common(gen_sub, true);

    auto* plot_sub = app.add_subcommand("plot-data", "aggregate run logs into mean/std series");
    std::vector<std::string> group_specs;
    std::string metric = "train_accuracy";
    std::string step_column = "global_step";
    plot_sub->add_option("--group", group_specs, "name=log.csv[,log.csv...] (repeatable)")
        ->required();
    plot_sub->add_option("--metric", metric, "metric column to aggregate");
    plot_sub->add_option("--step-column", step_column, "step column defining the grid");
    plot_sub->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << app.help() << "\n";
        return app.exit(e, std::cerr, std::cerr) ? 1 : 1;
    }

    try {
        if (app.got_subcommand(cl_cmd)) {
            return run_cl_cmd(config_path, seeds_flag, seed_set, seed_flag, out_dir);
        }
        if (app.got_subcommand(rl_cmd)) {
            return run_rl_cmd(config_path, seeds_flag, seed_set, seed_flag, out_dir);
        }
        if (app.got_subcommand(budget_sub)) return budget_cmd(config_path, out_dir, false);
        if (app.got_subcommand(verify_sub)) return budget_cmd(config_path, out_dir, true);
        if (app.got_subcommand(gen_sub)) {
            return gen_data_cmd(config_path, seed_set, seed_flag, out_dir);
        }
        if (app.got_subcommand(plot_sub)) {
            return plot_data_cmd(group_specs, metric, step_column, out_dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
