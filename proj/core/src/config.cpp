#include "plastinet/config.hpp"

#include "json_util.hpp"
#include "plastinet/error.hpp"

namespace plastinet {

using jsonu::json;

namespace {

DatasetConfig parse_dataset(const json& j, const std::string& ctx) {
    jsonu::check_fields(j, ctx,
                        {"num_chunks", "classes_per_chunk", "samples_per_class", "channels",
                         "height", "width", "noise_sigma", "seed"});
    DatasetConfig d;
    d.num_chunks = jsonu::get_or<std::int64_t>(j, "num_chunks", d.num_chunks, ctx);
    d.classes_per_chunk =
        jsonu::get_or<std::int64_t>(j, "classes_per_chunk", d.classes_per_chunk, ctx);
    d.samples_per_class =
        jsonu::get_or<std::int64_t>(j, "samples_per_class", d.samples_per_class, ctx);
    d.channels = jsonu::get_or<std::int64_t>(j, "channels", d.channels, ctx);
    d.height = jsonu::get_or<std::int64_t>(j, "height", d.height, ctx);
    d.width = jsonu::get_or<std::int64_t>(j, "width", d.width, ctx);
    d.noise_sigma = jsonu::get_or<double>(j, "noise_sigma", d.noise_sigma, ctx);
    d.seed = jsonu::get_or<std::uint64_t>(j, "seed", d.seed, ctx);
    return d;
}

json dataset_json(const DatasetConfig& d) {
    json j;
    j["num_chunks"] = d.num_chunks;
    j["classes_per_chunk"] = d.classes_per_chunk;
    j["samples_per_class"] = d.samples_per_class;
    j["channels"] = d.channels;
    j["height"] = d.height;
    j["width"] = d.width;
    j["noise_sigma"] = d.noise_sigma;
    j["seed"] = d.seed;
    return j;
}

AdamConfig parse_adam(const json& j, const std::string& ctx, const AdamConfig& defaults) {
    jsonu::check_fields(j, ctx, {"lr", "beta1", "beta2", "eps"});
    AdamConfig a = defaults;
    a.lr = jsonu::get_or<double>(j, "lr", a.lr, ctx);
    a.beta1 = jsonu::get_or<double>(j, "beta1", a.beta1, ctx);
    a.beta2 = jsonu::get_or<double>(j, "beta2", a.beta2, ctx);
    a.eps = jsonu::get_or<double>(j, "eps", a.eps, ctx);
    return a;
}

json adam_json(const AdamConfig& a) {
    json j;
    j["lr"] = a.lr;
    j["beta1"] = a.beta1;
    j["beta2"] = a.beta2;
    j["eps"] = a.eps;
    return j;
}

CLConfig parse_cl(const json& j, const std::string& ctx) {
    jsonu::check_fields(j, ctx,
                        {"data", "dataset_path", "method", "granularity", "budget", "site_width",
                         "conv_widths", "kernel", "steps_per_chunk", "batch_size", "eval_every",
                         "eval_sample", "adam", "seed"});
    CLConfig c;
    if (j.contains("data")) c.data = parse_dataset(j.at("data"), ctx + ".data");
    c.dataset_path = jsonu::get_or<std::string>(j, "dataset_path", c.dataset_path, ctx);
    c.method = method_from_str(jsonu::get_as<std::string>(j, "method", ctx));
    c.granularity = jsonu::get_or<std::int64_t>(j, "granularity", c.granularity, ctx);
    c.budget = jsonu::get_or<std::int64_t>(j, "budget", c.budget, ctx);
    c.site_width = jsonu::get_or<std::int64_t>(j, "site_width", c.site_width, ctx);
    c.conv_widths =
        jsonu::get_or<std::vector<std::int64_t>>(j, "conv_widths", c.conv_widths, ctx);
    c.kernel = jsonu::get_or<int>(j, "kernel", c.kernel, ctx);
    c.steps_per_chunk = jsonu::get_or<std::int64_t>(j, "steps_per_chunk", c.steps_per_chunk, ctx);
    c.batch_size = jsonu::get_or<std::int64_t>(j, "batch_size", c.batch_size, ctx);
    c.eval_every = jsonu::get_or<std::int64_t>(j, "eval_every", c.eval_every, ctx);
    c.eval_sample = jsonu::get_or<std::int64_t>(j, "eval_sample", c.eval_sample, ctx);
    if (j.contains("adam")) c.adam = parse_adam(j.at("adam"), ctx + ".adam", c.adam);
    c.seed = jsonu::get_or<std::uint64_t>(j, "seed", c.seed, ctx);
    return c;
}

json cl_json(const CLConfig& c) {
    json j;
    j["data"] = dataset_json(c.data);
    j["dataset_path"] = c.dataset_path;
    j["method"] = method_str(c.method);
    j["granularity"] = c.granularity;
    j["budget"] = c.budget;
    j["site_width"] = c.site_width;
    j["conv_widths"] = c.conv_widths;
    j["kernel"] = c.kernel;
    j["steps_per_chunk"] = c.steps_per_chunk;
    j["batch_size"] = c.batch_size;
    j["eval_every"] = c.eval_every;
    j["eval_sample"] = c.eval_sample;
    j["adam"] = adam_json(c.adam);
    j["seed"] = c.seed;
    return j;
}

GridEnvConfig parse_env(const json& j, const std::string& ctx) {
    jsonu::check_fields(j, ctx, {"grid", "stages", "episode_len", "theme_seed"});
    GridEnvConfig e;
    e.grid = jsonu::get_or<int>(j, "grid", e.grid, ctx);
    e.stages = jsonu::get_or<int>(j, "stages", e.stages, ctx);
    e.episode_len = jsonu::get_or<int>(j, "episode_len", e.episode_len, ctx);
    e.theme_seed = jsonu::get_or<std::uint64_t>(j, "theme_seed", e.theme_seed, ctx);
    return e;
}

json env_json(const GridEnvConfig& e) {
    json j;
    j["grid"] = e.grid;
    j["stages"] = e.stages;
    j["episode_len"] = e.episode_len;
    j["theme_seed"] = e.theme_seed;
    return j;
}

PpoConfig parse_ppo(const json& j, const std::string& ctx) {
    jsonu::check_fields(j, ctx,
                        {"clip_eps", "epochs", "minibatches", "gamma", "lambda", "entropy_coef",
                         "value_coef", "lr", "beta1", "beta2", "eps"});
    PpoConfig p;
    p.clip_eps = jsonu::get_or<double>(j, "clip_eps", p.clip_eps, ctx);
    p.epochs = jsonu::get_or<int>(j, "epochs", p.epochs, ctx);
    p.minibatches = jsonu::get_or<int>(j, "minibatches", p.minibatches, ctx);
    p.gamma = jsonu::get_or<double>(j, "gamma", p.gamma, ctx);
    p.lambda = jsonu::get_or<double>(j, "lambda", p.lambda, ctx);
    p.entropy_coef = jsonu::get_or<double>(j, "entropy_coef", p.entropy_coef, ctx);
    p.value_coef = jsonu::get_or<double>(j, "value_coef", p.value_coef, ctx);
    p.adam.lr = jsonu::get_or<double>(j, "lr", p.adam.lr, ctx);
    p.adam.beta1 = jsonu::get_or<double>(j, "beta1", p.adam.beta1, ctx);
    p.adam.beta2 = jsonu::get_or<double>(j, "beta2", p.adam.beta2, ctx);
    p.adam.eps = jsonu::get_or<double>(j, "eps", p.adam.eps, ctx);
    return p;
}

json ppo_json(const PpoConfig& p) {
    json j;
    j["clip_eps"] = p.clip_eps;
    j["epochs"] = p.epochs;
    j["minibatches"] = p.minibatches;
    j["gamma"] = p.gamma;
    j["lambda"] = p.lambda;
    j["entropy_coef"] = p.entropy_coef;
    j["value_coef"] = p.value_coef;
    j["lr"] = p.adam.lr;
    j["beta1"] = p.adam.beta1;
    j["beta2"] = p.adam.beta2;
    j["eps"] = p.adam.eps;
    return j;
}

RLConfig parse_rl(const json& j, const std::string& ctx) {
    jsonu::check_fields(j, ctx,
                        {"total_steps", "rollout", "ppo", "variant", "k", "growth_steps", "seed",
                         "init_checkpoint", "checkpoint_at", "trace_episodes", "env", "d",
                         "expert_h"});
    RLConfig r;
    r.total_steps = jsonu::get_or<std::int64_t>(j, "total_steps", r.total_steps, ctx);
    r.rollout = jsonu::get_or<std::int64_t>(j, "rollout", r.rollout, ctx);
    if (j.contains("ppo")) r.ppo = parse_ppo(j.at("ppo"), ctx + ".ppo");
    r.variant = variant_from_str(jsonu::get_as<std::string>(j, "variant", ctx));
    r.k = jsonu::get_or<std::int64_t>(j, "k", r.k, ctx);
    r.growth_steps =
        jsonu::get_or<std::vector<std::int64_t>>(j, "growth_steps", r.growth_steps, ctx);
    r.seed = jsonu::get_or<std::uint64_t>(j, "seed", r.seed, ctx);
    r.init_checkpoint = jsonu::get_or<std::string>(j, "init_checkpoint", r.init_checkpoint, ctx);
    r.checkpoint_at =
        jsonu::get_or<std::vector<std::int64_t>>(j, "checkpoint_at", r.checkpoint_at, ctx);
    r.trace_episodes = jsonu::get_or<std::int64_t>(j, "trace_episodes", r.trace_episodes, ctx);
    if (j.contains("env")) r.env = parse_env(j.at("env"), ctx + ".env");
    r.d = jsonu::get_or<std::int64_t>(j, "d", r.d, ctx);
    r.expert_h = jsonu::get_or<std::int64_t>(j, "expert_h", r.expert_h, ctx);
    if (r.variant == RLVariant::grow_1_to_k && r.k < 2) {
        throw ConfigError(ctx + ": variant grow_1_to_k requires k >= 2");
    }
    return r;
}

json rl_json(const RLConfig& r) {
    json j;
    j["total_steps"] = r.total_steps;
    j["rollout"] = r.rollout;
    j["ppo"] = ppo_json(r.ppo);
    j["variant"] = variant_str(r.variant);
    j["k"] = r.k;
    j["growth_steps"] = r.growth_steps;
    j["seed"] = r.seed;
    j["init_checkpoint"] = r.init_checkpoint;
    j["checkpoint_at"] = r.checkpoint_at;
    j["trace_episodes"] = r.trace_episodes;
    j["env"] = env_json(r.env);
    j["d"] = r.d;
    j["expert_h"] = r.expert_h;
    return j;
}

BudgetJobConfig parse_budget(const json& j, const std::string& ctx) {
    jsonu::check_fields(j, ctx, {"d", "budget", "stages", "methods", "granularities"});
    BudgetJobConfig b;
    b.d = jsonu::get_or<std::int64_t>(j, "d", b.d, ctx);
    b.budget = jsonu::get_or<std::int64_t>(j, "budget", b.budget, ctx);
    b.stages = jsonu::get_or<int>(j, "stages", b.stages, ctx);
    b.methods = jsonu::get_or<std::vector<std::string>>(j, "methods", b.methods, ctx);
    b.granularities =
        jsonu::get_or<std::vector<std::int64_t>>(j, "granularities", b.granularities, ctx);
    for (const auto& m : b.methods) method_from_str(m); // validate
    return b;
}

json budget_json(const BudgetJobConfig& b) {
    json j;
    j["d"] = b.d;
    j["budget"] = b.budget;
    j["stages"] = b.stages;
    j["methods"] = b.methods;
    j["granularities"] = b.granularities;
    return j;
}

GenDataConfig parse_gen(const json& j, const std::string& ctx) {
    jsonu::check_fields(j, ctx, {"data", "name"});
    GenDataConfig g;
    g.data = parse_dataset(jsonu::require(j, "data", ctx), ctx + ".data");
    g.name = jsonu::get_or<std::string>(j, "name", g.name, ctx);
    return g;
}

json gen_json(const GenDataConfig& g) {
    json j;
    j["data"] = dataset_json(g.data);
    j["name"] = g.name;
    return j;
}

ExperimentConfig parse_root(const json& j, const std::string& origin) {
    jsonu::check_fields(j, origin, {"kind", "cl", "rl", "budget", "gen-data"});
    ExperimentConfig cfg;
    cfg.kind = jsonu::get_as<std::string>(j, "kind", origin);
    if (cfg.kind == "cl") {
        cfg.cl = parse_cl(jsonu::require(j, "cl", origin), origin + ".cl");
    } else if (cfg.kind == "rl") {
        cfg.rl = parse_rl(jsonu::require(j, "rl", origin), origin + ".rl");
    } else if (cfg.kind == "budget") {
        cfg.budget = parse_budget(jsonu::require(j, "budget", origin), origin + ".budget");
    } else if (cfg.kind == "gen-data") {
        cfg.gen_data = parse_gen(jsonu::require(j, "gen-data", origin), origin + ".gen-data");
    } else {
        throw ConfigError(origin + ": unknown kind '" + cfg.kind +
                          "' (expected cl, rl, budget or gen-data)");
    }
    for (const char* section : {"cl", "rl", "budget", "gen-data"}) {
        if (j.contains(section) && cfg.kind != section) {
            throw ConfigError(origin + ": section '" + std::string(section) +
                              "' does not match kind '" + cfg.kind + "'");
        }
    }
    return cfg;
}

} // namespace

ExperimentConfig parse_experiment_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = jsonu::parse_text(text, origin);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_root(j, origin);
}

ExperimentConfig parse_experiment_file(const std::string& path) {
    json j;
    try {
        j = jsonu::load_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_root(j, path);
}

std::string serialize_experiment_config(const ExperimentConfig& cfg) {
    json j;
    j["kind"] = cfg.kind;
    if (cfg.kind == "cl") j["cl"] = cl_json(cfg.cl);
    else if (cfg.kind == "rl") j["rl"] = rl_json(cfg.rl);
    else if (cfg.kind == "budget") j["budget"] = budget_json(cfg.budget);
    else if (cfg.kind == "gen-data") j["gen-data"] = gen_json(cfg.gen_data);
    else throw ConfigError("serialize: unknown kind '" + cfg.kind + "'");
    return j.dump(2);
}

std::vector<GrowthSchedule> solve_budget_job(const BudgetJobConfig& cfg) {
    std::vector<GrowthSchedule> schedules;
    for (const auto& m : cfg.methods) {
        const MethodTag tag = method_from_str(m);
        if (tag == MethodTag::dynamic_moe) continue; // covered by the g-series
        schedules.push_back(solve_method_dims(tag, cfg.d, cfg.budget, cfg.stages));
    }
    for (std::int64_t g : cfg.granularities) {
        schedules.push_back(
            solve_method_dims(MethodTag::dynamic_moe, cfg.d, cfg.budget, cfg.stages, g));
    }
    return schedules;
}

} // namespace plastinet
