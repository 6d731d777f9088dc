#include "plastinet/rl_runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "plastinet/csv.hpp"
#include "plastinet/error.hpp"

namespace plastinet {

namespace fs = std::filesystem;

const char* variant_str(RLVariant v) {
    switch (v) {
        case RLVariant::no_moe: return "no_moe";
        case RLVariant::one_expert: return "one_expert";
        case RLVariant::k_experts: return "k_experts";
        case RLVariant::grow_1_to_k: return "grow_1_to_k";
    }
    return "no_moe";
}

RLVariant variant_from_str(const std::string& s) {
    if (s == "no_moe") return RLVariant::no_moe;
    if (s == "one_expert") return RLVariant::one_expert;
    if (s == "k_experts") return RLVariant::k_experts;
    if (s == "grow_1_to_k") return RLVariant::grow_1_to_k;
    throw ConfigError("unknown rl variant '" + s + "'");
}

// ---------------------------------------------------------------------------
// model

Tensor ActorCritic::policy_logits(Graph& g, const Tensor& obs,
                                  std::vector<Tensor>* site_gates) const {
    Tensor x = g.reshape(obs, {obs.dim(0), obs_dim});
    Tensor h = actor_embed.forward(g, x);
    Tensor gates;
    h = actor_block.forward(g, h, site_gates ? &gates : nullptr);
    if (site_gates && gates.defined()) site_gates->push_back(gates);
    h = g.layernorm(h, actor_post_gain, actor_post_bias);
    return policy_head.forward(g, h);
}

Tensor ActorCritic::value(Graph& g, const Tensor& obs, std::vector<Tensor>* site_gates) const {
    Tensor x = g.reshape(obs, {obs.dim(0), obs_dim});
    Tensor h = critic_embed.forward(g, x);
    Tensor gates1, gates2;
    h = critic_block1.forward(g, h, site_gates ? &gates1 : nullptr);
    if (site_gates && gates1.defined()) site_gates->push_back(gates1);
    h = critic_block2.forward(g, h, site_gates ? &gates2 : nullptr);
    if (site_gates && gates2.defined()) site_gates->push_back(gates2);
    h = g.layernorm(h, critic_post_gain, critic_post_bias);
    Tensor v = value_head.forward(g, h);
    return g.reshape(v, {v.dim(0)});
}

std::vector<MoELayer*> ActorCritic::moe_sites() {
    std::vector<MoELayer*> sites;
    if (auto* m = actor_block.moe_site()) sites.push_back(m);
    if (auto* m = critic_block1.moe_site()) sites.push_back(m);
    if (auto* m = critic_block2.moe_site()) sites.push_back(m);
    return sites;
}

std::vector<const MoELayer*> ActorCritic::moe_sites() const {
    std::vector<const MoELayer*> sites;
    if (const auto* m = actor_block.moe_site()) sites.push_back(m);
    if (const auto* m = critic_block1.moe_site()) sites.push_back(m);
    if (const auto* m = critic_block2.moe_site()) sites.push_back(m);
    return sites;
}

std::vector<std::int64_t> ActorCritic::experts_per_site() const {
    std::vector<std::int64_t> counts;
    for (const auto* m : moe_sites()) counts.push_back(m->expert_count());
    return counts;
}

std::int64_t ActorCritic::active_site_params() const {
    CountOptions opts;
    opts.include_bias = false;
    return count_params_prefix(params, "actor.block.inner.", opts) +
           count_params_prefix(params, "critic.block1.inner.", opts) +
           count_params_prefix(params, "critic.block2.inner.", opts);
}

namespace {

LinearLayer zero_head(ParamStore& params, const std::string& prefix, std::int64_t in,
                      std::int64_t out) {
    LinearLayer head;
    head.weight = params.add(prefix + ".weight", Tensor::zeros({out, in}, true));
    head.bias = params.add(prefix + ".bias", Tensor::zeros({out}, true), ParamKind::bias);
    return head;
}

} // namespace

ActorCritic build_actor_critic(const RLConfig& cfg,
                               const std::vector<std::int64_t>& experts_per_site) {
    ActorCritic m;
    m.d = cfg.d;
    m.expert_h = cfg.expert_h;
    m.variant = cfg.variant;
    m.obs_dim = StagedGridEnv::kChannels * cfg.env.grid * cfg.env.grid;

    Rng rng = Rng(cfg.seed).split(11);
    ParamStore& p = m.params;
    const bool use_moe = cfg.variant != RLVariant::no_moe;
    if (use_moe && experts_per_site.size() != 3) {
        throw ConfigError("actor-critic: expected 3 per-site expert counts");
    }

    m.actor_embed = LinearLayer(p, "actor.embed", m.obs_dim, cfg.d, true, rng);
    if (use_moe) {
        m.actor_block = ResidualBlock(p, "actor.block", cfg.d, cfg.expert_h, experts_per_site[0],
                                      rng);
    } else {
        // Plain inner path sized so no_moe matches k_experts' final budget.
        m.actor_block = ResidualBlock(p, "actor.block", cfg.d, cfg.k * cfg.expert_h, rng);
    }
    m.actor_post_gain = p.add("actor.post.gain", Tensor::full({cfg.d}, 1.0, true));
    m.actor_post_bias = p.add("actor.post.bias", Tensor::zeros({cfg.d}, true), ParamKind::bias);
    // Zero-init head: the initial policy is exactly uniform.
    m.policy_head = zero_head(p, "actor.head", cfg.d, StagedGridEnv::kActions);

    m.critic_embed = LinearLayer(p, "critic.embed", m.obs_dim, cfg.d, true, rng);
    if (use_moe) {
        m.critic_block1 = ResidualBlock(p, "critic.block1", cfg.d, cfg.expert_h,
                                        experts_per_site[1], rng);
        m.critic_block2 = ResidualBlock(p, "critic.block2", cfg.d, cfg.expert_h,
                                        experts_per_site[2], rng);
    } else {
        m.critic_block1 = ResidualBlock(p, "critic.block1", cfg.d, cfg.k * cfg.expert_h, rng);
        m.critic_block2 = ResidualBlock(p, "critic.block2", cfg.d, cfg.k * cfg.expert_h, rng);
    }
    m.critic_post_gain = p.add("critic.post.gain", Tensor::full({cfg.d}, 1.0, true));
    m.critic_post_bias = p.add("critic.post.bias", Tensor::zeros({cfg.d}, true), ParamKind::bias);
    m.value_head = zero_head(p, "critic.head", cfg.d, 1);
    return m;
}

// ---------------------------------------------------------------------------
// GAE

std::pair<std::vector<double>, std::vector<double>> gae(const std::vector<double>& rewards,
                                                        const std::vector<double>& values,
                                                        const std::vector<bool>& dones,
                                                        double gamma, double lambda) {
    const std::size_t t_len = rewards.size();
    if (values.size() != t_len + 1 || dones.size() != t_len) {
        throw ShapeError("gae: need values length T+1 and dones length T (T=" +
                         std::to_string(t_len) + ", values=" + std::to_string(values.size()) +
                         ", dones=" + std::to_string(dones.size()) + ")");
    }
    std::vector<double> adv(t_len, 0.0), ret(t_len, 0.0);
    double running = 0.0;
    for (std::size_t i = t_len; i-- > 0;) {
        const double not_done = dones[i] ? 0.0 : 1.0;
        const double delta = rewards[i] + gamma * not_done * values[i + 1] - values[i];
        running = delta + gamma * lambda * not_done * running;
        adv[i] = running;
        ret[i] = adv[i] + values[i];
    }
    return {std::move(adv), std::move(ret)};
}

// ---------------------------------------------------------------------------
// PPO update

namespace {

Tensor gather_rows(const Tensor& all, const std::vector<std::size_t>& idx) {
    Shape shape = all.shape();
    const std::int64_t pix = all.numel() / all.dim(0);
    shape[0] = static_cast<std::int64_t>(idx.size());
    Tensor out = Tensor::zeros(shape);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = all.data().data() + static_cast<std::int64_t>(idx[i]) * pix;
        std::copy(src, src + pix, out.data().begin() + static_cast<std::int64_t>(i) * pix);
    }
    return out;
}

void fisher_yates(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
        std::swap(idx[i - 1], idx[j]);
    }
}

} // namespace

PpoStats ppo_update(ActorCritic& model, const Rollout& rollout, const PpoConfig& cfg, Rng& rng) {
    const std::size_t t_len = rollout.actions.size();
    if (t_len == 0) throw ConfigError("ppo_update: empty rollout");

    auto [advantages, returns] = gae(rollout.rewards, rollout.values, rollout.dones, cfg.gamma,
                                     cfg.lambda);
    // Normalize advantages over the rollout batch.
    double mean = 0.0;
    for (double a : advantages) mean += a;
    mean /= static_cast<double>(t_len);
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(t_len);
    const double inv_std = 1.0 / (std::sqrt(var) + 1e-8);
    for (double& a : advantages) a = (a - mean) * inv_std;

    PpoStats stats;
    int updates = 0;
    std::vector<std::size_t> order(t_len);
    for (std::size_t i = 0; i < t_len; ++i) order[i] = i;

    const int minibatches = std::max(1, cfg.minibatches);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        fisher_yates(order, rng);
        for (int mb = 0; mb < minibatches; ++mb) {
            const std::size_t lo = t_len * static_cast<std::size_t>(mb) /
                                   static_cast<std::size_t>(minibatches);
            const std::size_t hi = t_len * static_cast<std::size_t>(mb + 1) /
                                   static_cast<std::size_t>(minibatches);
            if (hi <= lo) continue;
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                               order.begin() + static_cast<std::ptrdiff_t>(hi));
            const std::int64_t m = static_cast<std::int64_t>(idx.size());

            Tensor mb_obs = gather_rows(rollout.obs, idx);
            std::vector<std::int64_t> mb_actions(idx.size());
            Tensor mb_returns = Tensor::zeros({m});
            for (std::size_t i = 0; i < idx.size(); ++i) {
                mb_actions[i] = rollout.actions[idx[i]];
                mb_returns.data()[i] = returns[idx[i]];
            }

            Graph g;
            Tensor logits = model.policy_logits(g, mb_obs);
            Tensor logp_all = g.log_softmax(logits);
            Tensor logp = g.gather(logp_all, mb_actions);

            // The clipped surrogate's gradient through each sample is either
            // rho*A (unclipped branch selected) or 0; driving -mean(w*logp)
            // with w fixed accordingly reproduces it exactly, while the
            // reported loss is the true min(rho*A, clip(rho)*A) objective.
            Tensor w = Tensor::zeros({m});
            double policy_loss = 0.0;
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const double adv = advantages[idx[i]];
                const double rho = std::exp(logp.data()[i] - rollout.log_probs[idx[i]]);
                const double clipped_rho =
                    std::clamp(rho, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
                const double unclipped = rho * adv;
                const double clipped = clipped_rho * adv;
                if (unclipped <= clipped) {
                    w.data()[i] = rho * adv;
                    policy_loss -= unclipped;
                } else {
                    policy_loss -= clipped;
                }
            }
            policy_loss /= static_cast<double>(m);

            Tensor pg_term = g.mul(g.mean(g.mul(logp, w)), Tensor::scalar(-1.0));

            Tensor values = model.value(g, mb_obs);
            Tensor diff = g.add(values, g.mul(mb_returns, Tensor::scalar(-1.0)));
            Tensor vloss = g.mean(g.mul(diff, diff));
            Tensor v_term = g.mul(vloss, Tensor::scalar(cfg.value_coef));

            Tensor probs = g.softmax(logits);
            Tensor plogp = g.sum(g.mul(probs, logp_all)); // = -entropy * m
            Tensor ent_term =
                g.mul(plogp, Tensor::scalar(cfg.entropy_coef / static_cast<double>(m)));

            Tensor total = g.add(g.add(pg_term, v_term), ent_term);
            g.backward(total);
            adam_step(model.params, cfg.adam);

            stats.policy_loss += policy_loss;
            stats.value_loss += vloss.item();
            stats.entropy += -plogp.item() / static_cast<double>(m);
            ++updates;
        }
    }
    if (updates > 0) {
        stats.policy_loss /= updates;
        stats.value_loss /= updates;
        stats.entropy /= updates;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// logging

void write_rl_log_csv(const RLRunLog& log, const std::string& path) {
    CsvWriter w(path, {"global_step", "episode", "return", "stage_reached", "active_params"});
    for (const auto& r : log.rows) {
        w.write_row({CsvWriter::field(r.global_step), CsvWriter::field(r.episode),
                     CsvWriter::field(r.ret),
                     CsvWriter::field(static_cast<std::int64_t>(r.stage_reached)),
                     CsvWriter::field(r.active_params)});
    }
}

void write_trace_csv(const std::vector<RouterTraceRow>& rows, const std::string& path) {
    CsvWriter w(path, {"t", "site", "expert", "weight", "stage"});
    for (const auto& r : rows) {
        w.write_row({CsvWriter::field(r.t), CsvWriter::field(static_cast<std::int64_t>(r.site)),
                     CsvWriter::field(static_cast<std::int64_t>(r.expert)),
                     CsvWriter::field(r.weight),
                     CsvWriter::field(static_cast<std::int64_t>(r.stage))});
    }
}

std::vector<RouterTraceRow> router_trace(const ActorCritic& model, const Tensor& observations,
                                         const std::vector<int>& stages) {
    if (model.moe_sites().empty()) {
        throw ConfigError("router_trace: model has no MoE sites");
    }
    const std::int64_t n = observations.dim(0);
    if (static_cast<std::int64_t>(stages.size()) != n) {
        throw ShapeError("router_trace: stage count != observation count");
    }
    std::vector<RouterTraceRow> rows;
    const std::int64_t slice = 256;
    const std::int64_t pix = observations.numel() / n;
    for (std::int64_t lo = 0; lo < n; lo += slice) {
        const std::int64_t hi = std::min(n, lo + slice);
        Tensor batch = Tensor::zeros({hi - lo, observations.dim(1), observations.dim(2),
                                      observations.dim(3)});
        std::copy(observations.data().begin() + lo * pix, observations.data().begin() + hi * pix,
                  batch.data().begin());
        Graph g;
        std::vector<Tensor> gates;
        model.policy_logits(g, batch, &gates);
        model.value(g, batch, &gates);
        for (std::int64_t i = 0; i < hi - lo; ++i) {
            for (std::size_t site = 0; site < gates.size(); ++site) {
                const std::int64_t experts = gates[site].dim(1);
                for (std::int64_t e = 0; e < experts; ++e) {
                    rows.push_back(RouterTraceRow{
                        lo + i, static_cast<int>(site), static_cast<int>(e),
                        gates[site].data()[i * experts + e],
                        stages[static_cast<std::size_t>(lo + i)]});
                }
            }
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// run loop

namespace {

std::int64_t sample_action(const double* logits, std::int64_t n, Rng& rng, double* logp_out) {
    double mx = logits[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, logits[j]);
    std::vector<double> p(static_cast<std::size_t>(n));
    double z = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
        p[static_cast<std::size_t>(j)] = std::exp(logits[j] - mx);
        z += p[static_cast<std::size_t>(j)];
    }
    const double u = rng.uniform(0.0, 1.0) * z;
    double acc = 0.0;
    std::int64_t a = n - 1;
    for (std::int64_t j = 0; j < n; ++j) {
        acc += p[static_cast<std::size_t>(j)];
        if (u < acc) {
            a = j;
            break;
        }
    }
    *logp_out = std::log(p[static_cast<std::size_t>(a)] / z);
    return a;
}

std::uint64_t episode_seed(std::uint64_t run_seed, std::int64_t episode_idx) {
    return splitmix64(run_seed ^ splitmix64(0xE15D0DE5ULL + static_cast<std::uint64_t>(episode_idx)));
}

double value_of(const ActorCritic& model, const Tensor& obs1) {
    Graph g;
    return model.value(g, obs1).data()[0];
}

Tensor with_batch_dim(const Tensor& obs) {
    Shape s = obs.shape();
    Shape b;
    b.push_back(1);
    b.insert(b.end(), s.begin(), s.end());
    return Tensor::from_data(b, obs.data());
}

} // namespace

std::vector<RouterTraceRow> trace_policy_episodes(const ActorCritic& model, const RLConfig& cfg,
                                                  std::int64_t n_episodes, std::uint64_t seed) {
    GridEnvConfig env_cfg = cfg.env;
    if (env_cfg.theme_seed == 0) env_cfg.theme_seed = cfg.seed;
    StagedGridEnv env(env_cfg);
    Rng action_rng = Rng(seed).split(0xACEULL);

    const std::int64_t steps = n_episodes * cfg.env.episode_len;
    Tensor all_obs = Tensor::zeros({steps, StagedGridEnv::kChannels, cfg.env.grid, cfg.env.grid});
    std::vector<int> stages(static_cast<std::size_t>(steps));
    std::int64_t t = 0;
    for (std::int64_t ep = 0; ep < n_episodes; ++ep) {
        Tensor obs = env.reset(episode_seed(seed, ep));
        bool done = false;
        while (!done) {
            std::copy(obs.data().begin(), obs.data().end(),
                      all_obs.data().begin() + t * obs.numel());
            stages[static_cast<std::size_t>(t)] = env.stage();
            Graph g;
            Tensor logits = model.policy_logits(g, with_batch_dim(obs));
            double logp;
            const std::int64_t a =
                sample_action(logits.data().data(), StagedGridEnv::kActions, action_rng, &logp);
            auto r = env.step(static_cast<int>(a));
            obs = r.obs;
            done = r.done;
            ++t;
        }
    }
    return router_trace(model, all_obs, stages);
}

RLRunResult run_rl(const RLConfig& cfg) {
    if (cfg.total_steps < 1 || cfg.rollout < 1) {
        throw ConfigError("run_rl: total_steps and rollout must be >= 1");
    }
    if (cfg.variant == RLVariant::grow_1_to_k && cfg.k < 2) {
        throw ConfigError("run_rl: grow_1_to_k requires k >= 2");
    }

    GridEnvConfig env_cfg = cfg.env;
    if (env_cfg.theme_seed == 0) env_cfg.theme_seed = cfg.seed;
    StagedGridEnv env(env_cfg);

    std::vector<std::int64_t> start_experts;
    switch (cfg.variant) {
        case RLVariant::no_moe: break;
        case RLVariant::one_expert: start_experts = {1, 1, 1}; break;
        case RLVariant::k_experts: start_experts = {cfg.k, cfg.k, cfg.k}; break;
        case RLVariant::grow_1_to_k: start_experts = {1, 1, 1}; break;
    }

    std::int64_t global_step = 0;
    std::int64_t episode_idx = 0;

    ActorCritic model;
    if (!cfg.init_checkpoint.empty()) {
        const LoadedCheckpoint ckpt = load_checkpoint(cfg.init_checkpoint);
        if (ckpt.meta.kind != "rl") {
            throw ConfigError("run_rl: checkpoint kind '" + ckpt.meta.kind + "' is not 'rl'");
        }
        if (ckpt.meta.d != cfg.d || ckpt.meta.expert_h != cfg.expert_h) {
            throw ConfigError("run_rl: checkpoint dims (d=" + std::to_string(ckpt.meta.d) +
                              ", h=" + std::to_string(ckpt.meta.expert_h) +
                              ") do not match config");
        }
        const auto& counts = ckpt.meta.experts_per_site;
        switch (cfg.variant) {
            case RLVariant::no_moe:
                if (!counts.empty()) {
                    throw ConfigError("run_rl: MoE checkpoint loaded into no_moe variant");
                }
                break;
            case RLVariant::one_expert:
            case RLVariant::k_experts:
            case RLVariant::grow_1_to_k: {
                if (counts.size() != 3) {
                    throw ConfigError("run_rl: checkpoint lacks per-site expert counts");
                }
                const std::int64_t lo = 1;
                const std::int64_t hi =
                    cfg.variant == RLVariant::one_expert ? 1 : cfg.k;
                for (std::int64_t c : counts) {
                    const std::int64_t min_ok =
                        cfg.variant == RLVariant::k_experts ? cfg.k : lo;
                    if (c < min_ok || c > hi) {
                        throw ConfigError("run_rl: checkpoint expert count " + std::to_string(c) +
                                          " invalid for variant " + variant_str(cfg.variant));
                    }
                }
                break;
            }
        }
        model = build_actor_critic(cfg, counts);
        apply_checkpoint(model.params, ckpt);
        global_step = ckpt.meta.global_step;
        episode_idx = ckpt.meta.episode_count;
    } else {
        model = build_actor_critic(cfg, start_experts);
    }

    std::vector<std::int64_t> growth_events = cfg.growth_steps;
    if (cfg.variant == RLVariant::grow_1_to_k && growth_events.empty()) {
        for (std::int64_t i = 1; i < cfg.k; ++i) {
            growth_events.push_back(i * cfg.total_steps / cfg.k);
        }
    }
    std::int64_t growths_applied = 0;
    if (cfg.variant == RLVariant::grow_1_to_k) {
        growths_applied = model.experts_per_site()[0] - 1;
    }

    Rng master(cfg.seed);
    Rng action_rng = master.split(0xAC710ULL ^ static_cast<std::uint64_t>(global_step));
    Rng ppo_rng = master.split(0x99D0ULL ^ static_cast<std::uint64_t>(global_step));
    Rng grow_rng = master.split(0x6120ULL);

    RLRunResult result;
    std::vector<bool> ckpt_done(cfg.checkpoint_at.size(), false);

    // Episode state persists across rollouts.
    Tensor obs = env.reset(episode_seed(cfg.seed, episode_idx));
    double episode_return = 0.0;

    auto save_ckpt = [&]() {
        CheckpointMeta meta;
        meta.kind = "rl";
        meta.variant = variant_str(cfg.variant);
        meta.global_step = global_step;
        meta.episode_count = episode_idx;
        meta.experts_per_site = model.experts_per_site();
        meta.d = cfg.d;
        meta.expert_h = cfg.expert_h;
        const std::string dir = (fs::path(cfg.out_dir) /
                                 ("ckpt_" + std::string(variant_str(cfg.variant)) + "_seed" +
                                  std::to_string(cfg.seed) + "_step" + std::to_string(global_step)))
                                    .string();
        save_checkpoint(model.params, meta, dir);
        result.checkpoints_written.push_back(dir);
    };

    while (global_step < cfg.total_steps) {
        for (std::size_t c = 0; c < cfg.checkpoint_at.size(); ++c) {
            if (!ckpt_done[c] && global_step >= cfg.checkpoint_at[c]) {
                ckpt_done[c] = true;
                save_ckpt();
            }
        }
        while (growths_applied < static_cast<std::int64_t>(growth_events.size()) &&
               global_step >= growth_events[static_cast<std::size_t>(growths_applied)]) {
            for (auto* site : model.moe_sites()) {
                grow_experts(*site, model.params, 1, grow_rng);
            }
            ++growths_applied;
        }

        Rollout rollout;
        const std::int64_t t_len = cfg.rollout;
        rollout.obs = Tensor::zeros({t_len, StagedGridEnv::kChannels, cfg.env.grid, cfg.env.grid});
        rollout.actions.reserve(static_cast<std::size_t>(t_len));
        for (std::int64_t t = 0; t < t_len; ++t) {
            std::copy(obs.data().begin(), obs.data().end(),
                      rollout.obs.data().begin() + t * obs.numel());
            rollout.stages.push_back(env.stage());

            Graph g;
            Tensor obs_b = with_batch_dim(obs);
            Tensor logits = model.policy_logits(g, obs_b);
            Tensor v = model.value(g, obs_b);
            double logp;
            const std::int64_t a =
                sample_action(logits.data().data(), StagedGridEnv::kActions, action_rng, &logp);
            rollout.actions.push_back(a);
            rollout.log_probs.push_back(logp);
            rollout.values.push_back(v.data()[0]);

            auto r = env.step(static_cast<int>(a));
            rollout.rewards.push_back(r.reward);
            rollout.dones.push_back(r.done);
            episode_return += r.reward;
            ++global_step;

            if (r.done) {
                result.log.rows.push_back(RLRunRow{global_step, episode_idx, episode_return,
                                                   env.stage(), model.active_site_params()});
                ++episode_idx;
                episode_return = 0.0;
                obs = env.reset(episode_seed(cfg.seed, episode_idx));
            } else {
                obs = r.obs;
            }
        }
        rollout.values.push_back(value_of(model, with_batch_dim(obs)));
        ppo_update(model, rollout, cfg.ppo, ppo_rng);
    }

    for (std::size_t c = 0; c < cfg.checkpoint_at.size(); ++c) {
        if (!ckpt_done[c] && global_step >= cfg.checkpoint_at[c]) {
            ckpt_done[c] = true;
            save_ckpt();
        }
    }

    if (cfg.trace_episodes > 0) {
        result.trace = trace_policy_episodes(model, cfg, cfg.trace_episodes,
                                             splitmix64(cfg.seed ^ 0x70ACEULL));
    }
    result.final_experts_per_site = model.experts_per_site();
    return result;
}

} // namespace plastinet
