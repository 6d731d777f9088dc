#pragma once

#include <string>
#include <utility>
#include <vector>

#include "plastinet/checkpoint.hpp"
#include "plastinet/grid_env.hpp"
#include "plastinet/moe.hpp"

namespace plastinet {

enum class RLVariant { no_moe, one_expert, k_experts, grow_1_to_k };

const char* variant_str(RLVariant v);
RLVariant variant_from_str(const std::string& s);

struct PpoConfig {
    double clip_eps = 0.2;
    int epochs = 4;
    int minibatches = 4;
    double gamma = 0.99;
    double lambda = 0.95;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    AdamConfig adam{3e-4, 0.9, 0.999, 1e-8};
};

struct RLConfig {
    std::int64_t total_steps = 200000;
    std::int64_t rollout = 256;
    PpoConfig ppo;
    RLVariant variant = RLVariant::grow_1_to_k;
    std::int64_t k = 2;
    std::vector<std::int64_t> growth_steps; // empty: K-1 growths at i*total/K
    std::uint64_t seed = 1;
    std::string init_checkpoint;            // directory; empty for fresh start
    std::vector<std::int64_t> checkpoint_at;
    std::int64_t trace_episodes = 0;        // router telemetry after training
    GridEnvConfig env;
    std::int64_t d = 64;
    std::int64_t expert_h = 32;
    std::string out_dir = ".";
};

/// Actor: embed + one residual block + policy head. Critic: embed + two
/// residual blocks + value head. With MoE enabled the three block inner paths
/// are the growable sites; heads start at zero so the initial policy is
/// uniform.
struct ActorCritic {
    ParamStore params;
    std::int64_t d = 0;
    std::int64_t expert_h = 0;
    RLVariant variant = RLVariant::no_moe;
    std::int64_t obs_dim = 0;

    LinearLayer actor_embed;
    ResidualBlock actor_block;
    Tensor actor_post_gain, actor_post_bias;
    LinearLayer policy_head;

    LinearLayer critic_embed;
    ResidualBlock critic_block1;
    ResidualBlock critic_block2;
    Tensor critic_post_gain, critic_post_bias;
    LinearLayer value_head;

    /// obs [N, C, H, W] -> logits [N, actions]. site_gates, when given,
    /// receives the actor site's gate tensor at index 0.
    Tensor policy_logits(Graph& g, const Tensor& obs, std::vector<Tensor>* site_gates = nullptr) const;
    /// obs [N, C, H, W] -> values [N]. site_gates receives the two critic
    /// sites' gate tensors (first critic site first).
    Tensor value(Graph& g, const Tensor& obs, std::vector<Tensor>* site_gates = nullptr) const;

    std::vector<MoELayer*> moe_sites();
    std::vector<const MoELayer*> moe_sites() const;
    std::vector<std::int64_t> experts_per_site() const;

    /// Sum over sites of inner-path weight parameters (biases and router
    /// excluded), the "active parameters" a run logs.
    std::int64_t active_site_params() const;
};

/// experts_per_site: one count per site {actor, critic1, critic2}; ignored
/// for no_moe (plain inner paths sized k*expert_h to match k_experts).
ActorCritic build_actor_critic(const RLConfig& cfg,
                               const std::vector<std::int64_t>& experts_per_site);

/// delta_t = r_t + gamma*(1-done_t)*V_{t+1} - V_t;
/// A_t = delta_t + gamma*lambda*(1-done_t)*A_{t+1}; returns = A + V[:T].
/// values must have length T+1.
std::pair<std::vector<double>, std::vector<double>> gae(const std::vector<double>& rewards,
                                                        const std::vector<double>& values,
                                                        const std::vector<bool>& dones,
                                                        double gamma, double lambda);

struct Rollout {
    Tensor obs;                       // [T, C, H, W]
    std::vector<std::int64_t> actions;
    std::vector<double> log_probs;    // behavior-policy log pi(a|s)
    std::vector<double> rewards;
    std::vector<bool> dones;
    std::vector<double> values;       // length T+1 (bootstrap at the end)
    std::vector<int> stages;
};

struct PpoStats {
    double policy_loss = 0.0; // clipped surrogate
    double value_loss = 0.0;
    double entropy = 0.0;
};

/// Clipped-surrogate PPO update: epochs x minibatches Adam steps on
/// -E[min(rho*A, clip(rho)*A)] + value_coef*MSE - entropy_coef*H, advantages
/// normalized over the rollout. Returns stats averaged over the updates.
PpoStats ppo_update(ActorCritic& model, const Rollout& rollout, const PpoConfig& cfg, Rng& rng);

struct RLRunRow {
    std::int64_t global_step = 0;
    std::int64_t episode = 0;
    double ret = 0.0;
    int stage_reached = 0;
    std::int64_t active_params = 0;
};

struct RLRunLog {
    std::vector<RLRunRow> rows;
};

/// Header: global_step,episode,return,stage_reached,active_params
void write_rl_log_csv(const RLRunLog& log, const std::string& path);

struct RouterTraceRow {
    std::int64_t t = 0;
    int site = 0;
    int expert = 0;
    double weight = 0.0;
    int stage = 0;
};

/// Header: t,site,expert,weight,stage
void write_trace_csv(const std::vector<RouterTraceRow>& rows, const std::string& path);

/// Gate weights of every expert at every MoE site for a recorded observation
/// sequence; per (t, site) the weights sum to 1.
std::vector<RouterTraceRow> router_trace(const ActorCritic& model, const Tensor& observations,
                                         const std::vector<int>& stages);

/// Runs the trained policy for n episodes and traces the router over them.
std::vector<RouterTraceRow> trace_policy_episodes(const ActorCritic& model, const RLConfig& cfg,
                                                  std::int64_t n_episodes, std::uint64_t seed);

struct RLRunResult {
    RLRunLog log;
    std::vector<RouterTraceRow> trace; // when cfg.trace_episodes > 0
    std::vector<std::int64_t> final_experts_per_site;
    std::vector<std::string> checkpoints_written;
};

/// PPO loop with scheduled expert growth, checkpointing and telemetry.
/// grow_1_to_k applies one growth per scheduled step to every site; with an
/// init checkpoint the run resumes from its recorded step.
RLRunResult run_rl(const RLConfig& cfg);

} // namespace plastinet
