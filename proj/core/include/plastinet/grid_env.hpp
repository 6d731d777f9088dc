#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "plastinet/rng.hpp"
#include "plastinet/tensor.hpp"

namespace plastinet {

struct GridEnvConfig {
    int grid = 7;
    int stages = 3;
    int episode_len = 128;
    std::uint64_t theme_seed = 0;
};

/// Navigation gridworld with abrupt observation shifts between stages.
/// Reaching the goal yields reward 1, repositions agent and goal, and
/// advances the stage (capped at stages-1); the episode ends at the step
/// budget. Each stage renders the same occupancy state through its own
/// theme: a seeded channel permutation plus per-channel offsets, so stages
/// carry identical information under distinct observation distributions.
class StagedGridEnv {
public:
    static constexpr int kChannels = 5;
    static constexpr int kActions = 4; // up, down, left, right

    explicit StagedGridEnv(const GridEnvConfig& cfg);

    /// Stage 0, seeded positions; deterministic observation for a seed.
    Tensor reset(std::uint64_t episode_seed);

    struct StepResult {
        Tensor obs;
        double reward = 0.0;
        bool done = false;
        int stage = 0;
    };
    StepResult step(int action);

    int stage() const { return stage_; }
    int steps_taken() const { return t_; }
    const GridEnvConfig& config() const { return cfg_; }

    /// Observation [kChannels, grid, grid] of an arbitrary state under a
    /// stage's theme. Exposed so tests can compare themes directly.
    Tensor themed_observation(int stage, int agent_x, int agent_y, int goal_x, int goal_y) const;

    const std::array<int, kChannels>& permutation(int stage) const;
    const std::array<double, kChannels>& offsets(int stage) const;

private:
    void place_positions();

    GridEnvConfig cfg_;
    std::vector<std::array<int, kChannels>> perms_;
    std::vector<std::array<double, kChannels>> offsets_;
    Rng episode_rng_{0};
    int ax_ = 0, ay_ = 0, gx_ = 0, gy_ = 0;
    int stage_ = 0;
    int t_ = 0;
};

} // namespace plastinet
