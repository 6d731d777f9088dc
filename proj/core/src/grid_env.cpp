#include "plastinet/grid_env.hpp"

#include <algorithm>

#include "plastinet/error.hpp"

namespace plastinet {

StagedGridEnv::StagedGridEnv(const GridEnvConfig& cfg) : cfg_(cfg) {
    if (cfg.grid < 2 || cfg.stages < 1 || cfg.episode_len < 1) {
        throw ConfigError("grid env: grid >= 2, stages >= 1, episode_len >= 1 required");
    }
    Rng theme_rng(splitmix64(cfg.theme_seed ^ 0x9d67f3a2c41b5e70ULL));
    // Stage 0 is the canonical rendering; later stages get distinct seeded
    // permutations and offsets.
    std::array<int, kChannels> identity;
    for (int c = 0; c < kChannels; ++c) identity[static_cast<std::size_t>(c)] = c;
    perms_.push_back(identity);
    offsets_.push_back({0.0, 0.0, 0.0, 0.0, 0.0});
    for (int s = 1; s < cfg.stages; ++s) {
        std::array<int, kChannels> perm = identity;
        do {
            for (int i = kChannels - 1; i > 0; --i) {
                const int j = static_cast<int>(theme_rng.uniform_int(0, i + 1));
                std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
            }
        } while (std::find(perms_.begin(), perms_.end(), perm) != perms_.end());
        perms_.push_back(perm);
        std::array<double, kChannels> off;
        for (auto& v : off) v = theme_rng.uniform(0.1, 0.5);
        offsets_.push_back(off);
    }
}

const std::array<int, StagedGridEnv::kChannels>& StagedGridEnv::permutation(int stage) const {
    if (stage < 0 || stage >= cfg_.stages) throw ConfigError("grid env: stage out of range");
    return perms_[static_cast<std::size_t>(stage)];
}

const std::array<double, StagedGridEnv::kChannels>& StagedGridEnv::offsets(int stage) const {
    if (stage < 0 || stage >= cfg_.stages) throw ConfigError("grid env: stage out of range");
    return offsets_[static_cast<std::size_t>(stage)];
}

Tensor StagedGridEnv::themed_observation(int stage, int agent_x, int agent_y, int goal_x,
                                         int goal_y) const {
    const int g = cfg_.grid;
    const auto& perm = permutation(stage);
    const auto& off = offsets_[static_cast<std::size_t>(stage)];

    // Base channels: agent, goal, border mask, x gradient, y gradient.
    std::vector<double> base(static_cast<std::size_t>(kChannels * g * g), 0.0);
    base[static_cast<std::size_t>(0 * g * g + agent_y * g + agent_x)] = 1.0;
    base[static_cast<std::size_t>(1 * g * g + goal_y * g + goal_x)] = 1.0;
    for (int y = 0; y < g; ++y) {
        for (int x = 0; x < g; ++x) {
            const bool border = x == 0 || y == 0 || x == g - 1 || y == g - 1;
            base[static_cast<std::size_t>(2 * g * g + y * g + x)] = border ? 1.0 : 0.0;
            base[static_cast<std::size_t>(3 * g * g + y * g + x)] =
                static_cast<double>(x) / static_cast<double>(g - 1);
            base[static_cast<std::size_t>(4 * g * g + y * g + x)] =
                static_cast<double>(y) / static_cast<double>(g - 1);
        }
    }

    Tensor obs = Tensor::zeros({kChannels, g, g});
    auto& ov = obs.data();
    for (int c = 0; c < kChannels; ++c) {
        const double* src = base.data() + perm[static_cast<std::size_t>(c)] * g * g;
        double* dst = ov.data() + c * g * g;
        const double o = off[static_cast<std::size_t>(c)];
        for (int i = 0; i < g * g; ++i) dst[i] = src[i] + o;
    }
    return obs;
}

void StagedGridEnv::place_positions() {
    const int g = cfg_.grid;
    ax_ = static_cast<int>(episode_rng_.uniform_int(0, g));
    ay_ = static_cast<int>(episode_rng_.uniform_int(0, g));
    do {
        gx_ = static_cast<int>(episode_rng_.uniform_int(0, g));
        gy_ = static_cast<int>(episode_rng_.uniform_int(0, g));
    } while (gx_ == ax_ && gy_ == ay_);
}

Tensor StagedGridEnv::reset(std::uint64_t episode_seed) {
    episode_rng_ = Rng(episode_seed);
    stage_ = 0;
    t_ = 0;
    place_positions();
    return themed_observation(stage_, ax_, ay_, gx_, gy_);
}

StagedGridEnv::StepResult StagedGridEnv::step(int action) {
    if (action < 0 || action >= kActions) {
        throw ConfigError("grid env: invalid action id " + std::to_string(action));
    }
    const int g = cfg_.grid;
    switch (action) {
        case 0: ay_ = std::max(0, ay_ - 1); break;     // up
        case 1: ay_ = std::min(g - 1, ay_ + 1); break; // down
        case 2: ax_ = std::max(0, ax_ - 1); break;     // left
        case 3: ax_ = std::min(g - 1, ax_ + 1); break; // right
    }
    StepResult r;
    if (ax_ == gx_ && ay_ == gy_) {
        r.reward = 1.0;
        stage_ = std::min(stage_ + 1, cfg_.stages - 1);
        place_positions();
    }
    ++t_;
    r.done = t_ >= cfg_.episode_len;
    r.stage = stage_;
    r.obs = themed_observation(stage_, ax_, ay_, gx_, gy_);
    return r;
}

} // namespace plastinet
