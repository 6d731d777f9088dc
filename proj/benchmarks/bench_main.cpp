#include <benchmark/benchmark.h>

#include "plastinet/graph.hpp"
#include "plastinet/moe.hpp"
#include "plastinet/rl_runner.hpp"

using namespace plastinet;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

void bm_matmul_fwd_bwd(benchmark::State& state) {
    Rng rng(1);
    const std::int64_t n = state.range(0);
    Tensor a = random_tensor({n, n}, rng, true);
    Tensor b = random_tensor({n, n}, rng, true);
    for (auto _ : state) {
        Graph g;
        Tensor loss = g.mean(g.matmul(a, b));
        g.backward(loss);
        a.zero_grad();
        b.zero_grad();
        benchmark::DoNotOptimize(loss.item());
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bm_matmul_fwd_bwd)->Arg(64)->Arg(128)->Arg(256);

void bm_conv2d_fwd_bwd(benchmark::State& state) {
    Rng rng(2);
    const std::int64_t batch = state.range(0);
    Tensor x = random_tensor({batch, 3, 16, 16}, rng, true);
    Tensor k = random_tensor({16, 3, 3, 3}, rng, true);
    Tensor bias = random_tensor({16}, rng, true);
    for (auto _ : state) {
        Graph g;
        Tensor loss = g.mean(g.conv2d(x, k, bias, 1, 1));
        g.backward(loss);
        x.zero_grad();
        k.zero_grad();
        bias.zero_grad();
        benchmark::DoNotOptimize(loss.item());
    }
}
BENCHMARK(bm_conv2d_fwd_bwd)->Arg(16)->Arg(64);

void bm_moe_forward(benchmark::State& state) {
    Rng rng(3);
    const std::int64_t experts = state.range(0);
    ParamStore params;
    MoELayer layer(params, "moe", 64, 32, experts, true, rng);
    Tensor x = random_tensor({64, 64}, rng, true);
    for (auto _ : state) {
        Graph g;
        Tensor loss = g.mean(layer.forward(g, x));
        benchmark::DoNotOptimize(loss.item());
        x.zero_grad();
    }
}
BENCHMARK(bm_moe_forward)->Arg(1)->Arg(2)->Arg(10);

void bm_grow_experts(benchmark::State& state) {
    Rng rng(4);
    for (auto _ : state) {
        state.PauseTiming();
        ParamStore params;
        MoELayer layer(params, "moe", 64, 32, 2, true, rng);
        state.ResumeTiming();
        grow_experts(layer, params, 2, rng);
        benchmark::DoNotOptimize(layer.expert_count());
    }
}
BENCHMARK(bm_grow_experts);

void bm_gae(benchmark::State& state) {
    Rng rng(5);
    const std::size_t t_len = static_cast<std::size_t>(state.range(0));
    std::vector<double> rewards(t_len), values(t_len + 1);
    std::vector<bool> dones(t_len, false);
    for (auto& r : rewards) r = rng.uniform(0.0, 1.0);
    for (auto& v : values) v = rng.uniform(0.0, 1.0);
    for (auto _ : state) {
        auto [adv, ret] = gae(rewards, values, dones, 0.99, 0.95);
        benchmark::DoNotOptimize(adv.data());
        benchmark::DoNotOptimize(ret.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t_len));
}
BENCHMARK(bm_gae)->Arg(256)->Arg(4096);

} // namespace

BENCHMARK_MAIN();
