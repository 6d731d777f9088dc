#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "plastinet/budget.hpp"
#include "plastinet/moe.hpp"
#include "support/test_util.hpp"

using namespace plastinet;
using testutil::random_tensor;

TEST_CASE("gate weights: zero router is symmetric") {
    ParamStore params;
    Rng rng(1);
    MoELayer layer(params, "moe", 8, 4, 2, true, rng);
    std::fill(layer.router.data().begin(), layer.router.data().end(), 0.0);

    Graph g;
    Tensor x = random_tensor({5, 8}, rng, -1, 1, false);
    Tensor gates = layer.gate_weights(g, x);
    for (double v : gates.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

    CHECK_THROWS_AS(layer.gate_weights(g, Tensor::zeros({5, 9})), ShapeError);
}

TEST_CASE("gate weights: single expert gets weight 1") {
    ParamStore params;
    Rng rng(2);
    MoELayer layer(params, "moe", 8, 4, 1, true, rng);
    Graph g;
    Tensor gates = layer.gate_weights(g, random_tensor({3, 8}, rng, -1, 1, false));
    for (double v : gates.data()) CHECK(v == 1.0);
}

TEST_CASE("zero-initialized new rows keep zero logits symmetric") {
    ParamStore params;
    Rng rng(3);
    MoELayer layer(params, "moe", 8, 4, 2, true, rng);
    std::fill(layer.router.data().begin(), layer.router.data().end(), 0.0);
    grow_experts(layer, params, 1, rng);

    Graph g;
    Tensor x = random_tensor({4, 8}, rng, -1, 1, false);
    Tensor gates = layer.gate_weights(g, x); // all logits zero: old rows zeroed, new row zero-init
    for (double v : gates.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("gate rows sum to 1 and stay strictly inside (0,1)") {
    ParamStore params;
    Rng rng(4);
    MoELayer layer(params, "moe", 16, 8, 5, true, rng);
    Graph g;
    Tensor gates = layer.gate_weights(g, random_tensor({32, 16}, rng, -2, 2, false));
    for (int r = 0; r < 32; ++r) {
        double s = 0.0;
        for (int e = 0; e < 5; ++e) {
            const double v = gates.data()[r * 5 + e];
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("single-expert mixture equals the expert exactly") {
    ParamStore params;
    Rng rng(5);
    MoELayer layer(params, "moe", 8, 4, 1, true, rng);
    Graph g;
    Tensor x = random_tensor({6, 8}, rng, -1, 1, false);
    Tensor mixed = layer.forward(g, x);
    Tensor direct = layer.experts[0].forward(g, x);
    CHECK(mixed.data() == direct.data());
}

TEST_CASE("two identical experts under symmetric gates equal either expert") {
    ParamStore params;
    Rng rng(6);
    MoELayer layer(params, "moe", 8, 4, 2, true, rng);
    std::fill(layer.router.data().begin(), layer.router.data().end(), 0.0);
    // Copy expert 0 into expert 1.
    for (const char* suffix : {".w_in", ".b_in", ".w_out", ".b_out"}) {
        auto src = params.get("moe.expert0" + std::string(suffix)).data();
        params.get("moe.expert1" + std::string(suffix)).data() = src;
    }
    Graph g;
    Tensor x = random_tensor({4, 8}, rng, -1, 1, false);
    Tensor mixed = layer.forward(g, x);
    Tensor direct = layer.experts[0].forward(g, x);
    for (std::size_t i = 0; i < mixed.data().size(); ++i) {
        CHECK(mixed.data()[i] == doctest::Approx(direct.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("mixture matches an independently coded weighted sum") {
    ParamStore params;
    Rng rng(7);
    const std::int64_t d = 12, h = 5, experts = 4, batch = 9;
    MoELayer layer(params, "moe", d, h, experts, true, rng);
    Tensor x = random_tensor({batch, d}, rng, -1, 1, false);

    Graph g;
    Tensor mixed = layer.forward(g, x);

    // Direct evaluation with plain loops.
    for (std::int64_t b = 0; b < batch; ++b) {
        const double* xr = x.data().data() + b * d;
        std::vector<double> logits(experts, 0.0);
        for (std::int64_t e = 0; e < experts; ++e) {
            for (std::int64_t j = 0; j < d; ++j) {
                logits[static_cast<std::size_t>(e)] += layer.router.data()[e * d + j] * xr[j];
            }
        }
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double z = 0.0;
        for (double& v : logits) {
            v = std::exp(v - mx);
            z += v;
        }
        for (double& v : logits) v /= z;

        std::vector<double> expected(d, 0.0);
        for (std::int64_t e = 0; e < experts; ++e) {
            const auto& ex = layer.experts[static_cast<std::size_t>(e)];
            std::vector<double> hidden(h, 0.0);
            for (std::int64_t i = 0; i < h; ++i) {
                double acc = ex.b_in.data()[i];
                for (std::int64_t j = 0; j < d; ++j) acc += ex.w_in.data()[i * d + j] * xr[j];
                hidden[static_cast<std::size_t>(i)] = std::max(0.0, acc);
            }
            for (std::int64_t o = 0; o < d; ++o) {
                double acc = ex.b_out.data()[o];
                for (std::int64_t i = 0; i < h; ++i)
                    acc += ex.w_out.data()[o * h + i] * hidden[static_cast<std::size_t>(i)];
                expected[static_cast<std::size_t>(o)] += logits[static_cast<std::size_t>(e)] * acc;
            }
        }
        for (std::int64_t o = 0; o < d; ++o) {
            CHECK(std::abs(mixed.data()[b * d + o] - expected[static_cast<std::size_t>(o)]) <
                  1e-12);
        }
    }
}

TEST_CASE("growth preserves every old parameter bit and optimizer moment") {
    ParamStore params;
    Rng rng(8);
    MoELayer layer(params, "moe", 8, 4, 2, true, rng);
    // Dirty the optimizer state so preservation is observable.
    for (auto& e : params.entries()) {
        for (auto& m : e.adam.m) m = 0.25;
        e.adam.t = 3;
    }

    std::vector<std::pair<std::string, std::vector<double>>> before;
    for (const auto& e : params.entries()) before.emplace_back(e.name, e.tensor.data());

    grow_experts(layer, params, 2, rng);
    CHECK(layer.expert_count() == 4);

    for (const auto& [name, data] : before) {
        if (name == "moe.router") continue;
        CHECK(params.get(name).data() == data); // bit-identical
        CHECK(params.entry(name).adam.m[0] == 0.25);
    }
    // Router: old rows bit-identical, new rows zero; old moments kept.
    const auto& router = params.get("moe.router");
    const auto& old_router = before.back().second; // router was registered last
    for (std::size_t i = 0; i < old_router.size(); ++i) {
        CHECK(router.data()[i] == old_router[i]);
        CHECK(params.entry("moe.router").adam.m[i] == 0.25);
    }
    for (std::size_t i = old_router.size(); i < router.data().size(); ++i) {
        CHECK(router.data()[i] == 0.0);
        CHECK(params.entry("moe.router").adam.m[i] == 0.0);
    }
    // New expert tensors start with zeroed moments.
    CHECK(params.entry("moe.expert2.w_in").adam.t == 0);
    CHECK(params.entry("moe.expert3.w_in").adam.m[0] == 0.0);
}

TEST_CASE("growth preservation holds on 1000 probe inputs") {
    ParamStore params;
    Rng rng(9);
    MoELayer layer(params, "moe", 16, 8, 3, true, rng);

    Rng probe_rng(17);
    Tensor probes = random_tensor({1000, 16}, probe_rng, -2, 2, false);
    std::vector<std::vector<double>> before;
    {
        Graph g;
        for (const auto& ex : layer.experts) before.push_back(ex.forward(g, probes).data());
    }
    grow_experts(layer, params, 2, rng);
    {
        Graph g;
        for (std::size_t e = 0; e < before.size(); ++e) {
            CHECK(layer.experts[e].forward(g, probes).data() == before[e]);
        }
    }
}

TEST_CASE("granularity-2 schedule doubles experts every stage") {
    GrowthSchedule s = solve_method_dims(MethodTag::dynamic_moe, 64, 25600, 5, 2);
    Rng rng(10);
    ParamStore params;
    ExpansionSite site = build_site(params, "site", s, rng);
    CHECK(site.moe->expert_count() == 2);
    for (int stage = 1; stage < 5; ++stage) {
        apply_expansion(site, params, s, stage, rng);
        CHECK(site.moe->expert_count() == 2 * (stage + 1));
    }
}

TEST_CASE("growth changes the layer function (no preservation)") {
    ParamStore params;
    Rng rng(11);
    MoELayer layer(params, "moe", 8, 4, 2, true, rng);
    Tensor x = random_tensor({4, 8}, rng, -1, 1, false);
    std::vector<double> before;
    {
        Graph g;
        before = layer.forward(g, x).data();
    }
    grow_experts(layer, params, 1, rng);
    std::vector<double> after;
    {
        Graph g;
        after = layer.forward(g, x).data();
    }
    CHECK(before != after);
}

TEST_CASE("active parameter counts") {
    ParamStore params;
    Rng rng(12);
    MoELayer small(params, "a", 8, 4, 2, false, rng);
    CHECK(small.active_param_count(false, false) == 128); // 2*2*8*4

    ParamStore p1, p2;
    MoELayer wide(p1, "b", 64, 64, 10, false, rng);
    MoELayer narrow(p2, "c", 64, 32, 20, false, rng);
    CHECK(wide.active_param_count(false, false) == 81920);
    CHECK(narrow.active_param_count(false, false) == 81920);

    // Single expert equals a plain bottleneck of the same dims.
    ParamStore p3, p4;
    MoELayer one(p3, "d", 16, 8, 1, false, rng);
    Mlp plain(p4, "e", {16, 8, 16}, false, rng);
    CHECK(one.active_param_count(false, false) == count_params(p4, {false, false}));
}

TEST_CASE("budget invariance across granularities") {
    Rng case_rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t d = 8 * case_rng.uniform_int(1, 9);
        const std::int64_t growths = case_rng.uniform_int(1, 10);
        // Divisible budget: all granularities land exactly.
        const std::int64_t unit = 2 * d * 4 * (growths + 1);
        const std::int64_t budget = unit * case_rng.uniform_int(1, 6) * 4;
        std::vector<std::int64_t> finals;
        for (std::int64_t g : {1, 2, 4}) {
            const std::int64_t h = solve_bottleneck_width(d, budget, g, growths);
            finals.push_back(g * (growths + 1) * 2 * d * h);
        }
        CHECK(finals[0] == finals[1]);
        CHECK(finals[1] == finals[2]);
        CHECK(finals[0] <= budget);
    }
}

TEST_CASE("gradients reach every expert and the router") {
    ParamStore params;
    Rng rng(14);
    MoELayer layer(params, "moe", 12, 6, 4, true, rng);
    Tensor x = random_tensor({16, 12}, rng, -1, 1, false);

    Graph g;
    Tensor gates;
    Tensor y = layer.forward(g, x, &gates);
    g.backward(g.mean(g.mul(y, y)));

    for (std::int64_t e = 0; e < layer.expert_count(); ++e) {
        double max_gate = 0.0;
        for (std::int64_t b = 0; b < 16; ++b) {
            max_gate = std::max(max_gate, gates.data()[b * 4 + e]);
        }
        if (max_gate > 1e-6) {
            double grad_mass = 0.0;
            for (double v : layer.experts[static_cast<std::size_t>(e)].w_in.grad()) {
                grad_mass += std::abs(v);
            }
            CHECK(grad_mass > 0.0);
        }
    }
    double router_mass = 0.0;
    for (double v : layer.router.grad()) router_mass += std::abs(v);
    CHECK(router_mass > 0.0);
}
