#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Finite-difference property suite: every primitive, 20 random small shapes
// each, relative error < 1e-4.

#include "plastinet/graph.hpp"
#include "support/test_util.hpp"

using namespace plastinet;
using testutil::check_gradients;
using testutil::distinct_tensor;
using testutil::random_tensor;
using testutil::random_tensor_off_zero;
using testutil::weighted_sum;

namespace {
constexpr int kTrials = 20;
constexpr double kTol = 1e-4;
} // namespace

TEST_CASE("gradcheck matmul") {
    Rng rng(100);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t m = rng.uniform_int(1, 5), k = rng.uniform_int(1, 5),
                           n = rng.uniform_int(1, 5);
        const bool ta = t % 2 == 1, tb = t % 3 == 1;
        Tensor a = random_tensor(ta ? Shape{k, m} : Shape{m, k}, rng);
        Tensor b = random_tensor(tb ? Shape{n, k} : Shape{k, n}, rng);
        Tensor w = random_tensor({m, n}, rng, -1, 1, false);
        auto r = check_gradients({a, b}, [&](Graph& g) {
            return weighted_sum(g, g.matmul(a, b, ta, tb), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck add") {
    Rng rng(101);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 5), c = rng.uniform_int(1, 6);
        Tensor a = random_tensor({n, c}, rng);
        Tensor b = t % 3 == 0   ? random_tensor({n, c}, rng)
                   : t % 3 == 1 ? random_tensor({c}, rng)
                                : random_tensor({}, rng);
        Tensor w = random_tensor({n, c}, rng, -1, 1, false);
        auto r = check_gradients({a, b}, [&](Graph& g) {
            return weighted_sum(g, g.add(a, b), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck mul") {
    Rng rng(102);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 5), c = rng.uniform_int(1, 6);
        Tensor a = random_tensor({n, c}, rng);
        Tensor b = t % 3 == 0   ? random_tensor({n, c}, rng)
                   : t % 3 == 1 ? random_tensor({n}, rng)
                                : random_tensor({}, rng);
        Tensor w = random_tensor({n, c}, rng, -1, 1, false);
        auto r = check_gradients({a, b}, [&](Graph& g) {
            return weighted_sum(g, g.mul(a, b), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck relu") {
    Rng rng(103);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(2, 8), c = rng.uniform_int(1, 5);
        Tensor x = random_tensor_off_zero({n, c}, rng);
        Tensor w = random_tensor({n, c}, rng, -1, 1, false);
        auto r = check_gradients({x}, [&](Graph& g) { return weighted_sum(g, g.relu(x), w); });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck conv2d") {
    Rng rng(104);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 3), ci = rng.uniform_int(1, 3),
                           co = rng.uniform_int(1, 3);
        const std::int64_t kh = rng.uniform_int(1, 4), kw = rng.uniform_int(1, 4);
        const int stride = static_cast<int>(rng.uniform_int(1, 3));
        const int pad = static_cast<int>(rng.uniform_int(0, 2));
        const std::int64_t h = kh + rng.uniform_int(0, 4), w_dim = kw + rng.uniform_int(0, 4);
        Tensor x = random_tensor({n, ci, h, w_dim}, rng);
        Tensor k = random_tensor({co, ci, kh, kw}, rng);
        Tensor bias = random_tensor({co}, rng);
        const std::int64_t ho = (h + 2 * pad - kh) / stride + 1;
        const std::int64_t wo = (w_dim + 2 * pad - kw) / stride + 1;
        Tensor w = random_tensor({n, co, ho, wo}, rng, -1, 1, false);
        auto r = check_gradients({x, k, bias}, [&](Graph& g) {
            return weighted_sum(g, g.conv2d(x, k, bias, stride, pad), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck maxpool2") {
    Rng rng(105);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 3), c = rng.uniform_int(1, 3);
        const std::int64_t h = 2 * rng.uniform_int(1, 4), w_dim = 2 * rng.uniform_int(1, 4);
        Tensor x = distinct_tensor({n, c, h, w_dim}, rng);
        Tensor w = random_tensor({n, c, h / 2, w_dim / 2}, rng, -1, 1, false);
        auto r = check_gradients({x}, [&](Graph& g) {
            return weighted_sum(g, g.maxpool2(x), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck layernorm") {
    Rng rng(106);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 5), d = rng.uniform_int(2, 8);
        Tensor x = random_tensor({n, d}, rng);
        Tensor gain = random_tensor({d}, rng, 0.5, 1.5);
        Tensor bias = random_tensor({d}, rng);
        Tensor w = random_tensor({n, d}, rng, -1, 1, false);
        auto r = check_gradients({x, gain, bias}, [&](Graph& g) {
            return weighted_sum(g, g.layernorm(x, gain, bias), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck softmax") {
    Rng rng(107);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 5), c = rng.uniform_int(2, 7);
        Tensor x = random_tensor({n, c}, rng, -3, 3);
        Tensor w = random_tensor({n, c}, rng, -1, 1, false);
        auto r = check_gradients({x}, [&](Graph& g) {
            return weighted_sum(g, g.softmax(x), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck log_softmax") {
    Rng rng(108);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 5), c = rng.uniform_int(2, 7);
        Tensor x = random_tensor({n, c}, rng, -3, 3);
        Tensor w = random_tensor({n, c}, rng, -1, 1, false);
        auto r = check_gradients({x}, [&](Graph& g) {
            return weighted_sum(g, g.log_softmax(x), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck gather") {
    Rng rng(109);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 6), c = rng.uniform_int(2, 7);
        Tensor x = random_tensor({n, c}, rng);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
        for (auto& i : idx) i = rng.uniform_int(0, c);
        Tensor w = random_tensor({n}, rng, -1, 1, false);
        auto r = check_gradients({x}, [&](Graph& g) {
            return weighted_sum(g, g.gather(x, idx), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck sum and mean") {
    Rng rng(110);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 5), c = rng.uniform_int(1, 6);
        Tensor x = random_tensor({n, c}, rng);
        auto r1 = check_gradients({x}, [&](Graph& g) { return g.sum(x); });
        CHECK(r1.max_rel_err < kTol);
        auto r2 = check_gradients({x}, [&](Graph& g) { return g.mean(x); });
        CHECK(r2.max_rel_err < kTol);
    }
}

TEST_CASE("gradcheck reshape and concat") {
    Rng rng(111);
    for (int t = 0; t < kTrials; ++t) {
        const std::int64_t n = rng.uniform_int(1, 4), c = rng.uniform_int(1, 4),
                           c2 = rng.uniform_int(1, 4);
        Tensor a = random_tensor({n, c}, rng);
        Tensor b = random_tensor({n, c2}, rng);
        Tensor w = random_tensor({n * (c + c2)}, rng, -1, 1, false);
        auto r = check_gradients({a, b}, [&](Graph& g) {
            Tensor cat = g.concat({a, b}, 1);
            return weighted_sum(g, g.reshape(cat, {n * (c + c2)}), w);
        });
        CHECK(r.max_rel_err < kTol);
    }
}
