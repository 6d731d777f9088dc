#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "plastinet/error.hpp"
#include "plastinet/graph.hpp"
#include "support/test_util.hpp"

using namespace plastinet;
using testutil::random_tensor;

TEST_CASE("tensor invariants") {
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.shape() == Shape{2, 3});
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({0, 3}), ShapeError);
    Tensor s = Tensor::scalar(4.0);
    CHECK(s.numel() == 1);
    CHECK(s.item() == 4.0);

    Tensor handle = t;
    handle.data()[0] = 7.0;
    CHECK(t.data()[0] == 7.0); // copies share storage
    Tensor deep = t.clone();
    deep.data()[0] = 9.0;
    CHECK(t.data()[0] == 7.0);
}

TEST_CASE("matmul identity") {
    Graph g;
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor out = g.matmul(a, eye);
    CHECK(out.data() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("matmul transpose flags") {
    Rng rng(3);
    Tensor a = random_tensor({3, 4}, rng, -1, 1, false);
    Tensor b = random_tensor({5, 4}, rng, -1, 1, false);
    Graph g;
    // a [3,4] x b^T [4,5]
    Tensor out = g.matmul(a, b, false, true);
    CHECK(out.shape() == Shape{3, 5});
    double direct = 0.0;
    for (int k = 0; k < 4; ++k) direct += a.data()[0 * 4 + k] * b.data()[2 * 4 + k];
    CHECK(out.data()[0 * 5 + 2] == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("matmul shape error names op and dims") {
    Graph g;
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("matmul"), ShapeError);
}

TEST_CASE("conv2d with identity kernel") {
    Graph g;
    Rng rng(1);
    Tensor x = random_tensor({2, 1, 4, 4}, rng, -1, 1, false);
    Tensor k = Tensor::from_data({1, 1, 1, 1}, {1.0});
    Tensor out = g.conv2d(x, k, Tensor(), 1, 0);
    CHECK(out.shape() == x.shape());
    CHECK(out.data() == x.data());
}

TEST_CASE("conv2d shape checks") {
    Graph g;
    Tensor x = Tensor::zeros({1, 3, 8, 8});
    Tensor k = Tensor::zeros({4, 2, 3, 3});
    CHECK_THROWS_WITH_AS(g.conv2d(x, k, Tensor(), 1, 1), doctest::Contains("conv2d"), ShapeError);
}

TEST_CASE("softmax symmetry and row sums") {
    Graph g;
    Tensor x = Tensor::from_data({4}, {0, 0, 0, 0});
    Tensor y = g.softmax(x);
    for (double v : y.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

    Rng rng(7);
    Tensor logits = random_tensor({16, 9}, rng, -5, 5, false);
    Tensor probs = g.softmax(logits);
    for (int r = 0; r < 16; ++r) {
        double s = 0.0;
        for (int c = 0; c < 9; ++c) s += probs.data()[r * 9 + c];
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("backward on x*x") {
    Graph g;
    Tensor x = Tensor::from_data({}, {3.0}, true);
    Tensor loss = g.mul(x, x);
    g.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward through inactive relu") {
    Graph g;
    Tensor x = Tensor::from_data({}, {-1.0}, true);
    Tensor loss = g.relu(x);
    g.backward(loss);
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    Graph g;
    Tensor x = Tensor::zeros({2, 2}, true);
    Tensor y = g.relu(x);
    CHECK_THROWS_AS(g.backward(y), ShapeError);
}

TEST_CASE("matmul chain gradients match finite differences") {
    Rng rng(11);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    auto result = testutil::check_gradients({a, b}, [&](Graph& g) {
        return g.mean(g.matmul(a, b));
    });
    CHECK(result.checked == 20);
    CHECK(result.max_rel_err < 1e-4);
}

TEST_CASE("gather picks and scatters") {
    Graph g;
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor y = g.gather(x, {2, 0});
    CHECK(y.data() == std::vector<double>{3, 4});
    Tensor loss = g.sum(y);
    g.backward(loss);
    CHECK(x.grad() == std::vector<double>{0, 0, 1, 1, 0, 0});
    CHECK_THROWS_WITH_AS(g.gather(x, {3, 0}), doctest::Contains("out of range"), ShapeError);
}

TEST_CASE("add and mul broadcasting") {
    Graph g;
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor bias = Tensor::from_data({3}, {10, 20, 30});
    CHECK(g.add(a, bias).data() == std::vector<double>{11, 22, 33, 14, 25, 36});

    Tensor rows = Tensor::from_data({2}, {2, 10});
    CHECK(g.mul(a, rows).data() == std::vector<double>{2, 4, 6, 40, 50, 60});

    CHECK(g.mul(a, Tensor::scalar(-1.0)).data() == std::vector<double>{-1, -2, -3, -4, -5, -6});
    CHECK_THROWS_AS(g.add(a, Tensor::zeros({2})), ShapeError);
}

TEST_CASE("concat and split gradients") {
    Graph g;
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
    Tensor b = Tensor::from_data({2, 1}, {5, 6}, true);
    Tensor c = g.concat({a, b}, 1);
    CHECK(c.shape() == Shape{2, 3});
    CHECK(c.data() == std::vector<double>{1, 2, 5, 3, 4, 6});
    Tensor w = Tensor::from_data({2, 3}, {1, 1, 2, 1, 1, 3});
    g.backward(g.sum(g.mul(c, w)));
    CHECK(a.grad() == std::vector<double>{1, 1, 1, 1});
    CHECK(b.grad() == std::vector<double>{2, 3});
}

TEST_CASE("reshape round trip") {
    Graph g;
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor y = g.reshape(x, {3, 2});
    CHECK(y.shape() == Shape{3, 2});
    CHECK_THROWS_AS(g.reshape(x, {4, 2}), ShapeError);
    g.backward(g.mean(y));
    for (double v : x.grad()) CHECK(v == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("maxpool2 selects window maxima") {
    Graph g;
    Tensor x = Tensor::from_data({1, 1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8}, true);
    Tensor y = g.maxpool2(x);
    CHECK(y.shape() == Shape{1, 1, 1, 2});
    CHECK(y.data() == std::vector<double>{6, 8});
    g.backward(g.sum(y));
    CHECK(x.grad() == std::vector<double>{0, 0, 0, 0, 0, 1, 0, 1});
    CHECK_THROWS_AS(g.maxpool2(Tensor::zeros({1, 1, 3, 4})), ShapeError);
}

TEST_CASE("unreachable leaves get zero grads") {
    Graph g;
    Tensor used = Tensor::from_data({}, {2.0}, true);
    Tensor unused = Tensor::from_data({}, {5.0}, true);
    g.relu(unused); // on the tape but not feeding the loss
    Tensor loss = g.mul(used, used);
    g.backward(loss);
    CHECK(unused.has_grad());
    CHECK(unused.grad()[0] == 0.0);
    CHECK(used.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("determinism: identical seeds give bit-identical outputs and grads") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tensor x = random_tensor({4, 6}, rng);
        Tensor w = random_tensor({3, 6}, rng);
        Graph g;
        Tensor loss = g.mean(g.relu(g.matmul(x, w, false, true)));
        g.backward(loss);
        return std::make_pair(loss.item(), x.grad());
    };
    auto [l1, g1] = run(42);
    auto [l2, g2] = run(42);
    CHECK(l1 == l2);
    CHECK(g1 == g2);
}
