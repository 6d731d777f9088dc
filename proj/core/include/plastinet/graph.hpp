#pragma once

#include <functional>
#include <vector>

#include "plastinet/tensor.hpp"

namespace plastinet {

/// Reverse-mode tape. Primitive ops append nodes in construction order, which
/// is topological by construction; backward() walks the tape in reverse and
/// accumulates d(loss)/d(leaf) into every requires_grad leaf.
///
/// One graph per training step, single-threaded. Ops whose output does not
/// require grad are computed but not recorded.
class Graph {
public:
    /// a [m,k] x b [k,n] -> [m,n]; transpose flags read the operand transposed.
    Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);

    /// Elementwise sum. b may also be a scalar or a suffix of a's shape
    /// (bias-style broadcast over leading axes).
    Tensor add(const Tensor& a, const Tensor& b);

    /// Elementwise product. b may also be a scalar, a prefix of a's shape
    /// (per-row scaling), or a suffix (per-column scaling).
    Tensor mul(const Tensor& a, const Tensor& b);

    Tensor relu(const Tensor& x);

    /// x [N,Cin,H,W], kernel [Cout,Cin,kh,kw] (OIHW), optional bias [Cout].
    Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride = 1,
                  int padding = 0);

    /// 2x2 max pooling with stride 2; H and W must be even.
    Tensor maxpool2(const Tensor& x);

    /// Normalizes over the last axis with learnable gain/bias of that width.
    Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

    /// Softmax over the last axis.
    Tensor softmax(const Tensor& x);

    /// Log-softmax over the last axis.
    Tensor log_softmax(const Tensor& x);

    /// x [n, c] with one index per row -> [n] picking x[i, index[i]].
    Tensor gather(const Tensor& x, const std::vector<std::int64_t>& index);

    /// Full reduction to a scalar.
    Tensor sum(const Tensor& x);
    Tensor mean(const Tensor& x);

    Tensor reshape(const Tensor& x, Shape new_shape);

    /// Concatenate along `axis`; all other dimensions must match.
    Tensor concat(const std::vector<Tensor>& xs, int axis);

    /// Seeds d(loss)/d(loss) = 1 and runs the tape in reverse. loss must be a
    /// one-element tensor. The tape is kept; call clear() (or destroy the
    /// graph) to release it.
    void backward(const Tensor& loss);

    void clear();
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        const char* op;
        std::vector<Tensor> inputs;
        Tensor output;
        std::function<void(Node&)> backprop;
    };

    // Records a node only when grad will be needed.
    void record(const char* op, std::vector<Tensor> inputs, const Tensor& output,
                std::function<void(Node&)> backprop);

    std::vector<Node> nodes_;
};

} // namespace plastinet
