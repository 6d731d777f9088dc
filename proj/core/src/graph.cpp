#include "plastinet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Core>

#include "plastinet/error.hpp"

namespace plastinet {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

bool is_prefix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.begin(), small.end(), big.begin());
}

std::int64_t rows_of(const Tensor& t) {
    // Collapses all leading axes; last axis is the feature axis.
    if (t.rank() < 1) throw ShapeError("op requires rank >= 1, got scalar");
    return t.numel() / t.dim(t.rank() - 1);
}

void accumulate(Tensor& t, const std::vector<double>& delta) {
    auto& g = t.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

} // namespace

void Graph::record(const char* op, std::vector<Tensor> inputs, const Tensor& output,
                   std::function<void(Node&)> backprop) {
    nodes_.push_back(Node{op, std::move(inputs), output, std::move(backprop)});
}

void Graph::clear() { nodes_.clear(); }

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ShapeError(std::string("backward: loss must be a scalar, got shape ") +
                         (loss.defined() ? shape_str(loss.shape()) : "<undefined>"));
    }
    // Every requires_grad tensor that entered the tape gets a grad buffer, so
    // leaves unreachable from the loss read as zero.
    for (auto& node : nodes_) {
        for (auto& in : node.inputs) {
            if (in.requires_grad()) in.grad();
        }
        if (node.output.requires_grad()) node.output.grad();
    }
    Tensor seed = loss;
    seed.grad().assign(1, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!it->output.has_grad()) continue;
        it->backprop(*it);
    }
}

// ---------------------------------------------------------------------------
// matmul

Tensor Graph::matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul: operands must be rank 2, got " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const std::int64_t m = transpose_a ? a.dim(1) : a.dim(0);
    const std::int64_t k = transpose_a ? a.dim(0) : a.dim(1);
    const std::int64_t kb = transpose_b ? b.dim(1) : b.dim(0);
    const std::int64_t n = transpose_b ? b.dim(0) : b.dim(1);
    if (k != kb) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                         (transpose_a ? "^T" : "") + " x " + shape_str(b.shape()) +
                         (transpose_b ? "^T" : ""));
    }

    const bool need = a.requires_grad() || b.requires_grad();
    Tensor out = Tensor::zeros({m, n}, need);

    MapC A(a.data().data(), a.dim(0), a.dim(1));
    MapC B(b.data().data(), b.dim(0), b.dim(1));
    MapM C(out.data().data(), m, n);
    if (!transpose_a && !transpose_b) C.noalias() = A * B;
    else if (!transpose_a && transpose_b) C.noalias() = A * B.transpose();
    else if (transpose_a && !transpose_b) C.noalias() = A.transpose() * B;
    else C.noalias() = A.transpose() * B.transpose();

    if (need) {
        record("matmul", {a, b}, out, [transpose_a, transpose_b, m, n, k](Node& node) {
            Tensor a_in = node.inputs[0];
            Tensor b_in = node.inputs[1];
            MapC G(node.output.grad().data(), m, n);
            MapC A(a_in.data().data(), a_in.dim(0), a_in.dim(1));
            MapC B(b_in.data().data(), b_in.dim(0), b_in.dim(1));
            (void)k;
            if (a_in.requires_grad()) {
                MapM dA(a_in.grad().data(), a_in.dim(0), a_in.dim(1));
                // d(opA) = G * opB^T; transpose back if a was read transposed.
                if (!transpose_a) {
                    if (!transpose_b) dA.noalias() += G * B.transpose();
                    else dA.noalias() += G * B;
                } else {
                    if (!transpose_b) dA.noalias() += B * G.transpose();
                    else dA.noalias() += B.transpose() * G.transpose();
                }
            }
            if (b_in.requires_grad()) {
                MapM dB(b_in.grad().data(), b_in.dim(0), b_in.dim(1));
                // d(opB) = opA^T * G; transpose back if b was read transposed.
                if (!transpose_b) {
                    if (!transpose_a) dB.noalias() += A.transpose() * G;
                    else dB.noalias() += A * G;
                } else {
                    if (!transpose_a) dB.noalias() += G.transpose() * A;
                    else dB.noalias() += G.transpose() * A.transpose();
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// add / mul

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    enum class Mode { same, scalar, suffix } mode;
    if (a.shape() == b.shape()) mode = Mode::same;
    else if (b.numel() == 1) mode = Mode::scalar;
    else if (is_suffix(b.shape(), a.shape())) mode = Mode::suffix;
    else {
        throw ShapeError("add: shape " + shape_str(b.shape()) + " does not broadcast onto " +
                         shape_str(a.shape()));
    }

    const bool need = a.requires_grad() || b.requires_grad();
    Tensor out = Tensor::zeros(a.shape(), need);
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    const std::int64_t nb = b.numel();
    switch (mode) {
        case Mode::same:
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
            break;
        case Mode::scalar:
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[0];
            break;
        case Mode::suffix:
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i % nb];
            break;
    }

    if (need) {
        record("add", {a, b}, out, [mode, nb](Node& node) {
            const auto& g = node.output.grad();
            Tensor a_in = node.inputs[0];
            Tensor b_in = node.inputs[1];
            if (a_in.requires_grad()) {
                auto& da = a_in.grad();
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
            }
            if (b_in.requires_grad()) {
                auto& db = b_in.grad();
                switch (mode) {
                    case Mode::same:
                        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
                        break;
                    case Mode::scalar:
                        for (std::size_t i = 0; i < g.size(); ++i) db[0] += g[i];
                        break;
                    case Mode::suffix:
                        for (std::size_t i = 0; i < g.size(); ++i) db[i % nb] += g[i];
                        break;
                }
            }
        });
    }
    return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    enum class Mode { same, scalar, prefix } mode;
    if (a.shape() == b.shape()) mode = Mode::same;
    else if (b.numel() == 1) mode = Mode::scalar;
    else if (is_prefix(b.shape(), a.shape())) mode = Mode::prefix;
    else {
        throw ShapeError("mul: shape " + shape_str(b.shape()) + " does not broadcast onto " +
                         shape_str(a.shape()));
    }

    const bool need = a.requires_grad() || b.requires_grad();
    Tensor out = Tensor::zeros(a.shape(), need);
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    const std::int64_t rep = a.numel() / b.numel();
    switch (mode) {
        case Mode::same:
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
            break;
        case Mode::scalar:
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[0];
            break;
        case Mode::prefix:
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i / rep];
            break;
    }

    if (need) {
        record("mul", {a, b}, out, [mode, rep](Node& node) {
            const auto& g = node.output.grad();
            Tensor a_in = node.inputs[0];
            Tensor b_in = node.inputs[1];
            const auto& av = a_in.data();
            const auto& bv = b_in.data();
            if (a_in.requires_grad()) {
                auto& da = a_in.grad();
                switch (mode) {
                    case Mode::same:
                        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
                        break;
                    case Mode::scalar:
                        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[0];
                        break;
                    case Mode::prefix:
                        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i / rep];
                        break;
                }
            }
            if (b_in.requires_grad()) {
                auto& db = b_in.grad();
                switch (mode) {
                    case Mode::same:
                        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
                        break;
                    case Mode::scalar:
                        for (std::size_t i = 0; i < g.size(); ++i) db[0] += g[i] * av[i];
                        break;
                    case Mode::prefix:
                        for (std::size_t i = 0; i < g.size(); ++i) db[i / rep] += g[i] * av[i];
                        break;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// relu

Tensor Graph::relu(const Tensor& x) {
    const bool need = x.requires_grad();
    Tensor out = Tensor::zeros(x.shape(), need);
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    if (need) {
        record("relu", {x}, out, [](Node& node) {
            const auto& g = node.output.grad();
            Tensor x_in = node.inputs[0];
            const auto& xv = x_in.data();
            auto& dx = x_in.grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (xv[i] > 0.0) dx[i] += g[i];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// conv2d (im2col + GEMM)

Tensor Graph::conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride,
                     int padding) {
    if (x.rank() != 4 || kernel.rank() != 4) {
        throw ShapeError("conv2d: expects NCHW input and OIHW kernel, got " + shape_str(x.shape()) +
                         " and " + shape_str(kernel.shape()));
    }
    if (stride < 1 || padding < 0) throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
    const std::int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t co = kernel.dim(0), kci = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    if (ci != kci) {
        throw ShapeError("conv2d: input channels " + std::to_string(ci) + " != kernel channels " +
                         std::to_string(kci));
    }
    if (h + 2 * padding < kh || w + 2 * padding < kw) {
        throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                         shape_str(x.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != co)) {
        throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " must be [" +
                         std::to_string(co) + "]");
    }
    const std::int64_t ho = (h + 2 * padding - kh) / stride + 1;
    const std::int64_t wo = (w + 2 * padding - kw) / stride + 1;
    const std::int64_t ckk = ci * kh * kw;
    const std::int64_t rows = n * ho * wo;

    auto col = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows * ckk), 0.0);
    const auto& xv = x.data();
    {
        double* cp = col->data();
        for (std::int64_t bi = 0; bi < n; ++bi) {
            for (std::int64_t oh = 0; oh < ho; ++oh) {
                for (std::int64_t ow = 0; ow < wo; ++ow) {
                    for (std::int64_t c = 0; c < ci; ++c) {
                        const double* xplane = xv.data() + (bi * ci + c) * h * w;
                        for (std::int64_t ki = 0; ki < kh; ++ki) {
                            const std::int64_t iy = oh * stride - padding + ki;
                            for (std::int64_t kj = 0; kj < kw; ++kj) {
                                const std::int64_t ix = ow * stride - padding + kj;
                                *cp++ = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                            ? xplane[iy * w + ix]
                                            : 0.0;
                            }
                        }
                    }
                }
            }
        }
    }

    const bool need =
        x.requires_grad() || kernel.requires_grad() || (bias.defined() && bias.requires_grad());
    Tensor out = Tensor::zeros({n, co, ho, wo}, need);

    // out_rows [rows, co] = col [rows, ckk] * K2d^T with K2d = kernel viewed [co, ckk].
    std::vector<double> out_rows(static_cast<std::size_t>(rows * co));
    {
        MapC COL(col->data(), rows, ckk);
        MapC K2(kernel.data().data(), co, ckk);
        MapM OR_(out_rows.data(), rows, co);
        OR_.noalias() = COL * K2.transpose();
    }
    {
        auto& ov = out.data();
        const double* bp = bias.defined() ? bias.data().data() : nullptr;
        for (std::int64_t bi = 0; bi < n; ++bi) {
            for (std::int64_t oh = 0; oh < ho; ++oh) {
                for (std::int64_t ow = 0; ow < wo; ++ow) {
                    const std::int64_t r = (bi * ho + oh) * wo + ow;
                    for (std::int64_t c = 0; c < co; ++c) {
                        ov[((bi * co + c) * ho + oh) * wo + ow] =
                            out_rows[r * co + c] + (bp ? bp[c] : 0.0);
                    }
                }
            }
        }
    }

    if (need) {
        std::vector<Tensor> inputs = {x, kernel};
        if (bias.defined()) inputs.push_back(bias);
        record("conv2d", std::move(inputs), out,
               [col, n, ci, h, w, co, kh, kw, ho, wo, ckk, rows, stride, padding](Node& node) {
                   Tensor x_in = node.inputs[0];
                   Tensor k_in = node.inputs[1];
                   Tensor b_in = node.inputs.size() > 2 ? node.inputs[2] : Tensor();

                   // Gather dOut into row-major [rows, co].
                   std::vector<double> gr(static_cast<std::size_t>(rows * co));
                   const auto& og = node.output.grad();
                   for (std::int64_t bi = 0; bi < n; ++bi)
                       for (std::int64_t c = 0; c < co; ++c)
                           for (std::int64_t oh = 0; oh < ho; ++oh)
                               for (std::int64_t ow = 0; ow < wo; ++ow)
                                   gr[((bi * ho + oh) * wo + ow) * co + c] =
                                       og[((bi * co + c) * ho + oh) * wo + ow];

                   MapC G(gr.data(), rows, co);
                   if (k_in.requires_grad()) {
                       MapC COL(col->data(), rows, ckk);
                       MapM dK(k_in.grad().data(), co, ckk);
                       dK.noalias() += G.transpose() * COL;
                   }
                   if (b_in.defined() && b_in.requires_grad()) {
                       auto& db = b_in.grad();
                       for (std::int64_t r = 0; r < rows; ++r)
                           for (std::int64_t c = 0; c < co; ++c) db[c] += gr[r * co + c];
                   }
                   if (x_in.requires_grad()) {
                       std::vector<double> dcol(static_cast<std::size_t>(rows * ckk));
                       {
                           MapC K2(k_in.data().data(), co, ckk);
                           MapM DC(dcol.data(), rows, ckk);
                           DC.noalias() = G * K2;
                       }
                       auto& dx = x_in.grad();
                       const double* cp = dcol.data();
                       for (std::int64_t bi = 0; bi < n; ++bi) {
                           for (std::int64_t oh = 0; oh < ho; ++oh) {
                               for (std::int64_t ow = 0; ow < wo; ++ow) {
                                   for (std::int64_t c = 0; c < ci; ++c) {
                                       double* xplane = dx.data() + (bi * ci + c) * h * w;
                                       for (std::int64_t ki = 0; ki < kh; ++ki) {
                                           const std::int64_t iy = oh * stride - padding + ki;
                                           for (std::int64_t kj = 0; kj < kw; ++kj) {
                                               const std::int64_t ix = ow * stride - padding + kj;
                                               if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                                   xplane[iy * w + ix] += *cp;
                                               ++cp;
                                           }
                                       }
                                   }
                               }
                           }
                       }
                   }
               });
    }
    return out;
}

// ---------------------------------------------------------------------------
// maxpool2

Tensor Graph::maxpool2(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("maxpool2: expects NCHW input, got " + shape_str(x.shape()));
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("maxpool2: H and W must be even, got " + shape_str(x.shape()));
    }
    const std::int64_t ho = h / 2, wo = w / 2;
    const bool need = x.requires_grad();
    Tensor out = Tensor::zeros({n, c, ho, wo}, need);
    auto argmax = std::make_shared<std::vector<std::int64_t>>(
        static_cast<std::size_t>(out.numel()));
    const auto& xv = x.data();
    auto& ov = out.data();
    std::int64_t oi = 0;
    for (std::int64_t plane = 0; plane < n * c; ++plane) {
        const double* xp = xv.data() + plane * h * w;
        const std::int64_t base = plane * h * w;
        for (std::int64_t oh = 0; oh < ho; ++oh) {
            for (std::int64_t ow = 0; ow < wo; ++ow) {
                std::int64_t best = (2 * oh) * w + (2 * ow);
                double bv = xp[best];
                const std::int64_t cand[3] = {(2 * oh) * w + (2 * ow + 1),
                                              (2 * oh + 1) * w + (2 * ow),
                                              (2 * oh + 1) * w + (2 * ow + 1)};
                for (std::int64_t k : cand) {
                    if (xp[k] > bv) {
                        bv = xp[k];
                        best = k;
                    }
                }
                ov[oi] = bv;
                (*argmax)[oi] = base + best;
                ++oi;
            }
        }
    }
    if (need) {
        record("maxpool2", {x}, out, [argmax](Node& node) {
            const auto& g = node.output.grad();
            auto& dx = node.inputs[0].grad();
            for (std::size_t i = 0; i < g.size(); ++i) dx[(*argmax)[i]] += g[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// layernorm

Tensor Graph::layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::int64_t d = x.dim(x.rank() - 1);
    if (gain.rank() != 1 || gain.dim(0) != d || bias.rank() != 1 || bias.dim(0) != d) {
        throw ShapeError("layernorm: gain/bias must be [" + std::to_string(d) + "], got " +
                         shape_str(gain.shape()) + " and " + shape_str(bias.shape()));
    }
    const std::int64_t rows = rows_of(x);
    const bool need = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
    Tensor out = Tensor::zeros(x.shape(), need);
    auto stats = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows * 2));
    const auto& xv = x.data();
    const auto& gv = gain.data();
    const auto& bv = bias.data();
    auto& ov = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xp = xv.data() + r * d;
        double mu = 0.0;
        for (std::int64_t j = 0; j < d; ++j) mu += xp[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double c = xp[j] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double rstd = 1.0 / std::sqrt(var + eps);
        (*stats)[2 * r] = mu;
        (*stats)[2 * r + 1] = rstd;
        double* op = ov.data() + r * d;
        for (std::int64_t j = 0; j < d; ++j) op[j] = (xp[j] - mu) * rstd * gv[j] + bv[j];
    }
    if (need) {
        record("layernorm", {x, gain, bias}, out, [stats, rows, d](Node& node) {
            const auto& g = node.output.grad();
            Tensor x_in = node.inputs[0];
            Tensor gain_in = node.inputs[1];
            Tensor bias_in = node.inputs[2];
            const auto& xv = x_in.data();
            const auto& gv = gain_in.data();
            for (std::int64_t r = 0; r < rows; ++r) {
                const double mu = (*stats)[2 * r];
                const double rstd = (*stats)[2 * r + 1];
                const double* xp = xv.data() + r * d;
                const double* gp = g.data() + r * d;
                if (gain_in.requires_grad()) {
                    auto& dg = gain_in.grad();
                    for (std::int64_t j = 0; j < d; ++j) dg[j] += gp[j] * (xp[j] - mu) * rstd;
                }
                if (bias_in.requires_grad()) {
                    auto& db = bias_in.grad();
                    for (std::int64_t j = 0; j < d; ++j) db[j] += gp[j];
                }
                if (x_in.requires_grad()) {
                    auto& dx = x_in.grad();
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (std::int64_t j = 0; j < d; ++j) {
                        const double xhat = (xp[j] - mu) * rstd;
                        const double dxhat = gp[j] * gv[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::int64_t j = 0; j < d; ++j) {
                        const double xhat = (xp[j] - mu) * rstd;
                        const double dxhat = gp[j] * gv[j];
                        dx[r * d + j] +=
                            rstd * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax / log_softmax

Tensor Graph::softmax(const Tensor& x) {
    const std::int64_t d = x.dim(x.rank() - 1);
    const std::int64_t rows = rows_of(x);
    const bool need = x.requires_grad();
    Tensor out = Tensor::zeros(x.shape(), need);
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xp = xv.data() + r * d;
        double* op = ov.data() + r * d;
        double mx = xp[0];
        for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, xp[j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            op[j] = std::exp(xp[j] - mx);
            z += op[j];
        }
        const double inv = 1.0 / z;
        for (std::int64_t j = 0; j < d; ++j) op[j] *= inv;
    }
    if (need) {
        record("softmax", {x}, out, [rows, d](Node& node) {
            const auto& g = node.output.grad();
            const auto& y = node.output.data();
            auto& dx = node.inputs[0].grad();
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* gp = g.data() + r * d;
                const double* yp = y.data() + r * d;
                double dot = 0.0;
                for (std::int64_t j = 0; j < d; ++j) dot += gp[j] * yp[j];
                for (std::int64_t j = 0; j < d; ++j) dx[r * d + j] += yp[j] * (gp[j] - dot);
            }
        });
    }
    return out;
}

Tensor Graph::log_softmax(const Tensor& x) {
    const std::int64_t d = x.dim(x.rank() - 1);
    const std::int64_t rows = rows_of(x);
    const bool need = x.requires_grad();
    Tensor out = Tensor::zeros(x.shape(), need);
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xp = xv.data() + r * d;
        double* op = ov.data() + r * d;
        double mx = xp[0];
        for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, xp[j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < d; ++j) z += std::exp(xp[j] - mx);
        const double lse = mx + std::log(z);
        for (std::int64_t j = 0; j < d; ++j) op[j] = xp[j] - lse;
    }
    if (need) {
        record("log_softmax", {x}, out, [rows, d](Node& node) {
            const auto& g = node.output.grad();
            const auto& y = node.output.data();
            auto& dx = node.inputs[0].grad();
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* gp = g.data() + r * d;
                const double* yp = y.data() + r * d;
                double gsum = 0.0;
                for (std::int64_t j = 0; j < d; ++j) gsum += gp[j];
                for (std::int64_t j = 0; j < d; ++j)
                    dx[r * d + j] += gp[j] - std::exp(yp[j]) * gsum;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// gather / reductions / reshape / concat

Tensor Graph::gather(const Tensor& x, const std::vector<std::int64_t>& index) {
    if (x.rank() != 2) throw ShapeError("gather: expects rank-2 input, got " + shape_str(x.shape()));
    const std::int64_t n = x.dim(0), c = x.dim(1);
    if (static_cast<std::int64_t>(index.size()) != n) {
        throw ShapeError("gather: index length " + std::to_string(index.size()) +
                         " != row count " + std::to_string(n));
    }
    for (std::int64_t i = 0; i < n; ++i) {
        if (index[i] < 0 || index[i] >= c) {
            throw ShapeError("gather: index " + std::to_string(index[i]) + " at row " +
                             std::to_string(i) + " out of range [0," + std::to_string(c) + ")");
        }
    }
    const bool need = x.requires_grad();
    Tensor out = Tensor::zeros({n}, need);
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::int64_t i = 0; i < n; ++i) ov[i] = xv[i * c + index[i]];
    if (need) {
        auto idx = std::make_shared<std::vector<std::int64_t>>(index);
        record("gather", {x}, out, [idx, c](Node& node) {
            const auto& g = node.output.grad();
            auto& dx = node.inputs[0].grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                dx[static_cast<std::int64_t>(i) * c + (*idx)[i]] += g[i];
        });
    }
    return out;
}

Tensor Graph::sum(const Tensor& x) {
    const bool need = x.requires_grad();
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = Tensor::from_data({}, {s}, need);
    if (need) {
        record("sum", {x}, out, [](Node& node) {
            const double g = node.output.grad()[0];
            auto& dx = node.inputs[0].grad();
            for (auto& v : dx) v += g;
        });
    }
    return out;
}

Tensor Graph::mean(const Tensor& x) {
    const bool need = x.requires_grad();
    double s = 0.0;
    for (double v : x.data()) s += v;
    const double inv = 1.0 / static_cast<double>(x.numel());
    Tensor out = Tensor::from_data({}, {s * inv}, need);
    if (need) {
        record("mean", {x}, out, [inv](Node& node) {
            const double g = node.output.grad()[0] * inv;
            auto& dx = node.inputs[0].grad();
            for (auto& v : dx) v += g;
        });
    }
    return out;
}

Tensor Graph::reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
    }
    const bool need = x.requires_grad();
    Tensor out = Tensor::from_data(std::move(new_shape), x.data(), need);
    if (need) {
        record("reshape", {x}, out, [](Node& node) {
            accumulate(node.inputs[0], node.output.grad());
        });
    }
    return out;
}

Tensor Graph::concat(const std::vector<Tensor>& xs, int axis) {
    if (xs.empty()) throw ShapeError("concat: needs at least one input");
    const int rank = xs[0].rank();
    if (axis < 0 || axis >= rank) {
        throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
    }
    Shape out_shape = xs[0].shape();
    std::int64_t axis_total = 0;
    for (const auto& t : xs) {
        if (t.rank() != rank) throw ShapeError("concat: rank mismatch");
        for (int i = 0; i < rank; ++i) {
            if (i != axis && t.dim(i) != out_shape[static_cast<std::size_t>(i)]) {
                throw ShapeError("concat: shape " + shape_str(t.shape()) +
                                 " incompatible with " + shape_str(xs[0].shape()) + " on axis " +
                                 std::to_string(i));
            }
        }
        axis_total += t.dim(axis);
    }
    out_shape[static_cast<std::size_t>(axis)] = axis_total;

    bool need = false;
    for (const auto& t : xs) need = need || t.requires_grad();
    Tensor out = Tensor::zeros(out_shape, need);

    std::int64_t outer = 1;
    for (int i = 0; i < axis; ++i) outer *= out_shape[static_cast<std::size_t>(i)];
    std::int64_t inner = 1;
    for (int i = axis + 1; i < rank; ++i) inner *= out_shape[static_cast<std::size_t>(i)];

    auto& ov = out.data();
    std::int64_t offset = 0;
    for (const auto& t : xs) {
        const std::int64_t block = t.dim(axis) * inner;
        const auto& tv = t.data();
        for (std::int64_t o = 0; o < outer; ++o) {
            std::copy(tv.begin() + o * block, tv.begin() + (o + 1) * block,
                      ov.begin() + o * axis_total * inner + offset);
        }
        offset += block;
    }

    if (need) {
        record("concat", xs, out, [outer, inner, axis_total](Node& node) {
            const auto& g = node.output.grad();
            std::int64_t offset = 0;
            for (auto& t : node.inputs) {
                const std::int64_t t_axis_dim = t.numel() / (outer * inner);
                const std::int64_t blk = t_axis_dim * inner;
                if (t.requires_grad()) {
                    auto& dt = t.grad();
                    for (std::int64_t o = 0; o < outer; ++o) {
                        const double* gp = g.data() + o * axis_total * inner + offset;
                        double* dp = dt.data() + o * blk;
                        for (std::int64_t i = 0; i < blk; ++i) dp[i] += gp[i];
                    }
                }
                offset += blk;
            }
        });
    }
    return out;
}

} // namespace plastinet
