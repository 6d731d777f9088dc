#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "plastinet/rng.hpp"

namespace plastinet {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense n-dimensional array of 64-bit reals, row-major. Copies of a Tensor
/// are handles to the same storage; use clone() for a deep copy. Scalars use
/// the empty shape {}.
///
/// Invariants: product(shape) == data().size(); grad, when allocated, has the
/// same length as data.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value);
    /// Entries drawn uniform(-bound, bound) with bound = 1/sqrt(fan_in).
    static Tensor uniform_init(Shape shape, std::int64_t fan_in, Rng& rng, bool requires_grad = true);

    bool defined() const { return impl_ != nullptr; }

    const Shape& shape() const;
    std::int64_t numel() const;
    int rank() const;
    std::int64_t dim(int axis) const;

    std::vector<double>& data();
    const std::vector<double>& data() const;

    /// Value of a one-element tensor.
    double item() const;

    bool requires_grad() const;
    void set_requires_grad(bool value);

    bool has_grad() const;
    /// Allocates a zero grad buffer on first access.
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();
    void drop_grad();

    /// Deep copy of the value (grad not copied, requires_grad preserved).
    Tensor clone() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad; // empty until requested
        bool requires_grad = false;
    };

    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
    Impl& impl();
    const Impl& impl() const;

    std::shared_ptr<Impl> impl_;
};

} // namespace plastinet
