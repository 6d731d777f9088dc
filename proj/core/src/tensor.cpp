#include "plastinet/tensor.hpp"

#include <cmath>
#include <sstream>

#include "plastinet/error.hpp"

namespace plastinet {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    for (auto d : shape) {
        if (d <= 0) throw ShapeError("tensor: non-positive dimension in shape " + shape_str(shape));
    }
    auto impl = std::make_shared<Impl>();
    impl->data.assign(static_cast<std::size_t>(shape_numel(shape)), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    for (auto d : shape) {
        if (d <= 0) throw ShapeError("tensor: non-positive dimension in shape " + shape_str(shape));
    }
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    }
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) {
    auto impl = std::make_shared<Impl>();
    impl->data.assign(1, value);
    return Tensor(std::move(impl));
}

Tensor Tensor::uniform_init(Shape shape, std::int64_t fan_in, Rng& rng, bool requires_grad) {
    if (fan_in <= 0) throw ShapeError("uniform_init: fan_in must be positive");
    Tensor t = zeros(std::move(shape), requires_grad);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

Tensor::Impl& Tensor::impl() {
    if (!impl_) throw Error("tensor: use of undefined tensor");
    return *impl_;
}

const Tensor::Impl& Tensor::impl() const {
    if (!impl_) throw Error("tensor: use of undefined tensor");
    return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(impl().data.size()); }

int Tensor::rank() const { return static_cast<int>(impl().shape.size()); }

std::int64_t Tensor::dim(int axis) const {
    const auto& s = impl().shape;
    if (axis < 0 || axis >= static_cast<int>(s.size())) {
        throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
    }
    return s[static_cast<std::size_t>(axis)];
}

std::vector<double>& Tensor::data() { return impl().data; }
const std::vector<double>& Tensor::data() const { return impl().data; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("tensor: item() on non-scalar shape " + shape_str(shape()));
    return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool value) { impl().requires_grad = value; }

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::vector<double>& Tensor::grad() {
    auto& im = impl();
    if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
    return im.grad;
}

const std::vector<double>& Tensor::grad() const {
    const auto& im = impl();
    if (im.grad.empty()) throw Error("tensor: grad accessed before backward populated it");
    return im.grad;
}

void Tensor::zero_grad() {
    auto& im = impl();
    if (!im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
}

void Tensor::drop_grad() { impl().grad.clear(); }

Tensor Tensor::clone() const {
    const auto& im = impl();
    auto copy = std::make_shared<Impl>();
    copy->shape = im.shape;
    copy->data = im.data;
    copy->requires_grad = im.requires_grad;
    return Tensor(std::move(copy));
}

} // namespace plastinet
