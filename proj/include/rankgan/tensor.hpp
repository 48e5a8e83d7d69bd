#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rankgan/errors.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily, same length as values
    bool requires_grad = false;
    bool consumed = false;  // interior node already swept by backward()
    std::string name;       // parameters only
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

}  // namespace detail

// Value-semantics handle to a node in the reverse-mode differentiation graph.
// Values are immutable after construction except for parameters, which the
// optimizer updates in place between forward passes.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor parameter(Shape shape, std::vector<double> values, std::string name);

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const;
    int dim(int i) const;
    std::size_t size() const;
    const std::vector<double>& values() const;
    double value() const;  // scalar tensors only
    double operator[](std::size_t i) const { return values()[i]; }
    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;
    const std::string& name() const;
    std::uint64_t id() const;

    void zero_grad();
    std::vector<double>& mutable_values();  // parameters only
    Tensor detached() const;                // constant copy of the values

    std::shared_ptr<detail::Node> node() const { return n_; }
    static Tensor wrap(std::shared_ptr<detail::Node> n) { return Tensor(std::move(n)); }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::Node> n_;
};

// Elementwise / reduction ops. All differentiate through backward().
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor sqrt_floor(const Tensor& a, double floor);
Tensor log_floor(const Tensor& a, double floor);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor at_index(const Tensor& a, std::size_t i);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& a, Shape shape);

// Layer ops.
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);
Tensor max_pool(const Tensor& a, int k, int stride);
Tensor global_avg_pool(const Tensor& a);
Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor dropout(const Tensor& a, double p, Rng& rng, bool training);
Tensor l2_normalize(const Tensor& a, double eps = 1e-12);
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad);
Tensor transposed_conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad);
Tensor bias_add_channel(const Tensor& x, const Tensor& b);
Tensor upsample_bilinear(const Tensor& input, int oh, int ow);

// Reverse sweep from a scalar loss. Accumulates into parameter grads;
// interior nodes are single-use and a second sweep without a fresh forward
// raises StaleGraphError.
void backward(const Tensor& loss);

}  // namespace rankgan
