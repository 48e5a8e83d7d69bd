#include "rankgan/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "rankgan/kernels.hpp"

namespace rankgan {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr new_node(Shape shape, std::vector<double> values) {
    if (shape_size(shape) != values.size())
        throw DimensionError("tensor: shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return n;
}

Tensor make_op(Shape shape, std::vector<double> values,
               std::vector<NodePtr> parents, std::function<void(Node&)> backprop) {
    auto n = new_node(std::move(shape), std::move(values));
    bool needs = false;
    for (const auto& p : parents) needs = needs || (p && p->requires_grad);
    if (needs) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return Tensor::wrap(n);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

void accumulate(Node* p, const std::vector<double>& g) {
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
}

}  // namespace

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw DimensionError("shape extent must be positive, got " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::zeros(Shape shape) {
    std::vector<double> v(shape_size(shape), 0.0);
    return constant(std::move(shape), std::move(v));
}

Tensor Tensor::full(Shape shape, double value) {
    std::vector<double> v(shape_size(shape), value);
    return constant(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(double value) { return constant({1}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values, std::string name) {
    auto n = new_node(std::move(shape), std::move(values));
    n->requires_grad = true;
    n->name = std::move(name);
    return Tensor(n);
}

const Shape& Tensor::shape() const {
    if (!n_) throw Error("tensor: undefined");
    return n_->shape;
}

int Tensor::dim(int i) const { return shape().at(static_cast<std::size_t>(i)); }

std::size_t Tensor::size() const { return values().size(); }

const std::vector<double>& Tensor::values() const {
    if (!n_) throw Error("tensor: undefined");
    return n_->values;
}

double Tensor::value() const {
    if (size() != 1) throw DimensionError("tensor: value() needs a scalar, got " + shape_str(shape()));
    return values()[0];
}

bool Tensor::requires_grad() const { return n_ && n_->requires_grad; }

bool Tensor::has_grad() const { return n_ && n_->grad.size() == n_->values.size(); }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw Error("tensor: no gradient present");
    return n_->grad;
}

const std::string& Tensor::name() const {
    if (!n_) throw Error("tensor: undefined");
    return n_->name;
}

std::uint64_t Tensor::id() const { return n_ ? n_->id : 0; }

void Tensor::zero_grad() {
    if (n_ && n_->requires_grad) n_->grad.assign(n_->values.size(), 0.0);
}

std::vector<double>& Tensor::mutable_values() {
    if (!n_) throw Error("tensor: undefined");
    if (!n_->parents.empty())
        throw Error("tensor: only leaf tensors may be mutated");
    return n_->values;
}

Tensor Tensor::detached() const { return constant(shape(), values()); }

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [pa, pb](Node& self) {
        accumulate(pa, self.grad);
        accumulate(pb, self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [pa, pb](Node& self) {
        accumulate(pa, self.grad);
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * pb->values[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] += self.grad[i] * pa->values[i];
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "div");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / b[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] / pb->values[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] -= self.grad[i] * self.values[i] / pb->values[i];
        }
    });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
    Node* pa = a.node().get();
    return make_op(a.shape(), std::move(out), {a.node()}, [pa, c](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * c;
        }
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + c;
    Node* pa = a.node().get();
    return make_op(a.shape(), std::move(out), {a.node()},
                   [pa](Node& self) { accumulate(pa, self.grad); });
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
    Node* pa = a.node().get();
    return make_op({1}, {s}, {a.node()}, [pa](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += self.grad[0];
        }
    });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op({1}, {s}, {a.node(), b.node()}, [pa, pb](Node& self) {
        const double g = self.grad[0];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g * pb->values[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < pb->grad.size(); ++i) pb->grad[i] += g * pa->values[i];
        }
    });
}

Tensor sqrt_floor(const Tensor& a, double floor) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(std::max(a[i], floor));
    Node* pa = a.node().get();
    return make_op(a.shape(), std::move(out), {a.node()}, [pa, floor](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (pa->values[i] > floor)
                    pa->grad[i] += self.grad[i] * 0.5 / self.values[i];
        }
    });
}

Tensor log_floor(const Tensor& a, double floor) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(a[i], floor));
    Node* pa = a.node().get();
    return make_op(a.shape(), std::move(out), {a.node()}, [pa, floor](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (pa->values[i] > floor)
                    pa->grad[i] += self.grad[i] / pa->values[i];
        }
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(a[i], lo, hi);
    Node* pa = a.node().get();
    return make_op(a.shape(), std::move(out), {a.node()}, [pa, lo, hi](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (pa->values[i] >= lo && pa->values[i] <= hi)
                    pa->grad[i] += self.grad[i];
        }
    });
}

Tensor at_index(const Tensor& a, std::size_t i) {
    if (i >= a.size()) throw DimensionError("at_index: index out of range");
    Node* pa = a.node().get();
    return make_op({1}, {a[i]}, {a.node()}, [pa, i](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            pa->grad[i] += self.grad[0];
        }
    });
}

Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 1 || b.shape().size() != 1)
        throw DimensionError("concat: expects 1-D tensors");
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.values().begin(), a.values().end());
    out.insert(out.end(), b.values().begin(), b.values().end());
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    const std::size_t na = a.size();
    return make_op({static_cast<int>(a.size() + b.size())}, std::move(out),
                   {a.node(), b.node()}, [pa, pb, na](Node& self) {
                       if (pa->requires_grad) {
                           pa->ensure_grad();
                           for (std::size_t i = 0; i < na; ++i) pa->grad[i] += self.grad[i];
                       }
                       if (pb->requires_grad) {
                           pb->ensure_grad();
                           for (std::size_t i = na; i < self.grad.size(); ++i)
                               pb->grad[i - na] += self.grad[i];
                       }
                   });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size())
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                             shape_str(shape));
    Node* pa = a.node().get();
    return make_op(std::move(shape), a.values(), {a.node()},
                   [pa](Node& self) { accumulate(pa, self.grad); });
}

// ---- layer ops ----

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
    Node* pa = a.node().get();
    return make_op(a.shape(), std::move(out), {a.node()}, [pa](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (pa->values[i] > 0.0) pa->grad[i] += self.grad[i];
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a[i];
        out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                          : std::exp(x) / (1.0 + std::exp(x));
    }
    Node* pa = a.node().get();
    return make_op(a.shape(), std::move(out), {a.node()}, [pa](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double y = self.values[i];
                pa->grad[i] += self.grad[i] * y * (1.0 - y);
            }
        }
    });
}

Tensor softmax(const Tensor& a, int axis) {
    const Shape& s = a.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        throw DimensionError("softmax: axis out of range for " + shape_str(s));
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(s[i]);
    for (int i = axis + 1; i < static_cast<int>(s.size()); ++i)
        inner *= static_cast<std::size_t>(s[i]);
    const std::size_t len = static_cast<std::size_t>(s[axis]);

    std::vector<double> out(a.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double mx = a[base];
            for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, a[base + j * inner]);
            double denom = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const double e = std::exp(a[base + j * inner] - mx);
                out[base + j * inner] = e;
                denom += e;
            }
            for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= denom;
        }
    }
    Node* pa = a.node().get();
    return make_op(s, std::move(out), {a.node()}, [pa, outer, inner, len](Node& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * len * inner + in;
                double gy = 0.0;
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t k = base + j * inner;
                    gy += self.grad[k] * self.values[k];
                }
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t k = base + j * inner;
                    pa->grad[k] += self.values[k] * (self.grad[k] - gy);
                }
            }
        }
    });
}

Tensor max_pool(const Tensor& a, int k, int stride) {
    const Shape& s = a.shape();
    if (s.size() != 3) throw DimensionError("max_pool: expects [C,H,W], got " + shape_str(s));
    if (k < 1 || stride < 1) throw ParameterError("max_pool: k and stride must be >= 1");
    const int c = s[0], h = s[1], w = s[2];
    if (k > h || k > w) throw DimensionError("max_pool: window larger than input");
    const int oh = (h - k) / stride + 1;
    const int ow = (w - k) / stride + 1;
    std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
    std::vector<std::size_t> argmax(out.size());
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                std::size_t best_i = 0;
                double best = -1e308;
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const std::size_t i =
                            (static_cast<std::size_t>(ch) * h + oy * stride + ky) * w +
                            ox * stride + kx;
                        if (a[i] > best) {
                            best = a[i];
                            best_i = i;
                        }
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(ch) * oh + oy) * ow + ox;
                out[o] = best;
                argmax[o] = best_i;
            }
        }
    }
    Node* pa = a.node().get();
    return make_op({c, oh, ow}, std::move(out), {a.node()},
                   [pa, argmax = std::move(argmax)](Node& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       for (std::size_t o = 0; o < self.grad.size(); ++o)
                           pa->grad[argmax[o]] += self.grad[o];
                   });
}

Tensor global_avg_pool(const Tensor& a) {
    const Shape& s = a.shape();
    if (s.size() != 3)
        throw DimensionError("global_avg_pool: expects [C,H,W], got " + shape_str(s));
    const int c = s[0];
    const std::size_t hw = static_cast<std::size_t>(s[1]) * s[2];
    std::vector<double> out(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += a[ch * hw + i];
        out[static_cast<std::size_t>(ch)] = acc / static_cast<double>(hw);
    }
    Node* pa = a.node().get();
    return make_op({c}, std::move(out), {a.node()}, [pa, hw](Node& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double inv = 1.0 / static_cast<double>(hw);
        for (std::size_t ch = 0; ch < self.grad.size(); ++ch)
            for (std::size_t i = 0; i < hw; ++i)
                pa->grad[ch * hw + i] += self.grad[ch] * inv;
    });
}

Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 1)
        throw DimensionError("fully_connected: input must be 1-D, got " + shape_str(x.shape()));
    if (w.shape().size() != 2)
        throw DimensionError("fully_connected: weights must be 2-D, got " + shape_str(w.shape()));
    const int m = w.dim(0), n = w.dim(1);
    if (x.dim(0) != n)
        throw DimensionError("fully_connected: input length " + std::to_string(x.dim(0)) +
                             " does not match weight columns " + std::to_string(n));
    if (b.shape() != Shape{m})
        throw DimensionError("fully_connected: bias shape " + shape_str(b.shape()) +
                             " does not match rows " + std::to_string(m));
    std::vector<double> out(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        double acc = b[static_cast<std::size_t>(i)];
        const std::size_t row = static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) acc += w[row + j] * x[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    Node* px = x.node().get();
    Node* pw = w.node().get();
    Node* pb = b.node().get();
    return make_op({m}, std::move(out), {x.node(), w.node(), b.node()},
                   [px, pw, pb, m, n](Node& self) {
                       if (px->requires_grad) {
                           px->ensure_grad();
                           for (int j = 0; j < n; ++j) {
                               double acc = 0.0;
                               for (int i = 0; i < m; ++i)
                                   acc += self.grad[static_cast<std::size_t>(i)] *
                                          pw->values[static_cast<std::size_t>(i) * n + j];
                               px->grad[static_cast<std::size_t>(j)] += acc;
                           }
                       }
                       if (pw->requires_grad) {
                           pw->ensure_grad();
                           for (int i = 0; i < m; ++i) {
                               const double g = self.grad[static_cast<std::size_t>(i)];
                               const std::size_t row = static_cast<std::size_t>(i) * n;
                               for (int j = 0; j < n; ++j)
                                   pw->grad[row + j] += g * px->values[static_cast<std::size_t>(j)];
                           }
                       }
                       if (pb->requires_grad) {
                           pb->ensure_grad();
                           for (int i = 0; i < m; ++i)
                               pb->grad[static_cast<std::size_t>(i)] +=
                                   self.grad[static_cast<std::size_t>(i)];
                       }
                   });
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool training) {
    if (p < 0.0 || p >= 1.0) throw ParameterError("dropout: p must lie in [0,1)");
    if (!training || p == 0.0) return a;
    // Inverted dropout; evaluation needs no rescaling.
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(a.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng.uniform() >= p ? keep_scale : 0.0;
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * mask[i];
    Node* pa = a.node().get();
    return make_op(a.shape(), std::move(out), {a.node()},
                   [pa, mask = std::move(mask)](Node& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                           pa->grad[i] += self.grad[i] * mask[i];
                   });
}

Tensor l2_normalize(const Tensor& a, double eps) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sq += a[i] * a[i];
    const double norm = std::sqrt(sq);
    const double denom = std::max(norm, eps);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / denom;
    Node* pa = a.node().get();
    const bool clamped = norm <= eps;
    return make_op(a.shape(), std::move(out), {a.node()},
                   [pa, denom, clamped](Node& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       if (clamped) {
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                               pa->grad[i] += self.grad[i] / denom;
                           return;
                       }
                       double gy = 0.0;
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                           gy += self.grad[i] * self.values[i];
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                           pa->grad[i] += (self.grad[i] - gy * self.values[i]) / denom;
                   });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad) {
    const Shape& is = input.shape();
    const Shape& ks = kernels.shape();
    if (is.size() != 3)
        throw DimensionError("conv2d: input must be [C,H,W], got " + shape_str(is));
    if (ks.size() != 4)
        throw DimensionError("conv2d: kernels must be [F,C,kh,kw], got " + shape_str(ks));
    if (is[0] != ks[1])
        throw DimensionError("conv2d: input channels (axis 0 = " + std::to_string(is[0]) +
                             ") do not match kernel channels (axis 1 = " + std::to_string(ks[1]) +
                             ")");
    const auto d = kernels::conv_dims(is[0], is[1], is[2], ks[0], ks[2], ks[3], stride, pad);
    std::vector<double> out(static_cast<std::size_t>(d.cout) * d.oh * d.ow);
    kernels::conv2d_forward(input.values().data(), kernels.values().data(), out.data(), d);
    Node* pi = input.node().get();
    Node* pk = kernels.node().get();
    return make_op({d.cout, d.oh, d.ow}, std::move(out), {input.node(), kernels.node()},
                   [pi, pk, d](Node& self) {
                       if (pi->requires_grad) {
                           pi->ensure_grad();
                           std::vector<double> gin(pi->values.size());
                           kernels::conv2d_grad_input(self.grad.data(), pk->values.data(),
                                                      gin.data(), d);
                           for (std::size_t i = 0; i < gin.size(); ++i) pi->grad[i] += gin[i];
                       }
                       if (pk->requires_grad) {
                           pk->ensure_grad();
                           std::vector<double> gk(pk->values.size());
                           kernels::conv2d_grad_kernels(pi->values.data(), self.grad.data(),
                                                        gk.data(), d);
                           for (std::size_t i = 0; i < gk.size(); ++i) pk->grad[i] += gk[i];
                       }
                   });
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad) {
    const Shape& is = input.shape();
    const Shape& ks = kernels.shape();
    if (is.size() != 3)
        throw DimensionError("transposed_conv2d: input must be [C,H,W], got " + shape_str(is));
    if (ks.size() != 4)
        throw DimensionError("transposed_conv2d: kernels must be [C,F,kh,kw], got " +
                             shape_str(ks));
    if (is[0] != ks[0])
        throw DimensionError("transposed_conv2d: input channels (axis 0 = " +
                             std::to_string(is[0]) + ") do not match kernel axis 0 (" +
                             std::to_string(ks[0]) + ")");
    const int hin = is[1], win = is[2];
    const int kh = ks[2], kw = ks[3];
    const int hout = (hin - 1) * stride - 2 * pad + kh;
    const int wout = (win - 1) * stride - 2 * pad + kw;
    if (hout <= 0 || wout <= 0)
        throw DimensionError("transposed_conv2d: non-positive output size");
    // Adjoint of conv2d: pose the forward as the input-gradient of a conv
    // mapping [F,hout,wout] -> [C,hin,win] with the same kernel tensor.
    const auto d = kernels::conv_dims(ks[1], hout, wout, is[0], kh, kw, stride, pad);
    if (d.oh != hin || d.ow != win)
        throw DimensionError("transposed_conv2d: inconsistent geometry");
    std::vector<double> out(static_cast<std::size_t>(ks[1]) * hout * wout);
    kernels::conv2d_grad_input(input.values().data(), kernels.values().data(), out.data(), d);
    Node* pi = input.node().get();
    Node* pk = kernels.node().get();
    return make_op({ks[1], hout, wout}, std::move(out), {input.node(), kernels.node()},
                   [pi, pk, d](Node& self) {
                       if (pi->requires_grad) {
                           pi->ensure_grad();
                           std::vector<double> gin(pi->values.size());
                           kernels::conv2d_forward(self.grad.data(), pk->values.data(),
                                                   gin.data(), d);
                           for (std::size_t i = 0; i < gin.size(); ++i) pi->grad[i] += gin[i];
                       }
                       if (pk->requires_grad) {
                           pk->ensure_grad();
                           std::vector<double> gk(pk->values.size());
                           kernels::conv2d_grad_kernels(self.grad.data(), pi->values.data(),
                                                        gk.data(), d);
                           for (std::size_t i = 0; i < gk.size(); ++i) pk->grad[i] += gk[i];
                       }
                   });
}

Tensor bias_add_channel(const Tensor& x, const Tensor& b) {
    const Shape& s = x.shape();
    if (s.size() != 3)
        throw DimensionError("bias_add_channel: expects [C,H,W], got " + shape_str(s));
    if (b.shape() != Shape{s[0]})
        throw DimensionError("bias_add_channel: bias " + shape_str(b.shape()) +
                             " does not match channels " + std::to_string(s[0]));
    const std::size_t hw = static_cast<std::size_t>(s[1]) * s[2];
    std::vector<double> out(x.size());
    for (int c = 0; c < s[0]; ++c)
        for (std::size_t i = 0; i < hw; ++i)
            out[c * hw + i] = x[c * hw + i] + b[static_cast<std::size_t>(c)];
    Node* px = x.node().get();
    Node* pb = b.node().get();
    return make_op(s, std::move(out), {x.node(), b.node()}, [px, pb, hw](Node& self) {
        accumulate(px, self.grad);
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t c = 0; c < pb->grad.size(); ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < hw; ++i) acc += self.grad[c * hw + i];
                pb->grad[c] += acc;
            }
        }
    });
}

Tensor upsample_bilinear(const Tensor& input, int oh, int ow) {
    const Shape& s = input.shape();
    if (s.size() != 3)
        throw DimensionError("upsample_bilinear: expects [C,H,W], got " + shape_str(s));
    if (oh < 1 || ow < 1) throw ParameterError("upsample_bilinear: bad output size");
    const int c = s[0], h = s[1], w = s[2];

    // Sample positions at pixel centers, clamped to the border.
    struct Tap {
        std::size_t i00, i01, i10, i11;
        double w00, w01, w10, w11;
    };
    std::vector<Tap> taps(static_cast<std::size_t>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
        double sy = (oy + 0.5) * h / oh - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - y0;
        for (int ox = 0; ox < ow; ++ox) {
            double sx = (ox + 0.5) * w / ow - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - x0;
            Tap& t = taps[static_cast<std::size_t>(oy) * ow + ox];
            t.i00 = static_cast<std::size_t>(y0) * w + x0;
            t.i01 = static_cast<std::size_t>(y0) * w + x1;
            t.i10 = static_cast<std::size_t>(y1) * w + x0;
            t.i11 = static_cast<std::size_t>(y1) * w + x1;
            t.w00 = (1 - fy) * (1 - fx);
            t.w01 = (1 - fy) * fx;
            t.w10 = fy * (1 - fx);
            t.w11 = fy * fx;
        }
    }

    const std::size_t in_hw = static_cast<std::size_t>(h) * w;
    const std::size_t out_hw = static_cast<std::size_t>(oh) * ow;
    std::vector<double> out(static_cast<std::size_t>(c) * out_hw);
    for (int ch = 0; ch < c; ++ch) {
        const std::size_t ib = ch * in_hw;
        const std::size_t ob = ch * out_hw;
        for (std::size_t i = 0; i < out_hw; ++i) {
            const Tap& t = taps[i];
            out[ob + i] = input[ib + t.i00] * t.w00 + input[ib + t.i01] * t.w01 +
                          input[ib + t.i10] * t.w10 + input[ib + t.i11] * t.w11;
        }
    }
    Node* pa = input.node().get();
    return make_op({c, oh, ow}, std::move(out), {input.node()},
                   [pa, taps = std::move(taps), c, in_hw, out_hw](Node& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       for (int ch = 0; ch < c; ++ch) {
                           const std::size_t ib = ch * in_hw;
                           const std::size_t ob = ch * out_hw;
                           for (std::size_t i = 0; i < out_hw; ++i) {
                               const Tap& t = taps[i];
                               const double g = self.grad[ob + i];
                               pa->grad[ib + t.i00] += g * t.w00;
                               pa->grad[ib + t.i01] += g * t.w01;
                               pa->grad[ib + t.i10] += g * t.w10;
                               pa->grad[ib + t.i11] += g * t.w11;
                           }
                       }
                   });
}

void backward(const Tensor& loss) {
    auto root = loss.node();
    if (!root) throw Error("backward: undefined loss tensor");
    if (root->values.size() != 1)
        throw DimensionError("backward: loss must be scalar, got " + shape_str(root->shape));

    // Iterative post-order DFS.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order)
        if (!n->parents.empty() && n->consumed)
            throw StaleGraphError("backward: graph already backpropagated; rerun the forward pass");

    for (Node* n : order)
        if (!n->parents.empty()) n->grad.assign(n->values.size(), 0.0);

    root->ensure_grad();
    root->grad[0] = 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->requires_grad) {
            n->ensure_grad();
            n->backprop(*n);
        }
        if (!n->parents.empty()) n->consumed = true;
    }
}

}  // namespace rankgan
