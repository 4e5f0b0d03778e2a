#pragma once

// Minimal reverse-mode autodiff on dense row-major tensors. A Tensor is a
// shared handle on a Node; ops build the graph eagerly and backward() walks
// it once in reverse topological order. Templated on the scalar type so the
// same graph code runs in float (training) and double (gradient checks).

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "motion_prior/common.hpp"
#include "motion_prior/kernels.hpp"

namespace mp {

using kernels::Padding;

template <class S>
struct Node {
    std::vector<int> shape;
    std::vector<S> value;
    std::vector<S> grad;  // allocated on first use
    bool requires_grad = false;
    bool leaf = true;
    std::vector<std::shared_ptr<Node<S>>> parents;
    std::function<void(Node<S>&)> backward;

    int64_t numel() const { return product(shape); }

    std::vector<S>& grad_buffer() {
        if (grad.empty()) grad.assign(static_cast<size_t>(numel()), S(0));
        return grad;
    }
};

namespace detail {

inline bool& grad_mode() {
    thread_local bool mode = true;
    return mode;
}

}  // namespace detail

// RAII guard: ops created inside record no graph.
struct NoGrad {
    bool prev;
    NoGrad() : prev(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGrad() { detail::grad_mode() = prev; }
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;
};

template <class S>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<S>> n) : node_(std::move(n)) {}

    static Tensor zeros(std::vector<int> shape) {
        return full(std::move(shape), S(0));
    }
    static Tensor ones(std::vector<int> shape) {
        return full(std::move(shape), S(1));
    }
    static Tensor full(std::vector<int> shape, S v) {
        auto n = std::make_shared<Node<S>>();
        n->value.assign(static_cast<size_t>(product(shape)), v);
        n->shape = std::move(shape);
        return Tensor(std::move(n));
    }
    static Tensor from_data(std::vector<int> shape, std::vector<S> data) {
        if (product(shape) != static_cast<int64_t>(data.size()))
            throw std::invalid_argument("from_data: " + shape_string(shape) + " does not hold " +
                                        std::to_string(data.size()) + " values");
        auto n = std::make_shared<Node<S>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        return Tensor(std::move(n));
    }
    static Tensor randn(std::vector<int> shape, RandomStream& rng, S stddev = S(1)) {
        auto t = zeros(std::move(shape));
        for (auto& v : t.node_->value) v = static_cast<S>(rng.normal()) * stddev;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    const S* data() const { return node_->value.data(); }
    const std::vector<S>& values() const { return node_->value; }

    // Raw write access, for leaves only (optimizer steps, data loading).
    S* mutable_data() {
        if (!node_->leaf) throw std::logic_error("mutable_data on a non-leaf tensor");
        return node_->value.data();
    }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        if (!node_->leaf) throw std::logic_error("set_requires_grad on a non-leaf tensor");
        node_->requires_grad = on;
        return *this;
    }

    std::vector<S>& grad() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad.assign(static_cast<size_t>(numel()), S(0)); }

    S item() const {
        if (numel() != 1) throw std::logic_error("item() on tensor of shape " + shape_string(shape()));
        return node_->value[0];
    }

    // Constant copy, cut off from the graph.
    Tensor detach() const {
        auto n = std::make_shared<Node<S>>();
        n->shape = node_->shape;
        n->value = node_->value;
        return Tensor(std::move(n));
    }

    void backward() {
        if (numel() != 1)
            throw std::logic_error("backward() needs a scalar loss, got " + shape_string(shape()));
        if (!node_->requires_grad)
            throw std::logic_error("backward() on a detached graph: nothing requires gradients");
        std::vector<Node<S>*> topo;
        topo_sort(topo);
        // Interior grads are scratch per pass; leaf grads accumulate across calls.
        for (Node<S>* n : topo)
            if (!n->leaf) n->grad.assign(static_cast<size_t>(n->numel()), S(0));
        node_->grad_buffer()[0] += S(1);
        for (auto it = topo.rbegin(); it != topo.rend(); ++it)
            if ((*it)->backward) (*it)->backward(**it);
    }

    std::shared_ptr<Node<S>>& raw() { return node_; }
    const std::shared_ptr<Node<S>>& raw() const { return node_; }

  private:
    void topo_sort(std::vector<Node<S>*>& topo) const {
        struct Frame {
            Node<S>* n;
            size_t next;
        };
        std::unordered_set<Node<S>*> seen;
        std::vector<Frame> stack;
        stack.push_back({node_.get(), 0});
        seen.insert(node_.get());
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < f.n->parents.size()) {
                Node<S>* p = f.n->parents[f.next++].get();
                if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
            } else {
                topo.push_back(f.n);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node<S>> node_;
};

namespace detail {

template <class S>
Tensor<S> make_op(std::vector<int> shape, std::vector<S> value,
                  std::initializer_list<Tensor<S>> inputs, std::function<void(Node<S>&)> fn) {
    auto n = std::make_shared<Node<S>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool wants = false;
    if (grad_mode())
        for (const auto& t : inputs) wants = wants || t.requires_grad();
    if (wants) {
        n->requires_grad = true;
        n->leaf = false;
        for (const auto& t : inputs) n->parents.push_back(t.raw());
        n->backward = std::move(fn);
    }
    return Tensor<S>(std::move(n));
}

template <class S>
void check_same_shape(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                    " vs " + shape_string(b.shape()));
}

}  // namespace detail

// ---- elementwise ----

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape("add", a, b);
    std::vector<S> v(a.values());
    const S* pb = b.data();
    for (size_t i = 0; i < v.size(); ++i) v[i] += pb[i];
    return detail::make_op<S>(a.shape(), std::move(v), {a, b}, [](Node<S>& n) {
        for (int s = 0; s < 2; ++s) {
            auto& p = *n.parents[s];
            if (!p.requires_grad) continue;
            auto& g = p.grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
    });
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape("sub", a, b);
    std::vector<S> v(a.values());
    const S* pb = b.data();
    for (size_t i = 0; i < v.size(); ++i) v[i] -= pb[i];
    return detail::make_op<S>(a.shape(), std::move(v), {a, b}, [](Node<S>& n) {
        if (n.parents[0]->requires_grad) {
            auto& g = n.parents[0]->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& g = n.parents[1]->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
        }
    });
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape("mul", a, b);
    std::vector<S> v(a.values());
    const S* pb = b.data();
    for (size_t i = 0; i < v.size(); ++i) v[i] *= pb[i];
    return detail::make_op<S>(a.shape(), std::move(v), {a, b}, [](Node<S>& n) {
        auto& A = *n.parents[0];
        auto& B = *n.parents[1];
        if (A.requires_grad) {
            auto& g = A.grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += B.value[i] * n.grad[i];
        }
        if (B.requires_grad) {
            auto& g = B.grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += A.value[i] * n.grad[i];
        }
    });
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S s) {
    std::vector<S> v(a.values());
    for (auto& x : v) x *= s;
    return detail::make_op<S>(a.shape(), std::move(v), {a}, [s](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
    });
}

template <class S>
Tensor<S> add_scalar(const Tensor<S>& a, S s) {
    std::vector<S> v(a.values());
    for (auto& x : v) x += s;
    return detail::make_op<S>(a.shape(), std::move(v), {a}, [](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    });
}

template <class S>
Tensor<S> square(const Tensor<S>& a) {
    std::vector<S> v(a.values());
    for (auto& x : v) x *= x;
    return detail::make_op<S>(a.shape(), std::move(v), {a}, [](Node<S>& n) {
        auto& A = *n.parents[0];
        if (!A.requires_grad) return;
        auto& g = A.grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g[i] += S(2) * A.value[i] * n.grad[i];
    });
}

template <class S>
Tensor<S> exp(const Tensor<S>& a) {
    std::vector<S> v(a.values());
    for (auto& x : v) x = std::exp(x);
    return detail::make_op<S>(a.shape(), std::move(v), {a}, [](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g[i] += n.value[i] * n.grad[i];
    });
}

template <class S>
Tensor<S> leaky_relu(const Tensor<S>& a, S slope) {
    std::vector<S> v(a.values());
    for (auto& x : v)
        if (x < S(0)) x *= slope;
    return detail::make_op<S>(a.shape(), std::move(v), {a}, [slope](Node<S>& n) {
        auto& A = *n.parents[0];
        if (!A.requires_grad) return;
        auto& g = A.grad_buffer();
        for (size_t i = 0; i < g.size(); ++i)
            g[i] += (A.value[i] > S(0) ? S(1) : slope) * n.grad[i];
    });
}

// ---- reductions and shape ----

template <class S>
Tensor<S> sum(const Tensor<S>& a) {
    S acc = S(0);
    for (S x : a.values()) acc += x;
    return detail::make_op<S>({1}, {acc}, {a}, [](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        for (auto& x : g) x += n.grad[0];
    });
}

template <class S>
Tensor<S> mean(const Tensor<S>& a) {
    return scale(sum(a), S(1) / static_cast<S>(a.numel()));
}

template <class S>
Tensor<S> reshape(const Tensor<S>& a, std::vector<int> shape) {
    if (product(shape) != a.numel())
        throw std::invalid_argument("reshape: " + shape_string(a.shape()) + " to " +
                                    shape_string(shape) + " changes element count");
    return detail::make_op<S>(std::move(shape), std::vector<S>(a.values()), {a}, [](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    });
}

// Concatenate along the last axis; leading axes must agree.
template <class S>
Tensor<S> concat_last(const Tensor<S>& a, const Tensor<S>& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() != sb.size() || sa.empty())
        throw std::invalid_argument("concat_last: rank mismatch");
    for (size_t i = 0; i + 1 < sa.size(); ++i)
        if (sa[i] != sb[i])
            throw std::invalid_argument("concat_last: " + shape_string(sa) + " vs " +
                                        shape_string(sb));
    int ca = sa.back(), cb = sb.back();
    int64_t rows = a.numel() / ca;
    std::vector<int> shape(sa);
    shape.back() = ca + cb;
    std::vector<S> v(static_cast<size_t>(rows) * (ca + cb));
    const S* pa = a.data();
    const S* pb = b.data();
    for (int64_t r = 0; r < rows; ++r) {
        S* out = v.data() + r * (ca + cb);
        for (int i = 0; i < ca; ++i) out[i] = pa[r * ca + i];
        for (int i = 0; i < cb; ++i) out[ca + i] = pb[r * cb + i];
    }
    return detail::make_op<S>(std::move(shape), std::move(v), {a, b},
                              [ca, cb, rows](Node<S>& n) {
                                  auto& A = *n.parents[0];
                                  auto& B = *n.parents[1];
                                  if (A.requires_grad) {
                                      auto& g = A.grad_buffer();
                                      for (int64_t r = 0; r < rows; ++r)
                                          for (int i = 0; i < ca; ++i)
                                              g[r * ca + i] += n.grad[r * (ca + cb) + i];
                                  }
                                  if (B.requires_grad) {
                                      auto& g = B.grad_buffer();
                                      for (int64_t r = 0; r < rows; ++r)
                                          for (int i = 0; i < cb; ++i)
                                              g[r * cb + i] += n.grad[r * (ca + cb) + ca + i];
                                  }
                              });
}

// Columns [c0, c1) of the last axis.
template <class S>
Tensor<S> slice_last(const Tensor<S>& a, int c0, int c1) {
    int c = a.shape().back();
    if (c0 < 0 || c1 > c || c0 >= c1)
        throw std::invalid_argument("slice_last: [" + std::to_string(c0) + ", " +
                                    std::to_string(c1) + ") out of " + std::to_string(c));
    int64_t rows = a.numel() / c;
    int w = c1 - c0;
    std::vector<int> shape(a.shape());
    shape.back() = w;
    std::vector<S> v(static_cast<size_t>(rows) * w);
    const S* pa = a.data();
    for (int64_t r = 0; r < rows; ++r)
        for (int i = 0; i < w; ++i) v[r * w + i] = pa[r * c + c0 + i];
    return detail::make_op<S>(std::move(shape), std::move(v), {a}, [c, c0, w, rows](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        for (int64_t r = 0; r < rows; ++r)
            for (int i = 0; i < w; ++i) g[r * c + c0 + i] += n.grad[r * w + i];
    });
}

// ---- linear algebra ----

// x [N] or [R x N], w [N x M], b [M].
template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
    if (w.shape().size() != 2) throw std::invalid_argument("linear: weight must be 2-d");
    int N = w.shape()[0], M = w.shape()[1];
    bool vec = x.shape().size() == 1;
    int R = vec ? 1 : static_cast<int>(x.numel() / x.shape().back());
    if (x.shape().back() != N)
        throw std::invalid_argument("linear: input " + shape_string(x.shape()) + " vs weight " +
                                    shape_string(w.shape()));
    if (b.defined() && b.numel() != M) throw std::invalid_argument("linear: bias size mismatch");
    std::vector<S> v(static_cast<size_t>(R) * M);
    kernels::linear_forward(x.data(), R, N, w.data(), b.defined() ? b.data() : nullptr, M, v.data());
    std::vector<int> shape(x.shape());
    shape.back() = M;
    auto fn = [R, N, M](Node<S>& n) {
        auto& X = *n.parents[0];
        auto& W = *n.parents[1];
        bool has_b = n.parents.size() > 2;
        S* dx = X.requires_grad ? X.grad_buffer().data() : nullptr;
        S* dw = W.requires_grad ? W.grad_buffer().data() : nullptr;
        S* db = has_b && n.parents[2]->requires_grad ? n.parents[2]->grad_buffer().data() : nullptr;
        kernels::linear_backward(X.value.data(), R, N, W.value.data(), M, n.grad.data(), dx, dw, db);
    };
    if (b.defined()) return detail::make_op<S>(std::move(shape), std::move(v), {x, w, b}, fn);
    return detail::make_op<S>(std::move(shape), std::move(v), {x, w}, fn);
}

template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w) {
    return linear(x, w, Tensor<S>());
}

// x [T x Cin], w [k x Cin x Cout], b [Cout].
template <class S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int stride,
                 Padding pad) {
    if (x.shape().size() != 2 || w.shape().size() != 3)
        throw std::invalid_argument("conv1d: expects x [T x C], w [k x Cin x Cout]");
    if (stride < 1) throw std::invalid_argument("conv1d: stride must be positive");
    int T = x.shape()[0], Cin = x.shape()[1];
    int k = w.shape()[0], Cout = w.shape()[2];
    if (w.shape()[1] != Cin)
        throw std::invalid_argument("conv1d: input " + shape_string(x.shape()) + " vs weight " +
                                    shape_string(w.shape()));
    if (b.numel() != Cout) throw std::invalid_argument("conv1d: bias size mismatch");
    int Tout = kernels::conv1d_out_len(T, k, stride, pad);
    int pl = kernels::conv1d_pad_left(T, k, stride, pad);
    std::vector<S> v(static_cast<size_t>(Tout) * Cout);
    kernels::conv1d_forward(x.data(), T, Cin, w.data(), b.data(), k, Cout, stride, pl, v.data(),
                            Tout);
    return detail::make_op<S>({Tout, Cout}, std::move(v), {x, w, b},
                              [T, Cin, k, Cout, stride, pl, Tout](Node<S>& n) {
                                  auto& X = *n.parents[0];
                                  auto& W = *n.parents[1];
                                  auto& B = *n.parents[2];
                                  const S* dy = n.grad.data();
                                  if (X.requires_grad)
                                      kernels::conv1d_backward_input(dy, Tout, Cout, W.value.data(),
                                                                     k, Cin, stride, pl,
                                                                     X.grad_buffer().data(), T);
                                  if (W.requires_grad)
                                      kernels::conv1d_backward_weight(X.value.data(), T, Cin, dy,
                                                                      Tout, Cout, k, stride, pl,
                                                                      W.grad_buffer().data());
                                  if (B.requires_grad)
                                      kernels::conv1d_backward_bias(dy, Tout, Cout,
                                                                    B.grad_buffer().data());
                              });
}

// Repeat along the first axis, nearest-neighbor.
template <class S>
Tensor<S> upsample_nearest(const Tensor<S>& a, int factor) {
    if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be positive");
    if (a.shape().empty()) throw std::invalid_argument("upsample_nearest: scalar input");
    int T = a.shape()[0];
    int64_t row = a.numel() / T;
    std::vector<int> shape(a.shape());
    shape[0] = T * factor;
    std::vector<S> v(static_cast<size_t>(a.numel()) * factor);
    const S* pa = a.data();
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < factor; ++f)
            for (int64_t i = 0; i < row; ++i)
                v[(static_cast<int64_t>(t) * factor + f) * row + i] = pa[t * row + i];
    return detail::make_op<S>(std::move(shape), std::move(v), {a}, [T, row, factor](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        for (int t = 0; t < T; ++t)
            for (int f = 0; f < factor; ++f)
                for (int64_t i = 0; i < row; ++i)
                    g[t * row + i] += n.grad[(static_cast<int64_t>(t) * factor + f) * row + i];
    });
}

// Inclusive running sum along the first axis; adjoint is the suffix sum.
template <class S>
Tensor<S> prefix_sum(const Tensor<S>& a) {
    if (a.shape().empty()) throw std::invalid_argument("prefix_sum: scalar input");
    int T = a.shape()[0];
    int64_t row = a.numel() / T;
    std::vector<S> v(a.values());
    for (int t = 1; t < T; ++t)
        for (int64_t i = 0; i < row; ++i) v[t * row + i] += v[(t - 1) * row + i];
    return detail::make_op<S>(a.shape(), std::move(v), {a}, [T, row](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        std::vector<S> run(static_cast<size_t>(row), S(0));
        for (int t = T - 1; t >= 0; --t)
            for (int64_t i = 0; i < row; ++i) {
                run[i] += n.grad[t * row + i];
                g[t * row + i] += run[i];
            }
    });
}

// ---- gradient checking ----

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
template <class S>
S grad_check(const std::function<Tensor<S>(std::vector<Tensor<S>>&)>& f,
             std::vector<Tensor<S>> params, S eps) {
    for (auto& p : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }
    Tensor<S> loss = f(params);
    loss.backward();
    std::vector<std::vector<S>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    S worst = S(0);
    NoGrad guard;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        S* d = params[pi].mutable_data();
        for (int64_t i = 0; i < params[pi].numel(); ++i) {
            S keep = d[i];
            d[i] = keep + eps;
            S up = f(params).item();
            d[i] = keep - eps;
            S dn = f(params).item();
            d[i] = keep;
            S numeric = (up - dn) / (S(2) * eps);
            S a = analytic[pi][static_cast<size_t>(i)];
            S rel = std::abs(a - numeric) / std::max(S(1), std::abs(a));
            if (rel > worst) worst = rel;
        }
    }
    return worst;
}

}  // namespace mp
