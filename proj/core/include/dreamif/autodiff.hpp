#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dreamif/tensor.hpp"

// Define-by-run reverse-mode tape over Tensor<T>. Every op builds the output
// value eagerly and, when gradients are enabled and some input needs them,
// attaches a closure that scatters the output gradient back to the inputs.
// backward() walks the graph once in reverse topological order.

namespace dreamif::ad {

template <typename T>
struct VarNode {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<VarNode<T>>> parents;
    std::function<void()> backprop;
};

namespace detail {
inline thread_local int nograd_depth = 0;
}

struct NoGradGuard {
    NoGradGuard() { ++detail::nograd_depth; }
    ~NoGradGuard() { --detail::nograd_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::nograd_depth == 0; }

template <typename T>
void accumulate(Tensor<T>& g, const Tensor<T>& shape_like, const T* delta) {
    if (g.v.empty()) g = Tensor<T>(shape_like.c, shape_like.h, shape_like.w);
    T* dst = g.data();
    const std::size_t n = g.size();
    for (std::size_t i = 0; i < n; ++i) dst[i] += delta[i];
}

template <typename T>
class Var {
  public:
    Var() = default;
    explicit Var(std::shared_ptr<VarNode<T>> n) : n_(std::move(n)) {}

    static Var leaf(Tensor<T> value, bool requires_grad) {
        auto n = std::make_shared<VarNode<T>>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        return Var(std::move(n));
    }
    static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

    bool defined() const { return n_ != nullptr; }
    const Tensor<T>& value() const { return n_->value; }
    Tensor<T>& mutable_value() { return n_->value; }
    const Tensor<T>& grad() const { return n_->grad; }
    Tensor<T>& mutable_grad() { return n_->grad; }
    bool has_grad() const { return !n_->grad.v.empty(); }
    void clear_grad() { n_->grad = Tensor<T>(); }
    bool requires_grad() const { return n_->requires_grad; }
    const std::shared_ptr<VarNode<T>>& node() const { return n_; }

    int c() const { return n_->value.c; }
    int h() const { return n_->value.h; }
    int w() const { return n_->value.w; }

    T scalar() const {
        if (n_->value.size() != 1) throw std::invalid_argument("Var::scalar: not a scalar");
        return n_->value.v[0];
    }

    // Seeds d(this)/d(this) = 1 and propagates to every ancestor that
    // requires gradients. Usually called on a scalar loss.
    void backward() const {
        std::vector<VarNode<T>*> order;
        topo_sort(order);
        auto& root = *n_;
        if (root.grad.v.empty()) root.grad = Tensor<T>(root.value.c, root.value.h, root.value.w);
        std::fill(root.grad.v.begin(), root.grad.v.end(), T(1));
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            VarNode<T>* n = *it;
            if (n->backprop && !n->grad.v.empty()) n->backprop();
        }
    }

  private:
    void topo_sort(std::vector<VarNode<T>*>& order) const {
        // Iterative post-order DFS over parent edges; reversed order visits
        // every consumer before its producers. Visited set kept as a sorted
        // pointer vector.
        struct Frame {
            VarNode<T>* n;
            std::size_t next = 0;
        };
        std::vector<Frame> stack;
        std::vector<VarNode<T>*> vset;
        auto test_and_insert = [&vset](VarNode<T>* n) {
            auto it = std::lower_bound(vset.begin(), vset.end(), n);
            if (it != vset.end() && *it == n) return false;
            vset.insert(it, n);
            return true;
        };
        test_and_insert(n_.get());
        stack.push_back({n_.get()});
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < f.n->parents.size()) {
                VarNode<T>* p = f.n->parents[f.next++].get();
                if (test_and_insert(p)) stack.push_back({p});
            } else {
                order.push_back(f.n);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<VarNode<T>> n_;
};

// --- helpers ---------------------------------------------------------------

template <typename T>
std::shared_ptr<VarNode<T>> make_node(int c, int h, int w,
                                      std::initializer_list<Var<T>> parents) {
    auto n = std::make_shared<VarNode<T>>();
    n->value = Tensor<T>(c, h, w);
    bool need = false;
    for (const auto& p : parents) need = need || p.requires_grad();
    n->requires_grad = need && grad_enabled();
    if (n->requires_grad)
        for (const auto& p : parents) n->parents.push_back(p.node());
    return n;
}

template <typename T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* who) {
    if (!a.value().same_shape(b.value())) throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

// --- elementwise -----------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    check_same_shape(a, b, "add");
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a, b});
    const std::size_t sz = n->value.size();
    for (std::size_t i = 0; i < sz; ++i) n->value.v[i] = a.value().v[i] + b.value().v[i];
    if (n->requires_grad) {
        auto an = a.node(), bn = b.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, bn, self]() {
            if (an->requires_grad) accumulate(an->grad, an->value, self->grad.data());
            if (bn->requires_grad) accumulate(bn->grad, bn->value, self->grad.data());
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    check_same_shape(a, b, "sub");
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a, b});
    const std::size_t sz = n->value.size();
    for (std::size_t i = 0; i < sz; ++i) n->value.v[i] = a.value().v[i] - b.value().v[i];
    if (n->requires_grad) {
        auto an = a.node(), bn = b.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, bn, self]() {
            if (an->requires_grad) accumulate(an->grad, an->value, self->grad.data());
            if (bn->requires_grad) {
                if (bn->grad.v.empty()) bn->grad = Tensor<T>(bn->value.c, bn->value.h, bn->value.w);
                for (std::size_t i = 0; i < bn->grad.size(); ++i) bn->grad.v[i] -= self->grad.v[i];
            }
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    check_same_shape(a, b, "mul");
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a, b});
    const std::size_t sz = n->value.size();
    for (std::size_t i = 0; i < sz; ++i) n->value.v[i] = a.value().v[i] * b.value().v[i];
    if (n->requires_grad) {
        auto an = a.node(), bn = b.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, bn, self]() {
            if (an->requires_grad) {
                if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
                for (std::size_t i = 0; i < an->grad.size(); ++i)
                    an->grad.v[i] += self->grad.v[i] * bn->value.v[i];
            }
            if (bn->requires_grad) {
                if (bn->grad.v.empty()) bn->grad = Tensor<T>(bn->value.c, bn->value.h, bn->value.w);
                for (std::size_t i = 0; i < bn->grad.size(); ++i)
                    bn->grad.v[i] += self->grad.v[i] * an->value.v[i];
            }
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
    check_same_shape(a, b, "div");
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a, b});
    const std::size_t sz = n->value.size();
    for (std::size_t i = 0; i < sz; ++i) n->value.v[i] = a.value().v[i] / b.value().v[i];
    if (n->requires_grad) {
        auto an = a.node(), bn = b.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, bn, self]() {
            if (an->requires_grad) {
                if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
                for (std::size_t i = 0; i < an->grad.size(); ++i)
                    an->grad.v[i] += self->grad.v[i] / bn->value.v[i];
            }
            if (bn->requires_grad) {
                if (bn->grad.v.empty()) bn->grad = Tensor<T>(bn->value.c, bn->value.h, bn->value.w);
                for (std::size_t i = 0; i < bn->grad.size(); ++i) {
                    const T bb = bn->value.v[i];
                    bn->grad.v[i] -= self->grad.v[i] * an->value.v[i] / (bb * bb);
                }
            }
        };
    }
    return Var<T>(n);
}

// Elementwise max; ties send the gradient to the first argument.
template <typename T>
Var<T> maximum(const Var<T>& a, const Var<T>& b) {
    check_same_shape(a, b, "maximum");
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a, b});
    const std::size_t sz = n->value.size();
    for (std::size_t i = 0; i < sz; ++i) n->value.v[i] = std::max(a.value().v[i], b.value().v[i]);
    if (n->requires_grad) {
        auto an = a.node(), bn = b.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, bn, self]() {
            if (an->requires_grad && an->grad.v.empty())
                an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
            if (bn->requires_grad && bn->grad.v.empty())
                bn->grad = Tensor<T>(bn->value.c, bn->value.h, bn->value.w);
            for (std::size_t i = 0; i < self->grad.size(); ++i) {
                const bool first = an->value.v[i] >= bn->value.v[i];
                if (first && an->requires_grad) an->grad.v[i] += self->grad.v[i];
                if (!first && bn->requires_grad) bn->grad.v[i] += self->grad.v[i];
            }
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a});
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value.v[i] = a.value().v[i] * s;
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self, s]() {
            if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad.v[i] += self->grad.v[i] * s;
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a});
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value.v[i] = a.value().v[i] + s;
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self]() { accumulate(an->grad, an->value, self->grad.data()); };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> abs(const Var<T>& a) {
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a});
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value.v[i] = std::abs(a.value().v[i]);
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self]() {
            if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
            for (std::size_t i = 0; i < an->grad.size(); ++i) {
                const T x = an->value.v[i];
                an->grad.v[i] += self->grad.v[i] * (x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)));
            }
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> square(const Var<T>& a) {
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a});
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value.v[i] = a.value().v[i] * a.value().v[i];
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self]() {
            if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
            for (std::size_t i = 0; i < an->grad.size(); ++i)
                an->grad.v[i] += self->grad.v[i] * T(2) * an->value.v[i];
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> sqrt(const Var<T>& a) {
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a});
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value.v[i] = std::sqrt(a.value().v[i]);
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self]() {
            if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
            for (std::size_t i = 0; i < an->grad.size(); ++i)
                an->grad.v[i] += self->grad.v[i] * T(0.5) / self->value.v[i];
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a});
    for (std::size_t i = 0; i < n->value.size(); ++i) {
        const T x = a.value().v[i];
        n->value.v[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                                  : std::exp(x) / (T(1) + std::exp(x));
    }
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self]() {
            if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
            for (std::size_t i = 0; i < an->grad.size(); ++i) {
                const T s = self->value.v[i];
                an->grad.v[i] += self->grad.v[i] * s * (T(1) - s);
            }
        };
    }
    return Var<T>(n);
}

// Exact gaussian-CDF gating: x * Phi(x).
template <typename T>
Var<T> gelu(const Var<T>& a) {
    constexpr T kInvSqrt2 = T(0.70710678118654752440);
    constexpr T kInvSqrt2Pi = T(0.39894228040143267794);
    auto n = make_node<T>(a.c(), a.h(), a.w(), {a});
    for (std::size_t i = 0; i < n->value.size(); ++i) {
        const T x = a.value().v[i];
        n->value.v[i] = x * T(0.5) * (T(1) + std::erf(x * kInvSqrt2));
    }
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self]() {
            if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
            for (std::size_t i = 0; i < an->grad.size(); ++i) {
                const T x = an->value.v[i];
                const T phi = T(0.5) * (T(1) + std::erf(x * kInvSqrt2));
                const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * x * x);
                an->grad.v[i] += self->grad.v[i] * (phi + x * pdf);
            }
        };
    }
    return Var<T>(n);
}

// --- reductions ------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& a) {
    auto n = make_node<T>(1, 1, 1, {a});
    T s = T(0);
    for (const T x : a.value().v) s += x;
    n->value.v[0] = s;
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self]() {
            if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
            const T g = self->grad.v[0];
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad.v[i] += g;
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
    const T inv = T(1) / static_cast<T>(a.value().size());
    return scale(sum_all(a), inv);
}

// --- structure -------------------------------------------------------------

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
    if (a.h() != b.h() || a.w() != b.w()) throw std::invalid_argument("concat_channels: spatial mismatch");
    auto n = make_node<T>(a.c() + b.c(), a.h(), a.w(), {a, b});
    const std::size_t na = a.value().size(), nb = b.value().size();
    std::copy(a.value().v.begin(), a.value().v.end(), n->value.v.begin());
    std::copy(b.value().v.begin(), b.value().v.end(), n->value.v.begin() + na);
    if (n->requires_grad) {
        auto an = a.node(), bn = b.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, bn, self, na, nb]() {
            if (an->requires_grad) accumulate(an->grad, an->value, self->grad.data());
            if (bn->requires_grad) accumulate(bn->grad, bn->value, self->grad.data() + na);
            (void)nb;
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> slice_channels(const Var<T>& a, int first, int count) {
    if (first < 0 || count <= 0 || first + count > a.c())
        throw std::invalid_argument("slice_channels: range out of bounds");
    auto n = make_node<T>(count, a.h(), a.w(), {a});
    const std::size_t plane = static_cast<std::size_t>(a.h()) * a.w();
    std::copy(a.value().v.begin() + first * plane,
              a.value().v.begin() + (first + count) * plane, n->value.v.begin());
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self, first, plane]() {
            if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, an->value.h, an->value.w);
            T* dst = an->grad.data() + first * plane;
            for (std::size_t i = 0; i < self->grad.size(); ++i) dst[i] += self->grad.v[i];
        };
    }
    return Var<T>(n);
}

// x: (C,H,W), m: (1,H,W) broadcast across channels.
template <typename T>
Var<T> mul_broadcast(const Var<T>& x, const Var<T>& m) {
    if (m.c() != 1 || m.h() != x.h() || m.w() != x.w())
        throw std::invalid_argument("mul_broadcast: mask must be (1,H,W) matching x");
    auto n = make_node<T>(x.c(), x.h(), x.w(), {x, m});
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    for (int c = 0; c < x.c(); ++c) {
        const T* xs = x.value().data() + c * plane;
        const T* ms = m.value().data();
        T* os = n->value.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) os[i] = xs[i] * ms[i];
    }
    if (n->requires_grad) {
        auto xn = x.node(), mn = m.node();
        VarNode<T>* self = n.get();
        n->backprop = [xn, mn, self, plane]() {
            const int C = xn->value.c;
            if (xn->requires_grad) {
                if (xn->grad.v.empty()) xn->grad = Tensor<T>(xn->value.c, xn->value.h, xn->value.w);
                for (int c = 0; c < C; ++c) {
                    const T* g = self->grad.data() + c * plane;
                    const T* ms = mn->value.data();
                    T* dst = xn->grad.data() + c * plane;
                    for (std::size_t i = 0; i < plane; ++i) dst[i] += g[i] * ms[i];
                }
            }
            if (mn->requires_grad) {
                if (mn->grad.v.empty()) mn->grad = Tensor<T>(1, mn->value.h, mn->value.w);
                for (int c = 0; c < C; ++c) {
                    const T* g = self->grad.data() + c * plane;
                    const T* xs = xn->value.data() + c * plane;
                    T* dst = mn->grad.data();
                    for (std::size_t i = 0; i < plane; ++i) dst[i] += g[i] * xs[i];
                }
            }
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> pixel_unshuffle_op(const Var<T>& x, int r) {
    Tensor<T> out = pixel_unshuffle(x.value(), r);
    auto n = make_node<T>(out.c, out.h, out.w, {x});
    n->value = std::move(out);
    if (n->requires_grad) {
        auto xn = x.node();
        VarNode<T>* self = n.get();
        n->backprop = [xn, self, r]() {
            Tensor<T> g = pixel_shuffle(self->grad, r);
            accumulate(xn->grad, xn->value, g.data());
        };
    }
    return Var<T>(n);
}

template <typename T>
Var<T> pixel_shuffle_op(const Var<T>& x, int r) {
    Tensor<T> out = pixel_shuffle(x.value(), r);
    auto n = make_node<T>(out.c, out.h, out.w, {x});
    n->value = std::move(out);
    if (n->requires_grad) {
        auto xn = x.node();
        VarNode<T>* self = n.get();
        n->backprop = [xn, self, r]() {
            Tensor<T> g = pixel_unshuffle(self->grad, r);
            accumulate(xn->grad, xn->value, g.data());
        };
    }
    return Var<T>(n);
}

// Softmax over the channel axis of a (N,1,1) vector.
template <typename T>
Var<T> softmax_vec(const Var<T>& a) {
    if (a.h() != 1 || a.w() != 1) throw std::invalid_argument("softmax_vec: expects (N,1,1)");
    auto n = make_node<T>(a.c(), 1, 1, {a});
    T mx = a.value().v[0];
    for (const T x : a.value().v) mx = std::max(mx, x);
    T denom = T(0);
    for (std::size_t i = 0; i < n->value.size(); ++i) {
        n->value.v[i] = std::exp(a.value().v[i] - mx);
        denom += n->value.v[i];
    }
    for (auto& v : n->value.v) v /= denom;
    if (n->requires_grad) {
        auto an = a.node();
        VarNode<T>* self = n.get();
        n->backprop = [an, self]() {
            if (an->grad.v.empty()) an->grad = Tensor<T>(an->value.c, 1, 1);
            T dot = T(0);
            for (std::size_t i = 0; i < self->grad.size(); ++i) dot += self->grad.v[i] * self->value.v[i];
            for (std::size_t i = 0; i < an->grad.size(); ++i)
                an->grad.v[i] += self->value.v[i] * (self->grad.v[i] - dot);
        };
    }
    return Var<T>(n);
}

}  // namespace dreamif::ad
