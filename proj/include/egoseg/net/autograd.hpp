#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "egoseg/net/ops.hpp"
#include "egoseg/net/params.hpp"

// Tape-based reverse mode. A Tape that is not recording keeps no history, so intermediate
// activations are freed as soon as the last Var referencing them goes away (inference mode).
namespace egoseg::net {

template <class T>
struct Node {
    Tensor4<T> value;
    Tensor4<T> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void accumulate(const Tensor4<T>& g) {
        if (grad.empty()) {
            grad = g;
            return;
        }
        for (std::size_t i = 0; i < g.size(); ++i) grad.data[i] += g.data[i];
    }
    Node& parent(std::size_t i) { return *parents[i]; }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
class Tape {
public:
    explicit Tape(bool record) : record_(record) {}

    bool recording() const { return record_; }

    Var<T> make(Tensor4<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> bw) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        if (record_) {
            n->parents = std::move(parents);
            n->backward = std::move(bw);
            nodes_.push_back(n);
        }
        return n;
    }

    Var<T> constant(Tensor4<T> value) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        return n;
    }

    /// Leaf whose gradient is wanted after backward() (read it from ->grad).
    Var<T> leaf(Tensor4<T> value) {
        auto n = constant(std::move(value));
        if (record_) nodes_.push_back(n);
        return n;
    }

    /// Leaf bound to a parameter; backward() adds its gradient into entry.grad.
    Var<T> param(ParamEntry<T>& e) {
        auto n = constant(e.value);
        if (record_) {
            nodes_.push_back(n);
            bound_.emplace_back(n, &e);
        }
        return n;
    }

    void backward(const Var<T>& out, const Tensor4<T>& seed) {
        require(record_, ErrorKind::InvalidArgument, "backward on a tape that did not record");
        require_shape(seed.shape == out->value.shape, "backward seed", seed.shape, out->value.shape);
        out->accumulate(seed);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node<T>& n = **it;
            if (n.backward && !n.grad.empty()) n.backward(n);
        }
        for (auto& [node, entry] : bound_) {
            if (node->grad.empty()) continue;
            if (entry->grad.shape != entry->value.shape) entry->grad = Tensor4<T>(entry->value.shape);
            for (std::size_t i = 0; i < node->grad.size(); ++i) entry->grad.data[i] += node->grad.data[i];
        }
    }

private:
    bool record_;
    std::vector<Var<T>> nodes_;
    std::vector<std::pair<Var<T>, ParamEntry<T>*>> bound_;
};

// ---------------------------------------------------------------------------------------------
// Differentiable ops

template <class T>
Var<T> conv2d(Tape<T>& t, const Var<T>& x, const Var<T>& w, const Var<T>& b, ConvSpec s) {
    const Tensor4<T> empty;
    Tensor4<T> y = conv2d_forward(x->value, w->value, b ? b->value : empty, s);
    std::vector<Var<T>> ps{x, w};
    if (b) ps.push_back(b);
    return t.make(std::move(y), std::move(ps), [s](Node<T>& n) {
        const bool has_b = n.parents.size() > 2;
        auto g = conv2d_backward(n.parent(0).value, n.parent(1).value, has_b, n.grad, s);
        n.parent(0).accumulate(g.dx);
        n.parent(1).accumulate(g.dw);
        if (has_b) n.parent(2).accumulate(g.db);
    });
}

template <class T>
Var<T> deconv2d(Tape<T>& t, const Var<T>& x, const Var<T>& w, const Var<T>& b, ConvSpec s) {
    const Tensor4<T> empty;
    Tensor4<T> y = deconv2d_forward(x->value, w->value, b ? b->value : empty, s);
    std::vector<Var<T>> ps{x, w};
    if (b) ps.push_back(b);
    return t.make(std::move(y), std::move(ps), [s](Node<T>& n) {
        const bool has_b = n.parents.size() > 2;
        auto g = deconv2d_backward(n.parent(0).value, n.parent(1).value, has_b, n.grad, s);
        n.parent(0).accumulate(g.dx);
        n.parent(1).accumulate(g.dw);
        if (has_b) n.parent(2).accumulate(g.db);
    });
}

/// Training mode uses batch statistics and updates the running buffers in place.
template <class T>
Var<T> batchnorm(Tape<T>& t, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, ParamEntry<T>& running_mean,
                 ParamEntry<T>& running_var, bool training, T momentum = T(0.1), T eps = T(1e-5)) {
    std::span<const T> g(gamma->value.data), b(beta->value.data);
    if (training) {
        auto cache = std::make_shared<BatchNormCache<T>>();
        Tensor4<T> y = batchnorm_forward_train(x->value, g, b, std::span<T>(running_mean.value.data),
                                               std::span<T>(running_var.value.data), momentum, eps,
                                               t.recording() ? cache.get() : nullptr);
        return t.make(std::move(y), {x, gamma, beta}, [cache](Node<T>& n) {
            auto gr = batchnorm_backward_train(n.grad, std::span<const T>(n.parent(1).value.data), *cache);
            n.parent(0).accumulate(gr.dx);
            const Shape4 ps{static_cast<int>(gr.dgamma.size()), 1, 1, 1};
            Tensor4<T> dg(ps), db(ps);
            dg.data = std::move(gr.dgamma);
            db.data = std::move(gr.dbeta);
            n.parent(1).accumulate(dg);
            n.parent(2).accumulate(db);
        });
    }
    Tensor4<T> y = batchnorm_forward_eval(x->value, g, b, std::span<const T>(running_mean.value.data),
                                          std::span<const T>(running_var.value.data), eps);
    const Tensor4<T> rm = running_mean.value, rv = running_var.value;
    return t.make(std::move(y), {x, gamma, beta}, [rm, rv, eps](Node<T>& n) {
        auto gr = batchnorm_backward_eval(n.parent(0).value, n.grad, std::span<const T>(n.parent(1).value.data),
                                          std::span<const T>(rm.data), std::span<const T>(rv.data), eps);
        n.parent(0).accumulate(gr.dx);
        const Shape4 ps{static_cast<int>(gr.dgamma.size()), 1, 1, 1};
        Tensor4<T> dg(ps), db(ps);
        dg.data = std::move(gr.dgamma);
        db.data = std::move(gr.dbeta);
        n.parent(1).accumulate(dg);
        n.parent(2).accumulate(db);
    });
}

template <class T>
Var<T> relu(Tape<T>& t, const Var<T>& x) {
    return t.make(relu_forward(x->value), {x},
                  [](Node<T>& n) { n.parent(0).accumulate(relu_backward(n.parent(0).value, n.grad)); });
}

template <class T>
Var<T> maxpool(Tape<T>& t, const Var<T>& x, int k, int stride, int pad) {
    auto arg = std::make_shared<std::vector<std::int32_t>>();
    Tensor4<T> y = maxpool_forward(x->value, k, stride, pad, t.recording() ? arg.get() : nullptr);
    return t.make(std::move(y), {x}, [arg](Node<T>& n) {
        n.parent(0).accumulate(maxpool_backward(n.parent(0).value.shape, n.grad, *arg));
    });
}

template <class T>
Var<T> pool_factor(Tape<T>& t, const Var<T>& x, int f, PoolKind kind) {
    auto arg = std::make_shared<std::vector<std::int32_t>>();
    Tensor4<T> y = pool_factor_forward(x->value, f, kind, t.recording() && kind == PoolKind::Max ? arg.get() : nullptr);
    return t.make(std::move(y), {x}, [arg, f, kind](Node<T>& n) {
        const Shape4 xs = n.parent(0).value.shape;
        n.parent(0).accumulate(kind == PoolKind::Average ? avgpool_factor_backward(xs, n.grad, f)
                                                         : maxpool_backward(xs, n.grad, *arg));
    });
}

template <class T>
Var<T> upsample_bilinear(Tape<T>& t, const Var<T>& x, int oh, int ow) {
    if (x->value.h() == oh && x->value.w() == ow) return x;
    return t.make(upsample_bilinear_forward(x->value, oh, ow), {x}, [](Node<T>& n) {
        n.parent(0).accumulate(upsample_bilinear_backward(n.parent(0).value.shape, n.grad));
    });
}

template <class T>
Var<T> concat(Tape<T>& t, const std::vector<Var<T>>& xs) {
    std::vector<const Tensor4<T>*> parts;
    for (const auto& x : xs) parts.push_back(&x->value);
    return t.make(concat_channels(parts), xs, [](Node<T>& n) {
        const std::size_t hw = static_cast<std::size_t>(n.grad.h()) * n.grad.w();
        int off = 0;
        for (auto& p : n.parents) {
            Tensor4<T> g(p->value.shape);
            for (int b = 0; b < g.n(); ++b) std::copy_n(n.grad.plane(b, off), hw * g.c(), g.plane(b, 0));
            off += g.c();
            p->accumulate(g);
        }
    });
}

template <class T>
Var<T> add(Tape<T>& t, const Var<T>& a, const Var<T>& b) {
    return t.make(add(a->value, b->value), {a, b}, [](Node<T>& n) {
        n.parent(0).accumulate(n.grad);
        n.parent(1).accumulate(n.grad);
    });
}

} // namespace egoseg::net
