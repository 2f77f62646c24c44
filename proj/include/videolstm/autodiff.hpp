#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "videolstm/tensor_ops.hpp"

// Reverse-mode automatic differentiation. The graph is built eagerly: every
// op computes its value immediately and records a closure that distributes
// the node's gradient to its parents. backward() walks the graph once in
// reverse topological order, so gradients accumulate additively across
// fan-out. Unrolling a recurrent cell over time and calling backward() on the
// loss is exactly backpropagation through time.
//
// Nodes whose inputs carry no gradient drop their parent links, so inference
// graphs cost one tensor per op and free themselves as Vars go out of scope.
namespace vlsm::ad {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // same shape as value, allocated during backward
    bool requires_grad = false;
    bool grad_ready = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (!grad_ready) {
            grad = Tensor::zeros_like(value);
            grad_ready = true;
        }
    }
};

inline Var leaf(Tensor v, bool requires_grad = true) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return n;
}

inline Var constant(Tensor v) { return leaf(std::move(v), false); }

inline Var make_node(Tensor value, std::vector<Var> parents,
                     std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const Var& p : parents) n->requires_grad |= p->requires_grad;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

inline Var add(Var a, Var b) {
    Tensor y = ops::add(a->value, b->value);
    return make_node(std::move(y), {a, b}, [](Node& n) {
        for (int s = 0; s < 2; ++s) {
            Node& p = *n.parents[s];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            for (int i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
        }
    });
}

inline Var sub(Var a, Var b) {
    Tensor y = ops::sub(a->value, b->value);
    return make_node(std::move(y), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (int i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (int i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
        }
    });
}

inline Var hadamard(Var a, Var b) {
    Tensor y = ops::hadamard(a->value, b->value);
    return make_node(std::move(y), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (int i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (int i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.value[i];
        }
    });
}

inline Var scale(Var a, double s) {
    Tensor y = ops::scale(a->value, s);
    return make_node(std::move(y), {a}, [s](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (int i = 0; i < n.grad.size(); ++i) p.grad[i] += s * n.grad[i];
    });
}

inline Var sigmoid(Var a) {
    Tensor y = ops::sigmoid(a->value);
    return make_node(std::move(y), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (int i = 0; i < n.grad.size(); ++i) {
            const double v = n.value[i];
            p.grad[i] += n.grad[i] * v * (1.0 - v);
        }
    });
}

inline Var tanh(Var a) {
    Tensor y = ops::tanh(a->value);
    return make_node(std::move(y), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (int i = 0; i < n.grad.size(); ++i) {
            const double v = n.value[i];
            p.grad[i] += n.grad[i] * (1.0 - v * v);
        }
    });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline Var reshape(Var a, std::vector<int> new_shape) {
    Tensor y = a->value.reshaped(std::move(new_shape));
    return make_node(std::move(y), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (int i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    });
}

inline Var flatten(Var a) {
    const int n = a->value.size();
    return reshape(std::move(a), {n});
}

inline Var sum(Var a) {
    Tensor y = Tensor::scalar(a->value.sum());
    return make_node(std::move(y), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        const double g = n.grad[0];
        for (int i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
    });
}

// ---------------------------------------------------------------------------
// Linear maps
// ---------------------------------------------------------------------------

inline Var dense(Var x, Var w, Var b) {
    Tensor y = ops::dense(x->value, w->value, b->value);
    return make_node(std::move(y), {x, w, b}, [](Node& n) {
        Node& px = *n.parents[0];
        Node& pw = *n.parents[1];
        Node& pb = *n.parents[2];
        Tensor dx = Tensor::zeros_like(px.value);
        Tensor dw = Tensor::zeros_like(pw.value);
        Tensor db = Tensor::zeros_like(pb.value);
        ops::dense_backward(px.value, pw.value, n.grad, dx, dw, db);
        if (px.requires_grad) {
            px.ensure_grad();
            for (int i = 0; i < dx.size(); ++i) px.grad[i] += dx[i];
        }
        if (pw.requires_grad) {
            pw.ensure_grad();
            for (int i = 0; i < dw.size(); ++i) pw.grad[i] += dw[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (int i = 0; i < db.size(); ++i) pb.grad[i] += db[i];
        }
    });
}

inline Var matmul(Var x, Var w) {
    Tensor y = ops::matmul(x->value, w->value);
    return make_node(std::move(y), {x, w}, [](Node& n) {
        Node& px = *n.parents[0];
        Node& pw = *n.parents[1];
        Tensor dx = Tensor::zeros_like(px.value);
        Tensor dw = Tensor::zeros_like(pw.value);
        ops::matmul_backward(px.value, pw.value, n.grad, dx, dw);
        if (px.requires_grad) {
            px.ensure_grad();
            for (int i = 0; i < dx.size(); ++i) px.grad[i] += dx[i];
        }
        if (pw.requires_grad) {
            pw.ensure_grad();
            for (int i = 0; i < dw.size(); ++i) pw.grad[i] += dw[i];
        }
    });
}

// M: R×E plus row-broadcast vector v: E.
inline Var add_rowvec(Var m, Var v) {
    ops::check(m->value.ndim() == 2 && v->value.ndim() == 1, "add_rowvec: bad ranks");
    ops::check(m->value.extent(1) == v->value.extent(0), "add_rowvec: widths disagree");
    const int r = m->value.extent(0), e = m->value.extent(1);
    Tensor y = m->value;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < e; ++j) y[i * e + j] += v->value[j];
    return make_node(std::move(y), {m, v}, [r, e](Node& n) {
        Node& pm = *n.parents[0];
        Node& pv = *n.parents[1];
        if (pm.requires_grad) {
            pm.ensure_grad();
            for (int i = 0; i < n.grad.size(); ++i) pm.grad[i] += n.grad[i];
        }
        if (pv.requires_grad) {
            pv.ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < e; ++j) pv.grad[j] += n.grad[i * e + j];
        }
    });
}

inline Var conv2d(Var in, Var kernel, Var bias) {
    Tensor y = ops::conv2d(in->value, kernel->value, bias->value);
    return make_node(std::move(y), {in, kernel, bias}, [](Node& n) {
        Node& pi = *n.parents[0];
        Node& pk = *n.parents[1];
        Node& pb = *n.parents[2];
        Tensor din = Tensor::zeros_like(pi.value);
        Tensor dk = Tensor::zeros_like(pk.value);
        Tensor db = Tensor::zeros_like(pb.value);
        ops::conv2d_backward(pi.value, pk.value, n.grad, din, dk, db);
        if (pi.requires_grad) {
            pi.ensure_grad();
            for (int i = 0; i < din.size(); ++i) pi.grad[i] += din[i];
        }
        if (pk.requires_grad) {
            pk.ensure_grad();
            for (int i = 0; i < dk.size(); ++i) pk.grad[i] += dk[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (int i = 0; i < db.size(); ++i) pb.grad[i] += db[i];
        }
    });
}

// ---------------------------------------------------------------------------
// Softmax, pooling, attention
// ---------------------------------------------------------------------------

inline Var spatial_softmax(Var z) {
    Tensor y = ops::spatial_softmax(z->value);
    return make_node(std::move(y), {z}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        Tensor dz = ops::softmax_backward(n.value, n.grad);
        for (int i = 0; i < dz.size(); ++i) p.grad[i] += dz[i];
    });
}

inline Var softmax_vec(Var z) {
    Tensor y = ops::softmax_vec(z->value);
    return make_node(std::move(y), {z}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        Tensor dz = ops::softmax_backward(n.value, n.grad);
        for (int i = 0; i < dz.size(); ++i) p.grad[i] += dz[i];
    });
}

inline Var maxpool2(Var a) {
    auto argmax = std::make_shared<std::vector<int>>();
    Tensor y = ops::maxpool2(a->value, argmax.get());
    return make_node(std::move(y), {a}, [argmax](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (int i = 0; i < n.grad.size(); ++i)
            p.grad[(*argmax)[static_cast<size_t>(i)]] += n.grad[i];
    });
}

inline Var apply_attention(Var a, Var x) {
    Tensor y = ops::apply_attention(a->value, x->value);
    const int c = x->value.extent(2);
    return make_node(std::move(y), {a, x}, [c](Node& n) {
        Node& pa = *n.parents[0];
        Node& px = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (int i = 0; i < pa.grad.size(); ++i) {
                double acc = 0.0;
                for (int ch = 0; ch < c; ++ch) acc += px.value[i * c + ch] * n.grad[i * c + ch];
                pa.grad[i] += acc;
            }
        }
        if (px.requires_grad) {
            px.ensure_grad();
            for (int i = 0; i < pa.value.size(); ++i) {
                const double av = pa.value[i];
                for (int ch = 0; ch < c; ++ch) px.grad[i * c + ch] += av * n.grad[i * c + ch];
            }
        }
    });
}

inline Var weighted_pool(Var wgt, Var x) {
    Tensor y = ops::weighted_pool(wgt->value, x->value);
    return make_node(std::move(y), {wgt, x}, [](Node& n) {
        Node& pw = *n.parents[0];
        Node& px = *n.parents[1];
        const int r = px.value.extent(0), d = px.value.extent(1);
        if (pw.requires_grad) {
            pw.ensure_grad();
            for (int i = 0; i < r; ++i) {
                double acc = 0.0;
                for (int j = 0; j < d; ++j) acc += px.value[i * d + j] * n.grad[j];
                pw.grad[i] += acc;
            }
        }
        if (px.requires_grad) {
            px.ensure_grad();
            for (int i = 0; i < r; ++i) {
                const double a = pw.value[i];
                for (int j = 0; j < d; ++j) px.grad[i * d + j] += a * n.grad[j];
            }
        }
    });
}

// loss = −log(max(p[label], clamp)); gradient is zero on the clamped branch.
inline Var neg_log_pick(Var p, int label, double clamp = 1e-12) {
    ops::check(p->value.ndim() == 1, "neg_log_pick: expects a distribution vector");
    if (label < 0 || label >= p->value.extent(0))
        throw UsageError("neg_log_pick: label out of range");
    const double pv = p->value[label];
    Tensor y = Tensor::scalar(-std::log(std::max(pv, clamp)));
    return make_node(std::move(y), {p}, [label, clamp](Node& n) {
        Node& pp = *n.parents[0];
        pp.ensure_grad();
        const double pv = pp.value[label];
        if (pv > clamp) pp.grad[label] -= n.grad[0] / pv;
    });
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

// Seeds the scalar loss with gradient 1 and propagates through the graph,
// visiting each node exactly once in reverse topological order.
inline void backward(const Var& loss) {
    if (!loss || loss->value.size() != 1)
        throw UsageError("backward: loss must be a scalar node");

    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    // Iterative post-order DFS over grad-requiring parents.
    std::vector<std::pair<Node*, size_t>> stack;
    if (loss->requires_grad) stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->ensure_grad();
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

}  // namespace vlsm::ad
