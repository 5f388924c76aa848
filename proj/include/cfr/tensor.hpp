#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cfr/errors.hpp"

namespace cfr {

namespace detail {

struct BackwardCtx;

struct Node {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily; leaves with requires_grad get zeros up front
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&, BackwardCtx&)> backprop;
};

struct BackwardCtx {
    std::unordered_set<const Node*> needed;
    bool needs(const Node* n) const { return needed.count(n) != 0; }
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw dimension_error("tensor dimension must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline void check_finite(const char* op, const std::vector<double>& v) {
#ifndef NDEBUG
    for (double x : v) {
        if (!std::isfinite(x)) throw numeric_error(std::string(op) + ": non-finite value in forward result");
    }
#else
    (void)op;
    (void)v;
#endif
}

}  // namespace detail

// Dense 64-bit tensor participating in a define-by-run gradient tape. The
// tape is the parent graph hanging off each node; it is rebuilt on every
// forward pass and torn down when the handles go out of scope. Handles are
// cheap to copy (shared ownership of the node).
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad = false) {
        std::size_t n = detail::shape_numel(shape);
        if (n != data.size()) throw dimension_error("tensor data length does not match shape");
        node_ = std::make_shared<detail::Node>();
        node_->shape = std::move(shape);
        node_->data = std::move(data);
        node_->requires_grad = requires_grad;
        if (requires_grad) node_->grad.assign(n, 0.0);
    }

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        std::size_t n = detail::shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false) {
        std::size_t n = detail::shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return Tensor({1}, {value}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    std::size_t size() const { return node_->data.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }

    // Gradient buffer populated by backward(); zeros for a leaf that no
    // backward pass has reached.
    const std::vector<double>& grad() const {
        if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
        return node_->grad;
    }

    double value() const {
        if (size() != 1) throw contract_error("value() requires a scalar tensor");
        return node_->data[0];
    }

    double operator[](std::size_t i) const { return node_->data[i]; }
    double& operator[](std::size_t i) { return node_->data[i]; }

    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;

    friend Tensor make_op(std::vector<int> shape, std::vector<double> data,
                          std::vector<Tensor> parents,
                          std::function<void(detail::Node&, detail::BackwardCtx&)> backprop);
};

inline Tensor make_op(std::vector<int> shape, std::vector<double> data, std::vector<Tensor> parents,
                      std::function<void(detail::Node&, detail::BackwardCtx&)> backprop) {
    Tensor t(std::move(shape), std::move(data), false);
    bool rg = false;
    t.node_->parents.reserve(parents.size());
    for (const Tensor& p : parents) {
        rg = rg || p.requires_grad();
        t.node_->parents.push_back(p.node());
    }
    t.node_->requires_grad = rg;
    if (rg) t.node_->backprop = std::move(backprop);
    return t;
}

// Recorded tape for one backward sweep: nodes in topological order (every
// node's parents precede it). Only grad-requiring nodes are recorded; a node
// without requires_grad has no grad-requiring ancestors by construction.
struct Tape {
    std::vector<detail::Node*> nodes;
};

inline Tape record_tape(const Tensor& root) {
    Tape tape;
    if (!root.requires_grad()) return tape;
    std::unordered_set<const detail::Node*> visited;
    // Iterative post-order DFS over parent edges.
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            detail::Node* p = node->parents[idx++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            tape.nodes.push_back(node);
            stack.pop_back();
        }
    }
    return tape;
}

// Reverse-mode sweep from a scalar root. Populates grad on the ancestors
// that can reach one of `wrt` (all grad-requiring ancestors if `wrt` is
// empty). Grads of touched nodes are zeroed first, so a call is
// self-contained; accumulation over shared subexpressions happens within the
// sweep. Nodes outside the needed set — model parameters during an attack,
// say — are never written, which is what makes read-only sharing of a model
// across attack workers safe.
inline void backward(const Tensor& root, const std::vector<Tensor>& wrt = {}) {
    if (root.size() != 1) throw contract_error("backward: root must be a scalar");
    for (const Tensor& t : wrt) {
        if (!t.requires_grad()) throw contract_error("backward: wrt tensor does not require grad");
        t.node()->grad.assign(t.size(), 0.0);
    }
    Tape tape = record_tape(root);

    detail::BackwardCtx ctx;
    if (wrt.empty()) {
        for (detail::Node* n : tape.nodes) ctx.needed.insert(n);
    } else {
        std::unordered_set<const detail::Node*> targets;
        for (const Tensor& t : wrt) targets.insert(t.node().get());
        // Topological order lists parents first, so one forward scan settles
        // reachability: a node is needed iff it is a target or any parent is.
        for (detail::Node* n : tape.nodes) {
            if (targets.count(n)) {
                ctx.needed.insert(n);
                continue;
            }
            for (const auto& p : n->parents) {
                if (ctx.needed.count(p.get())) {
                    ctx.needed.insert(n);
                    break;
                }
            }
        }
    }

    for (detail::Node* n : tape.nodes)
        if (ctx.needs(n)) n->grad.assign(n->data.size(), 0.0);

    detail::Node* rootn = root.node().get();
    rootn->grad.assign(1, 1.0);
    if (!ctx.needs(rootn)) return;  // root cannot reach wrt; nothing to propagate

    for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backprop && ctx.needs(n)) n->backprop(*n, ctx);
    }
}

// ---------------------------------------------------------------------------
// Elementwise and reduction ops
// ---------------------------------------------------------------------------

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw dimension_error(std::string(op) + ": operand shapes differ");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    detail::check_finite("add", out);
    return make_op(a.shape(), std::move(out), {a, b}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        for (int k = 0; k < 2; ++k) {
            detail::Node* p = self.parents[k].get();
            if (!ctx.needs(p)) continue;
            for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    detail::check_finite("sub", out);
    return make_op(a.shape(), std::move(out), {a, b}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* pa = self.parents[0].get();
        detail::Node* pb = self.parents[1].get();
        if (ctx.needs(pa))
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        if (ctx.needs(pb))
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    detail::check_finite("mul", out);
    return make_op(a.shape(), std::move(out), {a, b}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* pa = self.parents[0].get();
        detail::Node* pb = self.parents[1].get();
        if (ctx.needs(pa))
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * pb->data[i];
        if (ctx.needs(pb))
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i] * pa->data[i];
    });
}

inline Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
    detail::check_finite("scale", out);
    return make_op(a.shape(), std::move(out), {a}, [s](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (!ctx.needs(p)) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * s;
    });
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
    detail::check_finite("sum", {s});
    return make_op({1}, {s}, {a}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (!ctx.needs(p)) return;
        double g = self.grad[0];
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += g;
    });
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

// Selects one element as a scalar node.
inline Tensor pick(const Tensor& a, std::size_t index) {
    if (index >= a.size()) throw contract_error("pick: index out of range");
    return make_op({1}, {a[index]}, {a}, [index](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (ctx.needs(p)) p->grad[index] += self.grad[0];
    });
}

inline Tensor log(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a[i]);
    detail::check_finite("log", out);
    return make_op(a.shape(), std::move(out), {a}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (!ctx.needs(p)) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (self.grad[i] != 0.0) p->grad[i] += self.grad[i] / p->data[i];
    });
}

inline Tensor sqrt(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(a[i]);
    detail::check_finite("sqrt", out);
    return make_op(a.shape(), std::move(out), {a}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (!ctx.needs(p)) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (self.grad[i] != 0.0) p->grad[i] += self.grad[i] * 0.5 / self.data[i];
    });
}

inline Tensor reciprocal(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / a[i];
    detail::check_finite("reciprocal", out);
    return make_op(a.shape(), std::move(out), {a}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (!ctx.needs(p)) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (self.grad[i] != 0.0) p->grad[i] -= self.grad[i] * self.data[i] * self.data[i];
    });
}

// max(a, floor) elementwise; gradient passes only where a > floor.
inline Tensor clamp_min(const Tensor& a, double floor) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a[i], floor);
    return make_op(a.shape(), std::move(out), {a}, [floor](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (!ctx.needs(p)) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (p->data[i] > floor) p->grad[i] += self.grad[i];
    });
}

inline Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
    return make_op(a.shape(), std::move(out), {a}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (!ctx.needs(p)) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (p->data[i] > 0.0) p->grad[i] += self.grad[i];
    });
}

inline Tensor reshape(const Tensor& a, std::vector<int> shape) {
    if (detail::shape_numel(shape) != a.size()) throw dimension_error("reshape: element count mismatch");
    std::vector<double> out = a.data();
    return make_op(std::move(shape), std::move(out), {a}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (!ctx.needs(p)) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    });
}

inline Tensor flatten(const Tensor& a) { return reshape(a, {static_cast<int>(a.size())}); }

// ---------------------------------------------------------------------------
// Neural-net ops
// ---------------------------------------------------------------------------

// Numerically stable softmax over a logit vector (max subtraction).
inline Tensor softmax(const Tensor& z) {
    if (z.shape().size() != 1) throw dimension_error("softmax: expected a rank-1 logit vector");
    std::size_t n = z.size();
    double m = z[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
    std::vector<double> out(n);
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(z[i] - m);
        denom += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= denom;
    detail::check_finite("softmax", out);
    return make_op(z.shape(), std::move(out), {z}, [](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* p = self.parents[0].get();
        if (!ctx.needs(p)) return;
        double dot = 0.0;
        for (std::size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * self.data[i];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p->grad[i] += self.data[i] * (self.grad[i] - dot);
    });
}

// Wx + b for a rank-1 input. W is [m, n] row-major.
inline Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (x.shape().size() != 1 || W.shape().size() != 2 || b.shape().size() != 1)
        throw dimension_error("linear: expected x[n], W[m,n], b[m]");
    int n = x.shape()[0];
    int m = W.shape()[0];
    if (W.shape()[1] != n) throw dimension_error("linear: W column count does not match input length");
    if (b.shape()[0] != m) throw dimension_error("linear: bias length does not match W row count");

    std::vector<double> out(static_cast<std::size_t>(m));
    const auto& xd = x.data();
    const auto& wd = W.data();
    for (int i = 0; i < m; ++i) {
        double acc = b[static_cast<std::size_t>(i)];
        const double* row = wd.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) acc += row[j] * xd[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    detail::check_finite("linear", out);
    return make_op({m}, std::move(out), {x, W, b}, [m, n](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* px = self.parents[0].get();
        detail::Node* pw = self.parents[1].get();
        detail::Node* pb = self.parents[2].get();
        bool nx = ctx.needs(px), nw = ctx.needs(pw), nb = ctx.needs(pb);
        for (int i = 0; i < m; ++i) {
            double g = self.grad[static_cast<std::size_t>(i)];
            if (g == 0.0) continue;
            if (nb) pb->grad[static_cast<std::size_t>(i)] += g;
            const double* row = pw->data.data() + static_cast<std::size_t>(i) * n;
            double* grow = nw ? pw->grad.data() + static_cast<std::size_t>(i) * n : nullptr;
            for (int j = 0; j < n; ++j) {
                if (nx) px->grad[static_cast<std::size_t>(j)] += g * row[j];
                if (nw) grow[j] += g * px->data[static_cast<std::size_t>(j)];
            }
        }
    });
}

// 2-D cross-correlation (no kernel flip) with zero padding.
// input [Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout].
inline Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad) {
    if (input.shape().size() != 3 || weight.shape().size() != 4 || bias.shape().size() != 1)
        throw dimension_error("conv2d: expected input[C,H,W], weight[Cout,Cin,kh,kw], bias[Cout]");
    if (stride < 1) throw config_error("conv2d: stride must be >= 1");
    if (pad < 0) throw config_error("conv2d: pad must be >= 0");
    const int cin = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
    const int cout = weight.shape()[0], kh = weight.shape()[2], kw = weight.shape()[3];
    if (weight.shape()[1] != cin) throw dimension_error("conv2d: input channels do not match kernel Cin");
    if (bias.shape()[0] != cout) throw dimension_error("conv2d: bias length does not match Cout");
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (w + 2 * pad - kw) / stride + 1;
    if (kh > h + 2 * pad || kw > w + 2 * pad || ho <= 0 || wo <= 0)
        throw dimension_error("conv2d: kernel larger than padded input");

    std::vector<double> out(static_cast<std::size_t>(cout) * ho * wo);
    const auto& xd = input.data();
    const auto& wd = weight.data();
    for (int co = 0; co < cout; ++co) {
        for (int oh = 0; oh < ho; ++oh) {
            for (int ow = 0; ow < wo; ++ow) {
                double acc = bias[static_cast<std::size_t>(co)];
                const int h0 = oh * stride - pad;
                const int w0 = ow * stride - pad;
                for (int ci = 0; ci < cin; ++ci) {
                    const std::size_t xbase = static_cast<std::size_t>(ci) * h * w;
                    const std::size_t wbase = (static_cast<std::size_t>(co) * cin + ci) * kh * kw;
                    for (int i = 0; i < kh; ++i) {
                        const int hi = h0 + i;
                        if (hi < 0 || hi >= h) continue;
                        for (int j = 0; j < kw; ++j) {
                            const int wi = w0 + j;
                            if (wi < 0 || wi >= w) continue;
                            acc += xd[xbase + static_cast<std::size_t>(hi) * w + wi] *
                                   wd[wbase + static_cast<std::size_t>(i) * kw + j];
                        }
                    }
                }
                out[(static_cast<std::size_t>(co) * ho + oh) * wo + ow] = acc;
            }
        }
    }
    detail::check_finite("conv2d", out);
    auto bp = [cin, h, w, cout, kh, kw, ho, wo, stride, pad](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* px = self.parents[0].get();
        detail::Node* pw = self.parents[1].get();
        detail::Node* pb = self.parents[2].get();
        const bool nx = ctx.needs(px), nw = ctx.needs(pw), nb = ctx.needs(pb);
        if (!nx && !nw && !nb) return;
        for (int co = 0; co < cout; ++co) {
            for (int oh = 0; oh < ho; ++oh) {
                for (int ow = 0; ow < wo; ++ow) {
                    const double g = self.grad[(static_cast<std::size_t>(co) * ho + oh) * wo + ow];
                    if (g == 0.0) continue;
                    if (nb) pb->grad[static_cast<std::size_t>(co)] += g;
                    if (!nx && !nw) continue;
                    const int h0 = oh * stride - pad;
                    const int w0 = ow * stride - pad;
                    for (int ci = 0; ci < cin; ++ci) {
                        const std::size_t xbase = static_cast<std::size_t>(ci) * h * w;
                        const std::size_t wbase = (static_cast<std::size_t>(co) * cin + ci) * kh * kw;
                        for (int i = 0; i < kh; ++i) {
                            const int hi = h0 + i;
                            if (hi < 0 || hi >= h) continue;
                            for (int j = 0; j < kw; ++j) {
                                const int wi = w0 + j;
                                if (wi < 0 || wi >= w) continue;
                                const std::size_t xi = xbase + static_cast<std::size_t>(hi) * w + wi;
                                const std::size_t wi2 = wbase + static_cast<std::size_t>(i) * kw + j;
                                if (nx) px->grad[xi] += g * pw->data[wi2];
                                if (nw) pw->grad[wi2] += g * px->data[xi];
                            }
                        }
                    }
                }
            }
        }
    };
    return make_op({cout, ho, wo}, std::move(out), {input, weight, bias}, std::move(bp));
}

// Window-wise max over [C,H,W]; gradient routes to the first (row-major)
// argmax per window.
inline Tensor maxpool2d(const Tensor& x, int k, int stride) {
    if (x.shape().size() != 3) throw dimension_error("maxpool2d: expected input[C,H,W]");
    if (k < 1 || stride < 1) throw config_error("maxpool2d: k and stride must be >= 1");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (k > h || k > w) throw dimension_error("maxpool2d: window larger than input");
    const int ho = (h - k) / stride + 1;
    const int wo = (w - k) / stride + 1;

    std::vector<double> out(static_cast<std::size_t>(c) * ho * wo);
    std::vector<std::size_t> argmax(out.size());
    const auto& xd = x.data();
    for (int ci = 0; ci < c; ++ci) {
        const std::size_t base = static_cast<std::size_t>(ci) * h * w;
        for (int oh = 0; oh < ho; ++oh) {
            for (int ow = 0; ow < wo; ++ow) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t besti = 0;
                for (int i = 0; i < k; ++i) {
                    for (int j = 0; j < k; ++j) {
                        const std::size_t xi = base + static_cast<std::size_t>(oh * stride + i) * w +
                                               (ow * stride + j);
                        if (xd[xi] > best) {
                            best = xd[xi];
                            besti = xi;
                        }
                    }
                }
                const std::size_t oi = (static_cast<std::size_t>(ci) * ho + oh) * wo + ow;
                out[oi] = best;
                argmax[oi] = besti;
            }
        }
    }
    return make_op({c, ho, wo}, std::move(out), {x},
                   [argmax = std::move(argmax)](detail::Node& self, detail::BackwardCtx& ctx) {
                       detail::Node* p = self.parents[0].get();
                       if (!ctx.needs(p)) return;
                       for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[argmax[i]] += self.grad[i];
                   });
}

}  // namespace cfr
