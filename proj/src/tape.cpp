#include "movedec/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

namespace movedec::nn {

std::size_t Graph::check(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
        throw std::invalid_argument("node id " + std::to_string(id) + " not on this tape");
    return static_cast<std::size_t>(id);
}

Graph::NodeId Graph::push(Tensor v, bool needs_grad, std::function<void(Graph&, NodeId)> back) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

Tensor& Graph::grad_buf(NodeId id) {
    Node& n = nodes_[check(id)];
    if (!n.grad_alloc) {
        n.grad = Tensor::zeros(n.value.shape);
        n.grad_alloc = true;
    }
    return n.grad;
}

const Tensor& Graph::grad(NodeId id) { return grad_buf(id); }

Graph::NodeId Graph::constant(Tensor v) { return push(std::move(v), false, nullptr); }

Graph::NodeId Graph::param(Param& p) {
    const NodeId id = push(p.value, true, nullptr);
    nodes_[static_cast<std::size_t>(id)].bound = &p;
    return id;
}

Graph::NodeId Graph::conv(NodeId x, NodeId w, NodeId b, const kernels::ConvSpec& spec) {
    Tensor y(kernels::conv_out_shape(value(x).shape, spec));
    kernels::conv_forward(value(x), value(w), value(b), y, spec);
    const bool ng = wants(x) || wants(w) || wants(b);
    return push(std::move(y), ng, [x, w, b, spec](Graph& g, NodeId self) {
        const Tensor& dy = g.grad_buf(self);
        if (g.wants(x)) {
            Tensor dx(g.value(x).shape);
            kernels::conv_backward_input(dy, g.value(w), dx, spec);
            Tensor& acc = g.grad_buf(x);
            for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += dx.v[i];
        }
        if (g.wants(w) || g.wants(b))
            kernels::conv_backward_params(dy, g.value(x), g.grad_buf(w), g.grad_buf(b), spec);
    });
}

Graph::NodeId Graph::dense(NodeId x, NodeId w, NodeId b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    if (xv.rank() != 2 || wv.rank() != 2) throw ShapeError("dense expects rank-2 input and weights");
    Tensor y({xv.shape[0], wv.shape[1]});
    kernels::dense_forward(xv, wv, value(b), y);
    const bool ng = wants(x) || wants(w) || wants(b);
    return push(std::move(y), ng, [x, w, b](Graph& g, NodeId self) {
        const Tensor& dy = g.grad_buf(self);
        if (g.wants(x)) {
            Tensor dx(g.value(x).shape);
            kernels::dense_backward_input(dy, g.value(w), dx);
            Tensor& acc = g.grad_buf(x);
            for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += dx.v[i];
        }
        if (g.wants(w) || g.wants(b))
            kernels::dense_backward_params(dy, g.value(x), g.grad_buf(w), g.grad_buf(b));
    });
}

Graph::NodeId Graph::maxpool(NodeId x, const kernels::PoolSpec& spec) {
    Tensor y(kernels::pool_out_shape(value(x).shape, spec));
    auto argmax = std::make_shared<std::vector<int>>();
    kernels::maxpool_forward(value(x), y, *argmax, spec);
    return push(std::move(y), wants(x), [x, argmax](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        kernels::maxpool_backward(g.grad_buf(self), *argmax, g.grad_buf(x));
    });
}

Graph::NodeId Graph::relu(NodeId x) {
    Tensor y = value(x);
    for (double& e : y.v) e = e > 0.0 ? e : 0.0;
    return push(std::move(y), wants(x), [x](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        const Tensor& dy = g.grad_buf(self);
        const Tensor& xv = g.value(x);
        Tensor& dx = g.grad_buf(x);
        for (std::size_t i = 0; i < dx.v.size(); ++i)
            if (xv.v[i] > 0.0) dx.v[i] += dy.v[i];
    });
}

Graph::NodeId Graph::sigmoid(NodeId x) {
    Tensor y = value(x);
    for (double& e : y.v) e = 1.0 / (1.0 + std::exp(-e));
    return push(std::move(y), wants(x), [x](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        const Tensor& dy = g.grad_buf(self);
        const Tensor& yv = g.value(self);
        Tensor& dx = g.grad_buf(x);
        for (std::size_t i = 0; i < dx.v.size(); ++i)
            dx.v[i] += dy.v[i] * yv.v[i] * (1.0 - yv.v[i]);
    });
}

Graph::NodeId Graph::tanh(NodeId x) {
    Tensor y = value(x);
    for (double& e : y.v) e = std::tanh(e);
    return push(std::move(y), wants(x), [x](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        const Tensor& dy = g.grad_buf(self);
        const Tensor& yv = g.value(self);
        Tensor& dx = g.grad_buf(x);
        for (std::size_t i = 0; i < dx.v.size(); ++i)
            dx.v[i] += dy.v[i] * (1.0 - yv.v[i] * yv.v[i]);
    });
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv))
        throw ShapeError("add shape mismatch " + Tensor::shape_str(av.shape) + " vs " +
                         Tensor::shape_str(bv.shape));
    Tensor y = av;
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += bv.v[i];
    return push(std::move(y), wants(a) || wants(b), [a, b](Graph& g, NodeId self) {
        const Tensor& dy = g.grad_buf(self);
        for (NodeId in : {a, b}) {
            if (!g.wants(in)) continue;
            Tensor& d = g.grad_buf(in);
            for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] += dy.v[i];
        }
    });
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv))
        throw ShapeError("mul shape mismatch " + Tensor::shape_str(av.shape) + " vs " +
                         Tensor::shape_str(bv.shape));
    Tensor y = av;
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] *= bv.v[i];
    return push(std::move(y), wants(a) || wants(b), [a, b](Graph& g, NodeId self) {
        const Tensor& dy = g.grad_buf(self);
        if (g.wants(a)) {
            const Tensor& bv2 = g.value(b);
            Tensor& da = g.grad_buf(a);
            for (std::size_t i = 0; i < da.v.size(); ++i) da.v[i] += dy.v[i] * bv2.v[i];
        }
        if (g.wants(b)) {
            const Tensor& av2 = g.value(a);
            Tensor& db = g.grad_buf(b);
            for (std::size_t i = 0; i < db.v.size(); ++i) db.v[i] += dy.v[i] * av2.v[i];
        }
    });
}

Graph::NodeId Graph::scale(NodeId x, double factor) {
    Tensor y = value(x);
    for (double& e : y.v) e *= factor;
    return push(std::move(y), wants(x), [x, factor](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        const Tensor& dy = g.grad_buf(self);
        Tensor& dx = g.grad_buf(x);
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += factor * dy.v[i];
    });
}

Graph::NodeId Graph::dropout(NodeId x, double rate, bool train, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
    if (!train || rate == 0.0) return x;
    const Tensor& xv = value(x);
    auto mask = std::make_shared<Tensor>(Tensor::zeros(xv.shape));
    const double keep_scale = 1.0 / (1.0 - rate);
    // one uniform per element, row-major order
    for (std::size_t i = 0; i < mask->v.size(); ++i)
        mask->v[i] = rng.uniform() >= rate ? keep_scale : 0.0;
    Tensor y = xv;
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] *= mask->v[i];
    return push(std::move(y), wants(x), [x, mask](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        const Tensor& dy = g.grad_buf(self);
        Tensor& dx = g.grad_buf(x);
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dy.v[i] * mask->v[i];
    });
}

Graph::NodeId Graph::concat_cols(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols needs at least one input");
    const int n = value(xs[0]).shape[0];
    int total = 0;
    bool ng = false;
    for (NodeId id : xs) {
        const Tensor& t = value(id);
        if (t.rank() != 2 || t.shape[0] != n)
            throw ShapeError("concat_cols inputs must be [N, *] with matching N");
        total += t.shape[1];
        ng = ng || wants(id);
    }
    Tensor y({n, total});
    int off = 0;
    for (NodeId id : xs) {
        const Tensor& t = value(id);
        const int f = t.shape[1];
        for (int r = 0; r < n; ++r)
            std::copy(t.v.begin() + static_cast<long>(r) * f, t.v.begin() + static_cast<long>(r + 1) * f,
                      y.v.begin() + static_cast<long>(r) * total + off);
        off += f;
    }
    auto inputs = std::make_shared<std::vector<NodeId>>(xs);
    return push(std::move(y), ng, [inputs, n, total](Graph& g, NodeId self) {
        const Tensor& dy = g.grad_buf(self);
        int off2 = 0;
        for (NodeId id : *inputs) {
            const int f = g.value(id).shape[1];
            if (g.wants(id)) {
                Tensor& dx = g.grad_buf(id);
                for (int r = 0; r < n; ++r)
                    for (int c = 0; c < f; ++c)
                        dx.v[static_cast<std::size_t>(r * f + c)] +=
                            dy.v[static_cast<std::size_t>(r * total + off2 + c)];
            }
            off2 += f;
        }
    });
}

Graph::NodeId Graph::slice_cols(NodeId x, int lo, int hi) {
    const Tensor& xv = value(x);
    if (xv.rank() != 2) throw ShapeError("slice_cols expects rank-2 input");
    if (lo < 0 || hi > xv.shape[1] || lo >= hi)
        throw std::invalid_argument("slice_cols range [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + ") invalid for " +
                                    Tensor::shape_str(xv.shape));
    const int n = xv.shape[0], f = xv.shape[1], w = hi - lo;
    Tensor y({n, w});
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < w; ++c)
            y.v[static_cast<std::size_t>(r * w + c)] = xv.v[static_cast<std::size_t>(r * f + lo + c)];
    return push(std::move(y), wants(x), [x, lo, n, f, w](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        const Tensor& dy = g.grad_buf(self);
        Tensor& dx = g.grad_buf(x);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < w; ++c)
                dx.v[static_cast<std::size_t>(r * f + lo + c)] +=
                    dy.v[static_cast<std::size_t>(r * w + c)];
    });
}

Graph::NodeId Graph::reshape(NodeId x, std::vector<int> shape) {
    const Tensor& xv = value(x);
    Tensor y(std::move(shape), xv.v);
    return push(std::move(y), wants(x), [x](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        const Tensor& dy = g.grad_buf(self);
        Tensor& dx = g.grad_buf(x);
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dy.v[i];
    });
}

Graph::NodeId Graph::channel_mean(NodeId x, int channel) {
    const Tensor& xv = value(x);
    if (xv.rank() < 2) throw ShapeError("channel_mean expects [N, C, ...]");
    if (channel < 0 || channel >= xv.shape[1])
        throw std::invalid_argument("channel " + std::to_string(channel) + " out of range");
    const int n = xv.shape[0], c = xv.shape[1];
    long sp = 1;
    for (int a = 2; a < xv.rank(); ++a) sp *= xv.shape[static_cast<std::size_t>(a)];
    double acc = 0.0;
    for (int r = 0; r < n; ++r) {
        const double* p = xv.v.data() + (static_cast<long>(r) * c + channel) * sp;
        for (long i = 0; i < sp; ++i) acc += p[i];
    }
    const double denom = static_cast<double>(n) * static_cast<double>(sp);
    Tensor y = Tensor::scalar(acc / denom);
    return push(std::move(y), wants(x), [x, channel, n, c, sp, denom](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        const double gy = g.grad_buf(self).v[0] / denom;
        Tensor& dx = g.grad_buf(x);
        for (int r = 0; r < n; ++r) {
            double* p = dx.v.data() + (static_cast<long>(r) * c + channel) * sp;
            for (long i = 0; i < sp; ++i) p[i] += gy;
        }
    });
}

Graph::NodeId Graph::dot_const(NodeId x, Tensor w) {
    const Tensor& xv = value(x);
    if (xv.numel() != w.numel()) throw ShapeError("dot_const weight length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.v.size(); ++i) acc += xv.v[i] * w.v[i];
    auto wk = std::make_shared<Tensor>(std::move(w));
    return push(Tensor::scalar(acc), wants(x), [x, wk](Graph& g, NodeId self) {
        if (!g.wants(x)) return;
        const double gy = g.grad_buf(self).v[0];
        Tensor& dx = g.grad_buf(x);
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += gy * wk->v[i];
    });
}

Graph::NodeId Graph::bce_loss(NodeId p, NodeId y) {
    const Tensor& pv = value(p);
    const Tensor& yv = value(y);
    if (!pv.same_shape(yv)) throw ShapeError("bce_loss prediction/label shape mismatch");
    const long n = static_cast<long>(pv.v.size());
    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
        const double pc = std::clamp(pv.v[static_cast<std::size_t>(i)], kBceEps, 1.0 - kBceEps);
        const double yi = yv.v[static_cast<std::size_t>(i)];
        acc -= yi * std::log(pc) + (1.0 - yi) * std::log(1.0 - pc);
    }
    return push(Tensor::scalar(acc / static_cast<double>(n)), wants(p),
                [p, y, n](Graph& g, NodeId self) {
                    if (!g.wants(p)) return;
                    const double gy = g.grad_buf(self).v[0] / static_cast<double>(n);
                    const Tensor& pv2 = g.value(p);
                    const Tensor& yv2 = g.value(y);
                    Tensor& dp = g.grad_buf(p);
                    for (long i = 0; i < n; ++i) {
                        const std::size_t ii = static_cast<std::size_t>(i);
                        const double pc = std::clamp(pv2.v[ii], kBceEps, 1.0 - kBceEps);
                        dp.v[ii] += gy * ((1.0 - yv2.v[ii]) / (1.0 - pc) - yv2.v[ii] / pc);
                    }
                });
}

void Graph::backward(NodeId loss) {
    if (nodes_.empty()) throw StateError("backward called on an empty tape");
    const std::size_t li = check(loss);
    if (nodes_[li].value.numel() != 1)
        throw std::invalid_argument("backward needs a scalar loss node");
    grad_buf(loss).v[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.grad_alloc || !n.back) continue;
        n.back(*this, id);
    }
    for (Node& n : nodes_)
        if (n.bound && n.grad_alloc)
            for (std::size_t i = 0; i < n.grad.v.size(); ++i) n.bound->grad.v[i] += n.grad.v[i];
}

}  // namespace movedec::nn
