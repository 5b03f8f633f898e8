#pragma once

#include <functional>
#include <vector>

#include "movedec/kernels.hpp"
#include "movedec/rng.hpp"
#include "movedec/tensor.hpp"

namespace movedec::nn {

// Dynamic reverse-mode tape. Ops append nodes in execution order; backward()
// walks the tape in reverse creation order, which is a valid topological
// order by construction, and accumulates into each node's grad buffer.
// Param leaves add their accumulated node grad into the bound Param at the
// end of the sweep, so one Param used by several nodes (weight sharing
// across timesteps) collects contributions from all of them.
//
// Graphs are single-use: build, backward once, discard.
class Graph {
public:
    using NodeId = int;

    NodeId constant(Tensor v);
    NodeId param(Param& p);

    NodeId conv(NodeId x, NodeId w, NodeId b, const kernels::ConvSpec& spec);
    NodeId dense(NodeId x, NodeId w, NodeId b);
    NodeId maxpool(NodeId x, const kernels::PoolSpec& spec);
    NodeId relu(NodeId x);
    NodeId sigmoid(NodeId x);
    NodeId tanh(NodeId x);
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId x, double factor);
    NodeId dropout(NodeId x, double rate, bool train, Rng& rng);
    NodeId concat_cols(const std::vector<NodeId>& xs);
    NodeId slice_cols(NodeId x, int lo, int hi);
    NodeId reshape(NodeId x, std::vector<int> shape);
    // mean over batch and spatial positions of one channel -> scalar
    NodeId channel_mean(NodeId x, int channel);
    // sum_i x_i * w_i -> scalar, w fixed
    NodeId dot_const(NodeId x, Tensor w);
    // mean of -[y ln p + (1-y) ln(1-p)] with p clamped to [1e-7, 1-1e-7]
    NodeId bce_loss(NodeId p, NodeId y);

    const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
    // valid after backward; zeros if no path from the loss reached the node
    const Tensor& grad(NodeId id);

    void backward(NodeId loss);

    int size() const { return static_cast<int>(nodes_.size()); }

    static constexpr double kBceEps = 1e-7;

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        bool grad_alloc = false;
        Param* bound = nullptr;
        std::function<void(Graph&, NodeId)> back;
    };

    std::vector<Node> nodes_;

    NodeId push(Tensor v, bool needs_grad, std::function<void(Graph&, NodeId)> back);
    std::size_t check(NodeId id) const;
    bool wants(NodeId id) const { return nodes_[check(id)].needs_grad; }
    Tensor& grad_buf(NodeId id);
};

}  // namespace movedec::nn
