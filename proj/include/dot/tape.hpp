// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dot/tensor.hpp"
#include "dot/tensor_map.hpp"

namespace dot {

using NodeId = std::size_t;

/// Reverse-mode differentiation tape. Primitive operations append nodes in
/// topological order (operands always precede their consumers); backward()
/// replays the recorded pullbacks once, newest to oldest. A tape is built
/// fresh for every forward pass and is consumable by a single backward call.
///
/// Tapes are single-threaded; independent tapes may run concurrently.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf with no gradient tracking (inputs, frozen teacher logits).
    NodeId constant(Tensor value);

    /// Named differentiable leaf; backward() reports gradients under this name.
    NodeId parameter(const std::string& name, Tensor value);

    /// out[b,o] = sum_i input[b,i] * weight[i,o] + bias[o]
    NodeId affine(NodeId input, NodeId weight, NodeId bias);

    /// Elementwise max(0, x). Subgradient at 0 is 0.
    NodeId relu(NodeId x);

    /// Row-wise softmax of logits / temperature, max-subtracted for stability.
    NodeId softmax(NodeId logits, double temperature);

    /// Row-wise log(softmax(logits / temperature)), same stabilization.
    NodeId log_softmax(NodeId logits, double temperature);

    NodeId add(NodeId a, NodeId b);  // elementwise, equal shapes
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId x, double factor);

    /// out[b] = x[b, columns[b]] for a rank-2 x.
    NodeId pick(NodeId x, const std::vector<std::size_t>& columns);

    /// out[b] = sum_c x[b,c] for a rank-2 x.
    NodeId sum_rows(NodeId x);

    /// Rank-0 mean of all entries.
    NodeId mean_all(NodeId x);

    const Tensor& value(NodeId id) const;
    double scalar_value(NodeId id) const;

    /// Reverse sweep from a rank-0 output node. Returns the gradient of the
    /// output with respect to every named parameter leaf (zero tensors for
    /// leaves the output does not depend on). One call per tape.
    TensorMap backward(NodeId output);

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    // Pullback accumulates d(output)/d(parent) contributions given
    // d(output)/d(node); grads is indexed by NodeId.
    using Pullback = std::function<void(const Tensor& gout, std::vector<Tensor>& grads)>;

    struct Node {
        Tensor value;
        Pullback pullback;       // empty for leaves
        bool requires_grad = false;
        std::string name;        // parameter leaves only
    };

    NodeId push(Node node);
    const Node& node(NodeId id) const;
    Tensor& grad_at(std::vector<Tensor>& grads, NodeId id);

    std::vector<Node> nodes_;
    std::vector<NodeId> parameter_ids_;
    bool consumed_ = false;
};

}  // namespace dot
