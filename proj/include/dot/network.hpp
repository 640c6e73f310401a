// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dot/tape.hpp"
#include "dot/tensor_map.hpp"

namespace dot {

/// Multilayer perceptron classifier: affine -> relu through the hidden
/// layers, a final affine producing raw logits. Zero hidden layers is a
/// linear classifier.
struct NetworkSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t num_classes = 0;

    void validate() const;

    /// layer{k}.weight / layer{k}.bias names with their shapes, in layer order.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_shapes() const;
    std::vector<std::string> parameter_names() const;
};

using ParameterSet = TensorMap;

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
/// Identical (spec, seed) gives byte-identical parameters.
ParameterSet init_network(const NetworkSpec& spec, std::uint64_t seed);

/// Plain forward pass, no gradient tracking. inputs is [B x input_dim],
/// result is raw logits [B x num_classes].
Tensor forward(const ParameterSet& params, const NetworkSpec& spec, const Tensor& inputs);

/// Forward pass recorded on a tape; parameters become named leaves so
/// backward() reports per-parameter gradients.
NodeId forward_on_tape(Tape& tape, const ParameterSet& params, const NetworkSpec& spec, const Tensor& inputs);

/// Fraction of rows whose argmax matches the label; ties break toward the
/// lowest class index.
double accuracy(const Tensor& logits, const std::vector<std::size_t>& labels);

}  // namespace dot
