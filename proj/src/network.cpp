// SPDX-License-Identifier: Apache-2.0
#include "dot/network.hpp"

#include <cmath>
#include <stdexcept>

namespace dot {

void NetworkSpec::validate() const {
    if (input_dim == 0) throw std::invalid_argument("NetworkSpec: input_dim must be positive");
    if (num_classes < 2) throw std::invalid_argument("NetworkSpec: num_classes must be at least 2");
    for (std::size_t h : hidden_dims) {
        if (h == 0) throw std::invalid_argument("NetworkSpec: hidden dimensions must be positive");
    }
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> NetworkSpec::parameter_shapes() const {
    validate();
    std::vector<std::pair<std::string, std::vector<std::size_t>>> shapes;
    std::size_t fan_in = input_dim;
    for (std::size_t layer = 0; layer <= hidden_dims.size(); ++layer) {
        const std::size_t fan_out = layer < hidden_dims.size() ? hidden_dims[layer] : num_classes;
        const std::string base = "layer" + std::to_string(layer);
        shapes.push_back({base + ".weight", {fan_in, fan_out}});
        shapes.push_back({base + ".bias", {fan_out}});
        fan_in = fan_out;
    }
    return shapes;
}

std::vector<std::string> NetworkSpec::parameter_names() const {
    std::vector<std::string> names;
    for (const auto& [name, shape] : parameter_shapes()) names.push_back(name);
    return names;
}

ParameterSet init_network(const NetworkSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    ParameterSet params;
    for (const auto& [name, shape] : spec.parameter_shapes()) {
        Tensor t(shape);
        if (shape.size() == 2) {
            const double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
        }
        // biases stay zero
        params.add(name, std::move(t));
    }
    return params;
}

namespace {

void require_batch_width(const Tensor& inputs, const NetworkSpec& spec) {
    if (inputs.rank() != 2 || inputs.dim(1) != spec.input_dim) {
        throw std::invalid_argument("forward: inputs " + shape_str(inputs.shape()) + " do not match input_dim " +
                                    std::to_string(spec.input_dim));
    }
}

}  // namespace

Tensor forward(const ParameterSet& params, const NetworkSpec& spec, const Tensor& inputs) {
    spec.validate();
    require_batch_width(inputs, spec);
    // Unrecorded path shares the tape implementation so both routes compute
    // identical values; the tape is local and dropped without a backward.
    Tape tape;
    NodeId logits = forward_on_tape(tape, params, spec, inputs);
    return tape.value(logits);
}

NodeId forward_on_tape(Tape& tape, const ParameterSet& params, const NetworkSpec& spec, const Tensor& inputs) {
    spec.validate();
    require_batch_width(inputs, spec);
    const std::size_t num_layers = spec.hidden_dims.size() + 1;
    std::vector<NodeId> weights, biases;
    for (std::size_t layer = 0; layer < num_layers; ++layer) {
        const std::string base = "layer" + std::to_string(layer);
        weights.push_back(tape.parameter(base + ".weight", params.at(base + ".weight")));
        biases.push_back(tape.parameter(base + ".bias", params.at(base + ".bias")));
    }
    NodeId h = tape.constant(inputs);
    for (std::size_t layer = 0; layer < num_layers; ++layer) {
        h = tape.affine(h, weights[layer], biases[layer]);
        if (layer + 1 < num_layers) h = tape.relu(h);
    }
    return h;
}

double accuracy(const Tensor& logits, const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2) {
        throw std::invalid_argument("accuracy: logits must be rank-2, got " + shape_str(logits.shape()));
    }
    const std::size_t batch = logits.dim(0), classes = logits.dim(1);
    if (labels.size() != batch) {
        throw std::invalid_argument("accuracy: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(batch) + " rows");
    }
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        if (labels[b] >= classes) {
            throw std::invalid_argument("accuracy: label " + std::to_string(labels[b]) + " out of range for " +
                                        std::to_string(classes) + " classes");
        }
        const double* row = logits.data() + b * classes;
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
            if (row[c] > row[best]) best = c;  // strict: ties keep the lowest index
        }
        if (best == labels[b]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(batch);
}

}  // namespace dot
