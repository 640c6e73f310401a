// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dot/tensor.hpp"

namespace dot {

/// Named tensors in insertion order. Backs parameter sets, momentum buffers
/// and gradient maps; name order is the canonical traversal order everywhere.
class TensorMap {
public:
    void add(std::string name, Tensor value);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    bool empty() const { return names_.empty(); }
    std::size_t total_elements() const;

    static TensorMap zeros_like(const TensorMap& other);

    bool operator==(const TensorMap& other) const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Tensor> index_;
};

/// Flat text tensor format, one line per tensor: `name shape_csv value_csv`,
/// values at 17 significant digits (round-trip exact).
void save_tensors(const TensorMap& tensors, const std::string& path);
TensorMap load_tensors(const std::string& path);

std::string tensors_to_string(const TensorMap& tensors);
TensorMap tensors_from_string(const std::string& text);

}  // namespace dot
