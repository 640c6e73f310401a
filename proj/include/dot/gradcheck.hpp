// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "dot/tensor_map.hpp"

namespace dot {

using LossOnParams = std::function<double(const TensorMap&)>;

/// Central-difference gradient estimate, (L(p + h e_i) - L(p - h e_i)) / 2h
/// per coordinate. loss_fn must be deterministic. Independent of the tape
/// engine by construction; serves as its testing oracle.
TensorMap finite_difference_gradient(const LossOnParams& loss_fn, const TensorMap& params, double step);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, 1e-8) over all matching entries.
double max_relative_error(const TensorMap& a, const TensorMap& b);

}  // namespace dot
