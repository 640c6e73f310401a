// SPDX-License-Identifier: Apache-2.0
#include "dot/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dot {

TensorMap finite_difference_gradient(const LossOnParams& loss_fn, const TensorMap& params, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be positive");
    TensorMap grads = TensorMap::zeros_like(params);
    TensorMap probe = params;
    for (const std::string& name : params.names()) {
        Tensor& coords = probe.at(name);
        Tensor& out = grads.at(name);
        for (std::size_t i = 0; i < coords.size(); ++i) {
            const double saved = coords[i];
            coords[i] = saved + step;
            const double plus = loss_fn(probe);
            coords[i] = saved - step;
            const double minus = loss_fn(probe);
            coords[i] = saved;
            out[i] = (plus - minus) / (2.0 * step);
        }
    }
    return grads;
}

double max_relative_error(const TensorMap& a, const TensorMap& b) {
    if (a.names() != b.names()) {
        throw std::invalid_argument("max_relative_error: tensor name sets differ");
    }
    double worst = 0.0;
    for (const std::string& name : a.names()) {
        const Tensor& ta = a.at(name);
        const Tensor& tb = b.at(name);
        require_same_shape(ta, tb, "max_relative_error");
        for (std::size_t i = 0; i < ta.size(); ++i) {
            const double denom = std::max({std::fabs(ta[i]), std::fabs(tb[i]), 1e-8});
            worst = std::max(worst, std::fabs(ta[i] - tb[i]) / denom);
        }
    }
    return worst;
}

}  // namespace dot
