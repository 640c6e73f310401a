// SPDX-License-Identifier: Apache-2.0
#include "dot/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dot {

void TrainerConfig::validate_base() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainerConfig: learning_rate must be positive");
    if (!(momentum > 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainerConfig: momentum must lie in (0, 1)");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainerConfig: weight_decay must be nonnegative");
    if (!(decay_task_fraction >= 0.0 && decay_task_fraction <= 1.0)) {
        throw std::invalid_argument("TrainerConfig: decay_task_fraction must lie in [0, 1]");
    }
}

void TrainerConfig::validate() const {
    validate_base();
    // both buffer coefficients mu -/+ delta must stay inside (-1, 1)
    if (!(momentum + delta < 1.0 && momentum + delta > -1.0 && momentum - delta < 1.0 &&
          momentum - delta > -1.0)) {
        throw std::invalid_argument("TrainerConfig: need mu + delta and mu - delta inside (-1, 1)");
    }
}

SgdState SgdState::init(const ParameterSet& params) {
    SgdState state;
    state.buffers = TensorMap::zeros_like(params);
    return state;
}

DotState DotState::init(const ParameterSet& params, std::map<std::string, bool> shared_mask) {
    DotState state;
    state.ce_buffers = TensorMap::zeros_like(params);
    state.kd_buffers = TensorMap::zeros_like(params);
    state.shared_mask = std::move(shared_mask);
    for (const std::string& name : params.names()) {
        if (state.shared_mask.find(name) == state.shared_mask.end()) {
            throw std::invalid_argument("DotState: shared_mask missing entry for '" + name + "'");
        }
    }
    return state;
}

DotState DotState::init(const ParameterSet& params) {
    return init(params, compute_shared_mask(params.names(), LossTopology::logit_distillation(params.names())));
}

namespace {

const Tensor* find_grad(const TensorMap& grads, const std::string& name) {
    return grads.contains(name) ? &grads.at(name) : nullptr;
}

void require_grad_shape(const Tensor* g, const Tensor& param, const std::string& name) {
    if (g != nullptr && !g->same_shape(param)) {
        throw std::invalid_argument("optimizer step: gradient for '" + name + "' has shape " + shape_str(g->shape()) +
                                    ", parameter has " + shape_str(param.shape()));
    }
}

}  // namespace

void sgd_step(ParameterSet& params, const TensorMap& grad_total, SgdState& state, const TrainerConfig& cfg) {
    cfg.validate_base();  // the single-buffer rule never reads delta
    for (const std::string& name : params.names()) {
        Tensor& theta = params.at(name);
        Tensor& v = state.buffers.at(name);
        const Tensor* g = find_grad(grad_total, name);
        require_grad_shape(g, theta, name);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            double gi = g != nullptr ? (*g)[i] : 0.0;
            gi += cfg.weight_decay * theta[i];
            v[i] = gi + cfg.momentum * v[i];
            theta[i] -= cfg.learning_rate * v[i];
        }
    }
}

void dot_step(ParameterSet& params, const DualGradient& grads, DotState& state, const TrainerConfig& cfg) {
    cfg.validate();
    for (const std::string& name : params.names()) {
        Tensor& theta = params.at(name);
        Tensor& v_ce = state.ce_buffers.at(name);
        Tensor& v_kd = state.kd_buffers.at(name);
        const Tensor* g_ce = find_grad(grads.g_ce, name);
        const Tensor* g_kd = find_grad(grads.g_kd, name);
        require_grad_shape(g_ce, theta, name);
        require_grad_shape(g_kd, theta, name);
        auto mask_it = state.shared_mask.find(name);
        if (mask_it == state.shared_mask.end()) {
            throw std::invalid_argument("dot_step: shared_mask missing entry for '" + name + "'");
        }
        const bool shared = mask_it->second;
        const double coeff_ce = shared ? cfg.momentum - cfg.delta : cfg.momentum;
        const double coeff_kd = shared ? cfg.momentum + cfg.delta : cfg.momentum;
        const double decay_ce = cfg.weight_decay * cfg.decay_task_fraction;
        const double decay_kd = cfg.weight_decay * (1.0 - cfg.decay_task_fraction);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gce = (g_ce != nullptr ? (*g_ce)[i] : 0.0) + decay_ce * theta[i];
            const double gkd = (g_kd != nullptr ? (*g_kd)[i] : 0.0) + decay_kd * theta[i];
            v_ce[i] = gce + coeff_ce * v_ce[i];
            v_kd[i] = gkd + coeff_kd * v_kd[i];
            theta[i] -= cfg.learning_rate * (v_ce[i] + v_kd[i]);
        }
    }
}

TensorMap vdiff_identity(const DotState& state_before, const DualGradient& grads, const TrainerConfig& cfg,
                         double tol) {
    cfg.validate();
    TensorMap diff;
    for (const std::string& name : state_before.ce_buffers.names()) {
        const Tensor& v_ce = state_before.ce_buffers.at(name);
        const Tensor& v_kd = state_before.kd_buffers.at(name);
        require_same_shape(v_ce, v_kd, "vdiff_identity");
        const Tensor* g_ce = find_grad(grads.g_ce, name);
        const Tensor* g_kd = find_grad(grads.g_kd, name);
        Tensor out(v_ce.shape());
        for (std::size_t i = 0; i < v_ce.size(); ++i) {
            const double gce = g_ce != nullptr ? (*g_ce)[i] : 0.0;
            const double gkd = g_kd != nullptr ? (*g_kd)[i] : 0.0;
            // both update rules from the same pre-step buffers
            const double v_dot = (gce + (cfg.momentum - cfg.delta) * v_ce[i]) +
                                 (gkd + (cfg.momentum + cfg.delta) * v_kd[i]);
            const double v_sgd = (gce + gkd) + cfg.momentum * (v_ce[i] + v_kd[i]);
            const double by_rules = v_dot - v_sgd;
            const double by_identity = cfg.delta * (v_kd[i] - v_ce[i]);
            if (std::fabs(by_rules - by_identity) > tol) {
                throw std::logic_error("vdiff_identity: routes disagree at '" + name + "'[" + std::to_string(i) +
                                       "]: " + std::to_string(by_rules) + " vs " + std::to_string(by_identity));
            }
            out[i] = by_identity;
        }
        diff.add(name, std::move(out));
    }
    return diff;
}

LossTopology LossTopology::logit_distillation(const std::vector<std::string>& names) {
    LossTopology topology;
    topology.task_params.insert(names.begin(), names.end());
    topology.distill_params.insert(names.begin(), names.end());
    return topology;
}

std::map<std::string, bool> compute_shared_mask(const std::vector<std::string>& param_names,
                                                const LossTopology& topology) {
    std::map<std::string, bool> mask;
    for (const std::string& name : param_names) {
        mask[name] = topology.task_params.count(name) != 0 && topology.distill_params.count(name) != 0;
    }
    return mask;
}

std::map<std::string, bool> compute_shared_mask(const NetworkSpec& spec, const LossTopology& topology) {
    return compute_shared_mask(spec.parameter_names(), topology);
}

double lr_schedule(std::size_t epoch, double base_lr, const std::vector<std::size_t>& milestones, double gamma_decay) {
    if (!(base_lr > 0.0)) throw std::invalid_argument("lr_schedule: base_lr must be positive");
    for (std::size_t i = 1; i < milestones.size(); ++i) {
        if (milestones[i - 1] > milestones[i]) {
            throw std::invalid_argument("lr_schedule: milestones must be sorted ascending");
        }
    }
    double lr = base_lr;
    for (std::size_t m : milestones) {
        if (m <= epoch) lr *= gamma_decay;
    }
    return lr;
}

namespace {

TensorMap suffixed(const TensorMap& buffers, const std::string& suffix) {
    TensorMap out;
    for (const std::string& name : buffers.names()) out.add(name + suffix, buffers.at(name));
    return out;
}

TensorMap strip_suffix(const TensorMap& stored, const std::string& suffix) {
    TensorMap out;
    for (const std::string& name : stored.names()) {
        if (name.size() <= suffix.size() || name.substr(name.size() - suffix.size()) != suffix) {
            throw std::invalid_argument("optimizer state: tensor '" + name + "' lacks expected suffix '" + suffix +
                                        "'");
        }
        out.add(name.substr(0, name.size() - suffix.size()), stored.at(name));
    }
    return out;
}

}  // namespace

void save_state(const SgdState& state, const std::string& path) {
    save_tensors(suffixed(state.buffers, ".v"), path);
}

void save_state(const DotState& state, const std::string& path) {
    TensorMap out;
    for (const std::string& name : state.ce_buffers.names()) out.add(name + ".v_ce", state.ce_buffers.at(name));
    for (const std::string& name : state.kd_buffers.names()) out.add(name + ".v_kd", state.kd_buffers.at(name));
    save_tensors(out, path);
}

SgdState load_sgd_state(const std::string& path) {
    SgdState state;
    state.buffers = strip_suffix(load_tensors(path), ".v");
    return state;
}

DotState load_dot_state(const std::string& path, std::map<std::string, bool> shared_mask) {
    TensorMap stored = load_tensors(path);
    TensorMap ce, kd;
    for (const std::string& name : stored.names()) {
        const std::string ce_suffix = ".v_ce", kd_suffix = ".v_kd";
        if (name.size() > ce_suffix.size() && name.substr(name.size() - ce_suffix.size()) == ce_suffix) {
            ce.add(name.substr(0, name.size() - ce_suffix.size()), stored.at(name));
        } else if (name.size() > kd_suffix.size() && name.substr(name.size() - kd_suffix.size()) == kd_suffix) {
            kd.add(name.substr(0, name.size() - kd_suffix.size()), stored.at(name));
        } else {
            throw std::invalid_argument("optimizer state: unexpected tensor '" + name + "'");
        }
    }
    DotState state;
    state.ce_buffers = std::move(ce);
    state.kd_buffers = std::move(kd);
    state.shared_mask = std::move(shared_mask);
    return state;
}

}  // namespace dot
