// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dot/network.hpp"
#include "dot/tensor_map.hpp"

namespace dot {

struct TrainerConfig {
    double learning_rate = 0.05;  // gamma
    double momentum = 0.9;        // mu
    double delta = 0.0;           // momentum split; negative gives the task-oriented variant
    double weight_decay = 0.0;
    // Share of the decay term folded into the task gradient stream; the
    // remainder goes to the distillation stream. Default: all task-side.
    double decay_task_fraction = 1.0;

    void validate() const;  // gamma > 0, 0 < mu < 1, mu + delta < 1, mu - delta > -1
    void validate_base() const;  // same checks minus the delta constraints
};

/// Single-buffer momentum trainer state:  v <- g + mu v,  theta <- theta - gamma v.
struct SgdState {
    TensorMap buffers;  // v, zero-initialized, shapes mirror the parameters

    static SgdState init(const ParameterSet& params);
};

/// Dual-momentum trainer state. Shared parameters (reached by both losses)
/// use coefficients mu - delta / mu + delta; parameters reached by a single
/// loss keep mu on both buffers.
struct DotState {
    TensorMap ce_buffers;  // v_ce
    TensorMap kd_buffers;  // v_kd
    std::map<std::string, bool> shared_mask;

    static DotState init(const ParameterSet& params, std::map<std::string, bool> shared_mask);
    /// All-shared mask, the logit-distillation case.
    static DotState init(const ParameterSet& params);
};

/// Per-parameter gradient pair from one mini-batch; loss weights are already
/// folded in (g_ce = alpha * grad CE, g_kd = (1 - alpha) * grad KD). Missing
/// entries are treated as zero arrays.
struct DualGradient {
    TensorMap g_ce;
    TensorMap g_kd;
};

/// v <- g + mu v, then theta <- theta - gamma v, in that order. Weight decay
/// is pre-added to g as decay * theta. Gradient inputs are never modified.
void sgd_step(ParameterSet& params, const TensorMap& grad_total, SgdState& state, const TrainerConfig& cfg);

/// v_ce <- g_ce + (mu - delta) v_ce and v_kd <- g_kd + (mu + delta) v_kd on
/// shared parameters (both coefficients mu elsewhere), then
/// theta <- theta - gamma (v_ce + v_kd).
void dot_step(ParameterSet& params, const DualGradient& grads, DotState& state, const TrainerConfig& cfg);

/// Computes v_dot - v_sgd from the same pre-step buffers two ways: by running
/// both update rules, and as delta * (v_kd - v_ce). Throws std::logic_error
/// if the two routes disagree beyond tol; returns the difference buffers.
TensorMap vdiff_identity(const DotState& state_before, const DualGradient& grads, const TrainerConfig& cfg,
                         double tol = 1e-12);

/// Which parameters each loss reaches. Logit distillation reaches everything
/// with both losses; feature-style setups can declare one-sided parameters.
struct LossTopology {
    std::set<std::string> task_params;
    std::set<std::string> distill_params;

    static LossTopology logit_distillation(const std::vector<std::string>& names);
};

/// True where a parameter receives gradients from both losses.
std::map<std::string, bool> compute_shared_mask(const std::vector<std::string>& param_names,
                                                const LossTopology& topology);
std::map<std::string, bool> compute_shared_mask(const NetworkSpec& spec, const LossTopology& topology);

/// base_lr * gamma_decay^(number of milestones <= epoch).
double lr_schedule(std::size_t epoch, double base_lr, const std::vector<std::size_t>& milestones, double gamma_decay);

// Flat text serialization; buffer names carry .v / .v_ce / .v_kd suffixes.
void save_state(const SgdState& state, const std::string& path);
void save_state(const DotState& state, const std::string& path);
SgdState load_sgd_state(const std::string& path);
/// Buffers from the file; the mask is reconstructed by the caller.
DotState load_dot_state(const std::string& path, std::map<std::string, bool> shared_mask);

}  // namespace dot
