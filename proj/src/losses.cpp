// SPDX-License-Identifier: Apache-2.0
#include "dot/losses.hpp"

#include <stdexcept>

namespace dot {

void DistillConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("DistillConfig: alpha must lie in [0, 1]");
    if (!(temperature > 0.0)) throw std::invalid_argument("DistillConfig: temperature must be positive");
}

NodeId cross_entropy(Tape& tape, NodeId logits, const std::vector<std::size_t>& labels) {
    const Tensor& z = tape.value(logits);
    if (z.rank() != 2) {
        throw std::invalid_argument("cross_entropy: logits must be rank-2, got " + shape_str(z.shape()));
    }
    if (labels.size() != z.dim(0)) {
        throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(z.dim(0)) + " rows");
    }
    for (std::size_t label : labels) {
        if (label >= z.dim(1)) {
            throw std::invalid_argument("cross_entropy: label " + std::to_string(label) + " out of range for " +
                                        std::to_string(z.dim(1)) + " classes");
        }
    }
    NodeId log_probs = tape.log_softmax(logits, 1.0);
    NodeId picked = tape.pick(log_probs, labels);
    return tape.mean_all(tape.scale(picked, -1.0));
}

NodeId kd_divergence(Tape& tape, NodeId student_logits, const Tensor& teacher_logits, const DistillConfig& cfg) {
    cfg.validate();
    const Tensor& p = tape.value(student_logits);
    require_same_shape(p, teacher_logits, "kd_divergence");
    if (p.rank() != 2) {
        throw std::invalid_argument("kd_divergence: logits must be rank-2, got " + shape_str(p.shape()));
    }

    // Teacher distributions are constants on the tape: values flow, gradients do not.
    NodeId teacher = tape.constant(teacher_logits);
    NodeId t_probs = tape.softmax(teacher, cfg.temperature);
    NodeId t_log_probs = tape.log_softmax(teacher, cfg.temperature);
    NodeId s_log_probs = tape.log_softmax(student_logits, cfg.temperature);

    NodeId per_entry;
    if (cfg.kl_order == KlOrder::kTeacherFirst) {
        // sum_c t_c * (ln t_c - ln s_c)
        per_entry = tape.mul(t_probs, tape.sub(t_log_probs, s_log_probs));
    } else {
        // sum_c s_c * (ln s_c - ln t_c)
        NodeId s_probs = tape.softmax(student_logits, cfg.temperature);
        per_entry = tape.mul(s_probs, tape.sub(s_log_probs, t_log_probs));
    }
    NodeId kl = tape.mean_all(tape.sum_rows(per_entry));
    if (cfg.t_square_scaling) {
        kl = tape.scale(kl, cfg.temperature * cfg.temperature);
    }
    return kl;
}

CombinedLoss combined_loss(Tape& tape, NodeId student_logits, const std::vector<std::size_t>& labels,
                           const Tensor& teacher_logits, const DistillConfig& cfg) {
    cfg.validate();
    CombinedLoss result;
    result.task = cross_entropy(tape, student_logits, labels);
    result.distill = kd_divergence(tape, student_logits, teacher_logits, cfg);
    result.total = tape.add(tape.scale(result.task, cfg.alpha), tape.scale(result.distill, 1.0 - cfg.alpha));
    return result;
}

double cross_entropy_value(const Tensor& logits, const std::vector<std::size_t>& labels) {
    Tape tape;
    return tape.scalar_value(cross_entropy(tape, tape.constant(logits), labels));
}

double kd_divergence_value(const Tensor& student_logits, const Tensor& teacher_logits, const DistillConfig& cfg) {
    Tape tape;
    return tape.scalar_value(kd_divergence(tape, tape.constant(student_logits), teacher_logits, cfg));
}

}  // namespace dot
