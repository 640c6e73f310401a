// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dot/tape.hpp"

namespace dot {

enum class KlOrder {
    kTeacherFirst,  // KL(teacher || student), the conventional distillation signal
    kStudentFirst,  // KL(student || teacher)
};

struct DistillConfig {
    double alpha = 0.1;        // task-loss weight; distillation gets 1 - alpha
    double temperature = 4.0;  // softening temperature T
    KlOrder kl_order = KlOrder::kTeacherFirst;
    bool t_square_scaling = true;  // multiply the KL by T^2

    void validate() const;
};

/// Mean over the batch of -log softmax(logits)[label], differentiable
/// through the tape. Labels must lie in [0, C).
NodeId cross_entropy(Tape& tape, NodeId logits, const std::vector<std::size_t>& labels);

/// Mean over the batch of the KL divergence between the temperature-softened
/// student and teacher distributions, argument order per cfg.kl_order,
/// multiplied by T^2 when cfg.t_square_scaling. Teacher logits enter as
/// constants: no gradient can reach the teacher.
NodeId kd_divergence(Tape& tape, NodeId student_logits, const Tensor& teacher_logits, const DistillConfig& cfg);

struct CombinedLoss {
    NodeId total;    // alpha * task + (1 - alpha) * distill
    NodeId task;     // cross-entropy term
    NodeId distill;  // KL term
};

/// All three nodes are returned so each gradient stream stays separately
/// differentiable.
CombinedLoss combined_loss(Tape& tape, NodeId student_logits, const std::vector<std::size_t>& labels,
                           const Tensor& teacher_logits, const DistillConfig& cfg);

// Value-only evaluations (no back-propagation); same code path via a local tape.
double cross_entropy_value(const Tensor& logits, const std::vector<std::size_t>& labels);
double kd_divergence_value(const Tensor& student_logits, const Tensor& teacher_logits, const DistillConfig& cfg);

}  // namespace dot
