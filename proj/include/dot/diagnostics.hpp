// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dot/datasets.hpp"
#include "dot/network.hpp"
#include "dot/optim.hpp"

namespace dot {

/// One log row. Per-iteration rows carry batch losses and, for dual-buffer
/// runs, the momentum cosines; per-epoch rows carry full-dataset losses and
/// accuracies. Absent fields serialize as empty CSV cells.
struct RunRecord {
    std::size_t iteration = 0;
    std::size_t epoch = 0;
    double train_task_loss = 0.0;
    double train_distill_loss = 0.0;
    std::optional<double> cos_kd;
    std::optional<double> cos_ce;
    std::optional<double> train_accuracy;
    std::optional<double> test_accuracy;
    double learning_rate = 0.0;
};

inline constexpr const char* kRunRecordHeader =
    "iteration,epoch,train_task_loss,train_distill_loss,cos_kd,cos_ce,train_accuracy,test_accuracy,learning_rate";

std::string run_record_row(const RunRecord& record);

/// dot(a, b) / (|a| |b|); 0 when either vector is zero. Lengths must match.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Buffers restricted to mask-true parameters, concatenated in lexicographic
/// name order.
std::vector<double> flatten_shared(const TensorMap& buffers, const std::map<std::string, bool>& mask);

/// Post-update diagnostics row for a dual-buffer step: cos_kd compares
/// v_ce + v_kd against v_kd over shared parameters, cos_ce against v_ce.
RunRecord record_iteration(std::size_t iteration, std::size_t epoch, double task_loss, double distill_loss,
                           double learning_rate, const DotState& state);

/// Single-buffer runs log no cosines.
RunRecord record_iteration(std::size_t iteration, std::size_t epoch, double task_loss, double distill_loss,
                           double learning_rate, const SgdState& state);

struct LandscapeSlice {
    std::vector<double> radii;        // sorted, includes 0
    std::vector<double> loss_values;  // matching order
    std::uint64_t direction_seed = 0;
};

using LossOnParameters = std::function<double(const ParameterSet&)>;

/// Gaussian direction with the same shapes as params. Each weight-matrix row
/// is rescaled to the norm of the corresponding parameter row (zero rows stay
/// zero); each bias is rescaled to the whole-bias norm.
TensorMap filter_normalized_direction(const ParameterSet& params, std::uint64_t seed);

/// Loss along theta + r * direction for each radius; evaluates a copy, the
/// caller's parameters are untouched. Radius 0 evaluates theta itself.
LandscapeSlice landscape_slice(const ParameterSet& params, const LossOnParameters& loss_fn,
                               const TensorMap& direction, std::vector<double> radii,
                               std::uint64_t direction_seed = 0);

/// Mean training cross-entropy at each perturbation radius.
LandscapeSlice landscape_slice(const ParameterSet& params, const NetworkSpec& spec, const LabeledDataset& dataset,
                               const TensorMap& direction, std::vector<double> radii,
                               std::uint64_t direction_seed = 0);

/// max over sampled filter-normalized directions of loss(theta + radius d) - loss(theta).
double sharpness(const ParameterSet& params, const LossOnParameters& loss_fn, std::size_t num_directions,
                 double radius, std::uint64_t seed);
double sharpness(const ParameterSet& params, const NetworkSpec& spec, const LabeledDataset& dataset,
                 std::size_t num_directions, double radius, std::uint64_t seed);

/// 2-D landscape over two directions, the second orthogonalized against the
/// first; for plotting parity with 1-D slices.
struct LandscapeGrid {
    std::vector<double> radii_first;
    std::vector<double> radii_second;
    Tensor loss;  // [radii_first x radii_second]
};
LandscapeGrid landscape_grid(const ParameterSet& params, const LossOnParameters& loss_fn, std::uint64_t seed,
                             const std::vector<double>& radii_first, const std::vector<double>& radii_second);

/// Elementwise |corr_student - corr_teacher| of the Pearson correlation
/// matrices across logit dimensions, plus its mean. Entries involving a
/// constant logit column are set to 0 and counted as warnings.
struct FidelityResult {
    Tensor difference;  // C x C
    double mean_abs = 0.0;
    std::size_t constant_column_warnings = 0;
};
FidelityResult fidelity_difference(const Tensor& student_logits, const Tensor& teacher_logits);

}  // namespace dot
