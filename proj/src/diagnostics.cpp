// SPDX-License-Identifier: Apache-2.0
#include "dot/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dot/csv.hpp"
#include "dot/losses.hpp"

namespace dot {

std::string run_record_row(const RunRecord& r) {
    std::string row;
    row += std::to_string(r.iteration);
    row += ',';
    row += std::to_string(r.epoch);
    row += ',';
    row += format_double(r.train_task_loss);
    row += ',';
    row += format_double(r.train_distill_loss);
    row += ',';
    row += format_optional(r.cos_kd);
    row += ',';
    row += format_optional(r.cos_ce);
    row += ',';
    row += format_optional(r.train_accuracy);
    row += ',';
    row += format_optional(r.test_accuracy);
    row += ',';
    row += format_double(r.learning_rate);
    return row;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine_similarity: lengths differ, " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    }
    double dot_ab = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot_ab += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
    return dot_ab / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

std::vector<double> flatten_shared(const TensorMap& buffers, const std::map<std::string, bool>& mask) {
    std::vector<double> flat;
    for (const auto& [name, shared] : mask) {  // std::map iterates in lexicographic order
        if (!shared) continue;
        const Tensor& t = buffers.at(name);
        flat.insert(flat.end(), t.data(), t.data() + t.size());
    }
    return flat;
}

RunRecord record_iteration(std::size_t iteration, std::size_t epoch, double task_loss, double distill_loss,
                           double learning_rate, const DotState& state) {
    RunRecord r;
    r.iteration = iteration;
    r.epoch = epoch;
    r.train_task_loss = task_loss;
    r.train_distill_loss = distill_loss;
    r.learning_rate = learning_rate;
    std::vector<double> v_ce = flatten_shared(state.ce_buffers, state.shared_mask);
    std::vector<double> v_kd = flatten_shared(state.kd_buffers, state.shared_mask);
    std::vector<double> v(v_ce.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = v_ce[i] + v_kd[i];
    r.cos_kd = cosine_similarity(v, v_kd);
    r.cos_ce = cosine_similarity(v, v_ce);
    return r;
}

RunRecord record_iteration(std::size_t iteration, std::size_t epoch, double task_loss, double distill_loss,
                           double learning_rate, const SgdState&) {
    RunRecord r;
    r.iteration = iteration;
    r.epoch = epoch;
    r.train_task_loss = task_loss;
    r.train_distill_loss = distill_loss;
    r.learning_rate = learning_rate;
    return r;
}

TensorMap filter_normalized_direction(const ParameterSet& params, std::uint64_t seed) {
    Rng rng(seed);
    TensorMap direction;
    for (const std::string& name : params.names()) {
        const Tensor& p = params.at(name);
        Tensor d(p.shape());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = rng.gaussian();
        if (p.rank() == 2) {
            const std::size_t rows = p.dim(0), cols = p.dim(1);
            for (std::size_t r = 0; r < rows; ++r) {
                double p_norm = 0.0, d_norm = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    p_norm += p.at(r, c) * p.at(r, c);
                    d_norm += d.at(r, c) * d.at(r, c);
                }
                p_norm = std::sqrt(p_norm);
                d_norm = std::sqrt(d_norm);
                const double factor = (p_norm == 0.0 || d_norm == 0.0) ? 0.0 : p_norm / d_norm;
                for (std::size_t c = 0; c < cols; ++c) d.at(r, c) *= factor;
            }
        } else {
            double p_norm = 0.0, d_norm = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                p_norm += p[i] * p[i];
                d_norm += d[i] * d[i];
            }
            p_norm = std::sqrt(p_norm);
            d_norm = std::sqrt(d_norm);
            const double factor = (p_norm == 0.0 || d_norm == 0.0) ? 0.0 : p_norm / d_norm;
            for (std::size_t i = 0; i < d.size(); ++i) d[i] *= factor;
        }
        direction.add(name, std::move(d));
    }
    return direction;
}

namespace {

ParameterSet perturbed(const ParameterSet& params, const TensorMap& direction, double radius) {
    ParameterSet shifted = params;
    for (const std::string& name : params.names()) {
        Tensor& t = shifted.at(name);
        const Tensor& d = direction.at(name);
        require_same_shape(t, d, "landscape perturbation");
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += radius * d[i];
    }
    return shifted;
}

LossOnParameters dataset_task_loss(const NetworkSpec& spec, const LabeledDataset& dataset) {
    return [&spec, &dataset](const ParameterSet& p) {
        return cross_entropy_value(forward(p, spec, dataset.inputs), dataset.labels);
    };
}

}  // namespace

LandscapeSlice landscape_slice(const ParameterSet& params, const LossOnParameters& loss_fn,
                               const TensorMap& direction, std::vector<double> radii,
                               std::uint64_t direction_seed) {
    if (std::find(radii.begin(), radii.end(), 0.0) == radii.end()) {
        throw std::invalid_argument("landscape_slice: radii must include 0");
    }
    std::sort(radii.begin(), radii.end());
    LandscapeSlice slice;
    slice.radii = std::move(radii);
    slice.direction_seed = direction_seed;
    slice.loss_values.reserve(slice.radii.size());
    for (double r : slice.radii) {
        // radius 0 evaluates the caller's parameters directly, so the center
        // loss is exactly the unperturbed loss
        slice.loss_values.push_back(r == 0.0 ? loss_fn(params) : loss_fn(perturbed(params, direction, r)));
    }
    return slice;
}

LandscapeSlice landscape_slice(const ParameterSet& params, const NetworkSpec& spec, const LabeledDataset& dataset,
                               const TensorMap& direction, std::vector<double> radii,
                               std::uint64_t direction_seed) {
    return landscape_slice(params, dataset_task_loss(spec, dataset), direction, std::move(radii), direction_seed);
}

double sharpness(const ParameterSet& params, const LossOnParameters& loss_fn, std::size_t num_directions,
                 double radius, std::uint64_t seed) {
    if (num_directions == 0) throw std::invalid_argument("sharpness: num_directions must be at least 1");
    const double center = loss_fn(params);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < num_directions; ++k) {
        TensorMap direction = filter_normalized_direction(params, mix_seed(seed, k));
        const double shifted = radius == 0.0 ? center : loss_fn(perturbed(params, direction, radius));
        worst = std::max(worst, shifted - center);
    }
    return worst;
}

double sharpness(const ParameterSet& params, const NetworkSpec& spec, const LabeledDataset& dataset,
                 std::size_t num_directions, double radius, std::uint64_t seed) {
    return sharpness(params, dataset_task_loss(spec, dataset), num_directions, radius, seed);
}

LandscapeGrid landscape_grid(const ParameterSet& params, const LossOnParameters& loss_fn, std::uint64_t seed,
                             const std::vector<double>& radii_first, const std::vector<double>& radii_second) {
    TensorMap d1 = filter_normalized_direction(params, mix_seed(seed, 0));
    TensorMap d2 = filter_normalized_direction(params, mix_seed(seed, 1));
    // Gram-Schmidt on the flattened vectors
    double dot12 = 0.0, dot11 = 0.0;
    for (const std::string& name : d1.names()) {
        const Tensor& a = d1.at(name);
        const Tensor& b = d2.at(name);
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot12 += a[i] * b[i];
            dot11 += a[i] * a[i];
        }
    }
    const double proj = dot11 == 0.0 ? 0.0 : dot12 / dot11;
    for (const std::string& name : d2.names()) {
        Tensor& b = d2.at(name);
        const Tensor& a = d1.at(name);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= proj * a[i];
    }

    LandscapeGrid grid;
    grid.radii_first = radii_first;
    grid.radii_second = radii_second;
    grid.loss = Tensor({radii_first.size(), radii_second.size()});
    for (std::size_t i = 0; i < radii_first.size(); ++i) {
        ParameterSet base = perturbed(params, d1, radii_first[i]);
        for (std::size_t j = 0; j < radii_second.size(); ++j) {
            grid.loss.at(i, j) = loss_fn(perturbed(base, d2, radii_second[j]));
        }
    }
    return grid;
}

namespace {

// Pearson correlation matrix across columns; constant columns are flagged.
Tensor correlation_matrix(const Tensor& logits, std::vector<bool>& constant_column) {
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    std::vector<double> mean(c, 0.0), stddev(c, 0.0);
    for (std::size_t col = 0; col < c; ++col) {
        double acc = 0.0;
        for (std::size_t row = 0; row < n; ++row) acc += logits.at(row, col);
        mean[col] = acc / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t row = 0; row < n; ++row) {
            const double d = logits.at(row, col) - mean[col];
            var += d * d;
        }
        stddev[col] = std::sqrt(var);
        constant_column[col] = stddev[col] == 0.0;
    }
    Tensor corr({c, c});
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            if (constant_column[i] || constant_column[j]) {
                corr.at(i, j) = 0.0;
                continue;
            }
            double acc = 0.0;
            for (std::size_t row = 0; row < n; ++row) {
                acc += (logits.at(row, i) - mean[i]) * (logits.at(row, j) - mean[j]);
            }
            corr.at(i, j) = acc / (stddev[i] * stddev[j]);
        }
    }
    return corr;
}

}  // namespace

FidelityResult fidelity_difference(const Tensor& student_logits, const Tensor& teacher_logits) {
    require_same_shape(student_logits, teacher_logits, "fidelity_difference");
    if (student_logits.rank() != 2 || student_logits.dim(0) < 2) {
        throw std::invalid_argument("fidelity_difference: need at least 2 rows of logits, got " +
                                    shape_str(student_logits.shape()));
    }
    const std::size_t c = student_logits.dim(1);
    std::vector<bool> const_student(c, false), const_teacher(c, false);
    Tensor corr_s = correlation_matrix(student_logits, const_student);
    Tensor corr_t = correlation_matrix(teacher_logits, const_teacher);

    FidelityResult result;
    result.difference = Tensor({c, c});
    std::size_t warned_columns = 0;
    for (std::size_t col = 0; col < c; ++col) {
        if (const_student[col] || const_teacher[col]) ++warned_columns;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const bool undefined = const_student[i] || const_student[j] || const_teacher[i] || const_teacher[j];
            const double d = undefined ? 0.0 : std::fabs(corr_s.at(i, j) - corr_t.at(i, j));
            result.difference.at(i, j) = d;
            total += d;
        }
    }
    result.mean_abs = total / static_cast<double>(c * c);
    result.constant_column_warnings = warned_columns;
    return result;
}

}  // namespace dot
