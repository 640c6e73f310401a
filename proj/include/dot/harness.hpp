// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dot/config.hpp"
#include "dot/datasets.hpp"
#include "dot/diagnostics.hpp"
#include "dot/losses.hpp"
#include "dot/network.hpp"
#include "dot/optim.hpp"

namespace dot {

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TrainerKind { kVanilla, kDot };

/// Resolved experiment settings. Every field has a default forming the
/// reference desk-scale recipe; from_key_values overlays a parsed config and
/// rejects unknown keys.
struct ExperimentConfig {
    // dataset
    std::string dataset_kind = "spirals";  // spirals | blobs | csv
    std::size_t dataset_classes = 3;
    std::size_t dataset_points_per_class = 500;
    double dataset_noise = 0.2;
    double dataset_center_spread = 4.0;
    double dataset_cluster_std = 0.5;
    std::string dataset_path;
    double dataset_train_fraction = 0.8;
    std::uint64_t dataset_seed = 1234;

    std::vector<std::size_t> teacher_hidden = {128, 128};
    std::vector<std::size_t> student_hidden = {8};

    DistillConfig distill;  // alpha 0.1, T 4, teacher-first, T^2 on

    TrainerKind trainer_kind = TrainerKind::kDot;
    TrainerConfig trainer = {.learning_rate = 0.05, .momentum = 0.9, .delta = 0.075};
    std::vector<std::size_t> milestones = {100, 150};
    double lr_decay = 0.1;

    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string out_dir = "runs";

    bool diag_cosines = true;
    bool diag_landscape = false;
    std::size_t diag_landscape_directions = 10;
    double diag_landscape_radius = 0.5;
    std::vector<double> diag_landscape_radii = {-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0};
    bool diag_fidelity = false;

    static ExperimentConfig from_key_values(const KeyValueConfig& kv);
    KeyValueConfig to_key_values() const;
    void validate() const;

    NetworkSpec teacher_spec(std::size_t input_dim, std::size_t num_classes) const;
    NetworkSpec student_spec(std::size_t input_dim, std::size_t num_classes) const;
};

struct DataSplits {
    LabeledDataset train;
    LabeledDataset test;

    std::size_t input_dim() const { return train.inputs.dim(1); }
    std::size_t num_classes() const { return train.num_classes; }
};

/// Generates (or loads) the configured dataset and applies the stratified split.
DataSplits make_dataset(const ExperimentConfig& cfg);

struct RunResult {
    ParameterSet params;  // final parameters; on divergence, the last epoch-start snapshot
    std::vector<RunRecord> iteration_records;
    std::vector<RunRecord> epoch_records;
    bool diverged = false;
    std::string diagnostic;  // set when diverged
    double final_train_task_loss = 0.0;
    double final_train_distill_loss = 0.0;
    double final_train_accuracy = 0.0;
    double final_test_accuracy = 0.0;
    std::optional<double> sharpness_value;
    std::optional<FidelityResult> fidelity;
    std::optional<LandscapeSlice> landscape;
};

/// Teacher pretraining: vanilla momentum trainer on the task loss alone.
RunResult train_teacher(const ExperimentConfig& cfg, const DataSplits& data, std::uint64_t seed);

/// Student distillation under the configured trainer. Per batch the two
/// losses get separate backward passes yielding an exact DualGradient; the
/// teacher stays frozen and its logits are recomputed per batch.
RunResult distill_student(const ExperimentConfig& cfg, const DataSplits& data, const ParameterSet& teacher,
                          std::uint64_t seed);

/// Writes config.txt, iterations.csv, epochs.csv, <role>.tensors,
/// summary.csv and toggled diagnostics into dir (created if needed).
void write_run_artifacts(const std::string& dir, const ExperimentConfig& cfg, std::uint64_t seed,
                         const std::string& role, const RunResult& result);

// Two-logit toy problem: one trainable logit pair under cross-entropy toward
// class 1 plus a KL pull toward a fixed teacher probability, optimized by
// the vanilla trainer and the dual-momentum trainer from the same start.
struct ToyConfig {
    double delta = 0.075;
    std::size_t steps = 2000;
    double learning_rate = 0.1;
    double momentum = 0.9;
    double temperature = 1.0;
    double teacher_prob = 0.7;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    // seeded uniform in [-1, 1]^2 unless pinned explicitly
    std::optional<std::pair<double, double>> init_logits;
};

struct ToyTrajectory {
    std::vector<double> vanilla_prob;  // class-1 probability after each step
    std::vector<double> dot_prob;
};

ToyTrajectory toy_experiment(const ToyConfig& cfg);
void write_toy_csv(const ToyTrajectory& trajectory, const std::string& path);

enum class SweepAxis { kDelta, kMu, kAlpha };
SweepAxis sweep_axis_from_string(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepRow {
    SweepAxis axis;
    double value = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    double final_train_task_loss = 0.0;
    double final_train_distill_loss = 0.0;
    double test_accuracy = 0.0;
};

/// Independent runs per (value, seed); teachers are trained once per seed and
/// reused. Failures are isolated into not-ok rows and the sweep continues.
std::vector<SweepRow> ablation_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

/// Runs fn(0..count-1) on up to max_workers threads (hardware concurrency
/// when 0). Rethrows the first exception after all jobs finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, std::size_t max_workers = 0);

}  // namespace dot
