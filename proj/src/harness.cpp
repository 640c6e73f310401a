// SPDX-License-Identifier: Apache-2.0
#include "dot/harness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "dot/csv.hpp"

namespace dot {

namespace {

// Fixed sub-seed streams so every consumer of the run seed draws
// independently and reproducibly.
constexpr std::uint64_t kTeacherInitStream = 1;
constexpr std::uint64_t kTeacherBatchStream = 2;
constexpr std::uint64_t kStudentInitStream = 3;
constexpr std::uint64_t kStudentBatchStream = 4;
constexpr std::uint64_t kToyInitStream = 11;
constexpr std::uint64_t kSharpnessStream = 500;
constexpr std::uint64_t kLandscapeStream = 501;

}  // namespace

ExperimentConfig ExperimentConfig::from_key_values(const KeyValueConfig& kv) {
    static const std::set<std::string> known = {
        "dataset.kind",           "dataset.classes",        "dataset.points_per_class",
        "dataset.noise",          "dataset.center_spread",  "dataset.cluster_std",
        "dataset.path",           "dataset.train_fraction", "dataset.seed",
        "teacher.hidden",         "student.hidden",         "distill.alpha",
        "distill.temperature",    "distill.kl_order",       "distill.t_square",
        "trainer.kind",           "trainer.lr",             "trainer.momentum",
        "trainer.delta",          "trainer.weight_decay",   "trainer.decay_task_fraction",
        "trainer.milestones",     "trainer.lr_decay",       "epochs",
        "batch_size",             "seeds",                  "out",
        "diag.cosines",           "diag.landscape",         "diag.landscape_directions",
        "diag.landscape_radius",  "diag.landscape_radii",   "diag.fidelity",
    };
    for (const auto& [key, value] : kv.entries()) {
        if (known.count(key) == 0 && key.rfind("run.", 0) != 0) {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    }

    ExperimentConfig cfg;
    cfg.dataset_kind = kv.get_string("dataset.kind", cfg.dataset_kind);
    cfg.dataset_classes = kv.get_size("dataset.classes", cfg.dataset_classes);
    cfg.dataset_points_per_class = kv.get_size("dataset.points_per_class", cfg.dataset_points_per_class);
    cfg.dataset_noise = kv.get_double("dataset.noise", cfg.dataset_noise);
    cfg.dataset_center_spread = kv.get_double("dataset.center_spread", cfg.dataset_center_spread);
    cfg.dataset_cluster_std = kv.get_double("dataset.cluster_std", cfg.dataset_cluster_std);
    cfg.dataset_path = kv.get_string("dataset.path", cfg.dataset_path);
    cfg.dataset_train_fraction = kv.get_double("dataset.train_fraction", cfg.dataset_train_fraction);
    cfg.dataset_seed = kv.get_u64("dataset.seed", cfg.dataset_seed);
    cfg.teacher_hidden = kv.get_sizes("teacher.hidden", cfg.teacher_hidden);
    cfg.student_hidden = kv.get_sizes("student.hidden", cfg.student_hidden);
    cfg.distill.alpha = kv.get_double("distill.alpha", cfg.distill.alpha);
    cfg.distill.temperature = kv.get_double("distill.temperature", cfg.distill.temperature);
    const std::string order = kv.get_string("distill.kl_order", "teacher_first");
    if (order == "teacher_first") {
        cfg.distill.kl_order = KlOrder::kTeacherFirst;
    } else if (order == "student_first") {
        cfg.distill.kl_order = KlOrder::kStudentFirst;
    } else {
        throw ConfigError("config: distill.kl_order must be teacher_first or student_first, got '" + order + "'");
    }
    cfg.distill.t_square_scaling = kv.get_bool("distill.t_square", cfg.distill.t_square_scaling);
    const std::string kind = kv.get_string("trainer.kind", "dot");
    if (kind == "vanilla") {
        cfg.trainer_kind = TrainerKind::kVanilla;
    } else if (kind == "dot") {
        cfg.trainer_kind = TrainerKind::kDot;
    } else {
        throw ConfigError("config: trainer.kind must be vanilla or dot, got '" + kind + "'");
    }
    cfg.trainer.learning_rate = kv.get_double("trainer.lr", cfg.trainer.learning_rate);
    cfg.trainer.momentum = kv.get_double("trainer.momentum", cfg.trainer.momentum);
    cfg.trainer.delta = kv.get_double("trainer.delta", cfg.trainer.delta);
    cfg.trainer.weight_decay = kv.get_double("trainer.weight_decay", cfg.trainer.weight_decay);
    cfg.trainer.decay_task_fraction = kv.get_double("trainer.decay_task_fraction", cfg.trainer.decay_task_fraction);
    cfg.milestones = kv.get_sizes("trainer.milestones", cfg.milestones);
    cfg.lr_decay = kv.get_double("trainer.lr_decay", cfg.lr_decay);
    cfg.epochs = kv.get_size("epochs", cfg.epochs);
    cfg.batch_size = kv.get_size("batch_size", cfg.batch_size);
    std::vector<std::size_t> seed_values(cfg.seeds.begin(), cfg.seeds.end());
    seed_values = kv.get_sizes("seeds", seed_values);
    cfg.seeds.assign(seed_values.begin(), seed_values.end());
    cfg.out_dir = kv.get_string("out", cfg.out_dir);
    cfg.diag_cosines = kv.get_bool("diag.cosines", cfg.diag_cosines);
    cfg.diag_landscape = kv.get_bool("diag.landscape", cfg.diag_landscape);
    cfg.diag_landscape_directions = kv.get_size("diag.landscape_directions", cfg.diag_landscape_directions);
    cfg.diag_landscape_radius = kv.get_double("diag.landscape_radius", cfg.diag_landscape_radius);
    cfg.diag_landscape_radii = kv.get_doubles("diag.landscape_radii", cfg.diag_landscape_radii);
    cfg.diag_fidelity = kv.get_bool("diag.fidelity", cfg.diag_fidelity);
    cfg.validate();
    return cfg;
}

KeyValueConfig ExperimentConfig::to_key_values() const {
    KeyValueConfig kv;
    kv.set("dataset.kind", dataset_kind);
    kv.set("dataset.classes", std::to_string(dataset_classes));
    kv.set("dataset.points_per_class", std::to_string(dataset_points_per_class));
    kv.set("dataset.noise", format_double(dataset_noise));
    kv.set("dataset.center_spread", format_double(dataset_center_spread));
    kv.set("dataset.cluster_std", format_double(dataset_cluster_std));
    kv.set("dataset.path", dataset_path);
    kv.set("dataset.train_fraction", format_double(dataset_train_fraction));
    kv.set("dataset.seed", std::to_string(dataset_seed));
    auto join_sizes = [](const std::vector<std::size_t>& values) {
        std::string out;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(values[i]);
        }
        return out;
    };
    auto join_doubles = [](const std::vector<double>& values) {
        std::string out;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out += ',';
            out += format_double(values[i]);
        }
        return out;
    };
    kv.set("teacher.hidden", join_sizes(teacher_hidden));
    kv.set("student.hidden", join_sizes(student_hidden));
    kv.set("distill.alpha", format_double(distill.alpha));
    kv.set("distill.temperature", format_double(distill.temperature));
    kv.set("distill.kl_order", distill.kl_order == KlOrder::kTeacherFirst ? "teacher_first" : "student_first");
    kv.set("distill.t_square", distill.t_square_scaling ? "true" : "false");
    kv.set("trainer.kind", trainer_kind == TrainerKind::kVanilla ? "vanilla" : "dot");
    kv.set("trainer.lr", format_double(trainer.learning_rate));
    kv.set("trainer.momentum", format_double(trainer.momentum));
    kv.set("trainer.delta", format_double(trainer.delta));
    kv.set("trainer.weight_decay", format_double(trainer.weight_decay));
    kv.set("trainer.decay_task_fraction", format_double(trainer.decay_task_fraction));
    kv.set("trainer.milestones", join_sizes(milestones));
    kv.set("trainer.lr_decay", format_double(lr_decay));
    kv.set("epochs", std::to_string(epochs));
    kv.set("batch_size", std::to_string(batch_size));
    std::vector<std::size_t> seed_values(seeds.begin(), seeds.end());
    kv.set("seeds", join_sizes(seed_values));
    kv.set("out", out_dir);
    kv.set("diag.cosines", diag_cosines ? "true" : "false");
    kv.set("diag.landscape", diag_landscape ? "true" : "false");
    kv.set("diag.landscape_directions", std::to_string(diag_landscape_directions));
    kv.set("diag.landscape_radius", format_double(diag_landscape_radius));
    kv.set("diag.landscape_radii", join_doubles(diag_landscape_radii));
    kv.set("diag.fidelity", diag_fidelity ? "true" : "false");
    return kv;
}

void ExperimentConfig::validate() const {
    try {
        if (dataset_kind != "spirals" && dataset_kind != "blobs" && dataset_kind != "csv") {
            throw ConfigError("dataset.kind must be spirals, blobs or csv");
        }
        if (dataset_kind == "csv" && dataset_path.empty()) {
            throw ConfigError("dataset.kind=csv needs dataset.path");
        }
        if (!(dataset_train_fraction > 0.0 && dataset_train_fraction < 1.0)) {
            throw ConfigError("dataset.train_fraction must lie strictly between 0 and 1");
        }
        distill.validate();
        if (trainer_kind == TrainerKind::kDot) {
            trainer.validate();
        } else {
            trainer.validate_base();  // delta unused by the vanilla trainer
        }
        if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw ConfigError("trainer.lr_decay must lie in (0, 1)");
        if (epochs == 0) throw ConfigError("epochs must be at least 1");
        if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
        if (seeds.empty()) throw ConfigError("seeds must name at least one seed");
        if (diag_landscape_directions == 0) throw ConfigError("diag.landscape_directions must be at least 1");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

NetworkSpec ExperimentConfig::teacher_spec(std::size_t input_dim, std::size_t num_classes) const {
    return NetworkSpec{input_dim, teacher_hidden, num_classes};
}

NetworkSpec ExperimentConfig::student_spec(std::size_t input_dim, std::size_t num_classes) const {
    return NetworkSpec{input_dim, student_hidden, num_classes};
}

DataSplits make_dataset(const ExperimentConfig& cfg) {
    LabeledDataset full;
    if (cfg.dataset_kind == "spirals") {
        full = gen_spirals(cfg.dataset_classes, cfg.dataset_points_per_class, cfg.dataset_noise, cfg.dataset_seed);
    } else if (cfg.dataset_kind == "blobs") {
        full = gen_gaussian_blobs(cfg.dataset_classes, cfg.dataset_points_per_class, cfg.dataset_center_spread,
                                  cfg.dataset_cluster_std, cfg.dataset_seed);
    } else {
        full = load_csv_dataset(cfg.dataset_path);
    }
    auto [train, test] = split(full, cfg.dataset_train_fraction, cfg.dataset_seed);
    return DataSplits{std::move(train), std::move(test)};
}

namespace {

TensorMap scaled_map(const TensorMap& grads, double factor) {
    TensorMap out;
    for (const std::string& name : grads.names()) {
        Tensor t = grads.at(name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] *= factor;
        out.add(name, std::move(t));
    }
    return out;
}

TensorMap add_maps(const TensorMap& a, const TensorMap& b) {
    TensorMap out = a;
    for (const std::string& name : b.names()) {
        if (out.contains(name)) {
            Tensor& t = out.at(name);
            const Tensor& u = b.at(name);
            require_same_shape(t, u, "gradient sum");
            for (std::size_t i = 0; i < t.size(); ++i) t[i] += u[i];
        } else {
            out.add(name, b.at(name));
        }
    }
    return out;
}

struct LoopSettings {
    const NetworkSpec* net = nullptr;
    const LabeledDataset* train = nullptr;
    const LabeledDataset* test = nullptr;
    TrainerKind kind = TrainerKind::kVanilla;
    TrainerConfig trainer;
    DistillConfig distill;
    const ParameterSet* teacher = nullptr;  // null: task loss only
    const NetworkSpec* teacher_spec = nullptr;
    std::size_t epochs = 1;
    std::size_t batch_size = 1;
    std::vector<std::size_t> milestones;
    double lr_decay = 0.1;
    std::uint64_t init_seed = 0;
    std::uint64_t batch_seed = 0;
    bool cosines = false;
};

RunResult run_training_loop(const LoopSettings& s) {
    RunResult result;
    result.params = init_network(*s.net, s.init_seed);
    SgdState sgd_state = SgdState::init(result.params);
    DotState dot_state = DotState::init(result.params);

    // Frozen-teacher logits over the evaluation splits do not change across
    // the run; the per-batch training path still recomputes them fresh.
    Tensor teacher_train_logits, teacher_test_logits;
    if (s.teacher != nullptr) {
        teacher_train_logits = forward(*s.teacher, *s.teacher_spec, s.train->inputs);
        teacher_test_logits = forward(*s.teacher, *s.teacher_spec, s.test->inputs);
    }

    const double alpha = s.distill.alpha;
    std::size_t iteration = 0;
    ParameterSet checkpoint = result.params;

    for (std::size_t epoch = 0; epoch < s.epochs; ++epoch) {
        TrainerConfig step_cfg = s.trainer;
        step_cfg.learning_rate = lr_schedule(epoch, s.trainer.learning_rate, s.milestones, s.lr_decay);
        checkpoint = result.params;

        for (const auto& batch : batches(s.train->size(), s.batch_size, s.batch_seed, epoch)) {
            const Tensor x = gather_rows(s.train->inputs, batch);
            const std::vector<std::size_t> y = gather_labels(s.train->labels, batch);

            // task stream
            Tape task_tape;
            NodeId task_logits = forward_on_tape(task_tape, result.params, *s.net, x);
            NodeId task_node = cross_entropy(task_tape, task_logits, y);
            const double task_value = task_tape.scalar_value(task_node);

            // distillation stream; on-the-fly value only when no gradient is needed
            double distill_value = 0.0;
            TensorMap g_kd;
            if (s.teacher != nullptr) {
                const Tensor teacher_logits = forward(*s.teacher, *s.teacher_spec, x);
                if (alpha < 1.0) {
                    Tape kd_tape;
                    NodeId kd_logits = forward_on_tape(kd_tape, result.params, *s.net, x);
                    NodeId kd_node = kd_divergence(kd_tape, kd_logits, teacher_logits, s.distill);
                    distill_value = kd_tape.scalar_value(kd_node);
                    g_kd = scaled_map(kd_tape.backward(kd_node), 1.0 - alpha);
                } else {
                    distill_value = kd_divergence_value(task_tape.value(task_logits), teacher_logits, s.distill);
                }
            }

            if (!std::isfinite(task_value) || !std::isfinite(distill_value)) {
                result.diverged = true;
                result.diagnostic = "non-finite loss at iteration " + std::to_string(iteration + 1) + " (epoch " +
                                    std::to_string(epoch) + "), restored epoch-start parameters";
                result.params = checkpoint;
                return result;
            }

            TensorMap g_ce;
            if (alpha > 0.0) g_ce = scaled_map(task_tape.backward(task_node), alpha);

            if (s.kind == TrainerKind::kVanilla) {
                sgd_step(result.params, add_maps(g_ce, g_kd), sgd_state, step_cfg);
            } else {
                DualGradient grads;
                grads.g_ce = std::move(g_ce);
                grads.g_kd = std::move(g_kd);
                dot_step(result.params, grads, dot_state, step_cfg);
            }
            ++iteration;

            if (s.kind == TrainerKind::kDot && s.cosines) {
                result.iteration_records.push_back(
                    record_iteration(iteration, epoch, task_value, distill_value, step_cfg.learning_rate, dot_state));
            } else {
                result.iteration_records.push_back(
                    record_iteration(iteration, epoch, task_value, distill_value, step_cfg.learning_rate, sgd_state));
            }
        }

        // epoch-end evaluation over the full splits
        const Tensor train_logits = forward(result.params, *s.net, s.train->inputs);
        const Tensor test_logits = forward(result.params, *s.net, s.test->inputs);
        RunRecord epoch_record;
        epoch_record.iteration = iteration;
        epoch_record.epoch = epoch;
        epoch_record.train_task_loss = cross_entropy_value(train_logits, s.train->labels);
        epoch_record.train_distill_loss =
            s.teacher != nullptr ? kd_divergence_value(train_logits, teacher_train_logits, s.distill) : 0.0;
        epoch_record.train_accuracy = accuracy(train_logits, s.train->labels);
        epoch_record.test_accuracy = accuracy(test_logits, s.test->labels);
        epoch_record.learning_rate = step_cfg.learning_rate;
        result.epoch_records.push_back(epoch_record);

        if (!std::isfinite(epoch_record.train_task_loss) || !std::isfinite(epoch_record.train_distill_loss)) {
            result.diverged = true;
            result.diagnostic = "non-finite evaluation loss after epoch " + std::to_string(epoch) +
                                ", restored epoch-start parameters";
            result.params = checkpoint;
            return result;
        }

        result.final_train_task_loss = epoch_record.train_task_loss;
        result.final_train_distill_loss = epoch_record.train_distill_loss;
        result.final_train_accuracy = *epoch_record.train_accuracy;
        result.final_test_accuracy = *epoch_record.test_accuracy;
    }
    return result;
}

}  // namespace

RunResult train_teacher(const ExperimentConfig& cfg, const DataSplits& data, std::uint64_t seed) {
    cfg.validate();
    const NetworkSpec net = cfg.teacher_spec(data.input_dim(), data.num_classes());
    LoopSettings s;
    s.net = &net;
    s.train = &data.train;
    s.test = &data.test;
    s.kind = TrainerKind::kVanilla;
    s.trainer = cfg.trainer;
    s.distill = cfg.distill;
    s.distill.alpha = 1.0;  // task loss alone
    s.epochs = cfg.epochs;
    s.batch_size = cfg.batch_size;
    s.milestones = cfg.milestones;
    s.lr_decay = cfg.lr_decay;
    s.init_seed = mix_seed(seed, kTeacherInitStream);
    s.batch_seed = mix_seed(seed, kTeacherBatchStream);
    return run_training_loop(s);
}

RunResult distill_student(const ExperimentConfig& cfg, const DataSplits& data, const ParameterSet& teacher,
                          std::uint64_t seed) {
    cfg.validate();
    const NetworkSpec net = cfg.student_spec(data.input_dim(), data.num_classes());
    const NetworkSpec teacher_net = cfg.teacher_spec(data.input_dim(), data.num_classes());
    for (const auto& [name, shape] : teacher_net.parameter_shapes()) {
        if (!teacher.contains(name) || teacher.at(name).shape() != shape) {
            throw ConfigError("distill_student: teacher parameters do not match the configured architecture (" +
                              name + ")");
        }
    }
    LoopSettings s;
    s.net = &net;
    s.train = &data.train;
    s.test = &data.test;
    s.kind = cfg.trainer_kind;
    s.trainer = cfg.trainer;
    s.distill = cfg.distill;
    s.teacher = &teacher;
    s.teacher_spec = &teacher_net;
    s.epochs = cfg.epochs;
    s.batch_size = cfg.batch_size;
    s.milestones = cfg.milestones;
    s.lr_decay = cfg.lr_decay;
    s.init_seed = mix_seed(seed, kStudentInitStream);
    s.batch_seed = mix_seed(seed, kStudentBatchStream);
    s.cosines = cfg.diag_cosines;
    RunResult result = run_training_loop(s);

    if (!result.diverged && cfg.diag_landscape) {
        TensorMap direction = filter_normalized_direction(result.params, mix_seed(seed, kLandscapeStream));
        result.landscape = landscape_slice(result.params, net, data.train, direction, cfg.diag_landscape_radii,
                                           mix_seed(seed, kLandscapeStream));
        result.sharpness_value = sharpness(result.params, net, data.train, cfg.diag_landscape_directions,
                                           cfg.diag_landscape_radius, mix_seed(seed, kSharpnessStream));
    }
    if (!result.diverged && cfg.diag_fidelity) {
        const Tensor student_logits = forward(result.params, net, data.test.inputs);
        const Tensor teacher_logits = forward(teacher, teacher_net, data.test.inputs);
        result.fidelity = fidelity_difference(student_logits, teacher_logits);
    }
    return result;
}

void write_run_artifacts(const std::string& dir, const ExperimentConfig& cfg, std::uint64_t seed,
                         const std::string& role, const RunResult& result) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("write_run_artifacts: cannot create '" + dir + "': " + ec.message());

    KeyValueConfig snapshot = cfg.to_key_values();
    snapshot.set("run.seed", std::to_string(seed));
    snapshot.set("run.role", role);
    {
        std::ofstream out(dir + "/config.txt", std::ios::binary);
        if (!out) throw IoError("write_run_artifacts: cannot write config.txt in '" + dir + "'");
        out << snapshot.serialize();
    }

    std::vector<std::string> iteration_rows, epoch_rows;
    for (const RunRecord& r : result.iteration_records) iteration_rows.push_back(run_record_row(r));
    for (const RunRecord& r : result.epoch_records) epoch_rows.push_back(run_record_row(r));
    emit_csv(kRunRecordHeader, iteration_rows, dir + "/iterations.csv");
    emit_csv(kRunRecordHeader, epoch_rows, dir + "/epochs.csv");
    save_tensors(result.params, dir + "/" + role + ".tensors");

    std::string summary_row;
    summary_row += format_double(result.final_train_task_loss);
    summary_row += ',';
    summary_row += format_double(result.final_train_distill_loss);
    summary_row += ',';
    summary_row += format_double(result.final_train_accuracy);
    summary_row += ',';
    summary_row += format_double(result.final_test_accuracy);
    summary_row += ',';
    summary_row += format_optional(result.sharpness_value);
    summary_row += ',';
    summary_row += format_optional(result.fidelity ? std::optional<double>(result.fidelity->mean_abs)
                                                   : std::optional<double>());
    summary_row += ',';
    summary_row += result.diverged ? "1" : "0";
    emit_csv(
        "final_train_task_loss,final_train_distill_loss,train_accuracy,test_accuracy,sharpness,fidelity_mean_abs,"
        "diverged",
        {summary_row}, dir + "/summary.csv");

    if (result.landscape) {
        std::vector<std::string> rows;
        for (std::size_t i = 0; i < result.landscape->radii.size(); ++i) {
            rows.push_back(format_double(result.landscape->radii[i]) + "," +
                           format_double(result.landscape->loss_values[i]));
        }
        emit_csv("radius,loss", rows, dir + "/landscape.csv");
    }
    if (result.fidelity) {
        std::vector<std::string> rows;
        const Tensor& m = result.fidelity->difference;
        for (std::size_t i = 0; i < m.dim(0); ++i) {
            for (std::size_t j = 0; j < m.dim(1); ++j) {
                rows.push_back(std::to_string(i) + "," + std::to_string(j) + "," + format_double(m.at(i, j)));
            }
        }
        emit_csv("row,col,abs_difference", rows, dir + "/fidelity.csv");
    }
}

ToyTrajectory toy_experiment(const ToyConfig& cfg) {
    if (!(cfg.teacher_prob > 0.0 && cfg.teacher_prob < 1.0)) {
        throw ConfigError("toy_experiment: teacher_prob must lie strictly between 0 and 1");
    }
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw ConfigError("toy_experiment: alpha must lie in [0, 1]");

    DistillConfig distill;
    distill.alpha = cfg.alpha;
    distill.temperature = cfg.temperature;

    TrainerConfig trainer;
    trainer.learning_rate = cfg.learning_rate;
    trainer.momentum = cfg.momentum;
    trainer.delta = cfg.delta;
    trainer.validate();

    Tensor init({1, 2});
    if (cfg.init_logits) {
        init[0] = cfg.init_logits->first;
        init[1] = cfg.init_logits->second;
    } else {
        Rng rng(mix_seed(cfg.seed, kToyInitStream));
        init[0] = rng.uniform(-1.0, 1.0);
        init[1] = rng.uniform(-1.0, 1.0);
    }
    const Tensor teacher_logits({1, 2}, {std::log(1.0 - cfg.teacher_prob), std::log(cfg.teacher_prob)});
    const std::vector<std::size_t> target = {1};

    auto dual_gradient = [&](const ParameterSet& params) {
        DualGradient grads;
        {
            Tape tape;
            NodeId logits = tape.parameter("logits", params.at("logits"));
            NodeId ce = cross_entropy(tape, logits, target);
            grads.g_ce = scaled_map(tape.backward(ce), cfg.alpha);
        }
        {
            Tape tape;
            NodeId logits = tape.parameter("logits", params.at("logits"));
            NodeId kd = kd_divergence(tape, logits, teacher_logits, distill);
            grads.g_kd = scaled_map(tape.backward(kd), 1.0 - cfg.alpha);
        }
        return grads;
    };
    auto class1_prob = [](const ParameterSet& params) {
        Tape tape;
        return tape.value(tape.softmax(tape.constant(params.at("logits")), 1.0))[1];
    };

    ParameterSet vanilla_params, dot_params;
    vanilla_params.add("logits", init);
    dot_params.add("logits", init);
    SgdState sgd_state = SgdState::init(vanilla_params);
    DotState dot_state = DotState::init(dot_params);

    ToyTrajectory trajectory;
    trajectory.vanilla_prob.reserve(cfg.steps);
    trajectory.dot_prob.reserve(cfg.steps);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        DualGradient vanilla_grads = dual_gradient(vanilla_params);
        sgd_step(vanilla_params, add_maps(vanilla_grads.g_ce, vanilla_grads.g_kd), sgd_state, trainer);
        trajectory.vanilla_prob.push_back(class1_prob(vanilla_params));

        DualGradient dot_grads = dual_gradient(dot_params);
        dot_step(dot_params, dot_grads, dot_state, trainer);
        trajectory.dot_prob.push_back(class1_prob(dot_params));
    }
    return trajectory;
}

void write_toy_csv(const ToyTrajectory& trajectory, const std::string& path) {
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < trajectory.vanilla_prob.size(); ++i) {
        rows.push_back(std::to_string(i + 1) + "," + format_double(trajectory.vanilla_prob[i]) + "," +
                       format_double(trajectory.dot_prob[i]));
    }
    emit_csv("step,prob_vanilla,prob_dot", rows, path);
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    if (name == "delta") return SweepAxis::kDelta;
    if (name == "mu") return SweepAxis::kMu;
    if (name == "alpha") return SweepAxis::kAlpha;
    throw ConfigError("sweep: axis must be delta, mu or alpha, got '" + name + "'");
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::kDelta: return "delta";
        case SweepAxis::kMu: return "mu";
        case SweepAxis::kAlpha: return "alpha";
    }
    return "?";
}

std::vector<SweepRow> ablation_sweep(const ExperimentConfig& base, SweepAxis axis,
                                     const std::vector<double>& values) {
    base.validate();
    if (values.empty()) throw ConfigError("sweep: no values given");
    const DataSplits data = make_dataset(base);

    std::vector<ParameterSet> teachers(base.seeds.size());
    parallel_for(base.seeds.size(), [&](std::size_t i) {
        RunResult teacher = train_teacher(base, data, base.seeds[i]);
        if (teacher.diverged) throw DivergenceError("sweep: teacher run diverged: " + teacher.diagnostic);
        teachers[i] = std::move(teacher.params);
    });

    std::vector<SweepRow> rows(values.size() * base.seeds.size());
    parallel_for(rows.size(), [&](std::size_t job) {
        const std::size_t value_idx = job / base.seeds.size();
        const std::size_t seed_idx = job % base.seeds.size();
        SweepRow& row = rows[job];
        row.axis = axis;
        row.value = values[value_idx];
        row.seed = base.seeds[seed_idx];
        try {
            ExperimentConfig cfg = base;
            switch (axis) {
                case SweepAxis::kDelta:
                    cfg.trainer_kind = TrainerKind::kDot;
                    cfg.trainer.delta = row.value;
                    break;
                case SweepAxis::kMu:
                    cfg.trainer.momentum = row.value;
                    break;
                case SweepAxis::kAlpha:
                    cfg.distill.alpha = row.value;
                    break;
            }
            cfg.validate();
            RunResult result = distill_student(cfg, data, teachers[seed_idx], row.seed);
            if (result.diverged) throw DivergenceError(result.diagnostic);
            row.final_train_task_loss = result.final_train_task_loss;
            row.final_train_distill_loss = result.final_train_distill_loss;
            row.test_accuracy = result.final_test_accuracy;
            row.ok = true;
        } catch (const std::exception&) {
            row.ok = false;  // isolated failure; the sweep continues
        }
    });
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::vector<std::string> lines;
    for (const SweepRow& row : rows) {
        std::string line = to_string(row.axis) + "," + format_double(row.value) + "," + std::to_string(row.seed) + ",";
        if (row.ok) {
            line += format_double(row.final_train_task_loss) + "," + format_double(row.final_train_distill_loss) +
                    "," + format_double(row.test_accuracy) + ",ok";
        } else {
            line += ",,,error";
        }
        lines.push_back(std::move(line));
    }
    emit_csv("axis,value,seed,final_train_task_loss,final_train_distill_loss,test_accuracy,status", lines, path);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, std::size_t max_workers) {
    if (count == 0) return;
    std::size_t workers = max_workers != 0 ? max_workers : std::thread::hardware_concurrency();
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dot
