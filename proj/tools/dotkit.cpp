// SPDX-License-Identifier: Apache-2.0
//
// Experiment CLI: teacher pretraining, student distillation, the two-logit
// toy problem, hyperparameter sweeps, and standalone landscape / fidelity
// probes. All outputs are CSV plus the flat text tensor format.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dot/csv.hpp"
#include "dot/harness.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Config file (flat key=value, # comments)");
    cmd->add_option("--set", args.overrides, "Override entries as key=value")->take_all();
    cmd->add_option("--seed", args.seed, "Run a single seed, overriding the config's seed list");
    cmd->add_option("--out", args.out_dir, "Output directory");
}

dot::ExperimentConfig resolve_config(const CommonArgs& args) {
    dot::KeyValueConfig kv;
    if (!args.config_path.empty()) kv = dot::KeyValueConfig::from_file(args.config_path);
    for (const std::string& entry : args.overrides) kv.set_entry(entry);
    if (args.seed) kv.set("seeds", std::to_string(*args.seed));
    if (!args.out_dir.empty()) kv.set("out", args.out_dir);
    return dot::ExperimentConfig::from_key_values(kv);
}

std::string seed_dir(const dot::ExperimentConfig& cfg, std::uint64_t seed) {
    return cfg.out_dir + "/seed_" + std::to_string(seed);
}

int run_train_teacher(const CommonArgs& args) {
    dot::ExperimentConfig cfg = resolve_config(args);
    const dot::DataSplits data = dot::make_dataset(cfg);
    bool diverged = false;
    for (std::uint64_t seed : cfg.seeds) {
        dot::RunResult result = dot::train_teacher(cfg, data, seed);
        dot::write_run_artifacts(seed_dir(cfg, seed), cfg, seed, "teacher", result);
        if (result.diverged) {
            std::cerr << "train-teacher seed " << seed << ": " << result.diagnostic << "\n";
            diverged = true;
            continue;
        }
        std::cout << "teacher seed " << seed << ": train_acc=" << result.final_train_accuracy
                  << " test_acc=" << result.final_test_accuracy << " -> " << seed_dir(cfg, seed) << "\n";
    }
    return diverged ? 2 : 0;
}

int run_distill(const CommonArgs& args, const std::string& teacher_path) {
    dot::ExperimentConfig cfg = resolve_config(args);
    const dot::DataSplits data = dot::make_dataset(cfg);
    bool diverged = false;
    for (std::uint64_t seed : cfg.seeds) {
        dot::ParameterSet teacher;
        if (!teacher_path.empty()) {
            teacher = dot::load_tensors(teacher_path);
        } else {
            dot::RunResult teacher_run = dot::train_teacher(cfg, data, seed);
            if (teacher_run.diverged) {
                std::cerr << "distill seed " << seed << ": teacher " << teacher_run.diagnostic << "\n";
                diverged = true;
                continue;
            }
            dot::write_run_artifacts(seed_dir(cfg, seed) + "/teacher", cfg, seed, "teacher", teacher_run);
            teacher = std::move(teacher_run.params);
        }
        dot::RunResult result = dot::distill_student(cfg, data, teacher, seed);
        dot::write_run_artifacts(seed_dir(cfg, seed), cfg, seed, "student", result);
        if (result.diverged) {
            std::cerr << "distill seed " << seed << ": " << result.diagnostic << "\n";
            diverged = true;
            continue;
        }
        std::cout << "student seed " << seed << ": train_task=" << result.final_train_task_loss
                  << " train_distill=" << result.final_train_distill_loss
                  << " test_acc=" << result.final_test_accuracy << " -> " << seed_dir(cfg, seed) << "\n";
    }
    return diverged ? 2 : 0;
}

int run_toy(const CommonArgs& args, dot::ToyConfig toy) {
    // toy settings ride on --set toy.* entries as well as dedicated flags
    dot::KeyValueConfig kv;
    for (const std::string& entry : args.overrides) kv.set_entry(entry);
    toy.delta = kv.get_double("toy.delta", toy.delta);
    toy.steps = kv.get_size("toy.steps", toy.steps);
    toy.learning_rate = kv.get_double("toy.lr", toy.learning_rate);
    toy.momentum = kv.get_double("toy.momentum", toy.momentum);
    toy.temperature = kv.get_double("toy.temperature", toy.temperature);
    toy.teacher_prob = kv.get_double("toy.teacher_prob", toy.teacher_prob);
    toy.alpha = kv.get_double("toy.alpha", toy.alpha);
    if (args.seed) toy.seed = *args.seed;

    const std::string out = args.out_dir.empty() ? "." : args.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw dot::IoError("toy: cannot create '" + out + "': " + ec.message());

    dot::ToyTrajectory trajectory = dot::toy_experiment(toy);
    dot::write_toy_csv(trajectory, out + "/toy.csv");
    std::cout << "toy: final prob vanilla=" << trajectory.vanilla_prob.back()
              << " dot=" << trajectory.dot_prob.back() << " (teacher " << toy.teacher_prob << ") -> " << out
              << "/toy.csv\n";
    return 0;
}

int run_sweep(const CommonArgs& args, const std::string& axis_name, const std::vector<double>& values) {
    dot::ExperimentConfig cfg = resolve_config(args);
    const dot::SweepAxis axis = dot::sweep_axis_from_string(axis_name);
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw dot::IoError("sweep: cannot create '" + cfg.out_dir + "': " + ec.message());
    {
        std::ofstream out(cfg.out_dir + "/config.txt", std::ios::binary);
        out << cfg.to_key_values().serialize();
    }
    std::vector<dot::SweepRow> rows = dot::ablation_sweep(cfg, axis, values);
    dot::write_sweep_csv(rows, cfg.out_dir + "/sweep.csv");
    std::size_t failed = 0;
    for (const auto& row : rows) {
        if (!row.ok) ++failed;
    }
    std::cout << "sweep " << axis_name << ": " << rows.size() - failed << "/" << rows.size() << " runs ok -> "
              << cfg.out_dir << "/sweep.csv\n";
    return 0;
}

int run_landscape(const CommonArgs& args, const std::string& params_path, const std::string& radii_csv, bool grid) {
    dot::ExperimentConfig cfg = resolve_config(args);
    const dot::DataSplits data = dot::make_dataset(cfg);
    dot::ParameterSet params = dot::load_tensors(params_path);

    // architecture inferred from the stored tensors: student first, teacher as fallback
    dot::NetworkSpec net = cfg.student_spec(data.input_dim(), data.num_classes());
    bool matches = true;
    for (const auto& [name, shape] : net.parameter_shapes()) {
        if (!params.contains(name) || params.at(name).shape() != shape) matches = false;
    }
    if (!matches) net = cfg.teacher_spec(data.input_dim(), data.num_classes());

    std::vector<double> radii = cfg.diag_landscape_radii;
    if (!radii_csv.empty()) {
        radii.clear();
        for (const std::string& token : dot::split(radii_csv, ',')) radii.push_back(dot::parse_double(token));
    }
    const std::uint64_t direction_seed = args.seed ? *args.seed : cfg.seeds.front();

    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw dot::IoError("landscape: cannot create '" + cfg.out_dir + "': " + ec.message());

    auto loss_fn = [&](const dot::ParameterSet& p) {
        return dot::cross_entropy_value(dot::forward(p, net, data.train.inputs), data.train.labels);
    };
    if (grid) {
        dot::LandscapeGrid g = dot::landscape_grid(params, loss_fn, direction_seed, radii, radii);
        std::vector<std::string> rows;
        for (std::size_t i = 0; i < g.radii_first.size(); ++i) {
            for (std::size_t j = 0; j < g.radii_second.size(); ++j) {
                rows.push_back(dot::format_double(g.radii_first[i]) + "," + dot::format_double(g.radii_second[j]) +
                               "," + dot::format_double(g.loss.at(i, j)));
            }
        }
        dot::emit_csv("radius1,radius2,loss", rows, cfg.out_dir + "/landscape_grid.csv");
        std::cout << "landscape grid -> " << cfg.out_dir << "/landscape_grid.csv\n";
    } else {
        dot::TensorMap direction = dot::filter_normalized_direction(params, direction_seed);
        dot::LandscapeSlice slice = dot::landscape_slice(params, loss_fn, direction, radii, direction_seed);
        std::vector<std::string> rows;
        for (std::size_t i = 0; i < slice.radii.size(); ++i) {
            rows.push_back(dot::format_double(slice.radii[i]) + "," + dot::format_double(slice.loss_values[i]));
        }
        dot::emit_csv("radius,loss", rows, cfg.out_dir + "/landscape.csv");
        const double sharp = dot::sharpness(params, loss_fn, cfg.diag_landscape_directions,
                                            cfg.diag_landscape_radius, direction_seed);
        std::cout << "landscape -> " << cfg.out_dir << "/landscape.csv (sharpness at r=" << cfg.diag_landscape_radius
                  << ": " << sharp << ")\n";
    }
    return 0;
}

int run_fidelity(const CommonArgs& args, const std::string& student_path, const std::string& teacher_path) {
    dot::ExperimentConfig cfg = resolve_config(args);
    const dot::DataSplits data = dot::make_dataset(cfg);
    dot::ParameterSet student = dot::load_tensors(student_path);
    dot::ParameterSet teacher = dot::load_tensors(teacher_path);
    const dot::NetworkSpec student_net = cfg.student_spec(data.input_dim(), data.num_classes());
    const dot::NetworkSpec teacher_net = cfg.teacher_spec(data.input_dim(), data.num_classes());

    const dot::Tensor student_logits = dot::forward(student, student_net, data.test.inputs);
    const dot::Tensor teacher_logits = dot::forward(teacher, teacher_net, data.test.inputs);
    dot::FidelityResult result = dot::fidelity_difference(student_logits, teacher_logits);

    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw dot::IoError("fidelity: cannot create '" + cfg.out_dir + "': " + ec.message());
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < result.difference.dim(0); ++i) {
        for (std::size_t j = 0; j < result.difference.dim(1); ++j) {
            rows.push_back(std::to_string(i) + "," + std::to_string(j) + "," +
                           dot::format_double(result.difference.at(i, j)));
        }
    }
    dot::emit_csv("row,col,abs_difference", rows, cfg.out_dir + "/fidelity.csv");
    std::cout << "fidelity: mean_abs=" << result.mean_abs << " (constant-column warnings: "
              << result.constant_column_warnings << ") -> " << cfg.out_dir << "/fidelity.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-momentum knowledge-distillation trainer and diagnostics"};
    app.require_subcommand(1);

    CommonArgs teacher_args;
    CLI::App* cmd_teacher = app.add_subcommand("train-teacher", "Pretrain the teacher with the task loss alone");
    add_common(cmd_teacher, teacher_args);

    CommonArgs distill_args;
    std::string distill_teacher_path;
    CLI::App* cmd_distill = app.add_subcommand("distill", "Train a student against a frozen teacher");
    add_common(cmd_distill, distill_args);
    cmd_distill->add_option("--teacher", distill_teacher_path,
                            "Teacher .tensors file (trains a fresh teacher when omitted)");

    CommonArgs toy_args;
    dot::ToyConfig toy;
    CLI::App* cmd_toy = app.add_subcommand("toy", "Two-logit toy run comparing both trainers");
    add_common(cmd_toy, toy_args);
    cmd_toy->add_option("--delta", toy.delta, "Momentum split");
    cmd_toy->add_option("--steps", toy.steps, "Optimization steps");
    cmd_toy->add_option("--lr", toy.learning_rate, "Learning rate");
    cmd_toy->add_option("--momentum", toy.momentum, "Momentum coefficient");
    cmd_toy->add_option("--temperature", toy.temperature, "Softening temperature");
    cmd_toy->add_option("--teacher-prob", toy.teacher_prob, "Teacher's constant class-1 probability");
    cmd_toy->add_option("--alpha", toy.alpha, "Task-loss weight");

    CommonArgs sweep_args;
    std::string sweep_axis;
    std::vector<double> sweep_values;
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "Ablation sweep over delta, mu or alpha");
    add_common(cmd_sweep, sweep_args);
    cmd_sweep->add_option("--axis", sweep_axis, "delta | mu | alpha")->required();
    cmd_sweep->add_option("--values", sweep_values, "Values to sweep")->required()->delimiter(',');

    CommonArgs landscape_args;
    std::string landscape_params, landscape_radii;
    bool landscape_grid_mode = false;
    CLI::App* cmd_landscape = app.add_subcommand("landscape", "Loss-landscape slice around stored parameters");
    add_common(cmd_landscape, landscape_args);
    cmd_landscape->add_option("--params", landscape_params, "Stored .tensors file")->required();
    cmd_landscape->add_option("--radii", landscape_radii, "Comma-separated radii (must include 0)");
    cmd_landscape->add_flag("--grid", landscape_grid_mode, "Emit a 2-D grid over two orthogonalized directions");

    CommonArgs fidelity_args;
    std::string fidelity_student, fidelity_teacher;
    CLI::App* cmd_fidelity = app.add_subcommand("fidelity", "Logit correlation difference on the test split");
    add_common(cmd_fidelity, fidelity_args);
    cmd_fidelity->add_option("--student", fidelity_student, "Student .tensors file")->required();
    cmd_fidelity->add_option("--teacher", fidelity_teacher, "Teacher .tensors file")->required();

    try {
        app.parse(argc, argv);
        if (*cmd_teacher) return run_train_teacher(teacher_args);
        if (*cmd_distill) return run_distill(distill_args, distill_teacher_path);
        if (*cmd_toy) return run_toy(toy_args, toy);
        if (*cmd_sweep) return run_sweep(sweep_args, sweep_axis, sweep_values);
        if (*cmd_landscape) return run_landscape(landscape_args, landscape_params, landscape_radii,
                                                 landscape_grid_mode);
        if (*cmd_fidelity) return run_fidelity(fidelity_args, fidelity_student, fidelity_teacher);
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // bad invocation counts as a config error
    } catch (const dot::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const dot::DivergenceError& e) {
        std::cerr << "numerical divergence: " << e.what() << "\n";
        return 2;
    } catch (const dot::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
