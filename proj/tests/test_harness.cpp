// SPDX-License-Identifier: Apache-2.0
#include "dot/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dot/csv.hpp"

namespace dot {
namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    EXPECT_TRUE(in) << path;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Reduced recipe that trains in well under a second.
ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.dataset_points_per_class = 40;
    cfg.dataset_seed = 99;
    cfg.teacher_hidden = {16};
    cfg.student_hidden = {4};
    cfg.epochs = 8;
    cfg.batch_size = 16;
    cfg.milestones = {5};
    cfg.seeds = {0};
    return cfg;
}

TEST(KeyValueConfig, ParsesCommentsAndDottedKeys) {
    KeyValueConfig kv = KeyValueConfig::from_string(
        "# a comment line\n"
        "trainer.delta = 0.075   # trailing comment\n"
        "\n"
        "epochs=12\n"
        "seeds=3,4,5\n");
    EXPECT_DOUBLE_EQ(kv.get_double("trainer.delta", 0.0), 0.075);
    EXPECT_EQ(kv.get_size("epochs", 0), 12u);
    EXPECT_EQ(kv.get_sizes("seeds", {}), (std::vector<std::size_t>{3, 4, 5}));
    EXPECT_FALSE(kv.has("missing"));
    EXPECT_EQ(kv.get_string("missing", "fallback"), "fallback");
}

TEST(KeyValueConfig, RejectsMalformedLinesAndValues) {
    EXPECT_THROW(KeyValueConfig::from_string("no equals sign here\n"), ConfigError);
    KeyValueConfig kv = KeyValueConfig::from_string("epochs=twelve\nflag=maybe\n");
    EXPECT_THROW(kv.get_size("epochs", 0), ConfigError);
    EXPECT_THROW(kv.get_bool("flag", false), ConfigError);
}

TEST(KeyValueConfig, SetEntryOverrides) {
    KeyValueConfig kv = KeyValueConfig::from_string("trainer.delta=0.05\n");
    kv.set_entry("trainer.delta=0.09");
    EXPECT_DOUBLE_EQ(kv.get_double("trainer.delta", 0.0), 0.09);
    EXPECT_THROW(kv.set_entry("not-an-entry"), ConfigError);
}

TEST(KeyValueConfig, SerializeParsesBack) {
    KeyValueConfig kv;
    kv.set("b.key", "2");
    kv.set("a.key", "1");
    KeyValueConfig back = KeyValueConfig::from_string(kv.serialize());
    EXPECT_EQ(back.entries(), kv.entries());
}

TEST(ExperimentConfig, RoundTripsThroughKeyValues) {
    ExperimentConfig cfg = tiny_config();
    cfg.trainer_kind = TrainerKind::kVanilla;
    cfg.distill.kl_order = KlOrder::kStudentFirst;
    ExperimentConfig back = ExperimentConfig::from_key_values(cfg.to_key_values());
    EXPECT_EQ(back.to_key_values().serialize(), cfg.to_key_values().serialize());
}

TEST(ExperimentConfig, RejectsUnknownAndInvalidKeys) {
    KeyValueConfig kv;
    kv.set("trainer.learning", "0.1");  // typo
    EXPECT_THROW(ExperimentConfig::from_key_values(kv), ConfigError);

    KeyValueConfig bad;
    bad.set("distill.alpha", "1.5");
    EXPECT_THROW(ExperimentConfig::from_key_values(bad), ConfigError);

    KeyValueConfig kind;
    kind.set("trainer.kind", "adam");
    EXPECT_THROW(ExperimentConfig::from_key_values(kind), ConfigError);
}

TEST(ExperimentConfig, VanillaKindSkipsDeltaConstraint) {
    KeyValueConfig kv;
    kv.set("trainer.kind", "vanilla");
    kv.set("trainer.momentum", "0.99");  // 0.99 + default delta 0.075 > 1
    EXPECT_NO_THROW(ExperimentConfig::from_key_values(kv));
    kv.set("trainer.kind", "dot");
    EXPECT_THROW(ExperimentConfig::from_key_values(kv), ConfigError);
}

TEST(Harness, TeacherOutperformsCeOnlyStudent) {
    ExperimentConfig cfg = tiny_config();
    cfg.dataset_points_per_class = 100;
    cfg.teacher_hidden = {32, 32};
    cfg.student_hidden = {3};
    cfg.epochs = 60;
    cfg.milestones = {40};
    const DataSplits data = make_dataset(cfg);
    double teacher_sum = 0.0, student_sum = 0.0;
    for (std::uint64_t seed : {0, 1, 2}) {
        RunResult teacher = train_teacher(cfg, data, seed);
        ASSERT_FALSE(teacher.diverged);
        ExperimentConfig ce_cfg = cfg;
        ce_cfg.trainer_kind = TrainerKind::kVanilla;
        ce_cfg.distill.alpha = 1.0;
        RunResult student = distill_student(ce_cfg, data, teacher.params, seed);
        ASSERT_FALSE(student.diverged);
        teacher_sum += teacher.final_train_accuracy;
        student_sum += student.final_train_accuracy;
    }
    EXPECT_GT(teacher_sum, student_sum);  // capacity gap on the same budget
}

TEST(Harness, DeterministicByteIdenticalArtifacts) {
    ExperimentConfig cfg = tiny_config();
    cfg.diag_landscape = true;
    cfg.diag_fidelity = true;
    const DataSplits data = make_dataset(cfg);
    RunResult teacher = train_teacher(cfg, data, 0);

    const std::string base = ::testing::TempDir() + "det";
    std::filesystem::remove_all(base);
    for (const char* sub : {"/a", "/b"}) {
        RunResult result = distill_student(cfg, data, teacher.params, 0);
        write_run_artifacts(base + sub, cfg, 0, "student", result);
    }
    for (const char* file : {"/config.txt", "/iterations.csv", "/epochs.csv", "/student.tensors", "/summary.csv",
                             "/landscape.csv", "/fidelity.csv"}) {
        EXPECT_EQ(read_file(base + "/a" + file), read_file(base + "/b" + file)) << file;
    }
}

TEST(Harness, DiagnosticsTogglesNeverAlterTrajectories) {
    ExperimentConfig plain = tiny_config();
    plain.diag_cosines = false;
    plain.diag_landscape = false;
    plain.diag_fidelity = false;
    ExperimentConfig full = tiny_config();
    full.diag_cosines = true;
    full.diag_landscape = true;
    full.diag_fidelity = true;

    const DataSplits data = make_dataset(plain);
    RunResult teacher = train_teacher(plain, data, 1);
    RunResult a = distill_student(plain, data, teacher.params, 1);
    RunResult b = distill_student(full, data, teacher.params, 1);
    EXPECT_TRUE(a.params == b.params);  // exact equality
    EXPECT_FALSE(a.iteration_records.front().cos_kd.has_value());
    EXPECT_TRUE(b.iteration_records.front().cos_kd.has_value());
    EXPECT_TRUE(b.sharpness_value.has_value());
    EXPECT_TRUE(b.fidelity.has_value());
}

TEST(Harness, AlphaOneKeepsKdBufferZeroAndLogsOnTheFlyKl) {
    ExperimentConfig cfg = tiny_config();
    cfg.distill.alpha = 1.0;
    cfg.trainer_kind = TrainerKind::kDot;
    const DataSplits data = make_dataset(cfg);
    RunResult teacher = train_teacher(cfg, data, 2);
    RunResult result = distill_student(cfg, data, teacher.params, 2);
    ASSERT_FALSE(result.diverged);
    // cos_kd = 0 exactly <=> v_kd stayed identically zero
    for (const RunRecord& r : result.iteration_records) {
        ASSERT_TRUE(r.cos_kd.has_value());
        EXPECT_EQ(*r.cos_kd, 0.0);
        EXPECT_GT(r.train_distill_loss, 0.0);  // KL still reported, without back-propagation
    }
}

TEST(Harness, DeltaZeroDotMatchesVanillaEndToEnd) {
    ExperimentConfig dot_cfg = tiny_config();
    dot_cfg.trainer_kind = TrainerKind::kDot;
    dot_cfg.trainer.delta = 0.0;
    ExperimentConfig vanilla_cfg = dot_cfg;
    vanilla_cfg.trainer_kind = TrainerKind::kVanilla;

    const DataSplits data = make_dataset(dot_cfg);
    RunResult teacher = train_teacher(dot_cfg, data, 3);
    RunResult a = distill_student(dot_cfg, data, teacher.params, 3);
    RunResult b = distill_student(vanilla_cfg, data, teacher.params, 3);
    for (const std::string& name : a.params.names()) {
        for (std::size_t i = 0; i < a.params.at(name).size(); ++i) {
            const double va = a.params.at(name)[i], vb = b.params.at(name)[i];
            EXPECT_NEAR(va, vb, 1e-9 * std::max({std::fabs(va), std::fabs(vb), 1.0}));
        }
    }
}

TEST(Harness, MismatchedTeacherRejected) {
    ExperimentConfig cfg = tiny_config();
    const DataSplits data = make_dataset(cfg);
    ParameterSet wrong = init_network(NetworkSpec{2, {3}, 3}, 5);
    EXPECT_THROW(distill_student(cfg, data, wrong, 0), ConfigError);
}

TEST(Harness, DivergenceRestoresCheckpointAndFlags) {
    ExperimentConfig cfg = tiny_config();
    cfg.trainer.learning_rate = 1e18;  // drives the logits to overflow
    cfg.milestones = {};
    const DataSplits data = make_dataset(cfg);
    RunResult teacher = train_teacher(cfg, data, 0);
    EXPECT_TRUE(teacher.diverged);
    EXPECT_FALSE(teacher.diagnostic.empty());
    for (const std::string& name : teacher.params.names()) {
        EXPECT_TRUE(teacher.params.at(name).all_finite());
    }
}

TEST(Toy, TrajectoryLengthMatchesSteps) {
    ToyConfig cfg;
    cfg.steps = 123;
    ToyTrajectory t = toy_experiment(cfg);
    EXPECT_EQ(t.vanilla_prob.size(), 123u);
    EXPECT_EQ(t.dot_prob.size(), 123u);
}

TEST(Toy, MatchedTeacherWithAlphaZeroIsStationary) {
    // student softmax equals the teacher prediction and the task weight is
    // zero: no gradient flows, the vanilla trajectory stays at the start
    ToyConfig cfg;
    cfg.alpha = 0.0;
    cfg.steps = 50;
    cfg.teacher_prob = 0.7;
    cfg.init_logits = {{std::log(0.3), std::log(0.7)}};
    ToyTrajectory t = toy_experiment(cfg);
    for (double p : t.vanilla_prob) EXPECT_NEAR(p, 0.7, 1e-12);
}

TEST(Toy, DotTracksTeacherCloserThanVanilla) {
    // qualitative direction over a few seeds; the acceptance suite runs ten
    double vanilla_err = 0.0, dot_err = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        ToyConfig cfg;
        cfg.seed = seed;
        ToyTrajectory t = toy_experiment(cfg);
        vanilla_err += std::fabs(t.vanilla_prob.back() - cfg.teacher_prob);
        dot_err += std::fabs(t.dot_prob.back() - cfg.teacher_prob);
    }
    EXPECT_LT(dot_err, vanilla_err);
}

TEST(Toy, CsvSchema) {
    ToyConfig cfg;
    cfg.steps = 5;
    const std::string path = ::testing::TempDir() + "toy.csv";
    write_toy_csv(toy_experiment(cfg), path);
    CsvTable table = read_csv(path);
    EXPECT_EQ(table.header, (std::vector<std::string>{"step", "prob_vanilla", "prob_dot"}));
    EXPECT_EQ(table.rows.size(), 5u);
}

TEST(Sweep, DeltaAxisIncludesVanillaEquivalentZeroRow) {
    ExperimentConfig cfg = tiny_config();
    cfg.seeds = {0, 1};
    std::vector<SweepRow> rows = ablation_sweep(cfg, SweepAxis::kDelta, {0.0, 0.05});
    ASSERT_EQ(rows.size(), 4u);
    for (const SweepRow& row : rows) EXPECT_TRUE(row.ok);

    // the delta = 0 row reproduces a vanilla run of the same seed
    ExperimentConfig vanilla_cfg = cfg;
    vanilla_cfg.trainer_kind = TrainerKind::kVanilla;
    const DataSplits data = make_dataset(cfg);
    RunResult teacher = train_teacher(cfg, data, 0);
    RunResult vanilla = distill_student(vanilla_cfg, data, teacher.params, 0);
    EXPECT_NEAR(rows[0].final_train_task_loss, vanilla.final_train_task_loss,
                1e-9 * std::max(1.0, vanilla.final_train_task_loss));
}

TEST(Sweep, FailuresAreIsolated) {
    ExperimentConfig cfg = tiny_config();
    std::vector<SweepRow> rows = ablation_sweep(cfg, SweepAxis::kMu, {0.9, 2.0});  // 2.0 is invalid
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_TRUE(rows[0].ok);
    EXPECT_FALSE(rows[1].ok);
}

TEST(Sweep, CsvSchema) {
    std::vector<SweepRow> rows(1);
    rows[0].axis = SweepAxis::kAlpha;
    rows[0].value = 0.5;
    rows[0].seed = 3;
    rows[0].ok = false;
    const std::string path = ::testing::TempDir() + "sweep.csv";
    write_sweep_csv(rows, path);
    CsvTable table = read_csv(path);
    EXPECT_EQ(table.header.back(), "status");
    EXPECT_EQ(table.rows[0].back(), "error");
}

TEST(Harness, ScheduledLrLandsInRecords) {
    ExperimentConfig cfg = tiny_config();  // milestone at epoch 5
    const DataSplits data = make_dataset(cfg);
    RunResult teacher = train_teacher(cfg, data, 0);
    ASSERT_FALSE(teacher.diverged);
    for (const RunRecord& r : teacher.epoch_records) {
        const double expected = r.epoch < 5 ? cfg.trainer.learning_rate : cfg.trainer.learning_rate * cfg.lr_decay;
        EXPECT_DOUBLE_EQ(r.learning_rate, expected) << "epoch " << r.epoch;
    }
}

TEST(Harness, LandscapeCenterMatchesFinalEpochRecord) {
    ExperimentConfig cfg = tiny_config();
    cfg.diag_landscape = true;
    const DataSplits data = make_dataset(cfg);
    RunResult teacher = train_teacher(cfg, data, 4);
    RunResult result = distill_student(cfg, data, teacher.params, 4);
    ASSERT_TRUE(result.landscape.has_value());
    const auto& slice = *result.landscape;
    double center = 0.0;
    for (std::size_t i = 0; i < slice.radii.size(); ++i) {
        if (slice.radii[i] == 0.0) center = slice.loss_values[i];
    }
    EXPECT_NEAR(center, result.epoch_records.back().train_task_loss, 1e-10);
}

}  // namespace
}  // namespace dot
