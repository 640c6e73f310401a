// SPDX-License-Identifier: Apache-2.0
#include "dot/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace dot {
namespace {

ParameterSet scalar_param(double value) {
    ParameterSet p;
    p.add("w", Tensor::scalar(value));
    return p;
}

TensorMap scalar_grad(double value) {
    TensorMap g;
    g.add("w", Tensor::scalar(value));
    return g;
}

TrainerConfig config(double lr, double mu, double delta = 0.0, double decay = 0.0) {
    TrainerConfig cfg;
    cfg.learning_rate = lr;
    cfg.momentum = mu;
    cfg.delta = delta;
    cfg.weight_decay = decay;
    return cfg;
}

TEST(TrainerConfig, Validation) {
    EXPECT_NO_THROW(config(0.1, 0.9, 0.075).validate());
    EXPECT_NO_THROW(config(0.1, 0.9, -0.075).validate());  // task-oriented variant
    EXPECT_THROW(config(0.0, 0.9).validate(), std::invalid_argument);
    EXPECT_THROW(config(0.1, 1.0).validate(), std::invalid_argument);
    EXPECT_THROW(config(0.1, 0.9, 0.11).validate(), std::invalid_argument);   // mu + delta >= 1
    EXPECT_THROW(config(0.1, 0.05, -0.96).validate(), std::invalid_argument); // mu - delta <= -1
    EXPECT_THROW(config(0.1, 0.9, 0.0, -1.0).validate(), std::invalid_argument);
    // the base checks skip the delta constraints (vanilla path)
    EXPECT_NO_THROW(config(0.1, 0.99, 0.075).validate_base());
}

TEST(SgdStep, FirstStepIdentity) {
    ParameterSet params = scalar_param(1.0);
    SgdState state = SgdState::init(params);
    sgd_step(params, scalar_grad(1.0), state, config(0.1, 0.9));
    EXPECT_DOUBLE_EQ(state.buffers.at("w")[0], 1.0);
    EXPECT_DOUBLE_EQ(params.at("w")[0], 0.9);  // decreased by lr * v
}

TEST(SgdStep, ZeroGradientForeverLeavesParamsFixed) {
    ParameterSet params = scalar_param(2.5);
    SgdState state = SgdState::init(params);
    for (int i = 0; i < 10; ++i) sgd_step(params, scalar_grad(0.0), state, config(0.1, 0.9));
    EXPECT_EQ(params.at("w")[0], 2.5);
    EXPECT_EQ(state.buffers.at("w")[0], 0.0);
}

TEST(SgdStep, TwoConstantStepsAccumulate) {
    ParameterSet params = scalar_param(0.0);
    SgdState state = SgdState::init(params);
    sgd_step(params, scalar_grad(1.0), state, config(0.1, 0.9));
    sgd_step(params, scalar_grad(1.0), state, config(0.1, 0.9));
    EXPECT_DOUBLE_EQ(state.buffers.at("w")[0], 1.9);  // 1 + 0.9 * 1
}

TEST(SgdStep, WeightDecayPreAddedToGradient) {
    ParameterSet params = scalar_param(2.0);
    SgdState state = SgdState::init(params);
    sgd_step(params, scalar_grad(1.0), state, config(0.1, 0.9, 0.0, 0.5));
    // g_total = 1 + 0.5 * 2 = 2; v = 2; theta = 2 - 0.2
    EXPECT_DOUBLE_EQ(state.buffers.at("w")[0], 2.0);
    EXPECT_DOUBLE_EQ(params.at("w")[0], 1.8);
}

TEST(SgdStep, MissingGradientEntryTreatedAsZero) {
    ParameterSet params;
    params.add("a", Tensor::scalar(1.0));
    params.add("b", Tensor::scalar(1.0));
    SgdState state = SgdState::init(params);
    TensorMap g;
    g.add("a", Tensor::scalar(1.0));
    sgd_step(params, g, state, config(0.1, 0.9));
    EXPECT_DOUBLE_EQ(params.at("a")[0], 0.9);
    EXPECT_EQ(params.at("b")[0], 1.0);
}

TEST(SgdStep, RejectsShapeMismatch) {
    ParameterSet params;
    params.add("w", Tensor({2}));
    SgdState state = SgdState::init(params);
    TensorMap g;
    g.add("w", Tensor({3}));
    EXPECT_THROW(sgd_step(params, g, state, config(0.1, 0.9)), std::invalid_argument);
}

TEST(SgdStep, NeverModifiesGradientInput) {
    ParameterSet params = scalar_param(1.0);
    SgdState state = SgdState::init(params);
    TensorMap g = scalar_grad(3.0);
    sgd_step(params, g, state, config(0.1, 0.9, 0.0, 0.7));
    EXPECT_EQ(g.at("w")[0], 3.0);
}

DualGradient dual(double ce, double kd) {
    DualGradient g;
    g.g_ce = scalar_grad(ce);
    g.g_kd = scalar_grad(kd);
    return g;
}

TEST(DotStep, HandEvaluatedBufferUpdate) {
    // v_ce = v_kd = 1, unit gradients, mu 0.9, delta 0.075
    ParameterSet params = scalar_param(0.0);
    DotState state = DotState::init(params);
    state.ce_buffers.at("w")[0] = 1.0;
    state.kd_buffers.at("w")[0] = 1.0;
    dot_step(params, dual(1.0, 1.0), state, config(0.1, 0.9, 0.075));
    EXPECT_DOUBLE_EQ(state.ce_buffers.at("w")[0], 1.825);  // 1 + 0.825
    EXPECT_DOUBLE_EQ(state.kd_buffers.at("w")[0], 1.975);  // 1 + 0.975
    // sum 3.8 matches the vanilla buffer on the summed gradient with equal buffers
    EXPECT_DOUBLE_EQ(state.ce_buffers.at("w")[0] + state.kd_buffers.at("w")[0], 3.8);
    EXPECT_DOUBLE_EQ(params.at("w")[0], -0.38);
}

TEST(DotStep, ZeroCeStreamStaysZero) {
    ParameterSet params = scalar_param(1.0);
    DotState state = DotState::init(params);
    for (int i = 0; i < 20; ++i) dot_step(params, dual(0.0, 0.5), state, config(0.05, 0.9, 0.075));
    EXPECT_EQ(state.ce_buffers.at("w")[0], 0.0);
    EXPECT_GT(state.kd_buffers.at("w")[0], 0.0);
}

TEST(DotStep, DeltaZeroMatchesVanillaPerStep) {
    Rng rng(41);
    ParameterSet dot_params, sgd_params;
    dot_params.add("w", Tensor({3, 2}, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6}));
    dot_params.add("b", Tensor({2}, {0.05, -0.05}));
    sgd_params = dot_params;
    DotState dot_state = DotState::init(dot_params);
    SgdState sgd_state = SgdState::init(sgd_params);
    const TrainerConfig cfg = config(0.05, 0.9, 0.0);

    for (int step = 0; step < 50; ++step) {
        DualGradient grads;
        TensorMap total;
        for (const std::string& name : dot_params.names()) {
            Tensor g_ce(dot_params.at(name).shape()), g_kd(dot_params.at(name).shape());
            Tensor sum(dot_params.at(name).shape());
            for (std::size_t i = 0; i < g_ce.size(); ++i) {
                g_ce[i] = rng.uniform(-1.0, 1.0);
                g_kd[i] = rng.uniform(-1.0, 1.0);
                sum[i] = g_ce[i] + g_kd[i];
            }
            grads.g_ce.add(name, std::move(g_ce));
            grads.g_kd.add(name, std::move(g_kd));
            total.add(name, std::move(sum));
        }
        dot_step(dot_params, grads, dot_state, cfg);
        sgd_step(sgd_params, total, sgd_state, cfg);
        for (const std::string& name : dot_params.names()) {
            for (std::size_t i = 0; i < dot_params.at(name).size(); ++i) {
                EXPECT_NEAR(dot_params.at(name)[i], sgd_params.at(name)[i], 1e-12) << name << " step " << step;
            }
        }
    }
}

TEST(DotStep, NonSharedParametersIgnoreDelta) {
    // the masking rule pins both coefficients to mu, so any delta gives a
    // bit-identical trajectory on non-shared parameters
    auto run = [](double delta) {
        ParameterSet params;
        params.add("shared", Tensor::scalar(1.0));
        params.add("solo", Tensor::scalar(1.0));
        std::map<std::string, bool> mask = {{"shared", true}, {"solo", false}};
        DotState state = DotState::init(params, mask);
        Rng rng(77);
        for (int i = 0; i < 30; ++i) {
            DualGradient g;
            g.g_ce.add("shared", Tensor::scalar(rng.uniform(-1.0, 1.0)));
            g.g_ce.add("solo", Tensor::scalar(rng.uniform(-1.0, 1.0)));
            g.g_kd.add("shared", Tensor::scalar(rng.uniform(-1.0, 1.0)));
            g.g_kd.add("solo", Tensor::scalar(rng.uniform(-1.0, 1.0)));
            dot_step(params, g, state, config(0.1, 0.9, delta));
        }
        return params;
    };
    ParameterSet with_delta = run(0.075);
    ParameterSet without_delta = run(0.0);
    EXPECT_EQ(with_delta.at("solo")[0], without_delta.at("solo")[0]);  // exact
    EXPECT_NE(with_delta.at("shared")[0], without_delta.at("shared")[0]);
}

TEST(DotStep, NeverModifiesGradientInputs) {
    ParameterSet params = scalar_param(1.0);
    DotState state = DotState::init(params);
    DualGradient g = dual(2.0, -1.0);
    TrainerConfig cfg = config(0.1, 0.9, 0.075, 0.3);
    cfg.decay_task_fraction = 0.5;
    dot_step(params, g, state, cfg);
    EXPECT_EQ(g.g_ce.at("w")[0], 2.0);
    EXPECT_EQ(g.g_kd.at("w")[0], -1.0);
}

TEST(DotStep, WeightDecaySplitsAcrossStreams) {
    ParameterSet params = scalar_param(2.0);
    DotState state = DotState::init(params);
    TrainerConfig cfg = config(0.1, 0.9, 0.0, 0.5);
    cfg.decay_task_fraction = 0.25;
    dot_step(params, dual(0.0, 0.0), state, cfg);
    // decay term 0.5 * 2 = 1 splits 0.25 / 0.75
    EXPECT_DOUBLE_EQ(state.ce_buffers.at("w")[0], 0.25);
    EXPECT_DOUBLE_EQ(state.kd_buffers.at("w")[0], 0.75);
}

TEST(VdiffIdentity, HandEvaluatedCases) {
    ParameterSet params = scalar_param(0.0);
    DotState state = DotState::init(params);
    state.ce_buffers.at("w")[0] = 1.0;
    state.kd_buffers.at("w")[0] = 3.0;
    TensorMap diff = vdiff_identity(state, dual(0.4, -0.2), config(0.1, 0.9, 0.075));
    EXPECT_NEAR(diff.at("w")[0], 0.15, 1e-15);  // delta (v_kd - v_ce) = 0.075 * 2

    state.kd_buffers.at("w")[0] = 1.0;  // equal buffers
    diff = vdiff_identity(state, dual(0.4, -0.2), config(0.1, 0.9, 0.075));
    EXPECT_EQ(diff.at("w")[0], 0.0);

    state.kd_buffers.at("w")[0] = 3.0;  // delta = 0
    diff = vdiff_identity(state, dual(0.4, -0.2), config(0.1, 0.9, 0.0));
    EXPECT_EQ(diff.at("w")[0], 0.0);
}

TEST(VdiffIdentity, HoldsOnRandomizedTriples) {
    Rng rng(4242);
    const std::vector<double> deltas = {0.0, 0.025, 0.075, -0.075};
    for (int trial = 0; trial < 200; ++trial) {
        ParameterSet params;
        params.add("w", Tensor({4, 3}));
        params.add("b", Tensor({3}));
        DotState state = DotState::init(params);
        DualGradient grads;
        for (const std::string& name : params.names()) {
            Tensor ce(params.at(name).shape()), kd(params.at(name).shape());
            for (std::size_t i = 0; i < ce.size(); ++i) {
                state.ce_buffers.at(name)[i] = rng.uniform(-2.0, 2.0);
                state.kd_buffers.at(name)[i] = rng.uniform(-2.0, 2.0);
                ce[i] = rng.uniform(-2.0, 2.0);
                kd[i] = rng.uniform(-2.0, 2.0);
            }
            grads.g_ce.add(name, std::move(ce));
            grads.g_kd.add(name, std::move(kd));
        }
        const TrainerConfig cfg = config(0.1, 0.9, deltas[trial % deltas.size()]);
        TensorMap diff;
        EXPECT_NO_THROW(diff = vdiff_identity(state, grads, cfg));  // both routes agree within 1e-12
        for (const std::string& name : params.names()) {
            for (std::size_t i = 0; i < diff.at(name).size(); ++i) {
                EXPECT_NEAR(diff.at(name)[i],
                            cfg.delta * (state.kd_buffers.at(name)[i] - state.ce_buffers.at(name)[i]), 1e-15);
            }
        }
    }
}

TEST(BufferLinearity, ClosedFormUnderConstantGradient) {
    // with constant gradient g and coefficient m the buffer after k steps is
    // g (1 - m^k) / (1 - m)
    for (double m : {0.9, 0.825, 0.975}) {
        ParameterSet params = scalar_param(0.0);
        SgdState state = SgdState::init(params);
        const double g = 0.7;
        const int k = 40;
        for (int i = 0; i < k; ++i) sgd_step(params, scalar_grad(g), state, config(0.01, m));
        const double expected = g * (1.0 - std::pow(m, k)) / (1.0 - m);
        EXPECT_NEAR(state.buffers.at("w")[0], expected, 1e-10);
    }
    // the dual buffers follow the same closed form with mu -/+ delta
    ParameterSet params = scalar_param(0.0);
    DotState state = DotState::init(params);
    const double mu = 0.9, delta = 0.075, g = 0.7;
    const int k = 40;
    for (int i = 0; i < k; ++i) dot_step(params, dual(g, g), state, config(0.01, mu, delta));
    EXPECT_NEAR(state.ce_buffers.at("w")[0], g * (1.0 - std::pow(mu - delta, k)) / (1.0 - (mu - delta)), 1e-10);
    EXPECT_NEAR(state.kd_buffers.at("w")[0], g * (1.0 - std::pow(mu + delta, k)) / (1.0 - (mu + delta)), 1e-10);
}

TEST(SharedMask, LogitDistillationSharesEverything) {
    NetworkSpec spec;
    spec.input_dim = 2;
    spec.hidden_dims = {4};
    spec.num_classes = 3;
    auto mask = compute_shared_mask(spec, LossTopology::logit_distillation(spec.parameter_names()));
    EXPECT_EQ(mask.size(), 4u);
    for (const auto& [name, shared] : mask) EXPECT_TRUE(shared) << name;
}

TEST(SharedMask, TaskOnlyParameterIsNotShared) {
    std::vector<std::string> names = {"backbone.weight", "head.weight"};
    LossTopology topology = LossTopology::logit_distillation(names);
    topology.distill_params.erase("head.weight");  // reached by the task loss alone
    auto mask = compute_shared_mask(names, topology);
    EXPECT_TRUE(mask.at("backbone.weight"));
    EXPECT_FALSE(mask.at("head.weight"));
}

TEST(SharedMask, EmptyNetworkGivesEmptyMask) {
    auto mask = compute_shared_mask(std::vector<std::string>{}, LossTopology{});
    EXPECT_TRUE(mask.empty());
}

TEST(LrSchedule, StepDecay) {
    EXPECT_DOUBLE_EQ(lr_schedule(0, 0.05, {150, 180, 210}, 0.1), 0.05);     // before the first milestone
    EXPECT_DOUBLE_EQ(lr_schedule(149, 0.05, {150, 180, 210}, 0.1), 0.05);
    EXPECT_NEAR(lr_schedule(181, 0.05, {150, 180, 210}, 0.1), 0.0005, 1e-18);
    EXPECT_NEAR(lr_schedule(500, 0.05, {150, 180, 210}, 0.1), 0.05 * 1e-3, 1e-18);  // past all milestones
    EXPECT_DOUBLE_EQ(lr_schedule(150, 0.05, {150}, 0.1), 0.005);  // milestone epoch itself decays
    EXPECT_THROW(lr_schedule(0, 0.05, {180, 150}, 0.1), std::invalid_argument);
}

TEST(StateSerialization, SgdRoundTrip) {
    ParameterSet params;
    params.add("layer0.weight", Tensor({2, 2}, {1.0, -2.0, 0.25, 1e-17}));
    SgdState state = SgdState::init(params);
    state.buffers.at("layer0.weight")[2] = 0.123456789012345678;
    const std::string path = ::testing::TempDir() + "sgd.tensors";
    save_state(state, path);
    SgdState loaded = load_sgd_state(path);
    EXPECT_TRUE(state.buffers == loaded.buffers);
}

TEST(StateSerialization, DotRoundTrip) {
    ParameterSet params;
    params.add("layer0.weight", Tensor({2}, {0.5, -0.5}));
    DotState state = DotState::init(params);
    state.ce_buffers.at("layer0.weight")[0] = 1.0 / 3.0;
    state.kd_buffers.at("layer0.weight")[1] = -2.0 / 7.0;
    const std::string path = ::testing::TempDir() + "dot.tensors";
    save_state(state, path);
    DotState loaded = load_dot_state(path, state.shared_mask);
    EXPECT_TRUE(state.ce_buffers == loaded.ce_buffers);
    EXPECT_TRUE(state.kd_buffers == loaded.kd_buffers);
}

}  // namespace
}  // namespace dot
