#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dscnn/optimizer.hpp"

using dscnn::ParamRef;
using dscnn::ParamStore;
using dscnn::SgdOptimizer;
using dscnn::Tensor;
using dscnn::TrainingConfig;

namespace {
TrainingConfig plain_sgd(double lr) {
    TrainingConfig cfg;
    cfg.learning_rate = lr;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    return cfg;
}
}  // namespace

TEST(TrainingConfig, Validation) {
    TrainingConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.learning_rate = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = TrainingConfig{};
    cfg.momentum = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = TrainingConfig{};
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = TrainingConfig{};
    cfg.epochs = -1;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = TrainingConfig{};
    cfg.epochs = 0;
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Sgd, VanillaStepIsGradientDescent) {
    Tensor w({3}, {1.0f, 2.0f, 3.0f});
    ParamStore grads;
    grads.add("w", Tensor({3}, {0.5f, -1.0f, 0.0f}));
    std::vector<ParamRef> refs = {{"w", &w}};
    SgdOptimizer opt;
    opt.step(refs, grads, plain_sgd(0.1));
    EXPECT_FLOAT_EQ(w[0], 1.0f - 0.1f * 0.5f);
    EXPECT_FLOAT_EQ(w[1], 2.0f + 0.1f * 1.0f);
    EXPECT_FLOAT_EQ(w[2], 3.0f);
}

TEST(Sgd, MomentumAccumulatesVelocity) {
    // Two identical steps: v1 = -lr*g; v2 = mom*v1 - lr*g.
    Tensor w({1}, {0.0f});
    ParamStore grads;
    grads.add("w", Tensor({1}, {1.0f}));
    std::vector<ParamRef> refs = {{"w", &w}};
    TrainingConfig cfg = plain_sgd(0.1);
    cfg.momentum = 0.9;
    SgdOptimizer opt;
    opt.step(refs, grads, cfg);
    EXPECT_NEAR(w[0], -0.1, 1e-6);
    opt.step(refs, grads, cfg);
    EXPECT_NEAR(w[0], -0.1 + (0.9 * -0.1 - 0.1), 2e-6);
}

TEST(Sgd, WeightDecayShrinksWeightsWithZeroGradient) {
    Tensor w({1}, {2.0f});
    ParamStore grads;
    grads.add("w", Tensor({1}, {0.0f}));
    std::vector<ParamRef> refs = {{"w", &w}};
    TrainingConfig cfg = plain_sgd(0.1);
    cfg.weight_decay = 0.5;
    SgdOptimizer opt;
    opt.step(refs, grads, cfg);
    EXPECT_NEAR(w[0], 2.0f - 0.1f * 0.5f * 2.0f, 1e-6);
}

TEST(Sgd, MissingGradientMeansNoUpdate) {
    Tensor w({2}, {5.0f, 6.0f});
    ParamStore grads;  // empty
    std::vector<ParamRef> refs = {{"w", &w}};
    SgdOptimizer opt;
    opt.step(refs, grads, plain_sgd(0.1));
    EXPECT_FLOAT_EQ(w[0], 5.0f);
    EXPECT_FLOAT_EQ(w[1], 6.0f);
}

TEST(Sgd, NonFiniteGradientAbortsNamingParameter) {
    Tensor w({2});
    ParamStore grads;
    grads.add("layer.weight", Tensor({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()}));
    std::vector<ParamRef> refs = {{"layer.weight", &w}};
    SgdOptimizer opt;
    TrainingConfig cfg = plain_sgd(0.1);
    try {
        opt.step(refs, grads, cfg);
        FAIL() << "expected abort on NaN gradient";
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("layer.weight"), std::string::npos) << msg;
        EXPECT_NE(msg.find("aborting epoch"), std::string::npos) << msg;
    }
}

TEST(Sgd, FreezeMatchingOnNameBoundaries) {
    using dscnn::is_frozen;
    std::set<std::string> mask = {"conv1", "rgb/cnn"};
    EXPECT_TRUE(is_frozen("conv1.weight", mask));
    EXPECT_TRUE(is_frozen("conv1.bias", mask));
    EXPECT_TRUE(is_frozen("rgb/cnn/conv3.weight", mask));
    EXPECT_FALSE(is_frozen("conv10.weight", mask));  // prefix must stop at a boundary
    EXPECT_FALSE(is_frozen("depth/cnn/conv1x.weight", mask));
    EXPECT_FALSE(is_frozen("fc5.weight", mask));
    EXPECT_TRUE(is_frozen("fc5.weight", {"fc5.weight"}));
    EXPECT_FALSE(is_frozen("fc5.weight", {}));
}

TEST(Sgd, FrozenParameterStaysBitwiseConstant) {
    Tensor frozen({2}, {1.5f, -2.5f});
    Tensor live({2}, {1.5f, -2.5f});
    ParamStore grads;
    grads.add("conv1.weight", Tensor({2}, {1.0f, 1.0f}));
    grads.add("fc6.weight", Tensor({2}, {1.0f, 1.0f}));
    std::vector<ParamRef> refs = {{"conv1.weight", &frozen}, {"fc6.weight", &live}};
    TrainingConfig cfg = plain_sgd(0.05);
    cfg.momentum = 0.9;
    cfg.weight_decay = 5e-4;
    cfg.freeze_mask = {"conv1"};
    SgdOptimizer opt;
    for (int i = 0; i < 10; ++i) opt.step(refs, grads, cfg);
    EXPECT_EQ(frozen[0], 1.5f);
    EXPECT_EQ(frozen[1], -2.5f);
    EXPECT_NE(live[0], 1.5f);
}

TEST(Sgd, ResetClearsVelocity) {
    Tensor w({1}, {0.0f});
    ParamStore grads;
    grads.add("w", Tensor({1}, {1.0f}));
    std::vector<ParamRef> refs = {{"w", &w}};
    TrainingConfig cfg = plain_sgd(0.1);
    cfg.momentum = 0.9;
    SgdOptimizer opt;
    opt.step(refs, grads, cfg);
    const float after_one = w[0];
    opt.reset();
    opt.step(refs, grads, cfg);
    // With velocity cleared the second step repeats the first delta exactly.
    EXPECT_FLOAT_EQ(w[0], after_one * 2.0f);
}

TEST(Sgd, GradientShapeMismatchRejected) {
    Tensor w({2});
    ParamStore grads;
    grads.add("w", Tensor({3}));
    std::vector<ParamRef> refs = {{"w", &w}};
    SgdOptimizer opt;
    TrainingConfig cfg = plain_sgd(0.1);
    EXPECT_THROW(opt.step(refs, grads, cfg), std::invalid_argument);
}
