#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dscnn/gradcheck.hpp"
#include "dscnn/model.hpp"
#include "test_util.hpp"

using dscnn::LayerSpec;
using dscnn::Model;
using dscnn::ModelSpec;
using dscnn::Tensor;

TEST(ModelSpec, FullScaleShapeChain) {
    ModelSpec spec = dscnn::build_dcnn({1, 119, 119}, 19, 1.0);
    const auto shapes = spec.propagate();
    // shapes[0] is the input; shapes[i+1] the output of layer i.
    ASSERT_EQ(shapes.size(), spec.layers.size() + 1);
    EXPECT_EQ(shapes[1], (std::vector<int>{96, 58, 58}));    // conv1 5x5 stride2
    EXPECT_EQ(shapes[3], (std::vector<int>{96, 29, 29}));    // pool1 2x2 stride2
    EXPECT_EQ(shapes[5], (std::vector<int>{256, 29, 29}));   // after conv2+relu2
    EXPECT_EQ(shapes[7], (std::vector<int>{384, 29, 29}));   // after conv3+relu3
    EXPECT_EQ(shapes[9], (std::vector<int>{512, 29, 29}));   // after conv4+relu4
    EXPECT_EQ(shapes[10], (std::vector<int>{7168}));         // spp {1,2,3} x 512
    EXPECT_EQ(shapes[11], (std::vector<int>{1024}));         // fc5
    EXPECT_EQ(shapes[12], (std::vector<int>{19}));           // fc6
}

TEST(ModelSpec, PatchInputReachesSameFcWidth) {
    ModelSpec full = dscnn::build_dcnn({1, 119, 119}, 19, 1.0);
    ModelSpec patch = dscnn::build_wsp_cnn({3, 35, 35}, 19, 1.0);
    const auto ps = patch.propagate();
    EXPECT_EQ(ps[1], (std::vector<int>{96, 16, 16}));  // (35-5)/2+1
    EXPECT_EQ(ps[3], (std::vector<int>{96, 8, 8}));
    EXPECT_EQ(ps[9], (std::vector<int>{512, 8, 8}));
    EXPECT_EQ(ps[10], (std::vector<int>{7168}));  // pyramid output is size independent
    EXPECT_EQ(ps[11], full.propagate()[11]);      // identical fc5 width
}

TEST(ModelSpec, ChannelAndFcWidthScaling) {
    ModelSpec spec = dscnn::build_dcnn({1, 35, 35}, 10, 0.125);
    EXPECT_EQ(spec.layers[0].out_channels, 12);   // round(96/8)
    EXPECT_EQ(spec.layers[3].out_channels, 32);   // round(256/8)
    EXPECT_EQ(spec.layers[5].out_channels, 48);   // round(384/8)
    EXPECT_EQ(spec.layers[7].out_channels, 64);   // round(512/8)
    EXPECT_EQ(spec.layers[10].width, 128);        // round(1024/8)

    ModelSpec tiny = dscnn::build_dcnn({1, 35, 35}, 10, 0.01);
    EXPECT_EQ(tiny.layers[10].width, 16);  // floor of the default width rule

    ModelSpec forced = dscnn::build_dcnn({1, 35, 35}, 10, 0.125, 20);
    EXPECT_EQ(forced.layers[10].width, 20);

    EXPECT_THROW(dscnn::build_dcnn({1, 35, 35}, 10, 0.0), std::invalid_argument);
    EXPECT_THROW(dscnn::build_dcnn({1, 35, 35}, 10, 1.5), std::invalid_argument);
    EXPECT_THROW(dscnn::build_dcnn({1, 35, 35}, 1, 0.125), std::invalid_argument);
}

TEST(ModelSpec, NoActivationBetweenFinalFcLayers) {
    ModelSpec spec = dscnn::build_dcnn({1, 35, 35}, 10, 0.125);
    const int fc5 = static_cast<int>(spec.layers.size()) - 2;
    EXPECT_EQ(spec.layers[static_cast<std::size_t>(fc5)].name, "fc5");
    EXPECT_EQ(spec.layers.back().name, "fc6");
    EXPECT_EQ(spec.layers[static_cast<std::size_t>(fc5)].kind, dscnn::LayerKind::fc);
    EXPECT_EQ(spec.layers.back().kind, dscnn::LayerKind::fc);
}

TEST(ModelSpec, JsonRoundTrip) {
    ModelSpec spec = dscnn::build_dcnn({3, 35, 35}, 7, 0.25);
    ModelSpec back = ModelSpec::from_json(spec.to_json());
    EXPECT_EQ(back.input_shape, spec.input_shape);
    EXPECT_EQ(back.num_classes, spec.num_classes);
    ASSERT_EQ(back.layers.size(), spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        EXPECT_EQ(back.layers[i].name, spec.layers[i].name);
        EXPECT_EQ(back.layers[i].kind, spec.layers[i].kind);
        EXPECT_EQ(back.layers[i].out_channels, spec.layers[i].out_channels);
        EXPECT_EQ(back.layers[i].kernel, spec.layers[i].kernel);
        EXPECT_EQ(back.layers[i].stride, spec.layers[i].stride);
        EXPECT_EQ(back.layers[i].pad, spec.layers[i].pad);
        EXPECT_EQ(back.layers[i].window, spec.layers[i].window);
        EXPECT_EQ(back.layers[i].width, spec.layers[i].width);
        EXPECT_EQ(back.layers[i].bins, spec.layers[i].bins);
    }
    EXPECT_EQ(back.propagate(), spec.propagate());
}

TEST(ModelSpec, DuplicateLayerNameRejected) {
    ModelSpec spec;
    spec.input_shape = {1, 8, 8};
    spec.num_classes = 2;
    spec.layers = {LayerSpec::conv("a", 2, 3, 1, 1), LayerSpec::relu("a"), LayerSpec::fc("out", 2)};
    EXPECT_THROW(spec.propagate(), std::invalid_argument);
}

TEST(ModelSpec, ValidateRejectsWrongHeadWidth) {
    ModelSpec spec;
    spec.input_shape = {4};
    spec.num_classes = 3;
    spec.layers = {LayerSpec::fc("out", 5)};
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec.layers = {LayerSpec::fc("out", 3)};
    EXPECT_NO_THROW(spec.validate());
}

TEST(ModelSpec, RejectsInputSmallerThanFirstKernel) {
    EXPECT_THROW(dscnn::build_dcnn({1, 14, 14}, 4, 0.125).propagate(), std::invalid_argument);
    EXPECT_NO_THROW(dscnn::build_dcnn({1, 15, 15}, 4, 0.125).propagate());
}

TEST(Model, ParameterNamesAndShapes) {
    Model m(dscnn::build_dcnn({1, 35, 35}, 10, 0.125), 1);
    for (const char* n : {"conv1.weight", "conv1.bias", "conv2.weight", "conv3.weight", "conv4.weight",
                          "fc5.weight", "fc5.bias", "fc6.weight", "fc6.bias"})
        EXPECT_TRUE(m.params().has(n)) << n;
    EXPECT_FALSE(m.params().has("relu1.weight"));
    EXPECT_FALSE(m.params().has("spp.weight"));
    const Tensor& c1 = m.params().at("conv1.weight");
    EXPECT_EQ(c1.dim(0), 12);
    EXPECT_EQ(c1.dim(1), 1);
    EXPECT_EQ(c1.dim(2), 5);
    const Tensor& f6 = m.params().at("fc6.weight");
    EXPECT_EQ(f6.dim(0), 10);
    EXPECT_EQ(f6.dim(1), 128);
}

TEST(Model, InitIsSeedAndNameDeterministic) {
    // Same seed, same layer name => bitwise-identical weights even when the
    // rest of the architecture differs in input geometry.
    Model image(dscnn::build_dcnn({1, 35, 35}, 10, 0.125), 77);
    Model patch(dscnn::build_wsp_cnn({1, 15, 15}, 10, 0.125), 77);
    const Tensor& a = image.params().at("conv1.weight");
    const Tensor& b = patch.params().at("conv1.weight");
    ASSERT_TRUE(a.same_shape(b));
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]) << "idx " << i;

    Model other(dscnn::build_dcnn({1, 35, 35}, 10, 0.125), 78);
    bool any_diff = false;
    const Tensor& c = other.params().at("conv1.weight");
    for (std::size_t i = 0; i < a.size(); ++i) any_diff |= (a[i] != c[i]);
    EXPECT_TRUE(any_diff) << "different seeds must give different weights";
}

TEST(Model, InitRespectsFanBounds) {
    Model m(dscnn::build_dcnn({1, 35, 35}, 10, 0.125), 5);
    const Tensor& w = m.params().at("fc6.weight");
    const float limit = std::sqrt(6.0f / (128 + 10));
    float mx = 0.0f;
    for (std::size_t i = 0; i < w.size(); ++i) mx = std::max(mx, std::abs(w[i]));
    EXPECT_LE(mx, limit);
    EXPECT_GT(mx, 0.8f * limit);  // the range is actually used
    const Tensor& b = m.params().at("fc6.bias");
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i], 0.0f);
}

TEST(Model, ForwardShapesAndFeatureExtraction) {
    Model m(dscnn::build_dcnn({1, 35, 35}, 10, 0.125), 9);
    std::mt19937_64 gen(1);
    Tensor x = testutil::random_tensor({1, 35, 35}, gen, 0.0f, 1.0f);
    Tensor logits = m.forward(x);
    EXPECT_EQ(logits.size(), 10u);
    Tensor fc5 = m.feature(x, "fc5");
    EXPECT_EQ(fc5.size(), 128u);
    Tensor spp = m.feature(x, "spp");
    EXPECT_EQ(spp.size(), 14u * 64u);
    EXPECT_THROW(m.feature(x, "nonsense"), std::invalid_argument);
}

TEST(Model, BackwardMatchesFiniteDifferences) {
    // End-to-end gradient through conv/pool/relu/spp/fc on a tiny instance.
    ModelSpec spec;
    spec.input_shape = {1, 11, 11};
    spec.num_classes = 3;
    spec.layers = {
        LayerSpec::conv("conv1", 2, 5, 2, 0), LayerSpec::relu("relu1"),
        LayerSpec::maxpool("pool1", 2, 2),    LayerSpec::conv("conv2", 3, 3, 1, 1),
        LayerSpec::relu("relu2"),             LayerSpec::spp("spp", {1, 2}),
        LayerSpec::fc("fc5", 6),              LayerSpec::fc("fc6", 3),
    };
    Model m(spec, 21);
    std::mt19937_64 gen(22);
    Tensor x = testutil::random_tensor({1, 11, 11}, gen);
    Model::Trace trace;
    Tensor y = m.forward(x, &trace);
    Tensor r = testutil::random_tensor(y.shape(), gen);

    dscnn::ParamStore grads;
    Tensor gx = m.backward(trace, r, grads);

    auto loss_at_x = [&](const Tensor& probe) { return testutil::project(m.forward(probe), r); };
    EXPECT_LT(dscnn::l2_relative_error(dscnn::finite_diff_grad(loss_at_x, x), gx), 1e-3);

    for (const char* pname : {"conv1.weight", "conv1.bias", "conv2.weight", "fc5.weight", "fc6.bias"}) {
        Tensor& p = m.params().at(pname);
        const Tensor saved = p;
        auto loss_at_p = [&](const Tensor& probe) {
            p = probe;
            const double v = testutil::project(m.forward(x), r);
            return v;
        };
        Tensor fd = dscnn::finite_diff_grad(loss_at_p, saved);
        p = saved;
        EXPECT_LT(dscnn::l2_relative_error(fd, grads.at(pname)), 1e-3) << pname;
    }
}

TEST(Model, TransferCopiesConvLayersOnly) {
    Model src(dscnn::build_wsp_cnn({1, 15, 15}, 10, 0.125), 100);
    Model dst(dscnn::build_dcnn({1, 35, 35}, 10, 0.125), 200);
    const Tensor fc5_before = dst.params().at("fc5.weight");
    dscnn::transfer_conv_weights(src, dst);
    for (const char* layer : {"conv1", "conv2", "conv3", "conv4"}) {
        for (const char* suffix : {".weight", ".bias"}) {
            const Tensor& a = src.params().at(std::string(layer) + suffix);
            const Tensor& b = dst.params().at(std::string(layer) + suffix);
            ASSERT_TRUE(a.same_shape(b));
            for (std::size_t i = 0; i < a.size(); ++i)
                ASSERT_EQ(a[i], b[i]) << layer << suffix << " idx " << i;
        }
    }
    const Tensor& fc5_after = dst.params().at("fc5.weight");
    for (std::size_t i = 0; i < fc5_after.size(); ++i)
        ASSERT_EQ(fc5_after[i], fc5_before[i]) << "fc weights must not be transferred";
}

TEST(Model, TransferRejectsShapeMismatchListingLayers) {
    Model src(dscnn::build_wsp_cnn({1, 15, 15}, 10, 0.25), 1);
    Model dst(dscnn::build_dcnn({1, 35, 35}, 10, 0.125), 1);
    try {
        dscnn::transfer_conv_weights(src, dst);
        FAIL() << "expected shape mismatch";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("conv1"), std::string::npos) << e.what();
    }
}
