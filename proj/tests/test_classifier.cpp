#include <gtest/gtest.h>

#include <random>

#include "dscnn/classifier.hpp"
#include "dscnn/metrics.hpp"
#include "test_util.hpp"

using dscnn::LinearModel;
using dscnn::LinearTrainConfig;
using dscnn::Tensor;

namespace {

// 2-D gaussian blobs, one per class, centred on a circle.
void make_blobs(int num_classes, int per_class, unsigned seed, double spread,
                std::vector<Tensor>& features, std::vector<int>& labels) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<float> noise(0.0f, static_cast<float>(spread));
    features.clear();
    labels.clear();
    for (int k = 0; k < num_classes; ++k) {
        const float a = 2.0f * 3.14159265f * k / num_classes;
        for (int n = 0; n < per_class; ++n) {
            features.push_back(Tensor({2}, {std::cos(a) * 3 + noise(gen), std::sin(a) * 3 + noise(gen)}));
            labels.push_back(k);
        }
    }
}

double accuracy(const LinearModel& m, const std::vector<Tensor>& xs, const std::vector<int>& ys) {
    int hit = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) hit += (m.predict(xs[i]) == ys[i]) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(xs.size());
}

}  // namespace

TEST(ClassWeights, ReferenceValues) {
    const std::vector<double> w = dscnn::compute_class_weights({10, 40}, 2.0);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_DOUBLE_EQ(w[0], 1.0);
    EXPECT_DOUBLE_EQ(w[1], 0.0625);  // (10/40)^2
}

TEST(ClassWeights, BalancedCountsGiveOnes) {
    for (double p : {0.0, 0.5, 1.0, 2.0}) {
        const std::vector<double> w = dscnn::compute_class_weights({7, 7, 7}, p);
        for (double v : w) EXPECT_DOUBLE_EQ(v, 1.0) << "p=" << p;
    }
}

TEST(ClassWeights, PowerZeroDisablesWeighting) {
    const std::vector<double> w = dscnn::compute_class_weights({3, 400, 29}, 0.0);
    for (double v : w) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(ClassWeights, MonotoneInCounts) {
    const std::vector<double> w = dscnn::compute_class_weights({5, 10, 20}, 1.0);
    EXPECT_DOUBLE_EQ(w[0], 1.0);
    EXPECT_DOUBLE_EQ(w[1], 0.5);
    EXPECT_DOUBLE_EQ(w[2], 0.25);
}

TEST(ClassWeights, RejectsNonPositiveCounts) {
    EXPECT_THROW(dscnn::compute_class_weights({10, 0}, 1.0), std::invalid_argument);
    EXPECT_THROW(dscnn::compute_class_weights({-1}, 1.0), std::invalid_argument);
    EXPECT_THROW(dscnn::compute_class_weights({}, 1.0), std::invalid_argument);
}

TEST(Linear, SeparableSetReachesPerfectAccuracy) {
    std::vector<Tensor> xs;
    std::vector<int> ys;
    make_blobs(3, 20, 5, 0.15, xs, ys);
    LinearModel m = dscnn::train_linear(xs, ys, 3);
    EXPECT_DOUBLE_EQ(accuracy(m, xs, ys), 1.0);
}

TEST(Linear, PredictTieBreaksToLowestIndex) {
    LinearModel m{Tensor({3, 2}), Tensor({3})};  // all-zero scores for any x
    EXPECT_EQ(m.predict(Tensor({2}, {1.0f, -1.0f})), 0);
}

TEST(Linear, AllOnesWeightsMatchUnweightedBitwise) {
    std::vector<Tensor> xs;
    std::vector<int> ys;
    make_blobs(3, 15, 9, 0.8, xs, ys);
    LinearModel a = dscnn::train_linear(xs, ys, 3);
    LinearModel b = dscnn::train_weighted_linear(xs, ys, {1.0, 1.0, 1.0}, 3);
    ASSERT_TRUE(a.weight.same_shape(b.weight));
    for (std::size_t i = 0; i < a.weight.size(); ++i) ASSERT_EQ(a.weight[i], b.weight[i]) << i;
    for (std::size_t i = 0; i < a.bias.size(); ++i) ASSERT_EQ(a.bias[i], b.bias[i]) << i;
}

TEST(Linear, WeightingImprovesMinorityRecall) {
    // 6 minority vs 120 majority samples with overlapping blobs: the
    // unweighted hinge happily sacrifices the small class.
    std::mt19937_64 gen(31);
    std::normal_distribution<float> noise(0.0f, 1.1f);
    std::vector<Tensor> xs;
    std::vector<int> ys;
    for (int n = 0; n < 6; ++n) {
        xs.push_back(Tensor({2}, {1.0f + noise(gen), 0.0f + noise(gen)}));
        ys.push_back(0);
    }
    for (int n = 0; n < 120; ++n) {
        xs.push_back(Tensor({2}, {-1.0f + noise(gen), 0.0f + noise(gen)}));
        ys.push_back(1);
    }
    const std::vector<double> w = dscnn::compute_class_weights({6, 120}, 1.0);
    LinearModel plain = dscnn::train_linear(xs, ys, 2);
    LinearModel weighted = dscnn::train_weighted_linear(xs, ys, w, 2);

    auto minority_recall = [&](const LinearModel& m) {
        int hit = 0;
        for (int n = 0; n < 6; ++n) hit += (m.predict(xs[static_cast<std::size_t>(n)]) == 0) ? 1 : 0;
        return hit / 6.0;
    };
    EXPECT_GT(minority_recall(weighted), minority_recall(plain));

    // And the weighted model's mean class accuracy should not be worse.
    std::vector<int> pred_plain, pred_weighted;
    for (const Tensor& x : xs) {
        pred_plain.push_back(plain.predict(x));
        pred_weighted.push_back(weighted.predict(x));
    }
    EXPECT_GE(dscnn::mean_class_accuracy(pred_weighted, ys, 2).mean_class_accuracy,
              dscnn::mean_class_accuracy(pred_plain, ys, 2).mean_class_accuracy);
}

TEST(Linear, ScoresAreLinearInInput) {
    std::vector<Tensor> xs;
    std::vector<int> ys;
    make_blobs(2, 10, 13, 0.3, xs, ys);
    LinearModel m = dscnn::train_linear(xs, ys, 2);
    Tensor a({2}, {0.3f, -0.4f});
    Tensor b({2}, {-1.0f, 0.2f});
    Tensor sum({2}, {a[0] + b[0], a[1] + b[1]});
    const Tensor sa = m.scores(a), sb = m.scores(b), ss = m.scores(sum);
    for (std::size_t k = 0; k < 2; ++k)
        EXPECT_NEAR(ss[k], sa[k] + sb[k] - m.bias[k], 1e-4);
}

TEST(Linear, InputValidation) {
    std::vector<Tensor> xs = {Tensor({2}, {1, 0}), Tensor({2}, {0, 1})};
    EXPECT_THROW(dscnn::train_linear({}, {}, 2), std::invalid_argument);
    EXPECT_THROW(dscnn::train_linear(xs, {0}, 2), std::invalid_argument);
    EXPECT_THROW(dscnn::train_linear(xs, {0, 0}, 2), std::invalid_argument);  // single class
    EXPECT_THROW(dscnn::train_linear(xs, {0, 2}, 2), std::invalid_argument);  // label range
    std::vector<Tensor> ragged = {Tensor({2}, {1, 0}), Tensor({3})};
    EXPECT_THROW(dscnn::train_linear(ragged, {0, 1}, 2), std::invalid_argument);
    EXPECT_THROW(dscnn::train_weighted_linear(xs, {0, 1}, {1.0}, 2), std::invalid_argument);
}
