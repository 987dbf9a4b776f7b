#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "dscnn/metrics.hpp"
#include "dscnn/ops.hpp"
#include "test_util.hpp"

using dscnn::EvalReport;
using dscnn::Tensor;

TEST(MeanClassAccuracy, TwoClassReferenceValue) {
    // Class 0: 2/2 correct, class 1: 1/2 correct -> mean (1.0 + 0.5)/2.
    const std::vector<int> labels = {0, 0, 1, 1};
    const std::vector<int> preds = {0, 0, 1, 0};
    EvalReport rep = dscnn::mean_class_accuracy(preds, labels, 2);
    EXPECT_DOUBLE_EQ(rep.mean_class_accuracy, 0.75);
    EXPECT_DOUBLE_EQ(rep.per_class_accuracy[0], 1.0);
    EXPECT_DOUBLE_EQ(rep.per_class_accuracy[1], 0.5);
    EXPECT_EQ(rep.sample_count, 4);
    EXPECT_EQ(rep.confusion[1][0], 1);
    EXPECT_EQ(rep.confusion[1][1], 1);
    EXPECT_EQ(rep.confusion[0][1], 0);
}

TEST(MeanClassAccuracy, PerfectPredictionsGiveOne) {
    const std::vector<int> labels = {2, 0, 1, 2, 1};
    EvalReport rep = dscnn::mean_class_accuracy(labels, labels, 3);
    EXPECT_DOUBLE_EQ(rep.mean_class_accuracy, 1.0);
}

TEST(MeanClassAccuracy, ClassBalanceDoesNotHideMinorityFailure) {
    // 9/9 on the majority class, 0/1 on the minority: the headline metric
    // is 0.5, not the 90% plain accuracy would suggest.
    std::vector<int> labels(9, 0), preds(9, 0);
    labels.push_back(1);
    preds.push_back(0);
    EvalReport rep = dscnn::mean_class_accuracy(preds, labels, 2);
    EXPECT_DOUBLE_EQ(rep.mean_class_accuracy, 0.5);
    EXPECT_DOUBLE_EQ(rep.per_class_accuracy[0], 1.0);
    EXPECT_DOUBLE_EQ(rep.per_class_accuracy[1], 0.0);
}

TEST(MeanClassAccuracy, InvariantToSampleOrder) {
    std::vector<int> labels = {0, 1, 2, 0, 1, 2, 2, 1};
    std::vector<int> preds = {0, 1, 1, 0, 2, 2, 2, 1};
    const double base = dscnn::mean_class_accuracy(preds, labels, 3).mean_class_accuracy;
    std::vector<std::size_t> idx(labels.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 gen(2);
    for (int trial = 0; trial < 5; ++trial) {
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[gen() % i]);
        std::vector<int> l2, p2;
        for (std::size_t i : idx) {
            l2.push_back(labels[i]);
            p2.push_back(preds[i]);
        }
        EXPECT_DOUBLE_EQ(dscnn::mean_class_accuracy(p2, l2, 3).mean_class_accuracy, base);
    }
}

TEST(MeanClassAccuracy, UnrepresentedClassesExcludedFromMean) {
    // Class 2 has no test samples: mean over classes 0 and 1 only.
    const std::vector<int> labels = {0, 1};
    const std::vector<int> preds = {0, 0};
    EvalReport rep = dscnn::mean_class_accuracy(preds, labels, 3);
    EXPECT_DOUBLE_EQ(rep.mean_class_accuracy, 0.5);
    EXPECT_DOUBLE_EQ(rep.per_class_accuracy[2], -1.0);
}

TEST(MeanClassAccuracy, InputValidation) {
    EXPECT_THROW(dscnn::mean_class_accuracy({}, {}, 2), std::invalid_argument);
    EXPECT_THROW(dscnn::mean_class_accuracy({0}, {0, 1}, 2), std::invalid_argument);
    EXPECT_THROW(dscnn::mean_class_accuracy({2}, {0}, 2), std::invalid_argument);  // pred range
    EXPECT_THROW(dscnn::mean_class_accuracy({0}, {5}, 2), std::invalid_argument);  // label range
}

TEST(AveragePredictions, IdentityOnSingleFrame) {
    Tensor p({3}, {0.2f, 0.5f, 0.3f});
    Tensor avg = dscnn::average_predictions({p});
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_FLOAT_EQ(avg[i], p[i]);
}

TEST(AveragePredictions, UniformMixAndArgmaxFlip) {
    // Frame A is confidently wrong, frames B and C mildly right: averaging
    // must override the single confident frame.
    Tensor a({2}, {0.9f, 0.1f});
    Tensor b({2}, {0.25f, 0.75f});
    Tensor c({2}, {0.20f, 0.80f});
    Tensor avg = dscnn::average_predictions({a, b, c});
    EXPECT_NEAR(avg[0], (0.9f + 0.25f + 0.2f) / 3.0f, 1e-6);
    EXPECT_NEAR(avg[0] + avg[1], 1.0f, 1e-6);
    EXPECT_EQ(dscnn::argmax_index(avg), 1);
    EXPECT_EQ(dscnn::argmax_index(a), 0);
}

TEST(AveragePredictions, PermutationInvariant) {
    std::mt19937_64 gen(4);
    std::vector<Tensor> frames;
    for (int i = 0; i < 5; ++i) {
        Tensor logits = testutil::random_tensor({4}, gen, -2.0f, 2.0f);
        frames.push_back(dscnn::softmax(logits));
    }
    Tensor base = dscnn::average_predictions(frames);
    std::reverse(frames.begin(), frames.end());
    Tensor rev = dscnn::average_predictions(frames);
    for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(base[i], rev[i], 1e-6);
}

TEST(AveragePredictions, RejectsNonDistributionsAndMismatch) {
    Tensor good({2}, {0.5f, 0.5f});
    Tensor bad({2}, {0.9f, 0.9f});
    Tensor widths({3}, {0.3f, 0.3f, 0.4f});
    EXPECT_THROW(dscnn::average_predictions({}), std::invalid_argument);
    EXPECT_THROW(dscnn::average_predictions({good, bad}), std::invalid_argument);
    EXPECT_THROW(dscnn::average_predictions({good, widths}), std::invalid_argument);
}

TEST(Argmax, TieBreaksToLowestIndex) {
    Tensor v({4}, {0.3f, 0.3f, 0.2f, 0.2f});
    EXPECT_EQ(dscnn::argmax_index(v), 0);
    Tensor w({3}, {0.1f, 0.5f, 0.5f});
    EXPECT_EQ(dscnn::argmax_index(w), 1);
    EXPECT_THROW(dscnn::argmax_index(Tensor()), std::invalid_argument);
}

TEST(Gini, ReferenceValues) {
    EXPECT_DOUBLE_EQ(dscnn::gini_coefficient({1.0, 1.0, 1.0, 1.0}), 0.0);
    // One of two holds everything: |1-0|*2 / (2*2*1) = 0.5.
    EXPECT_DOUBLE_EQ(dscnn::gini_coefficient({1.0, 0.0}), 0.5);
    EXPECT_DOUBLE_EQ(dscnn::gini_coefficient({0.0, 0.0}), 0.0);
    // Concentration increases the coefficient.
    EXPECT_GT(dscnn::gini_coefficient({10.0, 1.0, 1.0, 1.0}),
              dscnn::gini_coefficient({4.0, 3.0, 3.0, 3.0}));
    EXPECT_THROW(dscnn::gini_coefficient({}), std::invalid_argument);
    EXPECT_THROW(dscnn::gini_coefficient({-1.0}), std::invalid_argument);
}

TEST(Reporting, MetricLineFormat) {
    EXPECT_EQ(dscnn::metric_line("eval/mean_class_accuracy", 0.5), "metric\teval/mean_class_accuracy\t0.5");
    const std::string line = dscnn::metric_line("wsp/epoch003/loss", 1.25);
    EXPECT_EQ(line, "metric\twsp/epoch003/loss\t1.25");
}

TEST(Reporting, FormatReportContainsHeadlineAndConfusion) {
    const std::vector<int> labels = {0, 0, 1, 1};
    const std::vector<int> preds = {0, 0, 1, 0};
    EvalReport rep = dscnn::mean_class_accuracy(preds, labels, 2);
    const std::string text = dscnn::format_report(rep, {"kitchen", "office"});
    EXPECT_NE(text.find("metric\tmean_class_accuracy\t0.75"), std::string::npos) << text;
    EXPECT_NE(text.find("metric\tsample_count\t4"), std::string::npos) << text;
    EXPECT_NE(text.find("class_accuracy/kitchen\t1"), std::string::npos) << text;
    EXPECT_NE(text.find("class_accuracy/office\t0.5"), std::string::npos) << text;
    EXPECT_NE(text.find("# confusion matrix"), std::string::npos) << text;
    EXPECT_NE(text.find("# 1 1"), std::string::npos) << text;
}
