#pragma once

#include <cmath>

#include "dscnn/optimizer.hpp"
#include "dscnn/tensor.hpp"

namespace dscnn {

/// w_k = (min_i N_i / N_k)^p — the least-frequent class gets weight 1 and
/// larger classes are discounted.
inline std::vector<double> compute_class_weights(const std::vector<int>& counts, double p) {
    if (counts.empty()) throw std::invalid_argument("class weights: empty count list");
    int min_count = counts[0];
    for (int c : counts) {
        if (c <= 0) throw std::invalid_argument("class weights: every class count must be positive");
        min_count = std::min(min_count, c);
    }
    std::vector<double> weights;
    weights.reserve(counts.size());
    for (int c : counts)
        weights.push_back(std::pow(static_cast<double>(min_count) / static_cast<double>(c), p));
    return weights;
}

/// One-vs-rest linear scorer; prediction is the argmax class (lowest index
/// on ties).
struct LinearModel {
    Tensor weight;  // K x D
    Tensor bias;    // K

    Tensor scores(const Tensor& x) const { return fc_forward(x, weight, bias); }

    int predict(const Tensor& x) const {
        const Tensor s = scores(x);
        int best = 0;
        for (std::size_t k = 1; k < s.size(); ++k)
            if (s[k] > s[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
        return best;
    }
};

struct LinearTrainConfig {
    double learning_rate = 0.05;
    double regularization = 1e-3;  // L2 coefficient, applied through weight decay
    int epochs = 500;
};

namespace detail {

inline void check_linear_inputs(const std::vector<Tensor>& features, const std::vector<int>& labels,
                                int num_classes) {
    require(!features.empty(), "linear classifier: empty training set");
    require(features.size() == labels.size(), "linear classifier: feature/label count mismatch");
    require(num_classes >= 2, "linear classifier: need at least 2 classes");
    const std::size_t width = features[0].size();
    int lo = labels[0], hi = labels[0];
    for (std::size_t n = 0; n < features.size(); ++n) {
        require(features[n].size() == width, "linear classifier: inconsistent feature width at sample " +
                                                 std::to_string(n));
        require(labels[n] >= 0 && labels[n] < num_classes,
                "linear classifier: label " + std::to_string(labels[n]) + " out of range");
        lo = std::min(lo, labels[n]);
        hi = std::max(hi, labels[n]);
    }
    require(lo != hi, "linear classifier: single-class training set");
}

/// Full-batch gradient descent on one-vs-rest hinge loss from zero
/// initialization. `sample_weight(n)` multiplies sample n's loss term.
template <typename WeightFn>
LinearModel fit_linear_hinge(const std::vector<Tensor>& features, const std::vector<int>& labels,
                             int num_classes, const LinearTrainConfig& cfg, WeightFn sample_weight) {
    check_linear_inputs(features, labels, num_classes);
    const int d = static_cast<int>(features[0].size());
    LinearModel model{Tensor({num_classes, d}), Tensor({num_classes})};

    TrainingConfig sgd_cfg;
    sgd_cfg.learning_rate = cfg.learning_rate;
    sgd_cfg.momentum = 0.0;
    sgd_cfg.weight_decay = cfg.regularization;
    sgd_cfg.batch_size = 1;
    sgd_cfg.epochs = cfg.epochs;
    SgdOptimizer opt;
    std::vector<ParamRef> refs = {{"linear.weight", &model.weight}, {"linear.bias", &model.bias}};

    const float inv_n = 1.0f / static_cast<float>(features.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        ParamStore grads;
        Tensor& gw = grads.accum("linear.weight", {num_classes, d});
        Tensor& gb = grads.accum("linear.bias", {num_classes});
        for (std::size_t n = 0; n < features.size(); ++n) {
            const Tensor s = model.scores(features[n]);
            const float wf = sample_weight(n);
            for (int k = 0; k < num_classes; ++k) {
                const float t = labels[n] == k ? 1.0f : -1.0f;
                if (1.0f - t * s[static_cast<std::size_t>(k)] <= 0.0f) continue;
                const float coeff = -t * wf * inv_n;
                const float* x = features[n].data();
                float* gwr = gw.data() + static_cast<std::size_t>(k) * d;
                for (int i = 0; i < d; ++i) gwr[i] += coeff * x[i];
                gb[static_cast<std::size_t>(k)] += coeff;
            }
        }
        opt.step(refs, grads, sgd_cfg);
    }
    return model;
}

}  // namespace detail

/// Class-weighted one-vs-rest hinge classifier: sample n's hinge terms are
/// multiplied by class_weights[label_n].
inline LinearModel train_weighted_linear(const std::vector<Tensor>& features,
                                         const std::vector<int>& labels,
                                         const std::vector<double>& class_weights, int num_classes,
                                         const LinearTrainConfig& cfg = {}) {
    detail::require(static_cast<int>(class_weights.size()) == num_classes,
                    "linear classifier: class weight count does not match num_classes");
    return detail::fit_linear_hinge(
        features, labels, num_classes, cfg,
        [&](std::size_t n) { return static_cast<float>(class_weights[static_cast<std::size_t>(labels[n])]); });
}

/// Unweighted variant: every sample's hinge term enters the loss as-is.
inline LinearModel train_linear(const std::vector<Tensor>& features, const std::vector<int>& labels,
                                int num_classes, const LinearTrainConfig& cfg = {}) {
    return detail::fit_linear_hinge(features, labels, num_classes, cfg,
                                    [](std::size_t) { return 1.0f; });
}

}  // namespace dscnn
