#pragma once

#include <cmath>
#include <iomanip>
#include <sstream>

#include "dscnn/tensor.hpp"

namespace dscnn {

/// Per-class recall, its mean over represented classes (the headline
/// metric), and the confusion matrix with truth on rows.
struct EvalReport {
    std::vector<double> per_class_accuracy;       // -1 for classes with no test samples
    double mean_class_accuracy = 0.0;
    std::vector<std::vector<int>> confusion;      // [truth][predicted]
    int sample_count = 0;
};

inline EvalReport mean_class_accuracy(const std::vector<int>& predictions,
                                      const std::vector<int>& labels, int num_classes) {
    detail::require(!predictions.empty(), "mean_class_accuracy: empty input");
    detail::require(predictions.size() == labels.size(),
                    "mean_class_accuracy: prediction/label count mismatch");
    detail::require(num_classes >= 1, "mean_class_accuracy: need at least one class");
    EvalReport rep;
    rep.sample_count = static_cast<int>(labels.size());
    rep.confusion.assign(static_cast<std::size_t>(num_classes),
                         std::vector<int>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int t = labels[i], p = predictions[i];
        detail::require(t >= 0 && t < num_classes, "mean_class_accuracy: label out of range");
        detail::require(p >= 0 && p < num_classes, "mean_class_accuracy: prediction out of range");
        rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]++;
    }
    rep.per_class_accuracy.assign(static_cast<std::size_t>(num_classes), -1.0);
    double sum = 0.0;
    int represented = 0;
    for (int k = 0; k < num_classes; ++k) {
        int row = 0;
        for (int j = 0; j < num_classes; ++j) row += rep.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        if (row == 0) continue;  // classes with no test samples are excluded
        const double acc = static_cast<double>(rep.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)]) / row;
        rep.per_class_accuracy[static_cast<std::size_t>(k)] = acc;
        sum += acc;
        ++represented;
    }
    detail::require(represented > 0, "mean_class_accuracy: no represented classes");
    rep.mean_class_accuracy = sum / represented;
    return rep;
}

/// Elementwise mean of per-frame probability vectors — the AVE baseline.
inline Tensor average_predictions(const std::vector<Tensor>& per_frame_probs) {
    detail::require(!per_frame_probs.empty(), "average_predictions: empty input");
    const std::size_t width = per_frame_probs[0].size();
    Tensor out({static_cast<int>(width)});
    for (const Tensor& p : per_frame_probs) {
        detail::require(p.size() == width, "average_predictions: width mismatch " + shape_str(p));
        double sum = 0.0;
        for (std::size_t i = 0; i < width; ++i) sum += p[i];
        detail::require(std::abs(sum - 1.0) <= 1e-6 + 1e-9 * static_cast<double>(width),
                        "average_predictions: input does not sum to 1");
        for (std::size_t i = 0; i < width; ++i) out[i] += p[i];
    }
    const float inv = 1.0f / static_cast<float>(per_frame_probs.size());
    for (std::size_t i = 0; i < width; ++i) out[i] *= inv;
    return out;
}

inline int argmax_index(const Tensor& v) {
    detail::require(v.size() >= 1, "argmax of empty tensor");
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

/// Gini coefficient of a nonnegative vector (0 = perfectly even,
/// -> 1 = concentrated); used to compare activation-rate skew.
inline double gini_coefficient(const std::vector<double>& values) {
    detail::require(!values.empty(), "gini: empty input");
    double total = 0.0;
    for (double v : values) {
        detail::require(v >= 0.0, "gini: negative value");
        total += v;
    }
    if (total == 0.0) return 0.0;
    double abs_diff_sum = 0.0;
    for (double a : values)
        for (double b : values) abs_diff_sum += std::abs(a - b);
    const double n = static_cast<double>(values.size());
    return abs_diff_sum / (2.0 * n * total);
}

/// Machine-readable report line: metric<TAB>name<TAB>value.
inline std::string metric_line(const std::string& name, double value) {
    std::ostringstream os;
    os << "metric\t" << name << "\t" << std::setprecision(10) << value;
    return os.str();
}

inline std::string format_report(const EvalReport& rep, const std::vector<std::string>& taxonomy) {
    std::ostringstream os;
    os << metric_line("mean_class_accuracy", rep.mean_class_accuracy) << "\n";
    os << metric_line("sample_count", rep.sample_count) << "\n";
    for (std::size_t k = 0; k < rep.per_class_accuracy.size(); ++k) {
        if (rep.per_class_accuracy[k] < 0.0) continue;
        const std::string name = k < taxonomy.size() ? taxonomy[k] : "class" + std::to_string(k);
        os << metric_line("class_accuracy/" + name, rep.per_class_accuracy[k]) << "\n";
    }
    os << "# confusion matrix (rows = truth)\n";
    for (const std::vector<int>& row : rep.confusion) {
        os << "#";
        for (int v : row) os << ' ' << v;
        os << "\n";
    }
    return os.str();
}

}  // namespace dscnn
