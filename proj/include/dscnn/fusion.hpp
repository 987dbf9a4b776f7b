#pragma once

#include "dscnn/model.hpp"
#include "dscnn/tensor.hpp"

namespace dscnn {

/// Late-fusion head: two fully connected layers over the concatenation of
/// per-modality feature vectors, trainable jointly with both branches.
struct FusionSpec {
    int rgb_width = 0;
    int depth_width = 0;
    int hidden_width = 0;
    int num_classes = 0;

    int input_width() const { return rgb_width + depth_width; }
};

/// concat(rgb, depth) -> fc -> relu -> fc(num_classes).
inline ModelSpec build_fusion_head(const FusionSpec& fs) {
    if (fs.rgb_width < 1 || fs.depth_width < 1)
        throw std::invalid_argument("fusion: branch feature widths must be positive");
    if (fs.hidden_width < 1 || fs.num_classes < 2)
        throw std::invalid_argument("fusion: hidden width and num_classes must be positive");
    ModelSpec spec;
    spec.input_shape = {fs.input_width()};
    spec.num_classes = fs.num_classes;
    spec.layers = {
        LayerSpec::fc("fusion_fc1", fs.hidden_width),
        LayerSpec::relu("fusion_relu1"),
        LayerSpec::fc("fusion_fc2", fs.num_classes),
    };
    spec.validate();
    return spec;
}

/// Logits for a (rgb, depth) feature pair; concatenation order is fixed as
/// rgb first.
inline Tensor fusion_forward(const Tensor& rgb_feat, const Tensor& depth_feat, const Model& head,
                             Model::Trace* trace = nullptr) {
    const std::vector<int>& in = head.spec().input_shape;
    detail::require(rgb_feat.rank() == 1 && depth_feat.rank() == 1,
                    "fusion: branch features must be flat vectors");
    detail::require(static_cast<int>(rgb_feat.size() + depth_feat.size()) == in[0],
                    "fusion: feature widths " + shape_str(rgb_feat) + " + " + shape_str(depth_feat) +
                        " do not match head input " + Tensor::shape_str(in));
    return head.forward(concat(rgb_feat, depth_feat), trace);
}

}  // namespace dscnn
