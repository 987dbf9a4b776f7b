#pragma once

#include "dscnn/fusion.hpp"
#include "dscnn/lstm.hpp"
#include "dscnn/model.hpp"
#include "dscnn/tensor.hpp"

namespace dscnn {

/// One modality's spatio-temporal encoder: a CNN producing per-frame
/// features at `feature_layer` and a recurrent cell embedding the feature
/// sequence into its final hidden state m_T.
struct TemporalBranch {
    Model cnn;
    std::string feature_layer = "fc5";
    LstmWeights lstm;

    int feature_width() const { return lstm.input(); }
    int hidden() const { return lstm.hidden(); }
};

inline LstmWeights init_lstm_weights(int hidden, int input, std::uint64_t seed,
                                     const std::string& prefix = "lstm/") {
    LstmWeights w(hidden, input);
    for (int i = 0; i < 8; ++i) {
        Tensor& t = w.by_index(i);
        init_uniform_fan(t, prefix + LstmWeights::names()[static_cast<std::size_t>(i)], seed, t.dim(1),
                         t.dim(0));
    }
    return w;
}

inline TemporalBranch make_temporal_branch(Model cnn, const std::string& feature_layer, int hidden,
                                           std::uint64_t seed, const std::string& prefix = "lstm/") {
    TemporalBranch b;
    b.cnn = std::move(cnn);
    b.feature_layer = feature_layer;
    const int fidx = b.cnn.layer_index(feature_layer);
    detail::require(fidx >= 0, "temporal branch: cnn has no layer '" + feature_layer + "'");
    const std::vector<int>& fshape = b.cnn.shapes()[static_cast<std::size_t>(fidx) + 1];
    detail::require(fshape.size() == 1, "temporal branch: feature layer must produce a flat vector");
    b.lstm = init_lstm_weights(hidden, fshape[0], seed, prefix);
    return b;
}

struct BranchTrace {
    std::vector<Model::Trace> frame_traces;  // populated only when tracking the CNN
    std::vector<Tensor> feats;
    LstmTrace lstm_trace;
    Tensor m_final;
};

/// Embeds a precomputed feature sequence; use when the CNN is frozen.
inline Tensor branch_embed_features(const TemporalBranch& b, const std::vector<Tensor>& feats,
                                    BranchTrace* trace = nullptr) {
    detail::require(!feats.empty(), "temporal branch: empty feature sequence");
    LstmState final = lstm_unroll(feats, b.lstm, trace ? &trace->lstm_trace : nullptr);
    if (trace) {
        trace->feats = feats;
        trace->m_final = final.m;
    }
    return final.m;
}

/// Runs the CNN on every frame and embeds the feature sequence. With
/// `track_cnn` the per-frame traces are kept so gradients can flow back
/// into the CNN (joint end-to-end training).
inline Tensor branch_embed_frames(const TemporalBranch& b, const std::vector<Tensor>& frames,
                                  BranchTrace* trace = nullptr, bool track_cnn = false) {
    detail::require(!frames.empty(), "temporal branch: empty frame sequence");
    const int fidx = b.cnn.layer_index(b.feature_layer);
    detail::require(fidx >= 0, "temporal branch: cnn has no layer '" + b.feature_layer + "'");
    std::vector<Tensor> feats;
    feats.reserve(frames.size());
    if (trace && track_cnn) trace->frame_traces.resize(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        Model::Trace* ft = (trace && track_cnn) ? &trace->frame_traces[t] : nullptr;
        feats.push_back(b.cnn.forward_to(frames[t], fidx, ft));
    }
    return branch_embed_features(b, feats, trace);
}

/// BPTT through the cell and optionally onward through the CNN for every
/// frame. Gradient names are prefixed ("" for a bare branch, "rgb/" etc.
/// inside a fused model): CNN params as <prefix>cnn/<name>, cell weights as
/// <prefix>lstm/W_**.
inline void branch_backward(const TemporalBranch& b, const BranchTrace& trace, const Tensor& grad_m,
                            ParamStore& grads, const std::string& prefix = "",
                            bool through_cnn = false) {
    LstmWeights lgrads(b.lstm.hidden(), b.lstm.input());
    std::vector<Tensor> grad_feats;
    lstm_backward(trace.lstm_trace, b.lstm, grad_m, lgrads, grad_feats);
    for (int i = 0; i < 8; ++i) {
        const Tensor& g = lgrads.by_index(i);
        Tensor& acc = grads.accum(prefix + "lstm/" + LstmWeights::names()[static_cast<std::size_t>(i)],
                                  g.shape());
        for (std::size_t k = 0; k < g.size(); ++k) acc[k] += g[k];
    }
    if (!through_cnn) return;
    detail::require(trace.frame_traces.size() == grad_feats.size(),
                    "branch_backward: trace has no CNN activations; embed with track_cnn=true");
    ParamStore cnn_grads;
    for (std::size_t t = 0; t < grad_feats.size(); ++t)
        b.cnn.backward(trace.frame_traces[t], grad_feats[t], cnn_grads);
    for (std::size_t i = 0; i < cnn_grads.count(); ++i) {
        const Tensor& g = cnn_grads.value(i);
        Tensor& acc = grads.accum(prefix + "cnn/" + cnn_grads.name(i), g.shape());
        for (std::size_t k = 0; k < g.size(); ++k) acc[k] += g[k];
    }
}

inline std::vector<ParamRef> branch_param_refs(TemporalBranch& b, const std::string& prefix = "") {
    std::vector<ParamRef> refs = b.cnn.param_refs(prefix + "cnn/");
    for (int i = 0; i < 8; ++i)
        refs.push_back({prefix + "lstm/" + LstmWeights::names()[static_cast<std::size_t>(i)],
                        &b.lstm.by_index(i)});
    return refs;
}

/// Single-modality sequence classifier: branch embedding followed by a
/// fully connected head on m_T.
struct VideoModel {
    TemporalBranch branch;
    Tensor head_w, head_b;

    int num_classes() const { return head_w.dim(0); }
};

inline VideoModel make_video_model(Model cnn, const std::string& feature_layer, int hidden,
                                   int num_classes, std::uint64_t seed) {
    VideoModel vm;
    vm.branch = make_temporal_branch(std::move(cnn), feature_layer, hidden, seed);
    vm.head_w = Tensor({num_classes, hidden});
    init_uniform_fan(vm.head_w, "head.weight", seed, hidden, num_classes);
    vm.head_b = Tensor({num_classes});
    return vm;
}

struct VideoTrace {
    BranchTrace branch;
    Tensor logits;
};

inline Tensor video_forward_features(const VideoModel& vm, const std::vector<Tensor>& feats,
                                     VideoTrace* trace = nullptr) {
    Tensor m = branch_embed_features(vm.branch, feats, trace ? &trace->branch : nullptr);
    Tensor logits = fc_forward(m, vm.head_w, vm.head_b);
    if (trace) trace->logits = logits;
    return logits;
}

inline Tensor video_forward_frames(const VideoModel& vm, const std::vector<Tensor>& frames,
                                   VideoTrace* trace = nullptr, bool track_cnn = false) {
    Tensor m = branch_embed_frames(vm.branch, frames, trace ? &trace->branch : nullptr, track_cnn);
    Tensor logits = fc_forward(m, vm.head_w, vm.head_b);
    if (trace) trace->logits = logits;
    return logits;
}

inline void video_backward(const VideoModel& vm, const VideoTrace& trace, const Tensor& grad_logits,
                           ParamStore& grads, bool through_cnn = false) {
    Tensor grad_m, gw, gb;
    fc_backward(trace.branch.m_final, vm.head_w, grad_logits, grad_m, gw, gb);
    Tensor& aw = grads.accum("head.weight", vm.head_w.shape());
    for (std::size_t k = 0; k < gw.size(); ++k) aw[k] += gw[k];
    Tensor& ab = grads.accum("head.bias", vm.head_b.shape());
    for (std::size_t k = 0; k < gb.size(); ++k) ab[k] += gb[k];
    branch_backward(vm.branch, trace.branch, grad_m, grads, "", through_cnn);
}

inline std::vector<ParamRef> video_param_refs(VideoModel& vm) {
    std::vector<ParamRef> refs = branch_param_refs(vm.branch, "");
    refs.push_back({"head.weight", &vm.head_w});
    refs.push_back({"head.bias", &vm.head_b});
    return refs;
}

/// Two-branch RGB-D sequence classifier: per-modality temporal embeddings
/// fused by a small fully connected head over their concatenation.
struct FusedVideoModel {
    TemporalBranch rgb;
    TemporalBranch depth;
    Model fusion;
};

inline FusedVideoModel make_fused_video_model(TemporalBranch rgb, TemporalBranch depth, int hidden,
                                              int num_classes, std::uint64_t seed) {
    FusedVideoModel fm;
    fm.rgb = std::move(rgb);
    fm.depth = std::move(depth);
    FusionSpec fs{fm.rgb.hidden(), fm.depth.hidden(), hidden, num_classes};
    fm.fusion = Model(build_fusion_head(fs), seed);
    return fm;
}

struct FusedTrace {
    BranchTrace rgb, depth;
    Model::Trace fusion;
    Tensor logits;
};

inline Tensor fused_forward_features(const FusedVideoModel& fm, const std::vector<Tensor>& rgb_feats,
                                     const std::vector<Tensor>& depth_feats,
                                     FusedTrace* trace = nullptr) {
    Tensor m_rgb = branch_embed_features(fm.rgb, rgb_feats, trace ? &trace->rgb : nullptr);
    Tensor m_depth = branch_embed_features(fm.depth, depth_feats, trace ? &trace->depth : nullptr);
    Tensor logits = fusion_forward(m_rgb, m_depth, fm.fusion, trace ? &trace->fusion : nullptr);
    if (trace) trace->logits = logits;
    return logits;
}

inline Tensor fused_forward_frames(const FusedVideoModel& fm, const std::vector<Tensor>& rgb_frames,
                                   const std::vector<Tensor>& depth_frames, FusedTrace* trace = nullptr,
                                   bool track_cnn = false) {
    detail::require(rgb_frames.size() == depth_frames.size(),
                    "fused model: modality frame counts differ");
    Tensor m_rgb = branch_embed_frames(fm.rgb, rgb_frames, trace ? &trace->rgb : nullptr, track_cnn);
    Tensor m_depth = branch_embed_frames(fm.depth, depth_frames, trace ? &trace->depth : nullptr, track_cnn);
    Tensor logits = fusion_forward(m_rgb, m_depth, fm.fusion, trace ? &trace->fusion : nullptr);
    if (trace) trace->logits = logits;
    return logits;
}

/// Gradient names: fusion/<param>, rgb/lstm/W_**, rgb/cnn/<param>, and the
/// depth/ counterparts.
inline void fused_backward(const FusedVideoModel& fm, const FusedTrace& trace, const Tensor& grad_logits,
                           ParamStore& grads, bool through_branches, bool through_cnn = false) {
    ParamStore fusion_grads;
    Tensor grad_cat = fm.fusion.backward(trace.fusion, grad_logits, fusion_grads);
    for (std::size_t i = 0; i < fusion_grads.count(); ++i) {
        const Tensor& g = fusion_grads.value(i);
        Tensor& acc = grads.accum("fusion/" + fusion_grads.name(i), g.shape());
        for (std::size_t k = 0; k < g.size(); ++k) acc[k] += g[k];
    }
    if (!through_branches) return;
    const int rw = fm.rgb.hidden(), dw = fm.depth.hidden();
    Tensor grad_m_rgb({rw}), grad_m_depth({dw});
    for (int k = 0; k < rw; ++k) grad_m_rgb[static_cast<std::size_t>(k)] = grad_cat[static_cast<std::size_t>(k)];
    for (int k = 0; k < dw; ++k)
        grad_m_depth[static_cast<std::size_t>(k)] = grad_cat[static_cast<std::size_t>(rw + k)];
    branch_backward(fm.rgb, trace.rgb, grad_m_rgb, grads, "rgb/", through_cnn);
    branch_backward(fm.depth, trace.depth, grad_m_depth, grads, "depth/", through_cnn);
}

inline std::vector<ParamRef> fused_param_refs(FusedVideoModel& fm) {
    std::vector<ParamRef> refs = branch_param_refs(fm.rgb, "rgb/");
    std::vector<ParamRef> d = branch_param_refs(fm.depth, "depth/");
    refs.insert(refs.end(), d.begin(), d.end());
    std::vector<ParamRef> f = fm.fusion.param_refs("fusion/");
    refs.insert(refs.end(), f.begin(), f.end());
    return refs;
}

}  // namespace dscnn
