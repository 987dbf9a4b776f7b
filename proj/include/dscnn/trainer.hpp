#pragma once

#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dscnn/classifier.hpp"
#include "dscnn/dataset.hpp"
#include "dscnn/metrics.hpp"
#include "dscnn/model.hpp"
#include "dscnn/optimizer.hpp"
#include "dscnn/video.hpp"

namespace dscnn {

inline void log_metric(std::ostream* log, const std::string& name, double value) {
    if (log) *log << metric_line(name, value) << '\n';
}

namespace detail {

inline std::string epoch_tag(const std::string& stage, int epoch) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", epoch);
    return stage + "/epoch" + buf;
}

/// Portable Fisher–Yates permutation (mt19937_64 output is fully specified
/// by the standard, so shuffles reproduce across platforms).
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 gen(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(gen() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

inline std::uint64_t epoch_seed(std::uint64_t seed, const std::string& stage, int epoch) {
    return seed ^ fnv1a64(stage) ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(epoch + 1));
}

}  // namespace detail

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;  // mean class accuracy over the epoch's predictions
};

/// One pass over the samples in seeded-shuffle order: cross-entropy loss,
/// mini-batch gradient averaging, one SGD step per batch.
inline EpochStats train_epoch(Model& model, const std::vector<StillSample>& samples, int num_classes,
                              const TrainingConfig& cfg, SgdOptimizer& opt, std::uint64_t shuffle_seed) {
    detail::require(!samples.empty(), "train: empty dataset");
    std::vector<ParamRef> refs = model.param_refs();
    const std::vector<std::size_t> order = detail::shuffled_indices(samples.size(), shuffle_seed);

    double loss_sum = 0.0;
    std::vector<int> labels, preds;
    labels.reserve(samples.size());
    preds.reserve(samples.size());

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        ParamStore grads;
        for (std::size_t k = start; k < end; ++k) {
            const StillSample& s = samples[order[k]];
            Model::Trace trace;
            Tensor logits = model.forward(s.input, &trace);
            SoftmaxLoss sl = softmax_cross_entropy(logits, s.label);
            loss_sum += sl.loss;
            labels.push_back(s.label);
            preds.push_back(argmax_index(sl.probs));
            model.backward(trace, softmax_cross_entropy_backward(sl.probs, s.label), grads);
        }
        grads.scale_all(1.0f / static_cast<float>(end - start));
        opt.step(refs, grads, cfg);
    }

    EpochStats st;
    st.loss = loss_sum / static_cast<double>(samples.size());
    st.accuracy = mean_class_accuracy(preds, labels, num_classes).mean_class_accuracy;
    return st;
}

/// Trains for the configured number of epochs, emitting per-epoch loss and
/// mean-class-accuracy metric lines under `<stage>/epochNNN/`.
inline void fit_model(Model& model, const StillDataset& ds, const TrainingConfig& cfg,
                      std::ostream* log = nullptr, const std::string& stage = "train") {
    cfg.validate();
    SgdOptimizer opt;
    for (int e = 0; e < cfg.epochs; ++e) {
        EpochStats st = train_epoch(model, ds.samples, ds.num_classes(), cfg, opt,
                                    detail::epoch_seed(cfg.seed, stage, e));
        log_metric(log, detail::epoch_tag(stage, e) + "/loss", st.loss);
        log_metric(log, detail::epoch_tag(stage, e) + "/mean_class_accuracy", st.accuracy);
    }
}

inline EvalReport evaluate_stills(const Model& model, const StillDataset& ds) {
    std::vector<int> labels, preds;
    labels.reserve(ds.samples.size());
    preds.reserve(ds.samples.size());
    for (const StillSample& s : ds.samples) {
        labels.push_back(s.label);
        preds.push_back(argmax_index(model.forward(s.input)));
    }
    return mean_class_accuracy(preds, labels, ds.num_classes());
}

// ---------------------------------------------------------------------------
// Two-step training: weakly supervised patch pretraining, conv transfer,
// full-image fine-tuning.

struct TwoStepModels {
    Model wsp;
    Model dcnn;
};

using StageHook = std::function<void(const std::string& stage, Model& model)>;

inline TwoStepModels run_two_step(const StillDataset& patches, const StillDataset& images,
                                  const ModelSpec& wsp_spec, const ModelSpec& dcnn_spec,
                                  const TrainingConfig& patch_cfg, const TrainingConfig& image_cfg,
                                  std::ostream* log = nullptr, const StageHook& on_stage = {}) {
    detail::require(patches.taxonomy == images.taxonomy,
                    "two-step: class taxonomy mismatch between patch and image datasets");
    TwoStepModels out{Model(wsp_spec, static_cast<std::uint64_t>(patch_cfg.seed)),
                      Model(dcnn_spec, static_cast<std::uint64_t>(image_cfg.seed))};
    fit_model(out.wsp, patches, patch_cfg, log, "wsp");
    if (on_stage) on_stage("wsp", out.wsp);
    transfer_conv_weights(out.wsp, out.dcnn);
    fit_model(out.dcnn, images, image_cfg, log, "finetune");
    if (on_stage) on_stage("finetune", out.dcnn);
    return out;
}

// ---------------------------------------------------------------------------
// Feature extraction (wSVM features, frozen-CNN temporal training).

inline void extract_still_features(const Model& model, const std::string& layer,
                                   const StillDataset& ds, std::vector<Tensor>& feats,
                                   std::vector<int>& labels) {
    feats.clear();
    labels.clear();
    for (const StillSample& s : ds.samples) {
        feats.push_back(model.feature(s.input, layer));
        labels.push_back(s.label);
    }
}

/// Class-weighted linear classifier over a named feature layer of a trained
/// network; weights follow w_k = (min_i N_i / N_k)^p.
inline LinearModel fit_wsvm(const Model& model, const std::string& layer, const StillDataset& train,
                            double power, const LinearTrainConfig& cfg = {}) {
    std::vector<Tensor> feats;
    std::vector<int> labels;
    extract_still_features(model, layer, train, feats, labels);
    const std::vector<double> weights = compute_class_weights(train.class_counts(), power);
    return train_weighted_linear(feats, labels, weights, train.num_classes(), cfg);
}

inline EvalReport evaluate_linear(const Model& model, const std::string& layer, const LinearModel& lm,
                                  const StillDataset& test) {
    std::vector<int> labels, preds;
    for (const StillSample& s : test.samples) {
        labels.push_back(s.label);
        preds.push_back(lm.predict(model.feature(s.input, layer)));
    }
    return mean_class_accuracy(preds, labels, test.num_classes());
}

// ---------------------------------------------------------------------------
// Temporal training (stage 2): recurrent embedding over per-frame features
// from a frozen CNN, so features are computed once up front.

struct FeatureSequenceSet {
    std::vector<std::vector<Tensor>> sequences;
    std::vector<int> labels;
};

inline const std::vector<Tensor>& segment_frames(const SegmentSample& seg, Modality modality) {
    const std::vector<Tensor>& frames = modality == Modality::rgb ? seg.rgb : seg.depth;
    detail::require(!frames.empty(), "segment '" + seg.sequence_id + "' has no " +
                                         modality_name(modality) + " frames");
    return frames;
}

inline FeatureSequenceSet extract_segment_features(const Model& cnn, const std::string& layer,
                                                   const std::vector<SegmentSample>& segments,
                                                   Modality modality) {
    FeatureSequenceSet out;
    for (const SegmentSample& seg : segments) {
        std::vector<Tensor> feats;
        for (const Tensor& f : segment_frames(seg, modality)) feats.push_back(cnn.feature(f, layer));
        out.sequences.push_back(std::move(feats));
        out.labels.push_back(seg.label);
    }
    return out;
}

inline EpochStats train_temporal_epoch(VideoModel& vm, const FeatureSequenceSet& data,
                                       const TrainingConfig& cfg, SgdOptimizer& opt,
                                       std::uint64_t shuffle_seed) {
    detail::require(!data.sequences.empty(), "temporal training: empty feature set");
    std::vector<ParamRef> refs = video_param_refs(vm);
    const std::vector<std::size_t> order = detail::shuffled_indices(data.sequences.size(), shuffle_seed);

    double loss_sum = 0.0;
    std::vector<int> labels, preds;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        ParamStore grads;
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t i = order[k];
            VideoTrace trace;
            Tensor logits = video_forward_features(vm, data.sequences[i], &trace);
            SoftmaxLoss sl = softmax_cross_entropy(logits, data.labels[i]);
            loss_sum += sl.loss;
            labels.push_back(data.labels[i]);
            preds.push_back(argmax_index(sl.probs));
            video_backward(vm, trace, softmax_cross_entropy_backward(sl.probs, data.labels[i]), grads,
                           /*through_cnn=*/false);
        }
        grads.scale_all(1.0f / static_cast<float>(end - start));
        opt.step(refs, grads, cfg);
    }

    EpochStats st;
    st.loss = loss_sum / static_cast<double>(data.sequences.size());
    st.accuracy = mean_class_accuracy(preds, labels, vm.num_classes()).mean_class_accuracy;
    return st;
}

/// Fits the recurrent cell and head on precomputed features; the CNN is
/// untouched (its parameters receive no gradients here).
inline void fit_temporal(VideoModel& vm, const FeatureSequenceSet& data, const TrainingConfig& cfg,
                         std::ostream* log = nullptr, const std::string& stage = "temporal") {
    cfg.validate();
    SgdOptimizer opt;
    for (int e = 0; e < cfg.epochs; ++e) {
        EpochStats st = train_temporal_epoch(vm, data, cfg, opt, detail::epoch_seed(cfg.seed, stage, e));
        log_metric(log, detail::epoch_tag(stage, e) + "/loss", st.loss);
        log_metric(log, detail::epoch_tag(stage, e) + "/mean_class_accuracy", st.accuracy);
    }
}

// ---------------------------------------------------------------------------
// Joint end-to-end training: gradients flow through the head, the recurrent
// cell and every per-frame CNN application.

inline EpochStats train_video_joint_epoch(VideoModel& vm, const std::vector<SegmentSample>& segments,
                                          Modality modality, const TrainingConfig& cfg,
                                          SgdOptimizer& opt, std::uint64_t shuffle_seed) {
    detail::require(!segments.empty(), "joint training: empty segment set");
    std::vector<ParamRef> refs = video_param_refs(vm);
    const std::vector<std::size_t> order = detail::shuffled_indices(segments.size(), shuffle_seed);

    double loss_sum = 0.0;
    std::vector<int> labels, preds;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        ParamStore grads;
        for (std::size_t k = start; k < end; ++k) {
            const SegmentSample& seg = segments[order[k]];
            VideoTrace trace;
            Tensor logits = video_forward_frames(vm, segment_frames(seg, modality), &trace,
                                                 /*track_cnn=*/true);
            SoftmaxLoss sl = softmax_cross_entropy(logits, seg.label);
            loss_sum += sl.loss;
            labels.push_back(seg.label);
            preds.push_back(argmax_index(sl.probs));
            video_backward(vm, trace, softmax_cross_entropy_backward(sl.probs, seg.label), grads,
                           /*through_cnn=*/true);
        }
        grads.scale_all(1.0f / static_cast<float>(end - start));
        opt.step(refs, grads, cfg);
    }

    EpochStats st;
    st.loss = loss_sum / static_cast<double>(segments.size());
    st.accuracy = mean_class_accuracy(preds, labels, vm.num_classes()).mean_class_accuracy;
    return st;
}

inline void fit_video_joint(VideoModel& vm, const std::vector<SegmentSample>& segments,
                            Modality modality, const TrainingConfig& cfg, std::ostream* log = nullptr,
                            const std::string& stage = "joint") {
    cfg.validate();
    SgdOptimizer opt;
    for (int e = 0; e < cfg.epochs; ++e) {
        EpochStats st = train_video_joint_epoch(vm, segments, modality, cfg, opt,
                                                detail::epoch_seed(cfg.seed, stage, e));
        log_metric(log, detail::epoch_tag(stage, e) + "/loss", st.loss);
        log_metric(log, detail::epoch_tag(stage, e) + "/mean_class_accuracy", st.accuracy);
    }
}

// ---------------------------------------------------------------------------
// Fused model training.

/// Concatenated (rgb, depth) temporal embeddings of every segment as a flat
/// dataset — the training set for the fusion head while both branches are
/// frozen.
inline StillDataset fused_embedding_dataset(const FusedVideoModel& fm,
                                            const std::vector<SegmentSample>& segments,
                                            const std::vector<std::string>& taxonomy) {
    StillDataset ds;
    ds.taxonomy = taxonomy;
    for (const SegmentSample& seg : segments) {
        Tensor m_rgb = branch_embed_frames(fm.rgb, segment_frames(seg, Modality::rgb));
        Tensor m_depth = branch_embed_frames(fm.depth, segment_frames(seg, Modality::depth));
        ds.samples.push_back({concat(m_rgb, m_depth), seg.label});
    }
    return ds;
}

inline EpochStats train_fused_joint_epoch(FusedVideoModel& fm, const std::vector<SegmentSample>& segments,
                                          const TrainingConfig& cfg, SgdOptimizer& opt,
                                          std::uint64_t shuffle_seed) {
    detail::require(!segments.empty(), "fused training: empty segment set");
    std::vector<ParamRef> refs = fused_param_refs(fm);
    const std::vector<std::size_t> order = detail::shuffled_indices(segments.size(), shuffle_seed);
    const int num_classes = fm.fusion.spec().num_classes;

    double loss_sum = 0.0;
    std::vector<int> labels, preds;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        ParamStore grads;
        for (std::size_t k = start; k < end; ++k) {
            const SegmentSample& seg = segments[order[k]];
            FusedTrace trace;
            Tensor logits = fused_forward_frames(fm, segment_frames(seg, Modality::rgb),
                                                 segment_frames(seg, Modality::depth), &trace,
                                                 /*track_cnn=*/true);
            SoftmaxLoss sl = softmax_cross_entropy(logits, seg.label);
            loss_sum += sl.loss;
            labels.push_back(seg.label);
            preds.push_back(argmax_index(sl.probs));
            fused_backward(fm, trace, softmax_cross_entropy_backward(sl.probs, seg.label), grads,
                           /*through_branches=*/true, /*through_cnn=*/true);
        }
        grads.scale_all(1.0f / static_cast<float>(end - start));
        opt.step(refs, grads, cfg);
    }

    EpochStats st;
    st.loss = loss_sum / static_cast<double>(segments.size());
    st.accuracy = mean_class_accuracy(preds, labels, num_classes).mean_class_accuracy;
    return st;
}

inline void fit_fused_joint(FusedVideoModel& fm, const std::vector<SegmentSample>& segments,
                            const TrainingConfig& cfg, std::ostream* log = nullptr,
                            const std::string& stage = "joint") {
    cfg.validate();
    SgdOptimizer opt;
    for (int e = 0; e < cfg.epochs; ++e) {
        EpochStats st = train_fused_joint_epoch(fm, segments, cfg, opt,
                                                detail::epoch_seed(cfg.seed, stage, e));
        log_metric(log, detail::epoch_tag(stage, e) + "/loss", st.loss);
        log_metric(log, detail::epoch_tag(stage, e) + "/mean_class_accuracy", st.accuracy);
    }
}

// ---------------------------------------------------------------------------
// Video evaluation: recurrent embedding, frame-probability averaging (AVE)
// and the fused model, all at segment granularity.

inline EvalReport evaluate_video(const VideoModel& vm, const std::vector<SegmentSample>& segments,
                                 Modality modality) {
    std::vector<int> labels, preds;
    for (const SegmentSample& seg : segments) {
        labels.push_back(seg.label);
        preds.push_back(argmax_index(video_forward_frames(vm, segment_frames(seg, modality))));
    }
    return mean_class_accuracy(preds, labels, vm.num_classes());
}

inline EvalReport evaluate_video_features(const VideoModel& vm, const FeatureSequenceSet& data) {
    std::vector<int> preds;
    for (const std::vector<Tensor>& seq : data.sequences)
        preds.push_back(argmax_index(video_forward_features(vm, seq)));
    return mean_class_accuracy(preds, data.labels, vm.num_classes());
}

/// Non-learned temporal baseline: the per-frame class posteriors of a still
/// classifier averaged over the segment.
inline EvalReport evaluate_ave(const Model& cnn, const std::vector<SegmentSample>& segments,
                               Modality modality) {
    std::vector<int> labels, preds;
    for (const SegmentSample& seg : segments) {
        std::vector<Tensor> probs;
        for (const Tensor& f : segment_frames(seg, modality)) probs.push_back(softmax(cnn.forward(f)));
        labels.push_back(seg.label);
        preds.push_back(argmax_index(average_predictions(probs)));
    }
    return mean_class_accuracy(preds, labels, cnn.spec().num_classes);
}

inline EvalReport evaluate_fused(const FusedVideoModel& fm, const std::vector<SegmentSample>& segments) {
    std::vector<int> labels, preds;
    for (const SegmentSample& seg : segments) {
        labels.push_back(seg.label);
        preds.push_back(argmax_index(fused_forward_frames(fm, segment_frames(seg, Modality::rgb),
                                                          segment_frames(seg, Modality::depth))));
    }
    return mean_class_accuracy(preds, labels, fm.fusion.spec().num_classes);
}

// ---------------------------------------------------------------------------
// Three-step training: per-modality two-step, temporal embedding on frozen
// features, joint end-to-end fine-tuning with the fusion head.

struct ThreeStepConfig {
    TrainingConfig patch_cfg;        // stage 1, patch pretraining
    TrainingConfig frame_cfg;        // stage 1, per-frame fine-tuning
    TrainingConfig temporal_cfg;     // stage 2, recurrent cell + head
    TrainingConfig fusion_head_cfg;  // stage 3 warm-up of the fusion head (branches frozen)
    TrainingConfig joint_cfg;        // stage 3, end-to-end
    bool rgb_use_patches = false;    // RGB branch may skip patch pretraining
    bool run_joint = true;           // stage 3 on/off
    int segment_len = 9;             // T
    int lstm_hidden = 32;
    int fusion_hidden = 32;
    int patch_grid = 3;
    int patch_size = 15;
    double scale = 0.125;
    int fc_width = 0;
    std::string feature_layer = "fc5";
};

struct ThreeStepResult {
    VideoModel rgb;        // after stage 2
    VideoModel depth;      // after stage 2
    FusedVideoModel fused; // after stage 3 (head warm-up only when run_joint is off)
    std::vector<std::string> taxonomy;
};

/// Stage 1 for one modality: keyframes of the training sequences as stills,
/// optionally preceded by weakly supervised patch pretraining.
inline Model train_frame_cnn(const std::vector<Sequence>& train, Modality modality,
                             const std::vector<std::string>& taxonomy, const ThreeStepConfig& cfg,
                             bool use_patches, std::ostream* log, const std::string& stage_prefix,
                             const StageHook& on_stage = {}) {
    StillDataset frames = keyframes_as_stills(train, modality, taxonomy);
    detail::require(!frames.samples.empty(),
                    "three-step: no " + modality_name(modality) + " keyframes in the training sequences");
    const std::vector<int>& in_shape = frames.samples[0].input.shape();
    ModelSpec dcnn_spec = build_dcnn(in_shape, frames.num_classes(), cfg.scale, cfg.fc_width);

    TrainingConfig patch_cfg = cfg.patch_cfg;
    if (!use_patches) patch_cfg.epochs = 0;
    StillDataset patches = patch_cfg.epochs > 0
                               ? build_patch_dataset(frames, cfg.patch_grid, cfg.patch_size)
                               : StillDataset{{}, taxonomy};
    if (patch_cfg.epochs > 0) {
        ModelSpec wsp_spec = build_wsp_cnn({in_shape[0], cfg.patch_size, cfg.patch_size},
                                           frames.num_classes(), cfg.scale, cfg.fc_width);
        StageHook hook;
        if (on_stage)
            hook = [&](const std::string& s, Model& m) { on_stage(stage_prefix + "/" + s, m); };
        return run_two_step(patches, frames, wsp_spec, dcnn_spec, patch_cfg, cfg.frame_cfg, log, hook)
            .dcnn;
    }
    Model scratch(dcnn_spec, static_cast<std::uint64_t>(cfg.frame_cfg.seed));
    fit_model(scratch, frames, cfg.frame_cfg, log, stage_prefix + "/scratch");
    if (on_stage) on_stage(stage_prefix + "/scratch", scratch);
    return scratch;
}

inline ThreeStepResult run_three_step(const std::vector<Sequence>& train,
                                      const std::vector<std::string>& taxonomy,
                                      const ThreeStepConfig& cfg, std::ostream* log = nullptr,
                                      const StageHook& on_stage = {}) {
    detail::require(!train.empty(), "three-step: no training sequences");
    const int num_classes = static_cast<int>(taxonomy.size());
    const std::vector<SegmentSample> segments = make_segments(train, cfg.segment_len);
    detail::require(!segments.empty(), "three-step: no training sequence reaches T=" +
                                           std::to_string(cfg.segment_len) + " keyframes");

    ThreeStepResult out;
    out.taxonomy = taxonomy;
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.temporal_cfg.seed);

    for (Modality m : {Modality::rgb, Modality::depth}) {
        const bool use_patches = m == Modality::depth || cfg.rgb_use_patches;
        Model cnn = train_frame_cnn(train, m, taxonomy, cfg, use_patches, log, modality_name(m), on_stage);
        FeatureSequenceSet feats = extract_segment_features(cnn, cfg.feature_layer, segments, m);
        VideoModel vm = make_video_model(std::move(cnn), cfg.feature_layer, cfg.lstm_hidden,
                                         num_classes, seed);
        fit_temporal(vm, feats, cfg.temporal_cfg, log, modality_name(m) + "/temporal");
        (m == Modality::rgb ? out.rgb : out.depth) = std::move(vm);
    }

    TemporalBranch rgb_branch = out.rgb.branch;
    TemporalBranch depth_branch = out.depth.branch;
    out.fused = make_fused_video_model(std::move(rgb_branch), std::move(depth_branch),
                                       cfg.fusion_hidden, num_classes, seed);
    StillDataset embeddings = fused_embedding_dataset(out.fused, segments, taxonomy);
    fit_model(out.fused.fusion, embeddings, cfg.fusion_head_cfg, log, "fusion");
    if (cfg.run_joint) fit_fused_joint(out.fused, segments, cfg.joint_cfg, log, "joint");
    return out;
}

}  // namespace dscnn
