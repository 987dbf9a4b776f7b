#pragma once

#include "dscnn/checkpoint.hpp"
#include "dscnn/model.hpp"
#include "dscnn/video.hpp"

namespace dscnn {

/// Checkpoint blob kinds: "cnn" (a plain feed-forward model), "video"
/// (CNN + recurrent cell + head for one modality) and "video_fused"
/// (two branches + fusion head).

struct CnnArtifact {
    Model model;
    std::string modality;                // "rgb" or "depth"
    std::vector<std::string> taxonomy;   // class names, index order
    std::string stage;                   // provenance tag: wsp / scratch / finetune ...
};

inline std::string cnn_blob(const Model& model, const std::string& modality,
                            const std::vector<std::string>& taxonomy, const std::string& stage) {
    nlohmann::json j;
    j["kind"] = "cnn";
    j["modality"] = modality;
    j["taxonomy"] = taxonomy;
    j["stage"] = stage;
    j["spec"] = model.spec().to_json();
    return j.dump();
}

inline void save_cnn_checkpoint(const std::string& path, Model& model, const std::string& modality,
                                const std::vector<std::string>& taxonomy, const std::string& stage) {
    save_checkpoint(path, cnn_blob(model, modality, taxonomy, stage), model.param_refs());
}

inline std::string checkpoint_kind(const CheckpointData& data) {
    return nlohmann::json::parse(data.spec_json).value("kind", "");
}

inline CnnArtifact load_cnn_checkpoint_data(const CheckpointData& data) {
    const nlohmann::json j = nlohmann::json::parse(data.spec_json);
    detail::require(j.value("kind", "") == "cnn",
                    "checkpoint is not a cnn checkpoint (kind '" + j.value("kind", "") + "')");
    CnnArtifact art;
    art.modality = j.value("modality", "");
    art.taxonomy = j.value("taxonomy", std::vector<std::string>{});
    art.stage = j.value("stage", "");
    art.model = Model(ModelSpec::from_json(j.at("spec")), 0);
    std::vector<ParamRef> refs = art.model.param_refs();
    apply_checkpoint(data, refs);
    return art;
}

inline CnnArtifact load_cnn_checkpoint(const std::string& path) {
    return load_cnn_checkpoint_data(load_checkpoint(path));
}

struct VideoArtifact {
    VideoModel model;
    std::string modality;
    std::vector<std::string> taxonomy;
    std::string stage;    // temporal / joint
    int segment_len = 1;  // T the model was trained with
};

inline std::string video_blob(const VideoModel& vm, const std::string& modality,
                              const std::vector<std::string>& taxonomy, const std::string& stage,
                              int segment_len) {
    nlohmann::json j;
    j["kind"] = "video";
    j["modality"] = modality;
    j["taxonomy"] = taxonomy;
    j["stage"] = stage;
    j["segment_len"] = segment_len;
    j["feature_layer"] = vm.branch.feature_layer;
    j["hidden"] = vm.branch.hidden();
    j["cnn_spec"] = vm.branch.cnn.spec().to_json();
    return j.dump();
}

inline void save_video_checkpoint(const std::string& path, VideoModel& vm, const std::string& modality,
                                  const std::vector<std::string>& taxonomy, const std::string& stage,
                                  int segment_len) {
    save_checkpoint(path, video_blob(vm, modality, taxonomy, stage, segment_len),
                    video_param_refs(vm));
}

inline VideoArtifact load_video_checkpoint_data(const CheckpointData& data) {
    const nlohmann::json j = nlohmann::json::parse(data.spec_json);
    detail::require(j.value("kind", "") == "video",
                    "checkpoint is not a video checkpoint (kind '" + j.value("kind", "") + "')");
    VideoArtifact art;
    art.modality = j.value("modality", "");
    art.taxonomy = j.value("taxonomy", std::vector<std::string>{});
    art.stage = j.value("stage", "");
    art.segment_len = j.value("segment_len", 1);
    Model cnn(ModelSpec::from_json(j.at("cnn_spec")), 0);
    const int hidden = j.at("hidden").get<int>();
    const int num_classes = static_cast<int>(art.taxonomy.size());
    art.model = make_video_model(std::move(cnn), j.at("feature_layer").get<std::string>(), hidden,
                                 num_classes, 0);
    std::vector<ParamRef> refs = video_param_refs(art.model);
    apply_checkpoint(data, refs);
    return art;
}

inline VideoArtifact load_video_checkpoint(const std::string& path) {
    return load_video_checkpoint_data(load_checkpoint(path));
}

struct FusedArtifact {
    FusedVideoModel model;
    std::vector<std::string> taxonomy;
    std::string stage;  // fused / joint
    int segment_len = 1;
};

inline std::string fused_blob(const FusedVideoModel& fm, const std::vector<std::string>& taxonomy,
                              const std::string& stage, int segment_len) {
    nlohmann::json j;
    j["kind"] = "video_fused";
    j["taxonomy"] = taxonomy;
    j["stage"] = stage;
    j["segment_len"] = segment_len;
    j["rgb"] = {{"feature_layer", fm.rgb.feature_layer},
                {"hidden", fm.rgb.hidden()},
                {"cnn_spec", fm.rgb.cnn.spec().to_json()}};
    j["depth"] = {{"feature_layer", fm.depth.feature_layer},
                  {"hidden", fm.depth.hidden()},
                  {"cnn_spec", fm.depth.cnn.spec().to_json()}};
    j["fusion_hidden"] = fm.fusion.spec().layers[0].width;
    return j.dump();
}

inline void save_fused_checkpoint(const std::string& path, FusedVideoModel& fm,
                                  const std::vector<std::string>& taxonomy, const std::string& stage,
                                  int segment_len) {
    save_checkpoint(path, fused_blob(fm, taxonomy, stage, segment_len), fused_param_refs(fm));
}

inline FusedArtifact load_fused_checkpoint_data(const CheckpointData& data) {
    const nlohmann::json j = nlohmann::json::parse(data.spec_json);
    detail::require(j.value("kind", "") == "video_fused",
                    "checkpoint is not a fused video checkpoint (kind '" + j.value("kind", "") + "')");
    FusedArtifact art;
    art.taxonomy = j.value("taxonomy", std::vector<std::string>{});
    art.stage = j.value("stage", "");
    art.segment_len = j.value("segment_len", 1);
    const int num_classes = static_cast<int>(art.taxonomy.size());

    auto make_branch = [&](const nlohmann::json& bj, const std::string& prefix) {
        Model cnn(ModelSpec::from_json(bj.at("cnn_spec")), 0);
        return make_temporal_branch(std::move(cnn), bj.at("feature_layer").get<std::string>(),
                                    bj.at("hidden").get<int>(), 0, prefix + "lstm/");
    };
    art.model = make_fused_video_model(make_branch(j.at("rgb"), "rgb/"),
                                       make_branch(j.at("depth"), "depth/"),
                                       j.at("fusion_hidden").get<int>(), num_classes, 0);
    std::vector<ParamRef> refs = fused_param_refs(art.model);
    apply_checkpoint(data, refs);
    return art;
}

inline FusedArtifact load_fused_checkpoint(const std::string& path) {
    return load_fused_checkpoint_data(load_checkpoint(path));
}

}  // namespace dscnn
