#pragma once

#include <iostream>
#include <map>

#include "dscnn/image_io.hpp"
#include "dscnn/manifest.hpp"
#include "dscnn/preprocess.hpp"
#include "dscnn/synthetic.hpp"
#include "dscnn/tensor.hpp"

namespace dscnn {

/// Depth file convention: 8-bit PGM where gray value 0 is reserved for
/// missing depth and valid depths occupy {1..255}/255.
inline Tensor depth_to_pgm(const SceneFrame& frame) {
    const int h = frame.depth_raw.dim(1), w = frame.depth_raw.dim(2);
    Tensor out({1, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (frame.missing.at(0, y, x) > 0.5f) continue;  // stays 0 = missing
            long q = std::lround(static_cast<double>(frame.depth_raw.at(0, y, x)) * 255.0);
            q = std::min(255l, std::max(1l, q));
            out.at(0, y, x) = static_cast<float>(q) / 255.0f;
        }
    }
    return out;
}

/// Inverse of the convention: splits a loaded PGM into depth values and a
/// missing mask.
inline void split_depth_pgm(const Tensor& pgm, Tensor& depth, Tensor& missing) {
    detail::require(pgm.rank() == 3 && pgm.dim(0) == 1,
                    "depth pgm: expected 1xHxW, got " + shape_str(pgm));
    depth = Tensor(pgm.shape());
    missing = Tensor(pgm.shape());
    for (std::size_t i = 0; i < pgm.size(); ++i) {
        if (pgm[i] < 0.5f / 255.0f) {
            missing[i] = 1.0f;
            depth[i] = 1.0f;  // placeholder; masked sites are never read
        } else {
            depth[i] = pgm[i];
        }
    }
}

/// Loads one manifest record as the 3-channel tensor a network consumes:
/// RGB straight from file, depth jet-encoded with missing sites black.
inline Tensor load_record_input(const Manifest& m, const ManifestRecord& rec) {
    const std::string path = m.resolve(rec);
    if (rec.modality == Modality::rgb) return load_ppm(path);
    Tensor depth, missing;
    split_depth_pgm(load_pgm(path), depth, missing);
    return jet_encode(depth, missing);
}

struct StillSample {
    Tensor input;
    int label = 0;
};

struct StillDataset {
    std::vector<StillSample> samples;
    std::vector<std::string> taxonomy;

    int num_classes() const { return static_cast<int>(taxonomy.size()); }

    std::vector<int> class_counts() const {
        std::vector<int> counts(taxonomy.size(), 0);
        for (const StillSample& s : samples) counts[static_cast<std::size_t>(s.label)]++;
        return counts;
    }
};

/// Still-image records (no sequence id) of one modality and role.
inline StillDataset load_still_dataset(const Manifest& m, Modality modality, Role role) {
    StillDataset ds;
    ds.taxonomy = m.taxonomy;
    for (const ManifestRecord& rec : m.records) {
        if (!rec.sequence_id.empty() || rec.modality != modality || rec.role != role) continue;
        ds.samples.push_back({load_record_input(m, rec), m.label_index(rec.label)});
    }
    return ds;
}

/// Expands every image into its g x g patch grid; each patch inherits the
/// image's scene label (weak supervision).
inline StillDataset build_patch_dataset(const StillDataset& stills, int grid, int patch) {
    StillDataset ds;
    ds.taxonomy = stills.taxonomy;
    for (const StillSample& s : stills.samples)
        for (Tensor& p : sample_patch_grid(s.input, grid, patch))
            ds.samples.push_back({std::move(p), s.label});
    return ds;
}

/// One video after keyframe selection: parallel keyframe tensors per
/// available modality (blur is scored on RGB when present and the same
/// frame choice is applied to depth, keeping modalities aligned).
struct Sequence {
    std::string id;
    int label = 0;
    Role role = Role::train;
    std::vector<Tensor> rgb;    // empty when the manifest has no rgb frames
    std::vector<Tensor> depth;  // jet-encoded; empty when absent
};

inline std::vector<Sequence> load_sequences(const Manifest& m, Role role, int keyframe_segment_len = 5) {
    struct Raw {
        int label = 0;
        Role role = Role::train;
        std::map<int, const ManifestRecord*> rgb, depth;
    };
    std::map<std::string, Raw> groups;
    for (const ManifestRecord& rec : m.records) {
        if (rec.sequence_id.empty() || rec.role != role) continue;
        Raw& raw = groups[rec.sequence_id];
        raw.label = m.label_index(rec.label);
        raw.role = rec.role;
        auto& side = rec.modality == Modality::rgb ? raw.rgb : raw.depth;
        if (!side.emplace(rec.frame_index, &rec).second)
            throw std::runtime_error("sequence '" + rec.sequence_id + "' repeats frame " +
                                     std::to_string(rec.frame_index));
    }

    std::vector<Sequence> out;
    for (auto& [id, raw] : groups) {
        if (!raw.rgb.empty() && !raw.depth.empty() && raw.rgb.size() != raw.depth.size())
            throw std::runtime_error("sequence '" + id + "' has unpaired rgb/depth frames");
        Sequence seq;
        seq.id = id;
        seq.label = raw.label;
        seq.role = raw.role;
        std::vector<Tensor> rgb_frames, depth_frames;
        for (const auto& [idx, rec] : raw.rgb) rgb_frames.push_back(load_record_input(m, *rec));
        for (const auto& [idx, rec] : raw.depth) depth_frames.push_back(load_record_input(m, *rec));

        const std::vector<Tensor>& score_frames = rgb_frames.empty() ? depth_frames : rgb_frames;
        std::vector<double> scores;
        scores.reserve(score_frames.size());
        for (const Tensor& f : score_frames) scores.push_back(blur_score(f));
        for (int pick : select_keyframe_indices(scores, keyframe_segment_len)) {
            if (!rgb_frames.empty()) seq.rgb.push_back(rgb_frames[static_cast<std::size_t>(pick)]);
            if (!depth_frames.empty()) seq.depth.push_back(depth_frames[static_cast<std::size_t>(pick)]);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

/// A training/evaluation unit: T aligned keyframes of one sequence.
struct SegmentSample {
    std::vector<Tensor> rgb;
    std::vector<Tensor> depth;
    int label = 0;
    std::string sequence_id;
};

/// Non-overlapping segments of T keyframes from every sequence; sequences
/// shorter than T are skipped with a warning.
inline std::vector<SegmentSample> make_segments(const std::vector<Sequence>& sequences, int t,
                                                std::ostream* warn = &std::cerr) {
    std::vector<SegmentSample> out;
    for (const Sequence& seq : sequences) {
        const int n = static_cast<int>(std::max(seq.rgb.size(), seq.depth.size()));
        const auto ranges = segment_ranges(n, t);
        if (ranges.empty() && warn)
            *warn << "warning: sequence '" << seq.id << "' has " << n << " keyframes, shorter than T="
                  << t << "; skipped\n";
        for (const auto& [start, end] : ranges) {
            SegmentSample seg;
            seg.label = seq.label;
            seg.sequence_id = seq.id;
            for (int i = start; i < end; ++i) {
                if (!seq.rgb.empty()) seg.rgb.push_back(seq.rgb[static_cast<std::size_t>(i)]);
                if (!seq.depth.empty()) seg.depth.push_back(seq.depth[static_cast<std::size_t>(i)]);
            }
            out.push_back(std::move(seg));
        }
    }
    return out;
}

/// Keyframes of the given modality flattened into a still dataset (the
/// frame-level corpus used to pretrain the per-frame CNN of a video model).
inline StillDataset keyframes_as_stills(const std::vector<Sequence>& sequences, Modality modality,
                                        const std::vector<std::string>& taxonomy) {
    StillDataset ds;
    ds.taxonomy = taxonomy;
    for (const Sequence& seq : sequences) {
        const std::vector<Tensor>& frames = modality == Modality::rgb ? seq.rgb : seq.depth;
        for (const Tensor& f : frames) ds.samples.push_back({f, seq.label});
    }
    return ds;
}

}  // namespace dscnn
