#pragma once

#include <cmath>

#include "dscnn/tensor.hpp"

namespace dscnn {

namespace detail {
inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }
}  // namespace detail

/// Jet pseudo-color for a single depth value in [0,1]:
///   r = clamp01(1.5 - |4v - 3|), g = clamp01(1.5 - |4v - 2|),
///   b = clamp01(1.5 - |4v - 1|).
inline void jet_color(float v, float& r, float& g, float& b) {
    r = detail::clamp01(1.5f - std::fabs(4.0f * v - 3.0f));
    g = detail::clamp01(1.5f - std::fabs(4.0f * v - 2.0f));
    b = detail::clamp01(1.5f - std::fabs(4.0f * v - 1.0f));
}

/// Encodes a 1xHxW depth map to a 3-channel jet image. `missing` marks
/// sensor dropouts (any value > 0.5 means missing); those pixels become
/// exact black. Non-missing values outside [0,1] are an error.
inline Tensor jet_encode(const Tensor& depth, const Tensor& missing) {
    detail::require(depth.rank() == 3 && depth.dim(0) == 1,
                    "jet_encode: depth must be 1xHxW, got " + shape_str(depth));
    detail::require(missing.same_shape(depth), "jet_encode: mask shape " + shape_str(missing) +
                                                   " does not match depth " + shape_str(depth));
    const int h = depth.dim(1), w = depth.dim(2);
    Tensor out({3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (missing.at(0, y, x) > 0.5f) continue;  // stays (0,0,0)
            const float v = depth.at(0, y, x);
            if (v < 0.0f || v > 1.0f)
                throw std::invalid_argument("jet_encode: depth value " + std::to_string(v) + " at (" +
                                            std::to_string(y) + "," + std::to_string(x) +
                                            ") outside [0,1] and not marked missing");
            jet_color(v, out.at(0, y, x), out.at(1, y, x), out.at(2, y, x));
        }
    }
    return out;
}

inline Tensor jet_encode(const Tensor& depth) { return jet_encode(depth, Tensor(depth.shape())); }

/// Sharpness proxy: mean absolute horizontal forward difference plus mean
/// absolute vertical forward difference, each averaged over every site
/// where it exists (larger = less blurry; constant image scores 0).
inline double blur_score(const Tensor& img) {
    detail::require(img.rank() == 3, "blur_score: image must be CxHxW, got " + shape_str(img));
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    detail::require(h >= 2 && w >= 2, "blur_score: degenerate image " + shape_str(img));
    double hsum = 0.0, vsum = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            const float* row = &img.at(ch, y, 0);
            for (int x = 0; x + 1 < w; ++x) hsum += std::fabs(static_cast<double>(row[x + 1]) - row[x]);
        }
        for (int y = 0; y + 1 < h; ++y) {
            const float* row = &img.at(ch, y, 0);
            const float* next = &img.at(ch, y + 1, 0);
            for (int x = 0; x < w; ++x) vsum += std::fabs(static_cast<double>(next[x]) - row[x]);
        }
    }
    const double hmean = hsum / (static_cast<double>(c) * h * (w - 1));
    const double vmean = vsum / (static_cast<double>(c) * (h - 1) * w);
    return hmean + vmean;
}

/// Picks the sharpest frame from every consecutive segment of
/// `segment_len` scores (last segment may be short; earliest wins ties).
/// Returns indices into the input order; output length is ceil(n/len).
inline std::vector<int> select_keyframe_indices(const std::vector<double>& scores, int segment_len = 5) {
    detail::require(!scores.empty(), "select_keyframes: empty frame list");
    detail::require(segment_len >= 1, "select_keyframes: segment length must be >= 1");
    std::vector<int> picks;
    const int n = static_cast<int>(scores.size());
    for (int start = 0; start < n; start += segment_len) {
        const int end = std::min(n, start + segment_len);
        int best = start;
        for (int i = start + 1; i < end; ++i)
            if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;
        picks.push_back(best);
    }
    return picks;
}

inline std::vector<Tensor> select_keyframes(const std::vector<Tensor>& frames, int segment_len = 5) {
    std::vector<double> scores;
    scores.reserve(frames.size());
    for (const Tensor& f : frames) scores.push_back(blur_score(f));
    std::vector<Tensor> out;
    for (int i : select_keyframe_indices(scores, segment_len))
        out.push_back(frames[static_cast<std::size_t>(i)]);
    return out;
}

/// Non-overlapping windows of exactly T keyframes (stride T); a trailing
/// remainder shorter than T is dropped. Fewer than T keyframes in total
/// yields an empty list (callers should warn and skip the sample).
inline std::vector<std::pair<int, int>> segment_ranges(int n_keyframes, int t) {
    detail::require(t >= 1, "segment_sequence: T must be >= 1");
    std::vector<std::pair<int, int>> out;
    for (int start = 0; start + t <= n_keyframes; start += t) out.emplace_back(start, start + t);
    return out;
}

/// Top-left corners of a g x g patch grid over an H-row or W-column axis:
/// round(i*(axis-s)/(g-1)); a 1x1 grid centers the patch.
inline std::vector<int> patch_grid_corners(int axis, int patch, int grid) {
    detail::require(patch >= 1 && patch <= axis,
                    "patch grid: patch size " + std::to_string(patch) + " exceeds axis " + std::to_string(axis));
    detail::require(grid >= 1, "patch grid: grid must be >= 1");
    std::vector<int> corners;
    if (grid == 1) {
        corners.push_back(static_cast<int>(std::lround((axis - patch) / 2.0)));
        return corners;
    }
    for (int i = 0; i < grid; ++i)
        corners.push_back(static_cast<int>(
            std::lround(static_cast<double>(i) * (axis - patch) / (grid - 1))));
    return corners;
}

/// Cuts a g x g grid of s x s patches; every patch inherits the source
/// image's label (the weak-supervision rule), so only tensors are returned.
inline std::vector<Tensor> sample_patch_grid(const Tensor& image, int grid, int patch) {
    detail::require(image.rank() == 3, "patch grid: image must be CxHxW, got " + shape_str(image));
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    detail::require(patch <= h && patch <= w,
                    "patch grid: patch " + std::to_string(patch) + " exceeds image " + shape_str(image));
    const std::vector<int> ys = patch_grid_corners(h, patch, grid);
    const std::vector<int> xs = patch_grid_corners(w, patch, grid);
    std::vector<Tensor> patches;
    patches.reserve(static_cast<std::size_t>(grid) * grid);
    for (int gy : ys) {
        for (int gx : xs) {
            Tensor p({c, patch, patch});
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < patch; ++y)
                    std::copy(&image.at(ch, gy + y, gx), &image.at(ch, gy + y, gx) + patch,
                              &p.at(ch, y, 0));
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

}  // namespace dscnn
