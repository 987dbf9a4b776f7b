#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>

#include "dscnn/tensor.hpp"

namespace dscnn {

/// Deterministic stream generator (splitmix64); every sample derives its
/// own stream from (seed, class, index), so corpora are reproducible
/// file-for-file and samples are independent of generation order.
struct SplitMix {
    std::uint64_t state;

    explicit SplitMix(std::uint64_t s) : state(s) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1) with 24-bit resolution.
    float unit() { return static_cast<float>((next() >> 40) * (1.0 / 16777216.0)); }

    float range(float lo, float hi) { return lo + (hi - lo) * unit(); }

    int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    SplitMix s(seed ^ (a * 0x9E3779B97F4A7C15ull) ^ (b * 0xD1B54A32D192ED03ull));
    return s.next();
}

struct SyntheticConfig {
    int width = 32;
    int height = 32;
    int num_classes = 10;
    double sensor_range = 5.5;  // scene units; <= 0 means unlimited range
    double z_max = 10.0;        // depth normalization: raw = z / z_max
    int video_frames = 45;      // raw frames per video before keyframe selection
};

/// One rendered view: RGB, normalized depth, and the missing-depth mask
/// (1 where the sensor range was exceeded; those sites must be shown as
/// exact black after jet encoding).
struct SceneFrame {
    Tensor rgb;        // 3 x H x W in [0,1]
    Tensor depth_raw;  // 1 x H x W in (0,1]
    Tensor missing;    // 1 x H x W, 1.0 = missing
};

inline std::vector<std::string> synthetic_taxonomy(int num_classes) {
    std::vector<std::string> names;
    for (int k = 0; k < num_classes; ++k) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "scene%02d", k);
        names.emplace_back(buf);
    }
    return names;
}

namespace detail {

using Color = std::array<float, 3>;

enum class PatKind { solid, hstripes, vstripes, checker };

struct Pattern {
    PatKind kind = PatKind::solid;
    int period = 3;
    Color a{0.5f, 0.5f, 0.5f};
    Color b{0.5f, 0.5f, 0.5f};
};

inline Color pattern_color(const Pattern& p, int sy, int sx) {
    switch (p.kind) {
        case PatKind::solid: return p.a;
        case PatKind::hstripes: return (sy / p.period) % 2 == 0 ? p.a : p.b;
        case PatKind::vstripes: return (sx / p.period) % 2 == 0 ? p.a : p.b;
        case PatKind::checker: return ((sy / p.period) + (sx / p.period)) % 2 == 0 ? p.a : p.b;
    }
    return p.a;
}

enum class FarGeom { flat, columns, bands };

/// The layout grammar of one class. Classes come in twin pairs with
/// controlled blind spots: "geometry twins" share every albedo and differ
/// only in far-structure depth (invisible to RGB under this renderer, and
/// beyond sensor range in early video frames); "albedo twins" share all
/// geometry and differ only in a surface pattern (invisible to depth).
struct ClassStyle {
    // far structure (upper band)
    Pattern far_albedo;
    FarGeom far_geom = FarGeom::flat;
    float far_z_near = 6.6f;  // flat/columns/bands near level
    float far_z_far = 7.6f;   // secondary level for columns/bands
    int far_geom_period = 5;  // columns: scene-x period; bands: row period
    // near boxes (middle band)
    int box_count = 2;
    std::array<float, 4> box_x_frac{};  // centers as fractions of scene width
    float box_z_base = 3.4f;
    Pattern box_albedo;
    int box_height_px = 13;  // at the 32-row reference scale
    int box_width_px = 7;
};

inline ClassStyle class_style(int class_id, int num_classes) {
    if (class_id < 0 || class_id >= num_classes)
        throw std::invalid_argument("synthetic: unknown class " + std::to_string(class_id));
    const int pair = (class_id / 2) % 5;
    const int twin = class_id % 2;
    const float z_shift = 0.05f * static_cast<float>(class_id / 10);  // keeps classes >9 distinct

    ClassStyle s;
    switch (pair) {
        case 0:
            // Geometry twins: identical warm-striped far wall; twin 1's wall
            // carries deep columns the RGB image cannot show.
            s.far_albedo = {PatKind::vstripes, 4, {0.75f, 0.45f, 0.30f}, {0.55f, 0.30f, 0.20f}};
            s.far_geom = twin == 0 ? FarGeom::flat : FarGeom::columns;
            s.far_z_near = 6.6f;
            s.far_z_far = 7.6f;
            s.far_geom_period = 5;
            s.box_count = 2;
            s.box_x_frac = {0.22f, 0.65f, 0.0f, 0.0f};
            s.box_z_base = 3.35f;
            s.box_albedo = {PatKind::hstripes, 3, {0.70f, 0.50f, 0.35f}, {0.50f, 0.35f, 0.25f}};
            s.box_height_px = 13;
            s.box_width_px = 7;
            break;
        case 1:
            // Geometry twins: identical blue-checker far wall; twin 0 has
            // horizontal depth bands, twin 1 a flat wall further back.
            s.far_albedo = {PatKind::checker, 4, {0.30f, 0.50f, 0.70f}, {0.20f, 0.35f, 0.50f}};
            s.far_geom = twin == 0 ? FarGeom::bands : FarGeom::flat;
            s.far_z_near = 6.5f;
            s.far_z_far = 7.5f;
            if (twin == 1) s.far_z_near = 7.2f;
            s.far_geom_period = 3;
            s.box_count = 3;
            s.box_x_frac = {0.15f, 0.48f, 0.80f, 0.0f};
            s.box_z_base = 3.50f;
            s.box_albedo = {PatKind::checker, 3, {0.35f, 0.55f, 0.75f}, {0.25f, 0.40f, 0.55f}};
            s.box_height_px = 11;
            s.box_width_px = 6;
            break;
        case 2:
            // Albedo twins: identical geometry; the far wall is striped for
            // twin 0 and checkered for twin 1 (invisible to depth).
            s.far_albedo = twin == 0
                               ? Pattern{PatKind::vstripes, 3, {0.80f, 0.75f, 0.30f}, {0.50f, 0.45f, 0.15f}}
                               : Pattern{PatKind::checker, 3, {0.80f, 0.75f, 0.30f}, {0.50f, 0.45f, 0.15f}};
            s.far_geom = FarGeom::flat;
            s.far_z_near = 7.0f;
            s.box_count = 2;
            s.box_x_frac = {0.33f, 0.75f, 0.0f, 0.0f};
            s.box_z_base = 3.65f;
            s.box_albedo = {PatKind::solid, 3, {0.75f, 0.70f, 0.40f}, {0.75f, 0.70f, 0.40f}};
            s.box_height_px = 14;
            s.box_width_px = 8;
            break;
        case 3:
            // Albedo twins: identical geometry; near boxes striped
            // horizontally (twin 0) or vertically (twin 1).
            s.far_albedo = {PatKind::solid, 3, {0.45f, 0.60f, 0.45f}, {0.45f, 0.60f, 0.45f}};
            s.far_geom = FarGeom::flat;
            s.far_z_near = 6.8f;
            s.box_count = 3;
            s.box_x_frac = {0.20f, 0.52f, 0.85f, 0.0f};
            s.box_z_base = 3.80f;
            s.box_albedo = twin == 0
                               ? Pattern{PatKind::hstripes, 2, {0.55f, 0.70f, 0.55f}, {0.30f, 0.45f, 0.30f}}
                               : Pattern{PatKind::vstripes, 2, {0.55f, 0.70f, 0.55f}, {0.30f, 0.45f, 0.30f}};
            s.box_height_px = 12;
            s.box_width_px = 7;
            break;
        default:
            // Twins that differ in both modalities: layout, palette and far
            // structure all change.
            if (twin == 0) {
                s.far_albedo = {PatKind::checker, 5, {0.70f, 0.40f, 0.60f}, {0.45f, 0.25f, 0.40f}};
                s.far_geom = FarGeom::columns;
                s.far_z_near = 6.5f;
                s.far_z_far = 7.4f;
                s.far_geom_period = 4;
                s.box_count = 2;
                s.box_x_frac = {0.28f, 0.70f, 0.0f, 0.0f};
                s.box_z_base = 3.30f;
                s.box_albedo = {PatKind::checker, 2, {0.65f, 0.35f, 0.55f}, {0.40f, 0.20f, 0.35f}};
                s.box_height_px = 15;
                s.box_width_px = 8;
            } else {
                s.far_albedo = {PatKind::vstripes, 6, {0.70f, 0.40f, 0.60f}, {0.45f, 0.25f, 0.40f}};
                s.far_geom = FarGeom::flat;
                s.far_z_near = 7.6f;
                s.box_count = 4;
                s.box_x_frac = {0.12f, 0.37f, 0.62f, 0.86f};
                s.box_z_base = 3.45f;
                s.box_albedo = {PatKind::solid, 2, {0.40f, 0.30f, 0.60f}, {0.40f, 0.30f, 0.60f}};
                s.box_height_px = 10;
                s.box_width_px = 6;
            }
            break;
    }
    s.far_z_near += z_shift;
    s.far_z_far += z_shift;
    s.box_z_base += z_shift;
    return s;
}

/// A scene instance: per-pixel albedo and true depth over a canvas wider
/// than the view so the camera can truck horizontally across it.
struct SceneMaps {
    int height = 0, scene_width = 0;
    std::vector<Color> albedo;  // row-major height x scene_width
    std::vector<float> z;

    Color& albedo_at(int y, int x) { return albedo[static_cast<std::size_t>(y) * scene_width + x]; }
    float& z_at(int y, int x) { return z[static_cast<std::size_t>(y) * scene_width + x]; }
    const Color& albedo_at(int y, int x) const {
        return albedo[static_cast<std::size_t>(y) * scene_width + x];
    }
    float z_at(int y, int x) const { return z[static_cast<std::size_t>(y) * scene_width + x]; }
};

constexpr int kTruckPixels = 6;        // horizontal camera travel across a video
constexpr float kDollyDistance = 3.0f; // forward camera travel across a video
constexpr float kBackgroundZ = 9.3f;   // beyond sensor range from every camera pose
constexpr float kFloorZNear = 3.0f;
constexpr float kFloorZFar = 6.2f;

/// Builds the scene. The renderer is orthographic and unshaded: RGB shows
/// albedo only (so depth-only differences stay invisible to RGB) and depth
/// shows geometry only (so albedo-only differences stay invisible to it).
inline SceneMaps build_scene(const SyntheticConfig& cfg, int class_id, SplitMix& rng) {
    const ClassStyle style = class_style(class_id, cfg.num_classes);
    const int h = cfg.height, sw = cfg.width + kTruckPixels;
    SceneMaps maps;
    maps.height = h;
    maps.scene_width = sw;
    maps.albedo.assign(static_cast<std::size_t>(h) * sw, Color{0.0f, 0.0f, 0.0f});
    maps.z.assign(static_cast<std::size_t>(h) * sw, kBackgroundZ);

    // Background: identical neutral curtain for every class.
    const Pattern bg{PatKind::vstripes, 5, {0.30f, 0.32f, 0.36f}, {0.27f, 0.29f, 0.33f}};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < sw; ++x) maps.albedo_at(y, x) = pattern_color(bg, y, x);

    // Far structure: upper band, class-characteristic pattern and depth.
    const int far_rows = (h * 45) / 100;
    const int geom_phase = rng.below(style.far_geom_period);
    const float far_jitter = rng.range(-0.08f, 0.08f);
    for (int y = 0; y < far_rows; ++y) {
        for (int x = 0; x < sw; ++x) {
            maps.albedo_at(y, x) = pattern_color(style.far_albedo, y, x);
            float z = style.far_z_near;
            if (style.far_geom == FarGeom::columns &&
                ((x + geom_phase) / style.far_geom_period) % 2 == 1)
                z = style.far_z_far;
            if (style.far_geom == FarGeom::bands && ((y + geom_phase) / style.far_geom_period) % 2 == 1)
                z = style.far_z_far;
            maps.z_at(y, x) = z + far_jitter;
        }
    }

    // Floor: identical for every class, depth ramping toward the camera.
    const int floor_top = (h * 58) / 100;
    const Pattern floor_pat{PatKind::checker, 4, {0.42f, 0.40f, 0.38f}, {0.38f, 0.36f, 0.34f}};
    for (int y = floor_top; y < h; ++y) {
        const float frac = static_cast<float>(y - floor_top) / std::max(1, h - 1 - floor_top);
        const float z = kFloorZFar + (kFloorZNear - kFloorZFar) * frac;
        for (int x = 0; x < sw; ++x) {
            maps.albedo_at(y, x) = pattern_color(floor_pat, y, x);
            maps.z_at(y, x) = z;
        }
    }

    // Near boxes: stand on the floor, nearest structures in the scene.
    const int ref_h = 32;
    const int box_h = std::max(4, style.box_height_px * h / ref_h);
    const int box_w = std::max(3, style.box_width_px * sw / (ref_h + kTruckPixels));
    const int box_bottom = (h * 88) / 100;
    for (int i = 0; i < style.box_count; ++i) {
        const int cx = static_cast<int>(style.box_x_frac[static_cast<std::size_t>(i)] * sw) +
                       rng.below(5) - 2;
        const int x0 = std::max(0, cx - box_w / 2);
        const int x1 = std::min(sw, x0 + box_w);
        const int y1 = box_bottom + rng.below(3) - 1;
        const int y0 = std::max(0, y1 - box_h);
        const float z = style.box_z_base + 0.30f * static_cast<float>(i) + rng.range(-0.08f, 0.08f);
        for (int y = y0; y < std::min(h, y1); ++y) {
            for (int x = x0; x < x1; ++x) {
                if (z < maps.z_at(y, x)) {
                    maps.z_at(y, x) = z;
                    maps.albedo_at(y, x) = pattern_color(style.box_albedo, y, x);
                }
            }
        }
    }
    return maps;
}

/// Renders the scene from one camera pose: the view window starts at
/// scene column `truck_x` and the camera has advanced `dolly` units, so
/// every depth shrinks by that amount. Depth beyond the sensor range is
/// marked missing.
inline SceneFrame render_view(const SyntheticConfig& cfg, const SceneMaps& maps, int truck_x,
                              float dolly, SplitMix& rng) {
    const int h = cfg.height, w = cfg.width;
    SceneFrame frame{Tensor({3, h, w}), Tensor({1, h, w}), Tensor({1, h, w})};
    const float range = static_cast<float>(cfg.sensor_range);
    const float zmax = static_cast<float>(cfg.z_max);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int sx = truck_x + x;
            const Color& alb = maps.albedo_at(y, sx);
            for (int c = 0; c < 3; ++c) {
                const float v = alb[static_cast<std::size_t>(c)] + rng.range(-0.03f, 0.03f);
                frame.rgb.at(c, y, x) = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
            }
            float z = maps.z_at(y, sx) - dolly + rng.range(-0.03f, 0.03f);
            if (z < 0.04f) z = 0.04f;
            if (range > 0.0f && z > range) {
                frame.missing.at(0, y, x) = 1.0f;
                frame.depth_raw.at(0, y, x) = 1.0f;  // placeholder; masked sites are never read
            } else {
                float raw = z / zmax;
                if (raw > 1.0f) raw = 1.0f;
                if (raw < 1.0f / 255.0f) raw = 1.0f / 255.0f;
                frame.depth_raw.at(0, y, x) = raw;
            }
        }
    }
    return frame;
}

/// 3x3 box blur with clamped borders, applied to RGB only (simulated
/// motion blur; the depth sensor is unaffected).
inline void blur_rgb(Tensor& rgb) {
    const int h = rgb.dim(1), w = rgb.dim(2);
    Tensor src = rgb;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                float acc = 0.0f;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = std::min(h - 1, std::max(0, y + dy));
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = std::min(w - 1, std::max(0, x + dx));
                        acc += src.at(c, yy, xx);
                    }
                }
                rgb.at(c, y, x) = acc / 9.0f;
            }
        }
    }
}

}  // namespace detail

/// A still capture: mid-scene camera pose (structure the videos reveal
/// only gradually is mostly within range here) with per-sample pose jitter.
inline SceneFrame generate_synthetic_image(const SyntheticConfig& cfg, int class_id,
                                           std::uint64_t seed) {
    detail::require(cfg.width >= 16 && cfg.height >= 16, "synthetic: minimum size is 16x16");
    SplitMix rng(seed);
    const detail::SceneMaps maps = detail::build_scene(cfg, class_id, rng);
    const int truck_x = rng.below(detail::kTruckPixels + 1);
    const float dolly = rng.range(2.25f, 2.75f);
    return detail::render_view(cfg, maps, truck_x, dolly, rng);
}

/// A panned capture: the camera trucks across the scene while advancing,
/// so structure beyond the sensor range in frame 0 enters range in later
/// frames — depth videos carry information single depth frames lack. Four
/// of every five frames are motion-blurred; one stays sharp for the
/// keyframe selector to find.
inline std::vector<SceneFrame> generate_synthetic_video(const SyntheticConfig& cfg, int class_id,
                                                        std::uint64_t seed) {
    detail::require(cfg.width >= 16 && cfg.height >= 16, "synthetic: minimum size is 16x16");
    detail::require(cfg.video_frames >= 2, "synthetic: a video needs at least 2 frames");
    SplitMix rng(seed);
    const detail::SceneMaps maps = detail::build_scene(cfg, class_id, rng);
    const int n = cfg.video_frames;

    std::vector<int> sharp_of_segment;
    for (int start = 0; start < n; start += 5) {
        const int len = std::min(5, n - start);
        sharp_of_segment.push_back(start + rng.below(len));
    }

    std::vector<SceneFrame> frames;
    frames.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        const float progress = static_cast<float>(t) / static_cast<float>(n - 1);
        const int truck_x =
            static_cast<int>(std::lround(progress * static_cast<float>(detail::kTruckPixels)));
        const float dolly = progress * detail::kDollyDistance;
        SceneFrame frame = detail::render_view(cfg, maps, truck_x, dolly, rng);
        const bool sharp = sharp_of_segment[static_cast<std::size_t>(t / 5)] == t;
        if (!sharp) detail::blur_rgb(frame.rgb);
        frames.push_back(std::move(frame));
    }
    return frames;
}

}  // namespace dscnn
