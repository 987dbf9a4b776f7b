#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dscnn/image_io.hpp"
#include "dscnn/metrics.hpp"
#include "dscnn/model.hpp"

namespace dscnn {

/// Per-filter fraction of (image, spatial site) pairs whose post-relu
/// response is strictly positive.
struct ActivationProfile {
    std::string layer_name;
    std::string dataset_id;
    std::vector<double> rates;
    int sample_count = 0;
};

/// Probes a conv layer (which must be directly followed by relu) across a
/// dataset. Counting is exact-integer, so the profile is identical no
/// matter how the dataset is sharded. `dataset_id` is a free-form label
/// recorded in the profile for provenance.
inline ActivationProfile activation_rate(const Model& model, const std::string& layer_name,
                                         const std::vector<Tensor>& images,
                                         const std::string& dataset_id = "") {
    const int idx = model.layer_index(layer_name);
    if (idx < 0) {
        std::string names;
        for (const std::string& n : model.layer_names()) names += " " + n;
        throw std::invalid_argument("unknown layer '" + layer_name + "'; model layers:" + names);
    }
    const LayerSpec& layer = model.spec().layers[static_cast<std::size_t>(idx)];
    detail::require(layer.kind == LayerKind::conv,
                    "activation_rate: layer '" + layer_name + "' is not a conv layer");
    detail::require(idx + 1 < static_cast<int>(model.spec().layers.size()) &&
                        model.spec().layers[static_cast<std::size_t>(idx) + 1].kind == LayerKind::relu,
                    "activation_rate: layer '" + layer_name + "' is not followed by relu");
    detail::require(!images.empty(), "activation_rate: empty dataset");

    const int filters = layer.out_channels;
    std::vector<long long> positive(static_cast<std::size_t>(filters), 0);
    long long sites_per_filter = 0;
    for (const Tensor& img : images) {
        const Tensor act = model.forward_to(img, idx + 1);
        const int h = act.dim(1), w = act.dim(2);
        sites_per_filter += static_cast<long long>(h) * w;
        for (int f = 0; f < filters; ++f) {
            const float* plane = &act.at(f, 0, 0);
            for (int i = 0; i < h * w; ++i)
                if (plane[i] > 0.0f) positive[static_cast<std::size_t>(f)]++;
        }
    }
    ActivationProfile prof;
    prof.layer_name = layer_name;
    prof.dataset_id = dataset_id;
    prof.sample_count = static_cast<int>(images.size());
    prof.rates.reserve(static_cast<std::size_t>(filters));
    for (int f = 0; f < filters; ++f)
        prof.rates.push_back(static_cast<double>(positive[static_cast<std::size_t>(f)]) /
                             static_cast<double>(sites_per_filter));
    return prof;
}

/// Text table of (filter, rate) rows ordered by descending rate, plus the
/// Gini coefficient of the distribution as a metric line.
inline std::string format_activation_table(const ActivationProfile& prof) {
    std::vector<int> order(prof.rates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return prof.rates[static_cast<std::size_t>(a)] > prof.rates[static_cast<std::size_t>(b)]; });
    std::ostringstream os;
    os << "# activation rates for layer " << prof.layer_name << " over " << prof.sample_count
       << " images";
    if (!prof.dataset_id.empty()) os << " from " << prof.dataset_id;
    os << "\n";
    os << metric_line("activation_gini/" + prof.layer_name, gini_coefficient(prof.rates)) << "\n";
    os << "# filter\trate\n";
    os << std::setprecision(10);
    for (int f : order) os << f << "\t" << prof.rates[static_cast<std::size_t>(f)] << "\n";
    return os.str();
}

/// Renders a conv layer's kernels as a tiled image: each kernel is min-max
/// normalized on its own (a zero-range kernel shows mid-gray), tiles are
/// laid out row-major in a near-square grid with 1-pixel black separators
/// including the outer border. 3-input-channel kernels render in color;
/// any other input arity renders one grayscale tile per (kernel, channel).
inline void export_filter_grid(const Model& model, const std::string& layer_name,
                               const std::string& path) {
    const int idx = model.layer_index(layer_name);
    if (idx < 0) {
        std::string names;
        for (const std::string& n : model.layer_names()) names += " " + n;
        throw std::invalid_argument("unknown layer '" + layer_name + "'; model layers:" + names);
    }
    detail::require(model.spec().layers[static_cast<std::size_t>(idx)].kind == LayerKind::conv,
                    "export_filter_grid: layer '" + layer_name + "' is not a conv layer");
    const Tensor& w = model.params().at(layer_name + ".weight");
    const int k = w.dim(0), c = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const bool color = c == 3;
    const int tiles = color ? k : k * c;

    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(tiles))));
    const int rows = (tiles + cols - 1) / cols;
    const int img_w = cols * (kw + 1) + 1;
    const int img_h = rows * (kh + 1) + 1;
    Tensor grid({3, img_h, img_w});  // separators stay black

    for (int tile = 0; tile < tiles; ++tile) {
        const int kernel = color ? tile : tile / c;
        const int channel = color ? -1 : tile % c;
        const float* base = w.data() + static_cast<std::size_t>(kernel) * c * kh * kw;
        float lo = base[0], hi = base[0];
        for (int i = 0; i < c * kh * kw; ++i) {
            lo = std::min(lo, base[i]);
            hi = std::max(hi, base[i]);
        }
        const float span = hi - lo;
        const int ty = (tile / cols) * (kh + 1) + 1;
        const int tx = (tile % cols) * (kw + 1) + 1;
        for (int y = 0; y < kh; ++y) {
            for (int x = 0; x < kw; ++x) {
                for (int ch = 0; ch < 3; ++ch) {
                    const int src_channel = color ? ch : channel;
                    const float v = base[(static_cast<std::size_t>(src_channel) * kh + y) * kw + x];
                    grid.at(ch, ty + y, tx + x) = span == 0.0f ? 0.5f : (v - lo) / span;
                }
            }
        }
    }
    save_ppm(path, grid);
}

}  // namespace dscnn
