#pragma once

#include <limits>

#include "dscnn/ops.hpp"
#include "dscnn/tensor.hpp"

namespace dscnn {

/// Pyramid levels as output bin counts per side, e.g. {1, 2, 3} yields
/// 1x1 + 2x2 + 3x3 = 14 maxima per channel regardless of input size.
struct SppSpec {
    std::vector<int> levels;

    int bins_total() const {
        int n = 0;
        for (int b : levels) n += b * b;
        return n;
    }
};

inline std::size_t spp_output_size(const SppSpec& spec, int channels) {
    return static_cast<std::size_t>(channels) * spec.bins_total();
}

namespace detail {

inline void spp_check(const Tensor& input, const SppSpec& spec) {
    require(input.rank() == 3, "spp: input must be CxHxW, got " + shape_str(input));
    require(!spec.levels.empty(), "spp: empty level list");
    const int h = input.dim(1), w = input.dim(2);
    for (int b : spec.levels)
        require(b >= 1 && b <= h && b <= w,
                "spp: level " + std::to_string(b) + " has more bins than pixels in " + shape_str(input));
}

}  // namespace detail

/// Multi-level max pooling into near-equal rectangles with boundaries at
/// floor(i*H/bins). Output layout: levels in spec order; within a level the
/// channel is the major index, bins row-major within a channel.
inline Tensor spp_forward(const Tensor& input, const SppSpec& spec) {
    detail::spp_check(input, spec);
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    Tensor out({static_cast<int>(spp_output_size(spec, c))});
    std::size_t idx = 0;
    for (int b : spec.levels) {
        for (int ch = 0; ch < c; ++ch) {
            for (int by = 0; by < b; ++by) {
                const int y0 = by * h / b, y1 = (by + 1) * h / b;
                for (int bx = 0; bx < b; ++bx) {
                    const int x0 = bx * w / b, x1 = (bx + 1) * w / b;
                    float best = -std::numeric_limits<float>::infinity();
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) {
                            const float v = input.at(ch, y, x);
                            if (v > best) best = v;
                        }
                    out[idx++] = best;
                }
            }
        }
    }
    return out;
}

/// Routes each output gradient to the first row-major argmax of its bin,
/// mirroring spp_forward's scan order exactly.
inline Tensor spp_backward(const Tensor& input, const SppSpec& spec, const Tensor& grad_out) {
    detail::spp_check(input, spec);
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    detail::require(grad_out.size() == spp_output_size(spec, c),
                    "spp_backward: gradient size " + shape_str(grad_out) + " does not match spec");
    Tensor grad_input(input.shape());
    std::size_t idx = 0;
    for (int b : spec.levels) {
        for (int ch = 0; ch < c; ++ch) {
            for (int by = 0; by < b; ++by) {
                const int y0 = by * h / b, y1 = (by + 1) * h / b;
                for (int bx = 0; bx < b; ++bx) {
                    const int x0 = bx * w / b, x1 = (bx + 1) * w / b;
                    float best = -std::numeric_limits<float>::infinity();
                    int ay = y0, ax = x0;
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) {
                            const float v = input.at(ch, y, x);
                            if (v > best) {
                                best = v;
                                ay = y;
                                ax = x;
                            }
                        }
                    grad_input.at(ch, ay, ax) += grad_out[idx++];
                }
            }
        }
    }
    return grad_input;
}

}  // namespace dscnn
