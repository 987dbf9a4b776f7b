#pragma once

#include <cmath>
#include <limits>

#include "dscnn/tensor.hpp"

namespace dscnn {

namespace detail {

/// Zero-pad a CxHxW tensor spatially. pad == 0 returns a copy.
inline Tensor pad_spatial(const Tensor& in, int pad) {
    if (pad == 0) return in;
    const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
    Tensor out({c, h + 2 * pad, w + 2 * pad});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            std::copy(&in.at(ch, y, 0), &in.at(ch, y, 0) + w, &out.at(ch, y + pad, pad));
    return out;
}

}  // namespace detail

inline int conv_out_extent(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

/// 2-D convolution (cross-correlation), zero padding. input CxHxW,
/// weights KxCxkhxkw, bias K, output KxH'xW'.
inline Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                             int stride, int pad) {
    detail::require(input.rank() == 3, "conv2d: input must be CxHxW, got " + shape_str(input));
    detail::require(weights.rank() == 4, "conv2d: weights must be KxCxKHxKW, got " + shape_str(weights));
    detail::require(stride >= 1 && pad >= 0, "conv2d: stride >= 1 and pad >= 0 required");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int k = weights.dim(0), wc = weights.dim(1), kh = weights.dim(2), kw = weights.dim(3);
    detail::require(wc == c, "conv2d: input channels " + shape_str(input) + " do not match weight channels " +
                                 shape_str(weights));
    detail::require(bias.rank() == 1 && bias.dim(0) == k,
                    "conv2d: bias must be [" + std::to_string(k) + "], got " + shape_str(bias));
    detail::require(kh <= h + 2 * pad && kw <= w + 2 * pad,
                    "conv2d: kernel " + shape_str(weights) + " exceeds padded input " + shape_str(input));

    const Tensor padded = detail::pad_spatial(input, pad);
    const int ph = padded.dim(1), pw = padded.dim(2);
    const int oh = conv_out_extent(h, kh, stride, pad);
    const int ow = conv_out_extent(w, kw, stride, pad);

    Tensor out({k, oh, ow});
    for (int f = 0; f < k; ++f) {
        float* plane = &out.at(f, 0, 0);
        std::fill(plane, plane + static_cast<std::size_t>(oh) * ow, bias[static_cast<std::size_t>(f)]);
    }
    (void)ph;
    for (int f = 0; f < k; ++f) {
        for (int ch = 0; ch < c; ++ch) {
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const float wv = weights[((static_cast<std::size_t>(f) * c + ch) * kh + ky) * kw + kx];
                    if (wv == 0.0f) continue;
                    for (int y = 0; y < oh; ++y) {
                        const float* in_row = &padded.at(ch, y * stride + ky, 0);
                        float* out_row = &out.at(f, y, 0);
                        if (stride == 1) {
                            const float* src = in_row + kx;
                            for (int x = 0; x < ow; ++x) out_row[x] += wv * src[x];
                        } else {
                            for (int x = 0; x < ow; ++x) out_row[x] += wv * in_row[x * stride + kx];
                        }
                    }
                }
            }
        }
    }
    (void)pw;
    return out;
}

/// Gradients of conv2d w.r.t. input, weights and bias given dL/doutput.
inline void conv2d_backward(const Tensor& input, const Tensor& weights, int stride, int pad,
                            const Tensor& grad_out, Tensor& grad_input, Tensor& grad_weights,
                            Tensor& grad_bias) {
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int k = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    const int oh = grad_out.dim(1), ow = grad_out.dim(2);

    const Tensor padded = detail::pad_spatial(input, pad);
    Tensor grad_padded({c, h + 2 * pad, w + 2 * pad});
    grad_weights = Tensor(weights.shape());
    grad_bias = Tensor({k});

    for (int f = 0; f < k; ++f) {
        double acc = 0.0;
        const float* g = &grad_out.at(f, 0, 0);
        for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) acc += g[i];
        grad_bias[static_cast<std::size_t>(f)] = static_cast<float>(acc);
    }

    for (int f = 0; f < k; ++f) {
        for (int ch = 0; ch < c; ++ch) {
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const std::size_t widx = ((static_cast<std::size_t>(f) * c + ch) * kh + ky) * kw + kx;
                    const float wv = weights[widx];
                    double wacc = 0.0;
                    for (int y = 0; y < oh; ++y) {
                        const float* in_row = &padded.at(ch, y * stride + ky, 0);
                        float* gin_row = &grad_padded.at(ch, y * stride + ky, 0);
                        const float* gout_row = &grad_out.at(f, y, 0);
                        if (stride == 1) {
                            const float* src = in_row + kx;
                            float* dst = gin_row + kx;
                            for (int x = 0; x < ow; ++x) {
                                wacc += static_cast<double>(gout_row[x]) * src[x];
                                dst[x] += wv * gout_row[x];
                            }
                        } else {
                            for (int x = 0; x < ow; ++x) {
                                wacc += static_cast<double>(gout_row[x]) * in_row[x * stride + kx];
                                gin_row[x * stride + kx] += wv * gout_row[x];
                            }
                        }
                    }
                    grad_weights[widx] = static_cast<float>(wacc);
                }
            }
        }
    }

    if (pad == 0) {
        grad_input = std::move(grad_padded);
    } else {
        grad_input = Tensor({c, h, w});
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                std::copy(&grad_padded.at(ch, y + pad, pad), &grad_padded.at(ch, y + pad, pad) + w,
                          &grad_input.at(ch, y, 0));
    }
}

/// Max pooling over square windows; ties resolve to the first element in
/// row-major scan order so backward routing is deterministic.
inline Tensor maxpool_forward(const Tensor& input, int window, int stride) {
    detail::require(input.rank() == 3, "maxpool: input must be CxHxW, got " + shape_str(input));
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    detail::require(window >= 1 && window <= h && window <= w,
                    "maxpool: window " + std::to_string(window) + " exceeds input " + shape_str(input));
    detail::require(stride >= 1, "maxpool: stride >= 1 required");
    const int oh = (h - window) / stride + 1;
    const int ow = (w - window) / stride + 1;
    Tensor out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                float best = -std::numeric_limits<float>::infinity();
                for (int wy = 0; wy < window; ++wy)
                    for (int wx = 0; wx < window; ++wx) {
                        const float v = input.at(ch, y * stride + wy, x * stride + wx);
                        if (v > best) best = v;
                    }
                out.at(ch, y, x) = best;
            }
        }
    }
    return out;
}

inline Tensor maxpool_backward(const Tensor& input, int window, int stride, const Tensor& grad_out) {
    const int c = input.dim(0);
    const int oh = grad_out.dim(1), ow = grad_out.dim(2);
    Tensor grad_input(input.shape());
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                float best = -std::numeric_limits<float>::infinity();
                int by = 0, bx = 0;
                for (int wy = 0; wy < window; ++wy)
                    for (int wx = 0; wx < window; ++wx) {
                        const float v = input.at(ch, y * stride + wy, x * stride + wx);
                        if (v > best) {
                            best = v;
                            by = y * stride + wy;
                            bx = x * stride + wx;
                        }
                    }
                grad_input.at(ch, by, bx) += grad_out.at(ch, y, x);
            }
        }
    }
    return grad_input;
}

inline Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0f ? input[i] : 0.0f;
    return out;
}

/// Gradient is masked where the pre-activation was <= 0.
inline Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    Tensor grad_input(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) grad_input[i] = input[i] > 0.0f ? grad_out[i] : 0.0f;
    return grad_input;
}

/// Fully connected layer: out = W.in + b. Rank-3 inputs are flattened
/// row-major.
inline Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    detail::require(weights.rank() == 2, "fc: weights must be MxN, got " + shape_str(weights));
    const int m = weights.dim(0), n = weights.dim(1);
    detail::require(static_cast<std::size_t>(n) == input.size(),
                    "fc: input " + shape_str(input) + " does not match weights " + shape_str(weights));
    detail::require(bias.rank() == 1 && bias.dim(0) == m,
                    "fc: bias must be [" + std::to_string(m) + "], got " + shape_str(bias));
    Tensor out({m});
    const float* x = input.data();
    for (int r = 0; r < m; ++r) {
        const float* wr = weights.data() + static_cast<std::size_t>(r) * n;
        double acc = bias[static_cast<std::size_t>(r)];
        for (int i = 0; i < n; ++i) acc += static_cast<double>(wr[i]) * x[i];
        out[static_cast<std::size_t>(r)] = static_cast<float>(acc);
    }
    return out;
}

inline void fc_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                        Tensor& grad_input, Tensor& grad_weights, Tensor& grad_bias) {
    const int m = weights.dim(0), n = weights.dim(1);
    grad_input = Tensor({n});
    grad_weights = Tensor(weights.shape());
    grad_bias = Tensor({m});
    const float* x = input.data();
    for (int r = 0; r < m; ++r) {
        const float g = grad_out[static_cast<std::size_t>(r)];
        grad_bias[static_cast<std::size_t>(r)] = g;
        const float* wr = weights.data() + static_cast<std::size_t>(r) * n;
        float* gw = grad_weights.data() + static_cast<std::size_t>(r) * n;
        float* gx = grad_input.data();
        for (int i = 0; i < n; ++i) {
            gw[i] = g * x[i];
            gx[i] += g * wr[i];
        }
    }
}

inline Tensor softmax(const Tensor& logits) {
    detail::require(logits.size() >= 1, "softmax: empty logits");
    float mx = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    Tensor probs(logits.shape());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += std::exp(static_cast<double>(logits[i]) - mx);
    for (std::size_t i = 0; i < logits.size(); ++i)
        probs[i] = static_cast<float>(std::exp(static_cast<double>(logits[i]) - mx) / sum);
    return probs;
}

/// Backward of plain softmax: dx = p (.) (dy - <p, dy>).
inline Tensor softmax_backward(const Tensor& probs, const Tensor& grad_out) {
    double dot = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) dot += static_cast<double>(probs[i]) * grad_out[i];
    Tensor grad(probs.shape());
    for (std::size_t i = 0; i < probs.size(); ++i)
        grad[i] = probs[i] * static_cast<float>(static_cast<double>(grad_out[i]) - dot);
    return grad;
}

struct SoftmaxLoss {
    double loss = 0.0;
    Tensor probs;
};

/// Numerically-stabilized softmax + cross entropy against a class index.
inline SoftmaxLoss softmax_cross_entropy(const Tensor& logits, int label) {
    detail::require(label >= 0 && static_cast<std::size_t>(label) < logits.size(),
                    "softmax_cross_entropy: label " + std::to_string(label) + " out of range for " +
                        shape_str(logits));
    float mx = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += std::exp(static_cast<double>(logits[i]) - mx);
    SoftmaxLoss res;
    res.probs = Tensor(logits.shape());
    for (std::size_t i = 0; i < logits.size(); ++i)
        res.probs[i] = static_cast<float>(std::exp(static_cast<double>(logits[i]) - mx) / sum);
    res.loss = -(static_cast<double>(logits[static_cast<std::size_t>(label)]) - mx - std::log(sum));
    return res;
}

/// dL/dlogits for softmax cross entropy: probs - onehot(label).
inline Tensor softmax_cross_entropy_backward(const Tensor& probs, int label) {
    Tensor grad = probs;
    grad[static_cast<std::size_t>(label)] -= 1.0f;
    return grad;
}

}  // namespace dscnn
