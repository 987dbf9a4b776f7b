#pragma once

#include <cmath>

#include "dscnn/ops.hpp"
#include "dscnn/tensor.hpp"

namespace dscnn {

/// Gate weights for the recurrent cell:
///   i_t = sigmoid(W_ix x_t + W_im m_{t-1})
///   f_t = sigmoid(W_fx x_t + W_fm m_{t-1})
///   o_t = sigmoid(W_ox x_t + W_om m_{t-1})
///   c_t = f_t (.) c_{t-1} + i_t (.) tanh(W_cx x_t + W_cm m_{t-1})
///   m_t = o_t (.) c_t
/// Note the final line: the hidden state is the gated cell itself, with no
/// output nonlinearity, and there are no bias terms.
struct LstmWeights {
    Tensor w_ix, w_im, w_fx, w_fm, w_ox, w_om, w_cx, w_cm;

    LstmWeights() = default;
    LstmWeights(int hidden, int input)
        : w_ix({hidden, input}),
          w_im({hidden, hidden}),
          w_fx({hidden, input}),
          w_fm({hidden, hidden}),
          w_ox({hidden, input}),
          w_om({hidden, hidden}),
          w_cx({hidden, input}),
          w_cm({hidden, hidden}) {}

    int hidden() const { return w_ix.dim(0); }
    int input() const { return w_ix.dim(1); }

    static const std::vector<std::string>& names() {
        static const std::vector<std::string> n = {"W_ix", "W_im", "W_fx", "W_fm",
                                                   "W_ox", "W_om", "W_cx", "W_cm"};
        return n;
    }

    Tensor& by_index(int i) {
        Tensor* all[] = {&w_ix, &w_im, &w_fx, &w_fm, &w_ox, &w_om, &w_cx, &w_cm};
        return *all[i];
    }
    const Tensor& by_index(int i) const {
        const Tensor* all[] = {&w_ix, &w_im, &w_fx, &w_fm, &w_ox, &w_om, &w_cx, &w_cm};
        return *all[i];
    }
};

struct LstmState {
    Tensor c;
    Tensor m;

    LstmState() = default;
    explicit LstmState(int hidden) : c({hidden}), m({hidden}) {}
};

namespace detail {

inline float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

/// y = W.x + W2.x2 with double accumulation per row.
inline Tensor gate_preact(const Tensor& wx, const Tensor& x, const Tensor& wm, const Tensor& m) {
    const int rows = wx.dim(0), nx = wx.dim(1), nm = wm.dim(1);
    require(static_cast<std::size_t>(nx) == x.size(),
            "lstm: input " + shape_str(x) + " does not match weights " + shape_str(wx));
    require(static_cast<std::size_t>(nm) == m.size(),
            "lstm: state " + shape_str(m) + " does not match weights " + shape_str(wm));
    Tensor out({rows});
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        const float* wr = wx.data() + static_cast<std::size_t>(r) * nx;
        for (int k = 0; k < nx; ++k) acc += static_cast<double>(wr[k]) * x[static_cast<std::size_t>(k)];
        const float* mr = wm.data() + static_cast<std::size_t>(r) * nm;
        for (int k = 0; k < nm; ++k) acc += static_cast<double>(mr[k]) * m[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(r)] = static_cast<float>(acc);
    }
    return out;
}

/// grad_w += d (outer) v; grad_v_accum += W^T d.
inline void gate_backward(const Tensor& w_x, const Tensor& w_m, const Tensor& x, const Tensor& m,
                          const Tensor& d, Tensor& gw_x, Tensor& gw_m, Tensor& gx, Tensor& gm) {
    const int rows = w_x.dim(0), nx = w_x.dim(1), nm = w_m.dim(1);
    for (int r = 0; r < rows; ++r) {
        const float dr = d[static_cast<std::size_t>(r)];
        float* gwx = gw_x.data() + static_cast<std::size_t>(r) * nx;
        const float* wxr = w_x.data() + static_cast<std::size_t>(r) * nx;
        for (int k = 0; k < nx; ++k) {
            gwx[k] += dr * x[static_cast<std::size_t>(k)];
            gx[static_cast<std::size_t>(k)] += dr * wxr[k];
        }
        float* gwm = gw_m.data() + static_cast<std::size_t>(r) * nm;
        const float* wmr = w_m.data() + static_cast<std::size_t>(r) * nm;
        for (int k = 0; k < nm; ++k) {
            gwm[k] += dr * m[static_cast<std::size_t>(k)];
            gm[static_cast<std::size_t>(k)] += dr * wmr[k];
        }
    }
}

}  // namespace detail

/// Everything the backward pass needs from one forward step.
struct LstmStepCache {
    Tensor x;
    Tensor prev_c, prev_m;
    Tensor i, f, o, g;  // gate activations; g = tanh(cell pre-activation)
    Tensor c, m;
};

inline LstmState lstm_step(const Tensor& x, const LstmState& prev, const LstmWeights& w,
                           LstmStepCache* cache = nullptr) {
    const int hidden = w.hidden();
    detail::require(prev.c.size() == static_cast<std::size_t>(hidden) && prev.m.size() == prev.c.size(),
                    "lstm_step: state size does not match weights");
    const Tensor ai = detail::gate_preact(w.w_ix, x, w.w_im, prev.m);
    const Tensor af = detail::gate_preact(w.w_fx, x, w.w_fm, prev.m);
    const Tensor ao = detail::gate_preact(w.w_ox, x, w.w_om, prev.m);
    const Tensor ac = detail::gate_preact(w.w_cx, x, w.w_cm, prev.m);

    Tensor i({hidden}), f({hidden}), o({hidden}), g({hidden});
    LstmState next(hidden);
    for (int k = 0; k < hidden; ++k) {
        const std::size_t s = static_cast<std::size_t>(k);
        i[s] = detail::sigmoidf(ai[s]);
        f[s] = detail::sigmoidf(af[s]);
        o[s] = detail::sigmoidf(ao[s]);
        g[s] = std::tanh(ac[s]);
        next.c[s] = f[s] * prev.c[s] + i[s] * g[s];
        next.m[s] = o[s] * next.c[s];
    }
    if (cache) {
        cache->x = x;
        cache->prev_c = prev.c;
        cache->prev_m = prev.m;
        cache->i = i;
        cache->f = f;
        cache->o = o;
        cache->g = g;
        cache->c = next.c;
        cache->m = next.m;
    }
    return next;
}

struct LstmTrace {
    std::vector<LstmStepCache> steps;
};

/// Runs the cell over a sequence from the zero initial state and returns the
/// final state; optionally records per-step caches for BPTT.
inline LstmState lstm_unroll(const std::vector<Tensor>& xs, const LstmWeights& w,
                             LstmTrace* trace = nullptr) {
    detail::require(!xs.empty(), "lstm_unroll: empty sequence");
    LstmState state(w.hidden());
    if (trace) {
        trace->steps.clear();
        trace->steps.resize(xs.size());
    }
    for (std::size_t t = 0; t < xs.size(); ++t)
        state = lstm_step(xs[t], state, w, trace ? &trace->steps[t] : nullptr);
    return state;
}

/// Backpropagation through time. `grad_m_final` is dL/dm_T; gradients are
/// accumulated into `grads` (which must be zero-initialized with matching
/// shapes) and per-step input gradients are written to `grad_xs`.
inline void lstm_backward(const LstmTrace& trace, const LstmWeights& w, const Tensor& grad_m_final,
                          LstmWeights& grads, std::vector<Tensor>& grad_xs) {
    detail::require(!trace.steps.empty(), "lstm_backward: empty trace");
    const int hidden = w.hidden();
    grad_xs.assign(trace.steps.size(), Tensor());

    Tensor dm = grad_m_final;
    Tensor dc({hidden});
    for (int t = static_cast<int>(trace.steps.size()) - 1; t >= 0; --t) {
        const LstmStepCache& s = trace.steps[static_cast<std::size_t>(t)];
        Tensor d_ai({hidden}), d_af({hidden}), d_ao({hidden}), d_ac({hidden});
        Tensor dc_prev({hidden});
        for (int k = 0; k < hidden; ++k) {
            const std::size_t q = static_cast<std::size_t>(k);
            const float d_o = dm[q] * s.c[q];
            const float dct = dc[q] + dm[q] * s.o[q];
            const float d_f = dct * s.prev_c[q];
            const float d_i = dct * s.g[q];
            const float d_g = dct * s.i[q];
            dc_prev[q] = dct * s.f[q];
            d_ai[q] = d_i * s.i[q] * (1.0f - s.i[q]);
            d_af[q] = d_f * s.f[q] * (1.0f - s.f[q]);
            d_ao[q] = d_o * s.o[q] * (1.0f - s.o[q]);
            d_ac[q] = d_g * (1.0f - s.g[q] * s.g[q]);
        }
        Tensor dx({w.input()});
        Tensor dm_prev({hidden});
        detail::gate_backward(w.w_ix, w.w_im, s.x, s.prev_m, d_ai, grads.w_ix, grads.w_im, dx, dm_prev);
        detail::gate_backward(w.w_fx, w.w_fm, s.x, s.prev_m, d_af, grads.w_fx, grads.w_fm, dx, dm_prev);
        detail::gate_backward(w.w_ox, w.w_om, s.x, s.prev_m, d_ao, grads.w_ox, grads.w_om, dx, dm_prev);
        detail::gate_backward(w.w_cx, w.w_cm, s.x, s.prev_m, d_ac, grads.w_cx, grads.w_cm, dx, dm_prev);
        grad_xs[static_cast<std::size_t>(t)] = std::move(dx);
        dm = std::move(dm_prev);
        dc = std::move(dc_prev);
    }
}

}  // namespace dscnn
