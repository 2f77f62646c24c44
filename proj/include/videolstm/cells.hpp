#pragma once

#include <string>
#include <utility>

#include "videolstm/params.hpp"

// One-timestep transition functions for the five cell variants.
//
// All variants share the gate recurrence
//   I = σ(Wx_i·x + Wh_i·h + b_i)     F = σ(Wx_f·x + Wh_f·h + b_f)
//   O = σ(Wx_o·x + Wh_o·h + b_o)     G = tanh(Wx_c·x + Wh_c·h + b_c)
//   C_t = F ⊙ C_{t−1} + I ⊙ G        H_t = O ⊙ tanh(C_t)
// with dense products for the vector cells and same-padded convolutions for
// the spatial ones. The attention mechanisms differ: the vector ALSTM scores
// regions with a small perceptron and pools by expectation; the convolutional
// variants score with a shallow conv net and reweight the map in place.
namespace vlsm {

enum GateIndex { kGateI = 0, kGateF = 1, kGateO = 2, kGateC = 3 };
inline constexpr int kNumGates = 4;
inline constexpr const char* kGateNames[kNumGates] = {"i", "f", "o", "c"};

// Recurrent state. H and C always share a shape: K vectors for the vector
// cells, N×N×C maps for the convolutional ones. Initial states are zeros.
struct CellStateVar {
    ad::Var h, c;
};

inline CellStateVar zero_state_vec(int k) {
    return {ad::constant(Tensor({k})), ad::constant(Tensor({k}))};
}

inline CellStateVar zero_state_map(int n, int c) {
    return {ad::constant(Tensor({n, n, c})), ad::constant(Tensor({n, n, c}))};
}

// ---------------------------------------------------------------------------
// Parameter bundles (graph leaves) and their store registration
// ---------------------------------------------------------------------------

struct VectorGateVars {
    ad::Var wx[kNumGates];  // D×K
    ad::Var wh[kNumGates];  // K×K
    ad::Var b[kNumGates];   // K
};

// Attention perceptron of the vector ALSTM: one tanh hidden layer of width K
// conditioned on a region feature and the previous hidden state, then a
// scalar score per region.
struct VectorAttnVars {
    ad::Var wx;  // D×K
    ad::Var wh;  // K×K
    ad::Var b;   // K
    ad::Var ws;  // K×1
    ad::Var bs;  // 1
};

struct ConvGateVars {
    ad::Var wx[kNumGates];  // k×k×D×C input-to-state
    ad::Var wh[kNumGates];  // k×k×C×C state-to-state
    ad::Var b[kNumGates];   // C
};

// Attention conv net: Z = W_z ∗ tanh(W_xa∗X + W_ha∗H_cond + b_a), W_z 1×1.
struct ConvAttnVars {
    ad::Var wxa;  // k×k×D×C
    ad::Var wha;  // k×k×C×C
    ad::Var ba;   // C
    ad::Var wz;   // 1×1×C×1
};

// Bottom motion layer: gates take a third convolved term from the top
// layer's previous hidden state.
struct MotionGateVars {
    ad::Var wx[kNumGates];  // k×k×Dm×C flow-input-to-state
    ad::Var wh[kNumGates];  // k×k×C×C state-to-state
    ad::Var we[kNumGates];  // k×k×C×C top-to-bottom
    ad::Var b[kNumGates];   // C
};

struct VectorGateIdx {
    int wx[kNumGates], wh[kNumGates], b[kNumGates];
};
struct VectorAttnIdx {
    int wx, wh, b, ws, bs;
};
struct ConvGateIdx {
    int wx[kNumGates], wh[kNumGates], b[kNumGates];
};
struct ConvAttnIdx {
    int wxa, wha, ba, wz;
};
struct MotionGateIdx {
    int wx[kNumGates], wh[kNumGates], we[kNumGates], b[kNumGates];
};

// Forget-gate biases start at 1, all other biases at 0.
inline Tensor gate_bias_init(int width, int gate) {
    return Tensor({width}, gate == kGateF ? 1.0 : 0.0);
}

inline VectorGateIdx add_vector_gates(ParamStore& ps, const std::string& prefix, int d, int k,
                                      Rng& rng) {
    VectorGateIdx idx{};
    for (int g = 0; g < kNumGates; ++g) {
        idx.wx[g] = ps.add(prefix + ".wx" + kGateNames[g], glorot_matrix(d, k, rng));
        idx.wh[g] = ps.add(prefix + ".wh" + kGateNames[g], glorot_matrix(k, k, rng));
        idx.b[g] = ps.add(prefix + ".b" + kGateNames[g], gate_bias_init(k, g));
    }
    return idx;
}

inline VectorAttnIdx add_vector_attention(ParamStore& ps, const std::string& prefix, int d,
                                          int k, Rng& rng) {
    VectorAttnIdx idx{};
    idx.wx = ps.add(prefix + ".wx", glorot_matrix(d, k, rng));
    idx.wh = ps.add(prefix + ".wh", glorot_matrix(k, k, rng));
    idx.b = ps.add(prefix + ".b", Tensor({k}));
    idx.ws = ps.add(prefix + ".ws", glorot_matrix(k, 1, rng));
    idx.bs = ps.add(prefix + ".bs", Tensor({1}));
    return idx;
}

inline ConvGateIdx add_conv_gates(ParamStore& ps, const std::string& prefix, int kernel, int d,
                                  int c, Rng& rng) {
    ConvGateIdx idx{};
    for (int g = 0; g < kNumGates; ++g) {
        idx.wx[g] = ps.add(prefix + ".wx" + kGateNames[g], glorot_kernel(kernel, d, c, rng));
        idx.wh[g] = ps.add(prefix + ".wh" + kGateNames[g], glorot_kernel(kernel, c, c, rng));
        idx.b[g] = ps.add(prefix + ".b" + kGateNames[g], gate_bias_init(c, g));
    }
    return idx;
}

inline ConvAttnIdx add_conv_attention(ParamStore& ps, const std::string& prefix, int kernel,
                                      int d, int c, Rng& rng) {
    ConvAttnIdx idx{};
    idx.wxa = ps.add(prefix + ".wxa", glorot_kernel(kernel, d, c, rng));
    idx.wha = ps.add(prefix + ".wha", glorot_kernel(kernel, c, c, rng));
    idx.ba = ps.add(prefix + ".ba", Tensor({c}));
    idx.wz = ps.add(prefix + ".wz", glorot_kernel(1, c, 1, rng));
    return idx;
}

inline MotionGateIdx add_motion_gates(ParamStore& ps, const std::string& prefix, int kernel,
                                      int dm, int c, Rng& rng) {
    MotionGateIdx idx{};
    for (int g = 0; g < kNumGates; ++g) {
        idx.wx[g] = ps.add(prefix + ".wx" + kGateNames[g], glorot_kernel(kernel, dm, c, rng));
        idx.wh[g] = ps.add(prefix + ".wh" + kGateNames[g], glorot_kernel(kernel, c, c, rng));
        idx.we[g] = ps.add(prefix + ".we" + kGateNames[g], glorot_kernel(kernel, c, c, rng));
        idx.b[g] = ps.add(prefix + ".b" + kGateNames[g], gate_bias_init(c, g));
    }
    return idx;
}

inline VectorGateVars bind_vector_gates(const BoundParams& bp, const VectorGateIdx& idx) {
    VectorGateVars v;
    for (int g = 0; g < kNumGates; ++g) {
        v.wx[g] = bp[idx.wx[g]];
        v.wh[g] = bp[idx.wh[g]];
        v.b[g] = bp[idx.b[g]];
    }
    return v;
}

inline VectorAttnVars bind_vector_attention(const BoundParams& bp, const VectorAttnIdx& idx) {
    return {bp[idx.wx], bp[idx.wh], bp[idx.b], bp[idx.ws], bp[idx.bs]};
}

inline ConvGateVars bind_conv_gates(const BoundParams& bp, const ConvGateIdx& idx) {
    ConvGateVars v;
    for (int g = 0; g < kNumGates; ++g) {
        v.wx[g] = bp[idx.wx[g]];
        v.wh[g] = bp[idx.wh[g]];
        v.b[g] = bp[idx.b[g]];
    }
    return v;
}

inline ConvAttnVars bind_conv_attention(const BoundParams& bp, const ConvAttnIdx& idx) {
    return {bp[idx.wxa], bp[idx.wha], bp[idx.ba], bp[idx.wz]};
}

inline MotionGateVars bind_motion_gates(const BoundParams& bp, const MotionGateIdx& idx) {
    MotionGateVars v;
    for (int g = 0; g < kNumGates; ++g) {
        v.wx[g] = bp[idx.wx[g]];
        v.wh[g] = bp[idx.wh[g]];
        v.we[g] = bp[idx.we[g]];
        v.b[g] = bp[idx.b[g]];
    }
    return v;
}

// ---------------------------------------------------------------------------
// Step functions
// ---------------------------------------------------------------------------

inline CellStateVar lstm_step(ad::Var x, CellStateVar prev, const VectorGateVars& p) {
    const int k = prev.h->value.extent(0);
    auto pre = [&](int g) {
        return ad::add(ad::dense(x, p.wx[g], p.b[g]),
                       ad::dense(prev.h, p.wh[g], ad::constant(Tensor({k}))));
    };
    auto gi = ad::sigmoid(pre(kGateI));
    auto gf = ad::sigmoid(pre(kGateF));
    auto go = ad::sigmoid(pre(kGateO));
    auto gc = ad::tanh(pre(kGateC));
    auto c = ad::add(ad::hadamard(gf, prev.c), ad::hadamard(gi, gc));
    auto h = ad::hadamard(go, ad::tanh(c));
    return {h, c};
}

// Attention weights over N² region features: softmax of per-region perceptron
// scores conditioned on the previous hidden state.
inline ad::Var alstm_attention(ad::Var regions, ad::Var h_prev, const VectorAttnVars& p) {
    auto scores_x = ad::matmul(regions, p.wx);                  // R×K
    auto cond = ad::dense(h_prev, p.wh, p.b);                   // K
    auto hidden = ad::tanh(ad::add_rowvec(scores_x, cond));     // R×K
    auto scores = ad::add_rowvec(ad::matmul(hidden, p.ws), p.bs);  // R×1
    return ad::softmax_vec(ad::flatten(scores));
}

// Expectation-pooled attention: x̃ = Σ_r a_r x_r feeds a plain LSTM step.
inline CellStateVar alstm_step(ad::Var x_map, CellStateVar prev, const VectorGateVars& gates,
                               const VectorAttnVars& attn, ad::Var* attention_out = nullptr) {
    ops::check(x_map->value.ndim() == 3, "alstm_step: input must be N×N×D");
    const int n = x_map->value.extent(0);
    ops::check(x_map->value.extent(1) == n, "alstm_step: input map must be square");
    const int d = x_map->value.extent(2);
    auto regions = ad::reshape(x_map, {n * n, d});
    auto weights = alstm_attention(regions, prev.h, attn);
    if (attention_out) *attention_out = ad::reshape(weights, {n, n});
    auto pooled = ad::weighted_pool(weights, regions);
    return lstm_step(pooled, prev, gates);
}

// Z = W_z ∗ tanh(W_xa∗X + W_ha∗H_cond + b_a), normalized over all positions.
inline ad::Var conv_attention(ad::Var x, ad::Var h_cond, const ConvAttnVars& p) {
    const int n = x->value.extent(0);
    const int c = p.ba->value.extent(0);
    auto mixed = ad::add(ad::conv2d(x, p.wxa, p.ba),
                         ad::conv2d(h_cond, p.wha, ad::constant(Tensor({c}))));
    auto z = ad::conv2d(ad::tanh(mixed), p.wz, ad::constant(Tensor({1})));
    return ad::spatial_softmax(ad::reshape(z, {n, x->value.extent(1)}));
}

inline CellStateVar conv_lstm_step(ad::Var x, CellStateVar prev, const ConvGateVars& p) {
    const int c = prev.h->value.extent(2);
    auto pre = [&](int g) {
        return ad::add(ad::conv2d(x, p.wx[g], p.b[g]),
                       ad::conv2d(prev.h, p.wh[g], ad::constant(Tensor({c}))));
    };
    auto gi = ad::sigmoid(pre(kGateI));
    auto gf = ad::sigmoid(pre(kGateF));
    auto go = ad::sigmoid(pre(kGateO));
    auto gc = ad::tanh(pre(kGateC));
    auto cc = ad::add(ad::hadamard(gf, prev.c), ad::hadamard(gi, gc));
    auto h = ad::hadamard(go, ad::tanh(cc));
    return {h, cc};
}

// Appearance-attention step: attention from (X_t, H_{t−1}), map reweighted in
// place, then the convolutional gate update. Returns the attention map too —
// localization consumes it.
inline std::pair<CellStateVar, ad::Var> conv_alstm_step(ad::Var x, CellStateVar prev,
                                                        const ConvGateVars& gates,
                                                        const ConvAttnVars& attn) {
    auto a = conv_attention(x, prev.h, attn);
    auto weighted = ad::apply_attention(a, x);
    return {conv_lstm_step(weighted, prev, gates), a};
}

// Bottom layer of the two-layer architecture: consumes the flow map and, via
// the extra We kernels, the top layer's previous hidden state.
inline CellStateVar motion_layer_step(ad::Var m, CellStateVar prev_m, ad::Var h_top_prev,
                                      const MotionGateVars& p) {
    const int c = prev_m.h->value.extent(2);
    auto pre = [&](int g) {
        auto zero = ad::constant(Tensor({c}));
        return ad::add(ad::add(ad::conv2d(m, p.wx[g], p.b[g]),
                               ad::conv2d(prev_m.h, p.wh[g], ad::constant(Tensor({c})))),
                       ad::conv2d(h_top_prev, p.we[g], zero));
    };
    auto gi = ad::sigmoid(pre(kGateI));
    auto gf = ad::sigmoid(pre(kGateF));
    auto go = ad::sigmoid(pre(kGateO));
    auto gc = ad::tanh(pre(kGateC));
    auto cc = ad::add(ad::hadamard(gf, prev_m.c), ad::hadamard(gi, gc));
    auto h = ad::hadamard(go, ad::tanh(cc));
    return {h, cc};
}

struct VideoLstmStepOut {
    CellStateVar top;
    CellStateVar bottom;
    ad::Var attention;
};

// Motion-based attention step. Order within the timestep:
//   1. bottom motion layer consumes M_t and the top's H_{t−1}  → H^m_t
//   2. attention is conditioned on (X_t, H^m_t)                → A_t
//   3. the appearance map is reweighted                        → X̃_t
//   4. the top convolutional gate update runs on X̃_t           → H_t
// The bottom layer reaches the classifier only through A_t.
inline VideoLstmStepOut videolstm_step(ad::Var x, ad::Var m, CellStateVar top_prev,
                                       CellStateVar bottom_prev, const ConvGateVars& top_gates,
                                       const MotionGateVars& motion_gates,
                                       const ConvAttnVars& attn) {
    CellStateVar bottom = motion_layer_step(m, bottom_prev, top_prev.h, motion_gates);
    auto a = conv_attention(x, bottom.h, attn);
    auto weighted = ad::apply_attention(a, x);
    CellStateVar top = conv_lstm_step(weighted, top_prev, top_gates);
    return {top, bottom, a};
}

}  // namespace vlsm
