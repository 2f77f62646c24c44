#include <gtest/gtest.h>

#include <cmath>

#include "testutil.hpp"
#include "videolstm/cells.hpp"

using namespace vlsm;
using testutil::collect_grads;
using testutil::const_ptrs;
using testutil::max_abs_diff;
using testutil::max_fd_error;
using testutil::param_ptrs;
using testutil::random_tensor;

namespace {

void zero_all(ParamStore& ps) {
    for (int i = 0; i < ps.count(); ++i) ps.value(i) = Tensor::zeros_like(ps.value(i));
}

}  // namespace

// All-zero weights and biases: every sigmoid gate is 0.5, the candidate is 0,
// so C_t and H_t stay 0 from a zero state.
TEST(LstmStep, ZeroParamsGiveHalfGatesZeroState) {
    ParamStore ps;
    Rng rng(1);
    auto idx = add_vector_gates(ps, "cell", 3, 4, rng);
    zero_all(ps);

    BoundParams bp(ps);
    auto gates = bind_vector_gates(bp, idx);
    auto x = ad::constant(random_tensor({3}, rng));
    auto out = lstm_step(x, zero_state_vec(4), gates);
    for (int i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(out.c->value[i], 0.0);
        EXPECT_DOUBLE_EQ(out.h->value[i], 0.0);
    }
}

TEST(LstmStep, ForgetBiasOneStillZeroFromZeroState) {
    ParamStore ps;
    Rng rng(2);
    auto idx = add_vector_gates(ps, "cell", 3, 4, rng);
    zero_all(ps);
    for (int g = 0; g < kNumGates; ++g)
        ps.value(idx.b[g]) = gate_bias_init(4, g);  // forget bias 1, others 0

    BoundParams bp(ps);
    auto out = lstm_step(ad::constant(Tensor({3})), zero_state_vec(4),
                         bind_vector_gates(bp, idx));
    for (int i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(out.c->value[i], 0.0);
        EXPECT_DOUBLE_EQ(out.h->value[i], 0.0);
    }
}

TEST(LstmStep, GradientMatchesFiniteDifferences) {
    ParamStore ps;
    Rng rng(3);
    auto idx = add_vector_gates(ps, "cell", 3, 4, rng);
    Tensor xv = random_tensor({3}, rng);
    Tensor h0 = random_tensor({4}, rng, -0.5, 0.5);
    Tensor c0 = random_tensor({4}, rng, -0.5, 0.5);

    auto run = [&](BoundParams& bp) {
        CellStateVar prev{ad::constant(h0), ad::constant(c0)};
        return ad::sum(lstm_step(ad::constant(xv), prev, bind_vector_gates(bp, idx)).h);
    };
    auto forward = [&]() {
        BoundParams bp(ps);
        return run(bp)->value[0];
    };
    BoundParams bp(ps);
    ad::backward(run(bp));
    auto grads = collect_grads(bp);
    EXPECT_LT(max_fd_error(forward, param_ptrs(ps), const_ptrs(grads)), 1e-4);
}

TEST(AlstmAttention, IdenticalRegionsGiveUniformWeights) {
    ParamStore ps;
    Rng rng(4);
    auto idx = add_vector_attention(ps, "attn", 3, 5, rng);
    BoundParams bp(ps);

    Tensor regions({9, 3});
    for (int r = 0; r < 9; ++r)
        for (int d = 0; d < 3; ++d) regions.at(r, d) = 0.7 - 0.2 * d;
    auto w = alstm_attention(ad::constant(regions), ad::constant(random_tensor({5}, rng)),
                             bind_vector_attention(bp, idx));
    for (int r = 0; r < 9; ++r) EXPECT_NEAR(w->value[r], 1.0 / 9.0, 1e-14);
}

TEST(AlstmAttention, SumsToOneOnRandomInputs) {
    ParamStore ps;
    Rng rng(5);
    auto idx = add_vector_attention(ps, "attn", 4, 6, rng);
    BoundParams bp(ps);
    auto attn = bind_vector_attention(bp, idx);
    for (int trial = 0; trial < 100; ++trial) {
        auto w = alstm_attention(ad::constant(random_tensor({16, 4}, rng, -3.0, 3.0)),
                                 ad::constant(random_tensor({6}, rng, -3.0, 3.0)), attn);
        double total = 0.0;
        for (int r = 0; r < 16; ++r) {
            ASSERT_GE(w->value[r], 0.0);
            total += w->value[r];
        }
        ASSERT_NEAR(total, 1.0, 1e-12);
    }
}

// A +20 logit margin saturates the softmax.
TEST(AlstmAttention, DominantScoreTakesNearlyAllWeight) {
    Tensor scores({4});
    scores[0] = 20.0;
    Tensor w = ops::softmax_vec(scores);
    EXPECT_GT(w[0], 0.999);
}

// alstm_step is exactly: attention weights, expectation pooling, lstm_step.
TEST(AlstmStep, MatchesManualComposition) {
    ParamStore ps;
    Rng rng(6);
    const int n = 3, d = 4, k = 5;
    auto gidx = add_vector_gates(ps, "cell", d, k, rng);
    auto aidx = add_vector_attention(ps, "attn", d, k, rng);

    Tensor xv = random_tensor({n, n, d}, rng);
    Tensor h0 = random_tensor({k}, rng, -0.5, 0.5);
    Tensor c0 = random_tensor({k}, rng, -0.5, 0.5);

    BoundParams bp(ps);
    auto gates = bind_vector_gates(bp, gidx);
    auto attn = bind_vector_attention(bp, aidx);
    CellStateVar prev{ad::constant(h0), ad::constant(c0)};
    ad::Var amap;
    auto got = alstm_step(ad::constant(xv), prev, gates, attn, &amap);

    auto regions = ad::constant(xv.reshaped({n * n, d}));
    auto w = alstm_attention(regions, ad::constant(h0), attn);
    auto pooled = ad::weighted_pool(w, regions);
    auto want = lstm_step(pooled, prev, gates);

    EXPECT_EQ(max_abs_diff(got.h->value, want.h->value), 0.0);
    EXPECT_NEAR(amap->value.sum(), 1.0, 1e-12);
}

TEST(AlstmStep, UniformAttentionPoolsToSpatialMean) {
    ParamStore ps;
    Rng rng(7);
    const int n = 3, d = 2, k = 4;
    auto aidx = add_vector_attention(ps, "attn", d, k, rng);
    zero_all(ps);  // constant scores -> uniform weights
    BoundParams bp(ps);

    Tensor xv = random_tensor({n * n, d}, rng);
    auto w = alstm_attention(ad::constant(xv), ad::constant(Tensor({k})),
                             bind_vector_attention(bp, aidx));
    auto pooled = ops::weighted_pool(w->value, xv);
    for (int c = 0; c < d; ++c) {
        double mean = 0.0;
        for (int r = 0; r < n * n; ++r) mean += xv.at(r, c);
        mean /= n * n;
        EXPECT_NEAR(pooled[c], mean, 1e-14);
    }
}

TEST(AlstmStep, GradientMatchesFiniteDifferences) {
    ParamStore ps;
    Rng rng(8);
    const int n = 2, d = 3, k = 4;
    auto gidx = add_vector_gates(ps, "cell", d, k, rng);
    auto aidx = add_vector_attention(ps, "attn", d, k, rng);
    Tensor xv = random_tensor({n, n, d}, rng);

    auto run = [&](BoundParams& bp) {
        return ad::sum(alstm_step(ad::constant(xv), zero_state_vec(k),
                                  bind_vector_gates(bp, gidx), bind_vector_attention(bp, aidx))
                           .h);
    };
    auto forward = [&]() {
        BoundParams bp(ps);
        return run(bp)->value[0];
    };
    BoundParams bp(ps);
    ad::backward(run(bp));
    auto grads = collect_grads(bp);
    EXPECT_LT(max_fd_error(forward, param_ptrs(ps), const_ptrs(grads)), 1e-4);
}

TEST(ConvAttention, ZeroInputGivesUniformMap) {
    ParamStore ps;
    Rng rng(9);
    const int n = 5, d = 3, c = 4;
    auto idx = add_conv_attention(ps, "attn", 3, d, c, rng);
    BoundParams bp(ps);

    auto a = conv_attention(ad::constant(Tensor({n, n, d})), ad::constant(Tensor({n, n, c})),
                            bind_conv_attention(bp, idx));
    for (int i = 0; i < n * n; ++i) EXPECT_NEAR(a->value[i], 1.0 / (n * n), 1e-13);
}

// With 1×1 attention kernels every position applies the same map, so any
// spatially constant input scores uniformly.
TEST(ConvAttention, ConstantInputUniformUnderPointwiseKernels) {
    ParamStore ps;
    Rng rng(10);
    const int n = 4, d = 3, c = 4;
    auto idx = add_conv_attention(ps, "attn", 1, d, c, rng);
    BoundParams bp(ps);

    Tensor xv({n, n, d});
    for (int i = 0; i < n * n; ++i)
        for (int ch = 0; ch < d; ++ch) xv[i * d + ch] = 0.3 + 0.1 * ch;
    auto a = conv_attention(ad::constant(xv), ad::constant(Tensor({n, n, c})),
                            bind_conv_attention(bp, idx));
    for (int i = 0; i < n * n; ++i) EXPECT_NEAR(a->value[i], 1.0 / (n * n), 1e-13);
}

TEST(ConvAttention, SumsToOneOnRandomInputs) {
    ParamStore ps;
    Rng rng(11);
    const int n = 4, d = 3, c = 4;
    auto idx = add_conv_attention(ps, "attn", 3, d, c, rng);
    BoundParams bp(ps);
    auto attn = bind_conv_attention(bp, idx);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = conv_attention(ad::constant(random_tensor({n, n, d}, rng, -3.0, 3.0)),
                                ad::constant(random_tensor({n, n, c}, rng, -3.0, 3.0)), attn);
        ASSERT_NEAR(a->value.sum(), 1.0, 1e-12);
    }
}

// Shifting interior content by one cell shifts the interior of the attention
// map, as long as the content stays clear of the zero-padded borders.
TEST(ConvAttention, TranslationEquivarianceAwayFromBorders) {
    ParamStore ps;
    Rng rng(12);
    const int n = 9, d = 2, c = 3, margin = 2;
    auto idx = add_conv_attention(ps, "attn", 3, d, c, rng);
    BoundParams bp(ps);
    auto attn = bind_conv_attention(bp, idx);

    // Blob confined to rows/cols [3, 5]; after the shift it occupies [4, 6].
    Tensor xv({n, n, d}), hv({n, n, c});
    Rng blob(13);
    for (int i = 3; i <= 5; ++i)
        for (int j = 3; j <= 5; ++j) {
            for (int ch = 0; ch < d; ++ch) xv.at(i, j, ch) = blob.uniform(-1.0, 1.0);
            for (int ch = 0; ch < c; ++ch) hv.at(i, j, ch) = blob.uniform(-1.0, 1.0);
        }
    Tensor xs({n, n, d}), hs({n, n, c});
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            for (int ch = 0; ch < d; ++ch) xs.at(i, j, ch) = xv.at(i - 1, j, ch);
            for (int ch = 0; ch < c; ++ch) hs.at(i, j, ch) = hv.at(i - 1, j, ch);
        }

    auto a = conv_attention(ad::constant(xv), ad::constant(hv), attn);
    auto ashift = conv_attention(ad::constant(xs), ad::constant(hs), attn);
    for (int i = margin + 1; i < n - margin; ++i)
        for (int j = margin; j < n - margin; ++j)
            EXPECT_NEAR(ashift->value.at(i, j), a->value.at(i - 1, j), 1e-12);
}

// ConvLSTM at N=1 with 1×1 kernels is exactly the vector LSTM: a 1×1
// convolution over one pixel is the same dense product, entry for entry.
TEST(ConvLstmStep, StructurallyEquivalentToVectorLstm) {
    Rng rng(14);
    const int d = 3, k = 4;
    for (int draw = 0; draw < 5; ++draw) {
        ParamStore vec_ps, conv_ps;
        auto vidx = add_vector_gates(vec_ps, "cell", d, k, rng);
        auto cidx = add_conv_gates(conv_ps, "cell", 1, d, k, rng);
        // Copy the vector parameters into the 1×1 kernels; layouts agree
        // (input channel major, output channel minor).
        for (int g = 0; g < kNumGates; ++g) {
            conv_ps.value(cidx.wx[g]) = vec_ps.value(vidx.wx[g]).reshaped({1, 1, d, k});
            conv_ps.value(cidx.wh[g]) = vec_ps.value(vidx.wh[g]).reshaped({1, 1, k, k});
            conv_ps.value(cidx.b[g]) = vec_ps.value(vidx.b[g]);
        }
        Tensor xv = random_tensor({d}, rng);
        Tensor h0 = random_tensor({k}, rng);
        Tensor c0 = random_tensor({k}, rng);

        BoundParams vbp(vec_ps), cbp(conv_ps);
        auto vout = lstm_step(ad::constant(xv), {ad::constant(h0), ad::constant(c0)},
                              bind_vector_gates(vbp, vidx));
        auto cout_ = conv_lstm_step(ad::constant(xv.reshaped({1, 1, d})),
                                    {ad::constant(h0.reshaped({1, 1, k})),
                                     ad::constant(c0.reshaped({1, 1, k}))},
                                    bind_conv_gates(cbp, cidx));
        EXPECT_LT(max_abs_diff(vout.h->value, cout_.h->value.reshaped({k})), 1e-12);
        EXPECT_LT(max_abs_diff(vout.c->value, cout_.c->value.reshaped({k})), 1e-12);
    }
}

TEST(ConvLstmStep, ZeroParamsGiveZeroState) {
    ParamStore ps;
    Rng rng(15);
    auto idx = add_conv_gates(ps, "cell", 3, 2, 3, rng);
    zero_all(ps);
    BoundParams bp(ps);
    auto out = conv_lstm_step(ad::constant(random_tensor({4, 4, 2}, rng)), zero_state_map(4, 3),
                              bind_conv_gates(bp, idx));
    EXPECT_EQ(out.h->value.abs_max(), 0.0);
    EXPECT_EQ(out.h->value.shape(), (std::vector<int>{4, 4, 3}));
}

TEST(ConvLstmStep, GradientMatchesFiniteDifferences) {
    ParamStore ps;
    Rng rng(16);
    const int n = 3, d = 2, c = 3;
    auto idx = add_conv_gates(ps, "cell", 3, d, c, rng);
    Tensor xv = random_tensor({n, n, d}, rng);

    auto run = [&](BoundParams& bp) {
        return ad::sum(
            conv_lstm_step(ad::constant(xv), zero_state_map(n, c), bind_conv_gates(bp, idx)).h);
    };
    auto forward = [&]() {
        BoundParams bp(ps);
        return run(bp)->value[0];
    };
    BoundParams bp(ps);
    ad::backward(run(bp));
    auto grads = collect_grads(bp);
    EXPECT_LT(max_fd_error(forward, param_ptrs(ps), const_ptrs(grads)), 1e-4);
}

// First step from a zero state with constant input and pointwise attention
// kernels: uniform attention, so the update equals conv_lstm_step on X/N².
TEST(ConvAlstmStep, FirstStepReducesToScaledConvLstm) {
    ParamStore ps;
    Rng rng(17);
    const int n = 3, d = 2, c = 3;
    auto gidx = add_conv_gates(ps, "cell", 3, d, c, rng);
    auto aidx = add_conv_attention(ps, "attn", 1, d, c, rng);
    BoundParams bp(ps);
    auto gates = bind_conv_gates(bp, gidx);

    Tensor xv({n, n, d});
    for (int i = 0; i < n * n; ++i)
        for (int ch = 0; ch < d; ++ch) xv[i * d + ch] = 0.4 - 0.3 * ch;

    auto [state, amap] = conv_alstm_step(ad::constant(xv), zero_state_map(n, c), gates,
                                         bind_conv_attention(bp, aidx));
    for (int i = 0; i < n * n; ++i) EXPECT_NEAR(amap->value[i], 1.0 / (n * n), 1e-13);

    auto want = conv_lstm_step(ad::scale(ad::constant(xv), 1.0 / (n * n)), zero_state_map(n, c),
                               gates);
    EXPECT_LT(max_abs_diff(state.h->value, want.h->value), 1e-13);
}

TEST(ConvAlstmStep, GradientThroughAttentionPath) {
    ParamStore ps;
    Rng rng(18);
    const int n = 3, d = 2, c = 2;
    auto gidx = add_conv_gates(ps, "cell", 3, d, c, rng);
    auto aidx = add_conv_attention(ps, "attn", 3, d, c, rng);
    Tensor xv = random_tensor({n, n, d}, rng);
    Tensor h0 = random_tensor({n, n, c}, rng, -0.5, 0.5);
    Tensor c0 = random_tensor({n, n, c}, rng, -0.5, 0.5);

    auto run = [&](BoundParams& bp) {
        CellStateVar prev{ad::constant(h0), ad::constant(c0)};
        auto [state, amap] = conv_alstm_step(ad::constant(xv), prev, bind_conv_gates(bp, gidx),
                                             bind_conv_attention(bp, aidx));
        return ad::sum(state.h);
    };
    auto forward = [&]() {
        BoundParams bp(ps);
        return run(bp)->value[0];
    };
    BoundParams bp(ps);
    ad::backward(run(bp));
    auto grads = collect_grads(bp);
    EXPECT_LT(max_fd_error(forward, param_ptrs(ps), const_ptrs(grads)), 1e-4);
}

TEST(MotionLayerStep, ZeroParamsGiveZeroState) {
    ParamStore ps;
    Rng rng(19);
    auto idx = add_motion_gates(ps, "motion", 3, 2, 3, rng);
    zero_all(ps);
    BoundParams bp(ps);
    auto out = motion_layer_step(ad::constant(random_tensor({4, 4, 2}, rng)),
                                 zero_state_map(4, 3),
                                 ad::constant(random_tensor({4, 4, 3}, rng)),
                                 bind_motion_gates(bp, idx));
    EXPECT_EQ(out.h->value.abs_max(), 0.0);
}

// Zeroing the top-to-bottom kernels reduces the motion layer to a plain
// ConvLSTM step on the flow map.
TEST(MotionLayerStep, ZeroTopKernelsReduceToConvLstm) {
    ParamStore ps;
    Rng rng(20);
    const int n = 4, d = 2, c = 3;
    auto midx = add_motion_gates(ps, "motion", 3, d, c, rng);
    for (int g = 0; g < kNumGates; ++g)
        ps.value(midx.we[g]) = Tensor::zeros_like(ps.value(midx.we[g]));

    ParamStore conv_ps;
    Rng dummy(0);
    auto cidx = add_conv_gates(conv_ps, "cell", 3, d, c, dummy);
    for (int g = 0; g < kNumGates; ++g) {
        conv_ps.value(cidx.wx[g]) = ps.value(midx.wx[g]);
        conv_ps.value(cidx.wh[g]) = ps.value(midx.wh[g]);
        conv_ps.value(cidx.b[g]) = ps.value(midx.b[g]);
    }

    Tensor mv = random_tensor({n, n, d}, rng);
    Tensor h0 = random_tensor({n, n, c}, rng, -0.5, 0.5);
    Tensor c0 = random_tensor({n, n, c}, rng, -0.5, 0.5);
    Tensor htop = random_tensor({n, n, c}, rng);

    BoundParams mbp(ps), cbp(conv_ps);
    auto mout = motion_layer_step(ad::constant(mv), {ad::constant(h0), ad::constant(c0)},
                                  ad::constant(htop), bind_motion_gates(mbp, midx));
    auto cout_ = conv_lstm_step(ad::constant(mv), {ad::constant(h0), ad::constant(c0)},
                                bind_conv_gates(cbp, cidx));
    EXPECT_LT(max_abs_diff(mout.h->value, cout_.h->value), 1e-14);
}

TEST(MotionLayerStep, GradientIncludesTopStatePath) {
    ParamStore ps;
    Rng rng(21);
    const int n = 3, d = 2, c = 2;
    auto idx = add_motion_gates(ps, "motion", 3, d, c, rng);
    Tensor mv = random_tensor({n, n, d}, rng);
    Tensor htop = random_tensor({n, n, c}, rng);

    // h_top participates as a differentiable input alongside the params.
    ParamStore inputs;
    int hti = inputs.add("htop", htop);

    auto run = [&](BoundParams& bp, BoundParams& ibp) {
        return ad::sum(motion_layer_step(ad::constant(mv), zero_state_map(n, c), ibp[hti],
                                         bind_motion_gates(bp, idx))
                           .h);
    };
    auto forward = [&]() {
        BoundParams bp(ps), ibp(inputs);
        return run(bp, ibp)->value[0];
    };
    BoundParams bp(ps), ibp(inputs);
    ad::backward(run(bp, ibp));
    auto grads = collect_grads(bp);
    auto igrads = collect_grads(ibp);

    EXPECT_LT(max_fd_error(forward, param_ptrs(ps), const_ptrs(grads)), 1e-4);
    EXPECT_LT(max_fd_error(forward, param_ptrs(inputs), const_ptrs(igrads)), 1e-4);
}

// With a zeroed bottom layer the motion hidden state is 0, so the attention
// must match conv_attention against a zero conditioning map.
TEST(VideoLstmStep, ZeroBottomParamsReduceAttention) {
    ParamStore ps;
    Rng rng(22);
    const int n = 4, d = 2, c = 3;
    auto tidx = add_conv_gates(ps, "top", 3, d, c, rng);
    auto midx = add_motion_gates(ps, "motion", 3, d, c, rng);
    auto aidx = add_conv_attention(ps, "attn", 3, d, c, rng);
    for (int g = 0; g < kNumGates; ++g) {
        ps.value(midx.wx[g]) = Tensor::zeros_like(ps.value(midx.wx[g]));
        ps.value(midx.wh[g]) = Tensor::zeros_like(ps.value(midx.wh[g]));
        ps.value(midx.we[g]) = Tensor::zeros_like(ps.value(midx.we[g]));
        ps.value(midx.b[g]) = Tensor::zeros_like(ps.value(midx.b[g]));
    }

    BoundParams bp(ps);
    Tensor xv = random_tensor({n, n, d}, rng);
    Tensor mv = random_tensor({n, n, d}, rng);
    auto out = videolstm_step(ad::constant(xv), ad::constant(mv), zero_state_map(n, c),
                              zero_state_map(n, c), bind_conv_gates(bp, tidx),
                              bind_motion_gates(bp, midx), bind_conv_attention(bp, aidx));
    EXPECT_EQ(out.bottom.h->value.abs_max(), 0.0);

    auto ref = conv_attention(ad::constant(xv), ad::constant(Tensor({n, n, c})),
                              bind_conv_attention(bp, aidx));
    EXPECT_LT(max_abs_diff(out.attention->value, ref->value), 1e-14);
    EXPECT_NEAR(out.attention->value.sum(), 1.0, 1e-12);
}

TEST(VideoLstmStep, UnrolledGradientMatchesFiniteDifferences) {
    ParamStore ps;
    Rng rng(23);
    const int n = 3, d = 2, c = 2, steps = 3;
    auto tidx = add_conv_gates(ps, "top", 3, d, c, rng);
    auto midx = add_motion_gates(ps, "motion", 3, d, c, rng);
    auto aidx = add_conv_attention(ps, "attn", 3, d, c, rng);

    std::vector<Tensor> xs, ms;
    for (int t = 0; t < steps; ++t) {
        xs.push_back(random_tensor({n, n, d}, rng));
        ms.push_back(random_tensor({n, n, d}, rng));
    }

    auto run = [&](BoundParams& bp) {
        auto top_gates = bind_conv_gates(bp, tidx);
        auto motion_gates = bind_motion_gates(bp, midx);
        auto attn = bind_conv_attention(bp, aidx);
        CellStateVar top = zero_state_map(n, c), bottom = zero_state_map(n, c);
        ad::Var loss;
        for (int t = 0; t < steps; ++t) {
            auto out = videolstm_step(ad::constant(xs[static_cast<size_t>(t)]),
                                      ad::constant(ms[static_cast<size_t>(t)]), top, bottom,
                                      top_gates, motion_gates, attn);
            top = out.top;
            bottom = out.bottom;
            auto term = ad::sum(out.top.h);
            loss = loss ? ad::add(loss, term) : term;
        }
        return loss;
    };
    auto forward = [&]() {
        BoundParams bp(ps);
        return run(bp)->value[0];
    };
    BoundParams bp(ps);
    ad::backward(run(bp));
    auto grads = collect_grads(bp);
    EXPECT_LT(max_fd_error(forward, param_ptrs(ps), const_ptrs(grads)), 1e-4);
}

// |C_t| ≤ |C_{t−1}| + 1 entrywise: the forget gate shrinks the old memory
// and the gated candidate is bounded by 1.
TEST(CellProperties, MemoryGrowthBound) {
    ParamStore ps;
    Rng rng(24);
    const int n = 4, d = 3, c = 3;
    auto idx = add_conv_gates(ps, "cell", 3, d, c, rng);
    BoundParams bp(ps);
    auto gates = bind_conv_gates(bp, idx);

    CellStateVar state = zero_state_map(n, c);
    for (int t = 0; t < 8; ++t) {
        auto next = conv_lstm_step(ad::constant(random_tensor({n, n, d}, rng, -4.0, 4.0)),
                                   state, gates);
        for (int i = 0; i < next.c->value.size(); ++i)
            ASSERT_LE(std::fabs(next.c->value[i]), std::fabs(state.c->value[i]) + 1.0 + 1e-12);
        ASSERT_EQ(next.h->value.shape(), (std::vector<int>{n, n, c}));
        ASSERT_EQ(next.c->value.shape(), (std::vector<int>{n, n, c}));
        state = next;
    }
}

TEST(CellProperties, SeededBuildsAreBitwiseIdentical) {
    auto build = [](uint64_t seed) {
        ParamStore ps;
        Rng rng(seed);
        auto idx = add_conv_gates(ps, "cell", 3, 2, 3, rng);
        BoundParams bp(ps);
        Rng input_rng(seed + 1);
        auto out = conv_lstm_step(ad::constant(input_rng.uniform_tensor({4, 4, 2}, -1.0, 1.0)),
                                  zero_state_map(4, 3), bind_conv_gates(bp, idx));
        return out.h->value;
    };
    Tensor a = build(99), b = build(99);
    for (int i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
}
