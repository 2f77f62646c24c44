#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "videolstm/tensor.hpp"

// Plain forward and backward kernels on Tensor. The autodiff graph wraps
// these; gradient-free code paths (inference, localization) call them
// directly so forward math has a single definition.
namespace vlsm::ops {

inline void check(bool cond, const char* msg) {
    if (!cond) throw ShapeError(msg);
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline double sigmoid_scalar(double x) {
    // Split on sign to avoid exp overflow.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& a) {
    Tensor y = Tensor::zeros_like(a);
    for (int i = 0; i < a.size(); ++i) y[i] = sigmoid_scalar(a[i]);
    return y;
}

inline Tensor tanh(const Tensor& a) {
    Tensor y = Tensor::zeros_like(a);
    for (int i = 0; i < a.size(); ++i) y[i] = std::tanh(a[i]);
    return y;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "add: shape mismatch");
    Tensor y = a;
    for (int i = 0; i < a.size(); ++i) y[i] += b[i];
    return y;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "sub: shape mismatch");
    Tensor y = a;
    for (int i = 0; i < a.size(); ++i) y[i] -= b[i];
    return y;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "hadamard: shape mismatch");
    Tensor y = a;
    for (int i = 0; i < a.size(); ++i) y[i] *= b[i];
    return y;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor y = a;
    for (int i = 0; i < a.size(); ++i) y[i] *= s;
    return y;
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

// Softmax over all entries, computed with max subtraction.
inline Tensor softmax_all(const Tensor& z) {
    Tensor y = Tensor::zeros_like(z);
    double m = z[0];
    for (int i = 1; i < z.size(); ++i) m = std::max(m, z[i]);
    double total = 0.0;
    for (int i = 0; i < z.size(); ++i) {
        y[i] = std::exp(z[i] - m);
        total += y[i];
    }
    for (int i = 0; i < z.size(); ++i) y[i] /= total;
    return y;
}

inline Tensor spatial_softmax(const Tensor& z) {
    check(z.ndim() == 2, "spatial_softmax: expects a 2-d map");
    return softmax_all(z);
}

inline Tensor softmax_vec(const Tensor& z) {
    check(z.ndim() == 1, "softmax_vec: expects a vector");
    return softmax_all(z);
}

// dz = y ⊙ (g − <g, y>)
inline Tensor softmax_backward(const Tensor& y, const Tensor& g) {
    double dot = 0.0;
    for (int i = 0; i < y.size(); ++i) dot += g[i] * y[i];
    Tensor dz = Tensor::zeros_like(y);
    for (int i = 0; i < y.size(); ++i) dz[i] = y[i] * (g[i] - dot);
    return dz;
}

// ---------------------------------------------------------------------------
// Dense / matmul
// ---------------------------------------------------------------------------

inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    check(x.ndim() == 1 && w.ndim() == 2 && b.ndim() == 1, "dense: bad ranks");
    const int d = x.extent(0), e = w.extent(1);
    check(w.extent(0) == d, "dense: weight rows != input dim");
    check(b.extent(0) == e, "dense: bias dim != output dim");
    Tensor y = b;
    for (int i = 0; i < d; ++i) {
        const double a = x[i];
        const double* wrow = w.data() + static_cast<size_t>(i) * e;
        double* yp = y.data();
        for (int j = 0; j < e; ++j) yp[j] += a * wrow[j];
    }
    return y;
}

inline void dense_backward(const Tensor& x, const Tensor& w, const Tensor& g,
                           Tensor& dx, Tensor& dw, Tensor& db) {
    const int d = x.extent(0), e = w.extent(1);
    for (int i = 0; i < d; ++i) {
        const double a = x[i];
        const double* wrow = w.data() + static_cast<size_t>(i) * e;
        double* dwrow = dw.data() + static_cast<size_t>(i) * e;
        double acc = 0.0;
        for (int j = 0; j < e; ++j) {
            acc += wrow[j] * g[j];
            dwrow[j] += a * g[j];
        }
        dx[i] += acc;
    }
    for (int j = 0; j < e; ++j) db[j] += g[j];
}

// X: R×D, W: D×E -> R×E
inline Tensor matmul(const Tensor& x, const Tensor& w) {
    check(x.ndim() == 2 && w.ndim() == 2, "matmul: bad ranks");
    const int r = x.extent(0), d = x.extent(1), e = w.extent(1);
    check(w.extent(0) == d, "matmul: inner dims disagree");
    Tensor y({r, e});
    for (int i = 0; i < r; ++i) {
        const double* xrow = x.data() + static_cast<size_t>(i) * d;
        double* yrow = y.data() + static_cast<size_t>(i) * e;
        for (int k = 0; k < d; ++k) {
            const double a = xrow[k];
            const double* wrow = w.data() + static_cast<size_t>(k) * e;
            for (int j = 0; j < e; ++j) yrow[j] += a * wrow[j];
        }
    }
    return y;
}

inline void matmul_backward(const Tensor& x, const Tensor& w, const Tensor& g,
                            Tensor& dx, Tensor& dw) {
    const int r = x.extent(0), d = x.extent(1), e = w.extent(1);
    for (int i = 0; i < r; ++i) {
        const double* xrow = x.data() + static_cast<size_t>(i) * d;
        const double* grow = g.data() + static_cast<size_t>(i) * e;
        double* dxrow = dx.data() + static_cast<size_t>(i) * d;
        for (int k = 0; k < d; ++k) {
            const double* wrow = w.data() + static_cast<size_t>(k) * e;
            double* dwrow = dw.data() + static_cast<size_t>(k) * e;
            const double a = xrow[k];
            double acc = 0.0;
            for (int j = 0; j < e; ++j) {
                acc += wrow[j] * grow[j];
                dwrow[j] += a * grow[j];
            }
            dxrow[k] += acc;
        }
    }
}

// ---------------------------------------------------------------------------
// Convolution, "same" zero padding, odd square kernels
// ---------------------------------------------------------------------------

inline void conv2d_validate(const Tensor& in, const Tensor& kernel, const Tensor& bias) {
    check(in.ndim() == 3, "conv2d: input must be H×W×Cin");
    check(kernel.ndim() == 4, "conv2d: kernel must be k×k×Cin×Cout");
    check(bias.ndim() == 1, "conv2d: bias must be a vector");
    const int k = kernel.extent(0);
    if (kernel.extent(1) != k) throw ShapeError("conv2d: kernel not square");
    if (k % 2 == 0) throw ConfigError("conv2d: kernel size must be odd");
    check(kernel.extent(2) == in.extent(2), "conv2d: channel mismatch between input and kernel");
    check(bias.extent(0) == kernel.extent(3), "conv2d: bias dim != output channels");
}

inline Tensor conv2d(const Tensor& in, const Tensor& kernel, const Tensor& bias) {
    conv2d_validate(in, kernel, bias);
    const int h = in.extent(0), w = in.extent(1), cin = in.extent(2);
    const int k = kernel.extent(0), cout = kernel.extent(3);
    const int p = (k - 1) / 2;
    Tensor out({h, w, cout});
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double* op = out.data() + (static_cast<size_t>(i) * w + j) * cout;
            for (int c = 0; c < cout; ++c) op[c] = bias[c];
            const int u0 = std::max(0, p - i), u1 = std::min(k, h + p - i);
            const int v0 = std::max(0, p - j), v1 = std::min(k, w + p - j);
            for (int u = u0; u < u1; ++u) {
                const int y = i + u - p;
                for (int v = v0; v < v1; ++v) {
                    const int x = j + v - p;
                    const double* ip = in.data() + (static_cast<size_t>(y) * w + x) * cin;
                    const double* kp =
                        kernel.data() + (static_cast<size_t>(u) * k + v) * cin * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double a = ip[ci];
                        const double* krow = kp + static_cast<size_t>(ci) * cout;
                        for (int c = 0; c < cout; ++c) op[c] += a * krow[c];
                    }
                }
            }
        }
    }
    return out;
}

inline void conv2d_backward(const Tensor& in, const Tensor& kernel, const Tensor& g,
                            Tensor& din, Tensor& dkernel, Tensor& dbias) {
    const int h = in.extent(0), w = in.extent(1), cin = in.extent(2);
    const int k = kernel.extent(0), cout = kernel.extent(3);
    const int p = (k - 1) / 2;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double* gp = g.data() + (static_cast<size_t>(i) * w + j) * cout;
            for (int c = 0; c < cout; ++c) dbias[c] += gp[c];
            const int u0 = std::max(0, p - i), u1 = std::min(k, h + p - i);
            const int v0 = std::max(0, p - j), v1 = std::min(k, w + p - j);
            for (int u = u0; u < u1; ++u) {
                const int y = i + u - p;
                for (int v = v0; v < v1; ++v) {
                    const int x = j + v - p;
                    const size_t px = (static_cast<size_t>(y) * w + x) * cin;
                    const size_t kofs = (static_cast<size_t>(u) * k + v) * cin * cout;
                    const double* ip = in.data() + px;
                    double* dip = din.data() + px;
                    const double* kp = kernel.data() + kofs;
                    double* dkp = dkernel.data() + kofs;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double a = ip[ci];
                        const double* krow = kp + static_cast<size_t>(ci) * cout;
                        double* dkrow = dkp + static_cast<size_t>(ci) * cout;
                        double acc = 0.0;
                        for (int c = 0; c < cout; ++c) {
                            acc += krow[c] * gp[c];
                            dkrow[c] += a * gp[c];
                        }
                        dip[ci] += acc;
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 2×2 max pooling, stride 2
// ---------------------------------------------------------------------------

inline Tensor maxpool2(const Tensor& in, std::vector<int>* argmax = nullptr) {
    check(in.ndim() == 3, "maxpool2: input must be H×W×C");
    const int h = in.extent(0), w = in.extent(1), c = in.extent(2);
    if (h % 2 != 0 || w % 2 != 0)
        throw ConfigError("maxpool2: spatial extents must be even");
    Tensor out({h / 2, w / 2, c});
    if (argmax) argmax->assign(static_cast<size_t>(out.size()), 0);
    int o = 0;
    for (int i = 0; i < h; i += 2) {
        for (int j = 0; j < w; j += 2) {
            for (int ch = 0; ch < c; ++ch, ++o) {
                int best = (i * w + j) * c + ch;
                double bv = in[best];
                const int cand[3] = {(i * w + j + 1) * c + ch, ((i + 1) * w + j) * c + ch,
                                     ((i + 1) * w + j + 1) * c + ch};
                for (int idx : cand) {
                    if (in[idx] > bv) {
                        bv = in[idx];
                        best = idx;
                    }
                }
                out[o] = bv;
                if (argmax) (*argmax)[static_cast<size_t>(o)] = best;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Attention application
// ---------------------------------------------------------------------------

// X̃(i,j,c) = A(i,j)·X(i,j,c)
inline Tensor apply_attention(const Tensor& a, const Tensor& x) {
    check(a.ndim() == 2 && x.ndim() == 3, "apply_attention: A must be 2-d, X 3-d");
    check(a.extent(0) == x.extent(0) && a.extent(1) == x.extent(1),
          "apply_attention: spatial extents disagree");
    const int c = x.extent(2);
    Tensor y = Tensor::zeros_like(x);
    for (int i = 0; i < a.size(); ++i) {
        const double av = a[i];
        const double* xp = x.data() + static_cast<size_t>(i) * c;
        double* yp = y.data() + static_cast<size_t>(i) * c;
        for (int ch = 0; ch < c; ++ch) yp[ch] = av * xp[ch];
    }
    return y;
}

// x̃_d = Σ_r w_r X(r,d) — the ALSTM expectation pooling.
inline Tensor weighted_pool(const Tensor& wgt, const Tensor& x) {
    check(wgt.ndim() == 1 && x.ndim() == 2, "weighted_pool: bad ranks");
    check(wgt.extent(0) == x.extent(0), "weighted_pool: region counts disagree");
    const int r = x.extent(0), d = x.extent(1);
    Tensor y({d});
    for (int i = 0; i < r; ++i) {
        const double a = wgt[i];
        const double* xrow = x.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) y[j] += a * xrow[j];
    }
    return y;
}

}  // namespace vlsm::ops
