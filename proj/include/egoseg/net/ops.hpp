#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "egoseg/net/tensor.hpp"

// Forward/backward kernels. Everything here is a plain function of its arguments; the autograd
// layer (autograd.hpp) wires them together.
namespace egoseg::net {

// ---------------------------------------------------------------------------------------------
// GEMM variants, all accumulating into C.

/// C[MxN] += A[MxK] * B[KxN]
template <class T>
void gemm_nn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc) {
    for (int i = 0; i < M; ++i) {
        T* c = C + static_cast<std::size_t>(i) * ldc;
        const T* a = A + static_cast<std::size_t>(i) * lda;
        for (int k = 0; k < K; ++k) {
            const T av = a[k];
            if (av == T(0)) continue;
            const T* b = B + static_cast<std::size_t>(k) * ldb;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

/// C[MxN] += A[MxK] * B[NxK]^T
template <class T>
void gemm_nt(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc) {
    for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<std::size_t>(i) * lda;
        T* c = C + static_cast<std::size_t>(i) * ldc;
        for (int j = 0; j < N; ++j) {
            const T* b = B + static_cast<std::size_t>(j) * ldb;
            T acc = 0;
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] += acc;
        }
    }
}

/// C[MxN] += A[KxM]^T * B[KxN]
template <class T>
void gemm_tn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc) {
    for (int k = 0; k < K; ++k) {
        const T* a = A + static_cast<std::size_t>(k) * lda;
        const T* b = B + static_cast<std::size_t>(k) * ldb;
        for (int i = 0; i < M; ++i) {
            const T av = a[i];
            if (av == T(0)) continue;
            T* c = C + static_cast<std::size_t>(i) * ldc;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// ---------------------------------------------------------------------------------------------
// im2col geometry

struct ConvGeom {
    int c = 0, h = 0, w = 0; // input planes
    int k = 1, stride = 1, pad = 0, dil = 1;
    int ho = 0, wo = 0;

    int col_rows() const { return c * k * k; }
    bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

inline ConvGeom conv_geom(int c, int h, int w, int k, int stride, int pad, int dil) {
    require(k >= 1 && stride >= 1 && pad >= 0 && dil >= 1, ErrorKind::InvalidArgument,
            "conv: kernel, stride and dilation must be >= 1 and pad >= 0");
    ConvGeom g{c, h, w, k, stride, pad, dil, 0, 0};
    g.ho = (h + 2 * pad - dil * (k - 1) - 1) / stride + 1;
    g.wo = (w + 2 * pad - dil * (k - 1) - 1) / stride + 1;
    require(h + 2 * pad - dil * (k - 1) - 1 >= 0 && w + 2 * pad - dil * (k - 1) - 1 >= 0 && g.ho > 0 && g.wo > 0,
            ErrorKind::InvalidArgument,
            "conv: output would be empty for input " + std::to_string(h) + "x" + std::to_string(w) + " kernel " +
                std::to_string(k) + " dilation " + std::to_string(dil) + " pad " + std::to_string(pad));
    return g;
}

/// Unfolds output rows [r0, r1) of one image into col[c*k*k x (r1-r0)*wo].
template <class T>
void im2col(const T* x, const ConvGeom& g, int r0, int r1, T* col) {
    const int P = (r1 - r0) * g.wo;
    const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
    for (int ci = 0; ci < g.c; ++ci) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                T* dst = col + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * P;
                const T* src = x + ci * hw;
                for (int oy = r0; oy < r1; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky * g.dil;
                    T* row = dst + static_cast<std::size_t>(oy - r0) * g.wo;
                    if (iy < 0 || iy >= g.h) {
                        std::fill(row, row + g.wo, T(0));
                        continue;
                    }
                    const T* srow = src + static_cast<std::size_t>(iy) * g.w;
                    for (int ox = 0; ox < g.wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx * g.dil;
                        row[ox] = (ix >= 0 && ix < g.w) ? srow[ix] : T(0);
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatters col back into x (accumulating).
template <class T>
void col2im(const T* col, const ConvGeom& g, int r0, int r1, T* x) {
    const int P = (r1 - r0) * g.wo;
    const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
    for (int ci = 0; ci < g.c; ++ci) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const T* src = col + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * P;
                T* dst = x + ci * hw;
                for (int oy = r0; oy < r1; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky * g.dil;
                    if (iy < 0 || iy >= g.h) continue;
                    const T* row = src + static_cast<std::size_t>(oy - r0) * g.wo;
                    T* drow = dst + static_cast<std::size_t>(iy) * g.w;
                    for (int ox = 0; ox < g.wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx * g.dil;
                        if (ix >= 0 && ix < g.w) drow[ix] += row[ox];
                    }
                }
            }
        }
    }
}

/// Output rows per im2col chunk, keeping the column buffer around 2M elements.
inline int rows_per_chunk(const ConvGeom& g) {
    const std::size_t per_row = static_cast<std::size_t>(g.col_rows()) * g.wo;
    return static_cast<int>(std::clamp<std::size_t>((std::size_t{1} << 21) / std::max<std::size_t>(per_row, 1), 1, g.ho));
}

// ---------------------------------------------------------------------------------------------
// Convolution. Weights are (Cout, Cin, k, k); bias is (Cout,1,1,1) or empty.

struct ConvSpec {
    int stride = 1;
    int pad = 0;
    int dilation = 1;
};

template <class T>
ConvGeom check_conv(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b, const ConvSpec& s) {
    require_shape(w.c() == x.c() && w.h() == w.w(), "conv2d input/weight", x.shape, w.shape);
    if (!b.empty()) require_shape(static_cast<int>(b.size()) == w.n(), "conv2d weight/bias", w.shape, b.shape);
    return conv_geom(x.c(), x.h(), x.w(), w.h(), s.stride, s.pad, s.dilation);
}

template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b, const ConvSpec& s) {
    const ConvGeom g = check_conv(x, w, b, s);
    const int cout = w.n(), ck = g.col_rows();
    const int plane = g.ho * g.wo;
    Tensor4<T> y(x.n(), cout, g.ho, g.wo);
    std::vector<T> col;
    const int chunk = rows_per_chunk(g);
    for (int n = 0; n < x.n(); ++n) {
        T* yn = y.plane(n, 0);
        if (!b.empty())
            for (int co = 0; co < cout; ++co) std::fill(yn + static_cast<std::size_t>(co) * plane, yn + static_cast<std::size_t>(co + 1) * plane, b.data[co]);
        if (g.pointwise()) {
            gemm_nn(cout, plane, ck, w.data.data(), ck, x.plane(n, 0), plane, yn, plane);
            continue;
        }
        for (int r0 = 0; r0 < g.ho; r0 += chunk) {
            const int r1 = std::min(g.ho, r0 + chunk);
            const int P = (r1 - r0) * g.wo;
            col.resize(static_cast<std::size_t>(ck) * P);
            im2col(x.plane(n, 0), g, r0, r1, col.data());
            gemm_nn(cout, P, ck, w.data.data(), ck, col.data(), P, yn + static_cast<std::size_t>(r0) * g.wo, plane);
        }
    }
    return y;
}

template <class T>
struct ConvGrads {
    Tensor4<T> dx, dw, db;
};

template <class T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& w, bool has_bias, const Tensor4<T>& dy,
                             const ConvSpec& s) {
    const ConvGeom g = check_conv(x, w, Tensor4<T>{}, s);
    require_shape(dy.n() == x.n() && dy.c() == w.n() && dy.h() == g.ho && dy.w() == g.wo, "conv2d_backward dy", dy.shape,
                  Shape4{x.n(), w.n(), g.ho, g.wo});
    const int cout = w.n(), ck = g.col_rows();
    const int plane = g.ho * g.wo;
    ConvGrads<T> gr{Tensor4<T>(x.shape), Tensor4<T>(w.shape), has_bias ? Tensor4<T>(cout, 1, 1, 1) : Tensor4<T>{}};
    std::vector<T> col, dcol;
    const int chunk = rows_per_chunk(g);
    for (int n = 0; n < x.n(); ++n) {
        const T* dyn = dy.plane(n, 0);
        if (has_bias)
            for (int co = 0; co < cout; ++co) {
                T acc = 0;
                for (int i = 0; i < plane; ++i) acc += dyn[static_cast<std::size_t>(co) * plane + i];
                gr.db.data[co] += acc;
            }
        if (g.pointwise()) {
            gemm_nt(cout, ck, plane, dyn, plane, x.plane(n, 0), plane, gr.dw.data.data(), ck);
            gemm_tn(ck, plane, cout, w.data.data(), ck, dyn, plane, gr.dx.plane(n, 0), plane);
            continue;
        }
        for (int r0 = 0; r0 < g.ho; r0 += chunk) {
            const int r1 = std::min(g.ho, r0 + chunk);
            const int P = (r1 - r0) * g.wo;
            col.resize(static_cast<std::size_t>(ck) * P);
            dcol.assign(static_cast<std::size_t>(ck) * P, T(0));
            im2col(x.plane(n, 0), g, r0, r1, col.data());
            const T* dyc = dyn + static_cast<std::size_t>(r0) * g.wo;
            gemm_nt(cout, ck, P, dyc, plane, col.data(), P, gr.dw.data.data(), ck);
            gemm_tn(ck, P, cout, w.data.data(), ck, dyc, plane, dcol.data(), P);
            col2im(dcol.data(), g, r0, r1, gr.dx.plane(n, 0));
        }
    }
    return gr;
}

// ---------------------------------------------------------------------------------------------
// Transposed convolution. Weights are (Cin, Cout, k, k); output is (H-1)*s - 2p + d(k-1) + 1.

template <class T>
ConvGeom deconv_geom(const Tensor4<T>& x, const Tensor4<T>& w, const ConvSpec& s) {
    require_shape(w.n() == x.c() && w.h() == w.w(), "deconv2d input/weight", x.shape, w.shape);
    const int ho = (x.h() - 1) * s.stride - 2 * s.pad + s.dilation * (w.h() - 1) + 1;
    const int wo = (x.w() - 1) * s.stride - 2 * s.pad + s.dilation * (w.h() - 1) + 1;
    require(ho > 0 && wo > 0, ErrorKind::InvalidArgument, "deconv2d: empty output");
    // The adjoint convolution maps the deconv output back onto the input grid.
    const ConvGeom g = conv_geom(w.c(), ho, wo, w.h(), s.stride, s.pad, s.dilation);
    require(g.ho == x.h() && g.wo == x.w(), ErrorKind::InvalidArgument, "deconv2d: inconsistent geometry");
    return g;
}

template <class T>
Tensor4<T> deconv2d_forward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b, const ConvSpec& s) {
    const ConvGeom g = deconv_geom(x, w, s);
    const int cin = w.n(), cout = w.c(), ck = g.col_rows();
    if (!b.empty()) require_shape(static_cast<int>(b.size()) == cout, "deconv2d weight/bias", w.shape, b.shape);
    const int in_plane = x.h() * x.w();
    Tensor4<T> y(x.n(), cout, g.h, g.w);
    std::vector<T> col;
    const int chunk = rows_per_chunk(g);
    for (int n = 0; n < x.n(); ++n) {
        for (int r0 = 0; r0 < g.ho; r0 += chunk) {
            const int r1 = std::min(g.ho, r0 + chunk);
            const int P = (r1 - r0) * g.wo;
            col.assign(static_cast<std::size_t>(ck) * P, T(0));
            gemm_tn(ck, P, cin, w.data.data(), ck, x.plane(n, 0) + static_cast<std::size_t>(r0) * g.wo, in_plane, col.data(), P);
            col2im(col.data(), g, r0, r1, y.plane(n, 0));
        }
        if (!b.empty())
            for (int co = 0; co < cout; ++co) {
                T* p = y.plane(n, co);
                for (int i = 0; i < g.h * g.w; ++i) p[i] += b.data[co];
            }
    }
    return y;
}

template <class T>
ConvGrads<T> deconv2d_backward(const Tensor4<T>& x, const Tensor4<T>& w, bool has_bias, const Tensor4<T>& dy,
                               const ConvSpec& s) {
    const ConvGeom g = deconv_geom(x, w, s);
    const int cin = w.n(), cout = w.c(), ck = g.col_rows();
    require_shape(dy.n() == x.n() && dy.c() == cout && dy.h() == g.h && dy.w() == g.w, "deconv2d_backward dy", dy.shape,
                  Shape4{x.n(), cout, g.h, g.w});
    const int in_plane = x.h() * x.w();
    ConvGrads<T> gr{Tensor4<T>(x.shape), Tensor4<T>(w.shape), has_bias ? Tensor4<T>(cout, 1, 1, 1) : Tensor4<T>{}};
    std::vector<T> dcol;
    const int chunk = rows_per_chunk(g);
    for (int n = 0; n < x.n(); ++n) {
        if (has_bias)
            for (int co = 0; co < cout; ++co) {
                const T* p = dy.plane(n, co);
                T acc = 0;
                for (int i = 0; i < g.h * g.w; ++i) acc += p[i];
                gr.db.data[co] += acc;
            }
        for (int r0 = 0; r0 < g.ho; r0 += chunk) {
            const int r1 = std::min(g.ho, r0 + chunk);
            const int P = (r1 - r0) * g.wo;
            dcol.resize(static_cast<std::size_t>(ck) * P);
            im2col(dy.plane(n, 0), g, r0, r1, dcol.data());
            const std::size_t off = static_cast<std::size_t>(r0) * g.wo;
            gemm_nn(cin, P, ck, w.data.data(), ck, dcol.data(), P, gr.dx.plane(n, 0) + off, in_plane);
            gemm_nt(cin, ck, P, x.plane(n, 0) + off, in_plane, dcol.data(), P, gr.dw.data.data(), ck);
        }
    }
    return gr;
}

// ---------------------------------------------------------------------------------------------
// Batch normalisation over (N, H, W) per channel.

template <class T>
struct BatchNormCache {
    std::vector<T> inv_std;
    Tensor4<T> xhat;
};

template <class T>
void check_bn(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta) {
    require(static_cast<int>(gamma.size()) == x.c() && static_cast<int>(beta.size()) == x.c(), ErrorKind::InvalidArgument,
            "batchnorm: " + std::to_string(gamma.size()) + " parameters for " + std::to_string(x.c()) + " channels");
}

/// Normalises with batch statistics and folds them into the running estimates
/// (running = (1-momentum)*running + momentum*batch, unbiased variance).
template <class T>
Tensor4<T> batchnorm_forward_train(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta,
                                   std::span<T> running_mean, std::span<T> running_var, T momentum, T eps,
                                   BatchNormCache<T>* cache) {
    check_bn(x, gamma, beta);
    const int C = x.c();
    const std::size_t hw = static_cast<std::size_t>(x.h()) * x.w();
    const std::size_t m = hw * x.n();
    Tensor4<T> y(x.shape);
    if (cache) {
        cache->inv_std.assign(C, T(0));
        cache->xhat = Tensor4<T>(x.shape);
    }
    for (int c = 0; c < C; ++c) {
        T mean = 0;
        for (int n = 0; n < x.n(); ++n) {
            const T* p = x.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) mean += p[i];
        }
        mean /= static_cast<T>(m);
        T var = 0;
        for (int n = 0; n < x.n(); ++n) {
            const T* p = x.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
        }
        var /= static_cast<T>(m);
        const T inv = T(1) / std::sqrt(var + eps);
        for (int n = 0; n < x.n(); ++n) {
            const T* p = x.plane(n, c);
            T* q = y.plane(n, c);
            T* xh = cache ? cache->xhat.plane(n, c) : nullptr;
            for (std::size_t i = 0; i < hw; ++i) {
                const T v = (p[i] - mean) * inv;
                if (xh) xh[i] = v;
                q[i] = gamma[c] * v + beta[c];
            }
        }
        if (cache) cache->inv_std[c] = inv;
        if (!running_mean.empty()) {
            const T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
            running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean;
            running_var[c] = (T(1) - momentum) * running_var[c] + momentum * unbiased;
        }
    }
    return y;
}

template <class T>
struct BatchNormGrads {
    Tensor4<T> dx;
    std::vector<T> dgamma, dbeta;
};

template <class T>
BatchNormGrads<T> batchnorm_backward_train(const Tensor4<T>& dy, std::span<const T> gamma, const BatchNormCache<T>& cache) {
    const int C = dy.c();
    const std::size_t hw = static_cast<std::size_t>(dy.h()) * dy.w();
    const T m = static_cast<T>(hw * dy.n());
    BatchNormGrads<T> g{Tensor4<T>(dy.shape), std::vector<T>(C, T(0)), std::vector<T>(C, T(0))};
    for (int c = 0; c < C; ++c) {
        T sum_dy = 0, sum_dy_xhat = 0;
        for (int n = 0; n < dy.n(); ++n) {
            const T* d = dy.plane(n, c);
            const T* xh = cache.xhat.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
                sum_dy += d[i];
                sum_dy_xhat += d[i] * xh[i];
            }
        }
        g.dgamma[c] = sum_dy_xhat;
        g.dbeta[c] = sum_dy;
        const T k = gamma[c] * cache.inv_std[c] / m;
        for (int n = 0; n < dy.n(); ++n) {
            const T* d = dy.plane(n, c);
            const T* xh = cache.xhat.plane(n, c);
            T* dx = g.dx.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) dx[i] = k * (m * d[i] - sum_dy - xh[i] * sum_dy_xhat);
        }
    }
    return g;
}

template <class T>
Tensor4<T> batchnorm_forward_eval(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta,
                                  std::span<const T> running_mean, std::span<const T> running_var, T eps) {
    check_bn(x, gamma, beta);
    const std::size_t hw = static_cast<std::size_t>(x.h()) * x.w();
    Tensor4<T> y(x.shape);
    for (int c = 0; c < x.c(); ++c) {
        const T inv = T(1) / std::sqrt(running_var[c] + eps);
        const T scale = gamma[c] * inv, shift = beta[c] - running_mean[c] * scale;
        for (int n = 0; n < x.n(); ++n) {
            const T* p = x.plane(n, c);
            T* q = y.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) q[i] = p[i] * scale + shift;
        }
    }
    return y;
}

template <class T>
BatchNormGrads<T> batchnorm_backward_eval(const Tensor4<T>& x, const Tensor4<T>& dy, std::span<const T> gamma,
                                          std::span<const T> running_mean, std::span<const T> running_var, T eps) {
    const int C = x.c();
    const std::size_t hw = static_cast<std::size_t>(x.h()) * x.w();
    BatchNormGrads<T> g{Tensor4<T>(x.shape), std::vector<T>(C, T(0)), std::vector<T>(C, T(0))};
    for (int c = 0; c < C; ++c) {
        const T inv = T(1) / std::sqrt(running_var[c] + eps);
        for (int n = 0; n < x.n(); ++n) {
            const T* p = x.plane(n, c);
            const T* d = dy.plane(n, c);
            T* dx = g.dx.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
                g.dgamma[c] += d[i] * (p[i] - running_mean[c]) * inv;
                g.dbeta[c] += d[i];
                dx[i] = d[i] * gamma[c] * inv;
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------------------------
// Pointwise

template <class T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
    Tensor4<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return y;
}

template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy) {
    Tensor4<T> dx(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) dx.data[i] = x.data[i] > T(0) ? dy.data[i] : T(0);
    return dx;
}

// ---------------------------------------------------------------------------------------------
// Pooling

/// Windowed max pool (floor mode); `argmax` receives the flat in-plane source of each output.
template <class T>
Tensor4<T> maxpool_forward(const Tensor4<T>& x, int k, int stride, int pad, std::vector<std::int32_t>* argmax) {
    require(k >= 1 && stride >= 1 && pad >= 0 && pad < k, ErrorKind::InvalidArgument, "maxpool: bad window");
    const int ho = (x.h() + 2 * pad - k) / stride + 1;
    const int wo = (x.w() + 2 * pad - k) / stride + 1;
    require(ho >= 1 && wo >= 1, ErrorKind::InvalidArgument, "maxpool: window larger than input " + x.shape.str());
    Tensor4<T> y(x.n(), x.c(), ho, wo);
    if (argmax) argmax->assign(y.size(), -1);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            const T* p = x.plane(n, c);
            T* q = y.plane(n, c);
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::int32_t bi = -1;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= x.h()) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= x.w()) continue;
                            const T v = p[iy * x.w() + ix];
                            if (v > best || bi < 0) {
                                best = v;
                                bi = iy * x.w() + ix;
                            }
                        }
                    }
                    q[oy * wo + ox] = best;
                    if (argmax) (*argmax)[y.index(n, c, oy, ox)] = bi;
                }
        }
    return y;
}

template <class T>
Tensor4<T> maxpool_backward(const Shape4& x_shape, const Tensor4<T>& dy, const std::vector<std::int32_t>& argmax) {
    Tensor4<T> dx(x_shape);
    const std::size_t out_plane = static_cast<std::size_t>(dy.h()) * dy.w();
    for (int n = 0; n < dy.n(); ++n)
        for (int c = 0; c < dy.c(); ++c) {
            T* d = dx.plane(n, c);
            const T* g = dy.plane(n, c);
            const std::size_t base = dy.index(n, c, 0, 0);
            for (std::size_t i = 0; i < out_plane; ++i) d[argmax[base + i]] += g[i];
        }
    return dx;
}

template <class T>
Tensor4<T> maxpool2x2_forward(const Tensor4<T>& x, std::vector<std::int32_t>* argmax) {
    return maxpool_forward(x, 2, 2, 0, argmax);
}

enum class PoolKind { Average, Max };

/// Pools with kernel = stride = f in ceil mode; border windows cover only valid pixels
/// (averages divide by the valid count).
inline std::pair<int, int> pool_factor_dims(int h, int w, int f) {
    require(f >= 1, ErrorKind::InvalidArgument, "pool factor must be >= 1");
    require(!(f > h && f > w), ErrorKind::InvalidArgument,
            "pool factor " + std::to_string(f) + " exceeds the " + std::to_string(h) + "x" + std::to_string(w) +
                " feature map in both dimensions");
    return {(h + f - 1) / f, (w + f - 1) / f};
}

template <class T>
Tensor4<T> pool_factor_forward(const Tensor4<T>& x, int f, PoolKind kind, std::vector<std::int32_t>* argmax) {
    const auto [ho, wo] = pool_factor_dims(x.h(), x.w(), f);
    Tensor4<T> y(x.n(), x.c(), ho, wo);
    if (argmax) argmax->assign(y.size(), -1);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            const T* p = x.plane(n, c);
            T* q = y.plane(n, c);
            for (int oy = 0; oy < ho; ++oy) {
                const int y0 = oy * f, y1 = std::min(x.h(), y0 + f);
                for (int ox = 0; ox < wo; ++ox) {
                    const int x0 = ox * f, x1 = std::min(x.w(), x0 + f);
                    if (kind == PoolKind::Average) {
                        T acc = 0;
                        for (int iy = y0; iy < y1; ++iy)
                            for (int ix = x0; ix < x1; ++ix) acc += p[iy * x.w() + ix];
                        q[oy * wo + ox] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
                    } else {
                        T best = p[y0 * x.w() + x0];
                        std::int32_t bi = y0 * x.w() + x0;
                        for (int iy = y0; iy < y1; ++iy)
                            for (int ix = x0; ix < x1; ++ix)
                                if (p[iy * x.w() + ix] > best) {
                                    best = p[iy * x.w() + ix];
                                    bi = iy * x.w() + ix;
                                }
                        q[oy * wo + ox] = best;
                        if (argmax) (*argmax)[y.index(n, c, oy, ox)] = bi;
                    }
                }
            }
        }
    return y;
}

template <class T>
Tensor4<T> avgpool_factor_forward(const Tensor4<T>& x, int f) {
    return pool_factor_forward(x, f, PoolKind::Average, nullptr);
}

template <class T>
Tensor4<T> avgpool_factor_backward(const Shape4& x_shape, const Tensor4<T>& dy, int f) {
    Tensor4<T> dx(x_shape);
    for (int n = 0; n < dy.n(); ++n)
        for (int c = 0; c < dy.c(); ++c) {
            T* d = dx.plane(n, c);
            const T* g = dy.plane(n, c);
            for (int oy = 0; oy < dy.h(); ++oy) {
                const int y0 = oy * f, y1 = std::min(x_shape.h, y0 + f);
                for (int ox = 0; ox < dy.w(); ++ox) {
                    const int x0 = ox * f, x1 = std::min(x_shape.w, x0 + f);
                    const T share = g[oy * dy.w() + ox] / static_cast<T>((y1 - y0) * (x1 - x0));
                    for (int iy = y0; iy < y1; ++iy)
                        for (int ix = x0; ix < x1; ++ix) d[iy * x_shape.w + ix] += share;
                }
            }
        }
    return dx;
}

// ---------------------------------------------------------------------------------------------
// Bilinear resampling, half-pixel centres (same convention as image resizing).

struct LinearTap {
    int i0, i1;
    double t;
};

inline std::vector<LinearTap> linear_taps(int out_len, int in_len) {
    std::vector<LinearTap> taps(out_len);
    const double scale = static_cast<double>(in_len) / out_len;
    for (int i = 0; i < out_len; ++i) {
        const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(in_len - 1));
        const int i0 = static_cast<int>(std::floor(s));
        taps[i] = {i0, std::min(i0 + 1, in_len - 1), s - i0};
    }
    return taps;
}

template <class T>
Tensor4<T> upsample_bilinear_forward(const Tensor4<T>& x, int oh, int ow) {
    require(oh >= 1 && ow >= 1, ErrorKind::InvalidArgument, "upsample target must be >= 1x1");
    Tensor4<T> y(x.n(), x.c(), oh, ow);
    const auto ty = linear_taps(oh, x.h());
    const auto tx = linear_taps(ow, x.w());
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            const T* p = x.plane(n, c);
            T* q = y.plane(n, c);
            for (int oy = 0; oy < oh; ++oy) {
                const auto& a = ty[oy];
                const T* r0 = p + static_cast<std::size_t>(a.i0) * x.w();
                const T* r1 = p + static_cast<std::size_t>(a.i1) * x.w();
                const T wy1 = static_cast<T>(a.t), wy0 = T(1) - wy1;
                for (int ox = 0; ox < ow; ++ox) {
                    const auto& b = tx[ox];
                    const T wx1 = static_cast<T>(b.t), wx0 = T(1) - wx1;
                    q[static_cast<std::size_t>(oy) * ow + ox] =
                        wy0 * (wx0 * r0[b.i0] + wx1 * r0[b.i1]) + wy1 * (wx0 * r1[b.i0] + wx1 * r1[b.i1]);
                }
            }
        }
    return y;
}

template <class T>
Tensor4<T> upsample_bilinear_backward(const Shape4& x_shape, const Tensor4<T>& dy) {
    Tensor4<T> dx(x_shape);
    const auto ty = linear_taps(dy.h(), x_shape.h);
    const auto tx = linear_taps(dy.w(), x_shape.w);
    for (int n = 0; n < dy.n(); ++n)
        for (int c = 0; c < dy.c(); ++c) {
            T* d = dx.plane(n, c);
            const T* g = dy.plane(n, c);
            for (int oy = 0; oy < dy.h(); ++oy) {
                const auto& a = ty[oy];
                T* r0 = d + static_cast<std::size_t>(a.i0) * x_shape.w;
                T* r1 = d + static_cast<std::size_t>(a.i1) * x_shape.w;
                const T wy1 = static_cast<T>(a.t), wy0 = T(1) - wy1;
                for (int ox = 0; ox < dy.w(); ++ox) {
                    const auto& b = tx[ox];
                    const T wx1 = static_cast<T>(b.t), wx0 = T(1) - wx1;
                    const T v = g[static_cast<std::size_t>(oy) * dy.w() + ox];
                    r0[b.i0] += wy0 * wx0 * v;
                    r0[b.i1] += wy0 * wx1 * v;
                    r1[b.i0] += wy1 * wx0 * v;
                    r1[b.i1] += wy1 * wx1 * v;
                }
            }
        }
    return dx;
}

// ---------------------------------------------------------------------------------------------
// Structural

template <class T>
Tensor4<T> concat_channels(const std::vector<const Tensor4<T>*>& parts) {
    require(!parts.empty(), ErrorKind::InvalidArgument, "concat of nothing");
    Shape4 s = parts[0]->shape;
    s.c = 0;
    for (const auto* p : parts) {
        require_shape(p->n() == s.n && p->h() == s.h && p->w() == s.w, "concat", parts[0]->shape, p->shape);
        s.c += p->c();
    }
    Tensor4<T> y(s);
    const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
        int off = 0;
        for (const auto* p : parts) {
            std::copy_n(p->plane(n, 0), hw * p->c(), y.plane(n, off));
            off += p->c();
        }
    }
    return y;
}

template <class T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
    require_shape(a.shape == b.shape, "add", a.shape, b.shape);
    Tensor4<T> y(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] + b.data[i];
    return y;
}

} // namespace egoseg::net
