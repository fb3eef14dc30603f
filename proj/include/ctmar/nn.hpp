#pragma once

#include <cmath>
#include <vector>

#include "ctmar/core.hpp"

// Tensor container and layer forward/backward kernels for the sinogram
// completion networks. Everything is templated on the scalar type: float in
// production, double in the finite-difference gradient tests.

namespace ctmar::nn {

template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, T fill = T{})
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {
        if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1) throw validation_error("tensor: dims must be >= 1");
    }

    size_t size() const { return v.size(); }
    size_t idx(int in, int ic, int iy, int ix) const {
        return ((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix;
    }
    T& at(int in, int ic, int iy, int ix) { return v[idx(in, ic, iy, ix)]; }
    const T& at(int in, int ic, int iy, int ix) const { return v[idx(in, ic, iy, ix)]; }

    bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    template <typename U>
    Tensor4<U> cast() const {
        Tensor4<U> out(n, c, h, w);
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

// upper index bound for ox in ox*s + off <= limit; -1 when empty.
// plain int division would round the negative numerator toward zero and
// walk past the row on tiny spatial dims.
inline int conv_hi_bound(int limit, int off, int s) {
    int num = limit - off;
    return num < 0 ? -1 : num / s;
}

// Stride/padding of a convolution; the stride-2 5x5 layers use the
// halving/doubling padding (1 leading, 2 trailing).
struct ConvGeom {
    int kh = 5, kw = 5;
    int stride = 2;
    int pad_top = 1, pad_left = 1, pad_bottom = 2, pad_right = 2;

    static ConvGeom halving() { return {}; }
    static ConvGeom unit() { return {1, 1, 1, 0, 0, 0, 0}; }
    int out_dim(int in) const { return (in + pad_top + pad_bottom - kh) / stride + 1; }
};

// ---- convolution -----------------------------------------------------------
// weight (c_out, c_in, kh, kw), bias (c_out, 1, 1, 1)

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b,
                          const ConvGeom& g) {
    if (w.c != x.c) throw validation_error("conv: channel mismatch");
    if (b.n != w.n) throw validation_error("conv: bias size mismatch");
    const int oh = g.out_dim(x.h), ow = (x.w + g.pad_left + g.pad_right - g.kw) / g.stride + 1;
    if (oh < 1 || ow < 1) throw validation_error("conv: output would be empty");
    Tensor4<T> y(x.n, w.n, oh, ow);
    const int s = g.stride;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < x.n; ++in)
        for (int co = 0; co < w.n; ++co) {
            T* yrow0 = &y.v[y.idx(in, co, 0, 0)];
            const T bias = b.v[static_cast<size_t>(co)];
            for (int oy = 0; oy < oh; ++oy) {
                T* yrow = yrow0 + static_cast<size_t>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) yrow[ox] = bias;
                for (int ci = 0; ci < x.c; ++ci)
                    for (int ky = 0; ky < g.kh; ++ky) {
                        const int iy = oy * s - g.pad_top + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        const T* xrow = &x.v[x.idx(in, ci, iy, 0)];
                        const T* wrow = &w.v[w.idx(co, ci, ky, 0)];
                        for (int kx = 0; kx < g.kw; ++kx) {
                            // valid ox range for this tap, hoisted out of the hot loop
                            const int off = kx - g.pad_left;
                            int lo = off < 0 ? (-off + s - 1) / s : 0;
                            int hi = std::min(ow - 1, conv_hi_bound(x.w - 1, off, s));
                            const T wv = wrow[kx];
                            const T* xp = xrow + off;
                            for (int ox = lo; ox <= hi; ++ox) yrow[ox] += wv * xp[ox * s];
                        }
                    }
            }
        }
    return y;
}

template <typename T>
struct ConvGrads {
    Tensor4<T> dx, dw, db;
};

// scatter-as-gather core shared by conv backward-data and tconv forward:
// z(n, cz, zy, zx) = sum over (cs, ky, kx) with zy = sy*s - pt + ky and
// zx = sx*s - pl + kx of src(n, cs, sy, sx) * w(cs, cz, ky, kx)
template <typename T>
void conv_transpose_accumulate(const Tensor4<T>& src, const Tensor4<T>& w, const ConvGeom& g,
                               Tensor4<T>& z) {
    const int s = g.stride;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < z.n; ++in)
        for (int cz = 0; cz < z.c; ++cz) {
            T* zplane = &z.v[z.idx(in, cz, 0, 0)];
            for (int cs = 0; cs < src.c; ++cs)
                for (int sy = 0; sy < src.h; ++sy) {
                    const T* srow = &src.v[src.idx(in, cs, sy, 0)];
                    for (int ky = 0; ky < g.kh; ++ky) {
                        const int zy = sy * s - g.pad_top + ky;
                        if (zy < 0 || zy >= z.h) continue;
                        T* zrow = zplane + static_cast<size_t>(zy) * z.w;
                        const T* wrow = &w.v[w.idx(cs, cz, ky, 0)];
                        for (int kx = 0; kx < g.kw; ++kx) {
                            const int off = kx - g.pad_left;
                            int lo = off < 0 ? (-off + s - 1) / s : 0;
                            int hi = std::min(src.w - 1, conv_hi_bound(z.w - 1, off, s));
                            const T wv = wrow[kx];
                            T* zp = zrow + off;
                            for (int sx = lo; sx <= hi; ++sx) zp[sx * s] += wv * srow[sx];
                        }
                    }
                }
        }
}

// weight gradient shared by conv and tconv: for the conv relation
// y = conv(x, w), dw(co, ci, ky, kx) = sum x(n, ci, oy*s-pt+ky, ox*s-pl+kx) * dy(n, co, oy, ox)
template <typename T>
void conv_weight_grad(const Tensor4<T>& x, const Tensor4<T>& dy, const ConvGeom& g, int co_dim,
                      int ci_dim, Tensor4<T>& dw_out) {
    const int s = g.stride;
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < co_dim; ++co)
        for (int ci = 0; ci < ci_dim; ++ci)
            for (int ky = 0; ky < g.kh; ++ky)
                for (int kx = 0; kx < g.kw; ++kx) {
                    const int off = kx - g.pad_left;
                    T acc{};
                    for (int in = 0; in < x.n; ++in)
                        for (int oy = 0; oy < dy.h; ++oy) {
                            const int iy = oy * s - g.pad_top + ky;
                            if (iy < 0 || iy >= x.h) continue;
                            const T* xp = &x.v[x.idx(in, ci, iy, 0)] + off;
                            const T* dyrow = &dy.v[dy.idx(in, co, oy, 0)];
                            int lo = off < 0 ? (-off + s - 1) / s : 0;
                            int hi = std::min(dy.w - 1, conv_hi_bound(x.w - 1, off, s));
                            T row{};
                            for (int ox = lo; ox <= hi; ++ox) row += xp[ox * s] * dyrow[ox];
                            acc += row;
                        }
                    dw_out.at(co, ci, ky, kx) = acc;
                }
}

template <typename T>
void channel_sum(const Tensor4<T>& dy, Tensor4<T>& db) {
    for (int c = 0; c < dy.c; ++c) {
        T acc{};
        for (int in = 0; in < dy.n; ++in) {
            const T* p = &dy.v[dy.idx(in, c, 0, 0)];
            const size_t plane = static_cast<size_t>(dy.h) * dy.w;
            for (size_t i = 0; i < plane; ++i) acc += p[i];
        }
        db.v[static_cast<size_t>(c)] = acc;
    }
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dy,
                             const ConvGeom& g) {
    ConvGrads<T> out{Tensor4<T>(x.n, x.c, x.h, x.w), Tensor4<T>(w.n, w.c, w.h, w.w),
                     Tensor4<T>(w.n, 1, 1, 1)};
    // dx: transpose-accumulate of dy with the conv weight (co -> ci layout)
    conv_transpose_accumulate(dy, w, g, out.dx);
    conv_weight_grad(x, dy, g, w.n, w.c, out.dw);
    channel_sum(dy, out.db);
    return out;
}

// ---- transposed convolution -------------------------------------------------
// weight (c_in, c_out, kh, kw); output spatial dims = input * stride with the
// halving geometry. Forward is the adjoint of conv2d_forward.

template <typename T>
Tensor4<T> tconv2d_forward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b,
                           const ConvGeom& g) {
    if (w.n != x.c) throw validation_error("tconv: channel mismatch");
    if (b.n != w.c) throw validation_error("tconv: bias size mismatch");
    const int zh = x.h * g.stride, zw = x.w * g.stride;
    Tensor4<T> z(x.n, w.c, zh, zw);
    for (int in = 0; in < z.n; ++in)
        for (int co = 0; co < z.c; ++co) {
            T* p = &z.v[z.idx(in, co, 0, 0)];
            const T bias = b.v[static_cast<size_t>(co)];
            const size_t plane = static_cast<size_t>(zh) * zw;
            for (size_t i = 0; i < plane; ++i) p[i] = bias;
        }
    conv_transpose_accumulate(x, w, g, z);
    return z;
}

// dx of the transposed conv is a plain correlation of dz with the same
// weights; dw reuses the conv weight-grad form with (x, dz) roles swapped.
template <typename T>
ConvGrads<T> tconv2d_backward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dz,
                              const ConvGeom& g) {
    ConvGrads<T> out{Tensor4<T>(x.n, x.c, x.h, x.w), Tensor4<T>(w.n, w.c, w.h, w.w),
                     Tensor4<T>(w.c, 1, 1, 1)};
    const int s = g.stride;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < x.n; ++in)
        for (int ci = 0; ci < x.c; ++ci) {
            T* dxplane = &out.dx.v[out.dx.idx(in, ci, 0, 0)];
            for (int iy = 0; iy < x.h; ++iy) {
                T* dxrow = dxplane + static_cast<size_t>(iy) * x.w;
                for (int co = 0; co < w.c; ++co)
                    for (int ky = 0; ky < g.kh; ++ky) {
                        const int zy = iy * s - g.pad_top + ky;
                        if (zy < 0 || zy >= dz.h) continue;
                        const T* dzrow = &dz.v[dz.idx(in, co, zy, 0)];
                        const T* wrow = &w.v[w.idx(ci, co, ky, 0)];
                        for (int kx = 0; kx < g.kw; ++kx) {
                            const int off = kx - g.pad_left;
                            int lo = off < 0 ? (-off + s - 1) / s : 0;
                            int hi = std::min(x.w - 1, conv_hi_bound(dz.w - 1, off, s));
                            const T wv = wrow[kx];
                            const T* dzp = dzrow + off;
                            for (int ix = lo; ix <= hi; ++ix) dxrow[ix] += wv * dzp[ix * s];
                        }
                    }
            }
        }
    // dw(ci, co, ky, kx) = sum x(n, ci, iy, ix) * dz(n, co, iy*s - pt + ky, ix*s - pl + kx)
#pragma omp parallel for collapse(2) schedule(static)
    for (int ci = 0; ci < w.n; ++ci)
        for (int co = 0; co < w.c; ++co)
            for (int ky = 0; ky < g.kh; ++ky)
                for (int kx = 0; kx < g.kw; ++kx) {
                    const int off = kx - g.pad_left;
                    T acc{};
                    for (int in = 0; in < x.n; ++in)
                        for (int iy = 0; iy < x.h; ++iy) {
                            const int zy = iy * s - g.pad_top + ky;
                            if (zy < 0 || zy >= dz.h) continue;
                            const T* xrow = &x.v[x.idx(in, ci, iy, 0)];
                            const T* dzp = &dz.v[dz.idx(in, co, zy, 0)] + off;
                            int lo = off < 0 ? (-off + s - 1) / s : 0;
                            int hi = std::min(x.w - 1, conv_hi_bound(dz.w - 1, off, s));
                            T row{};
                            for (int ix = lo; ix <= hi; ++ix) row += xrow[ix] * dzp[ix * s];
                            acc += row;
                        }
                    out.dw.at(ci, co, ky, kx) = acc;
                }
    channel_sum(dz, out.db);
    return out;
}

// ---- batch norm --------------------------------------------------------------

template <typename T>
struct BnCache {
    Tensor4<T> xhat;
    std::vector<T> inv_std;  // per channel
};

template <typename T>
Tensor4<T> batchnorm_train_forward(const Tensor4<T>& x, const Tensor4<T>& gamma, const Tensor4<T>& beta,
                                   Tensor4<T>& running_mean, Tensor4<T>& running_var, T momentum, T eps,
                                   BnCache<T>& cache) {
    const std::int64_t count = static_cast<std::int64_t>(x.n) * x.h * x.w;
    if (count < 2) throw validation_error("batchnorm: train mode needs batch*H*W >= 2");
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    cache.xhat = Tensor4<T>(x.n, x.c, x.h, x.w);
    cache.inv_std.assign(static_cast<size_t>(x.c), T{});
#pragma omp parallel for schedule(static)
    for (int c = 0; c < x.c; ++c) {
        T mean{}, sq{};
        for (int in = 0; in < x.n; ++in)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    T val = x.at(in, c, iy, ix);
                    mean += val;
                    sq += val * val;
                }
        mean /= static_cast<T>(count);
        T var = sq / static_cast<T>(count) - mean * mean;
        if (var < T{}) var = T{};  // float cancellation guard
        T inv_std = T(1) / std::sqrt(var + eps);
        cache.inv_std[static_cast<size_t>(c)] = inv_std;
        T g = gamma.v[static_cast<size_t>(c)], bta = beta.v[static_cast<size_t>(c)];
        for (int in = 0; in < x.n; ++in)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    T xh = (x.at(in, c, iy, ix) - mean) * inv_std;
                    cache.xhat.at(in, c, iy, ix) = xh;
                    y.at(in, c, iy, ix) = g * xh + bta;
                }
        running_mean.v[static_cast<size_t>(c)] =
            momentum * running_mean.v[static_cast<size_t>(c)] + (T(1) - momentum) * mean;
        running_var.v[static_cast<size_t>(c)] =
            momentum * running_var.v[static_cast<size_t>(c)] + (T(1) - momentum) * var;
    }
    return y;
}

template <typename T>
Tensor4<T> batchnorm_eval_forward(const Tensor4<T>& x, const Tensor4<T>& gamma, const Tensor4<T>& beta,
                                  const Tensor4<T>& running_mean, const Tensor4<T>& running_var, T eps) {
    Tensor4<T> y(x.n, x.c, x.h, x.w);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < x.c; ++c) {
        T inv_std = T(1) / std::sqrt(running_var.v[static_cast<size_t>(c)] + eps);
        T m = running_mean.v[static_cast<size_t>(c)];
        T g = gamma.v[static_cast<size_t>(c)], bta = beta.v[static_cast<size_t>(c)];
        for (int in = 0; in < x.n; ++in)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix)
                    y.at(in, c, iy, ix) = g * (x.at(in, c, iy, ix) - m) * inv_std + bta;
    }
    return y;
}

template <typename T>
struct BnGrads {
    Tensor4<T> dx, dgamma, dbeta;
};

template <typename T>
BnGrads<T> batchnorm_train_backward(const Tensor4<T>& dy, const Tensor4<T>& gamma, const BnCache<T>& cache) {
    const Tensor4<T>& xh = cache.xhat;
    const std::int64_t count = static_cast<std::int64_t>(xh.n) * xh.h * xh.w;
    BnGrads<T> out{Tensor4<T>(xh.n, xh.c, xh.h, xh.w), Tensor4<T>(xh.c, 1, 1, 1), Tensor4<T>(xh.c, 1, 1, 1)};
#pragma omp parallel for schedule(static)
    for (int c = 0; c < xh.c; ++c) {
        T sum_dy{}, sum_dy_xh{};
        for (int in = 0; in < xh.n; ++in)
            for (int iy = 0; iy < xh.h; ++iy)
                for (int ix = 0; ix < xh.w; ++ix) {
                    T d = dy.at(in, c, iy, ix);
                    sum_dy += d;
                    sum_dy_xh += d * xh.at(in, c, iy, ix);
                }
        out.dbeta.v[static_cast<size_t>(c)] = sum_dy;
        out.dgamma.v[static_cast<size_t>(c)] = sum_dy_xh;
        T g = gamma.v[static_cast<size_t>(c)];
        T inv_std = cache.inv_std[static_cast<size_t>(c)];
        T mean_dy = sum_dy / static_cast<T>(count);
        T mean_dy_xh = sum_dy_xh / static_cast<T>(count);
        for (int in = 0; in < xh.n; ++in)
            for (int iy = 0; iy < xh.h; ++iy)
                for (int ix = 0; ix < xh.w; ++ix)
                    out.dx.at(in, c, iy, ix) =
                        g * inv_std *
                        (dy.at(in, c, iy, ix) - mean_dy - xh.at(in, c, iy, ix) * mean_dy_xh);
    }
    return out;
}

// ---- activations --------------------------------------------------------------

template <typename T>
Tensor4<T> leaky_relu_forward(const Tensor4<T>& x, T slope) {
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] > T{} ? x.v[i] : slope * x.v[i];
    return y;
}

template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy, T slope) {
    Tensor4<T> dx(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) dx.v[i] = x.v[i] > T{} ? dy.v[i] : slope * dy.v[i];
    return dx;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
    return leaky_relu_forward(x, T{});
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy) {
    return leaky_relu_backward(x, dy, T{});
}

template <typename T>
Tensor4<T> sigmoid_forward(const Tensor4<T>& x) {
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = T(1) / (T(1) + std::exp(-x.v[i]));
    return y;
}

template <typename T>
Tensor4<T> sigmoid_backward(const Tensor4<T>& y, const Tensor4<T>& dy) {
    Tensor4<T> dx(y.n, y.c, y.h, y.w);
    for (size_t i = 0; i < y.v.size(); ++i) dx.v[i] = dy.v[i] * y.v[i] * (T(1) - y.v[i]);
    return dx;
}

// ---- dropout -------------------------------------------------------------------
// inverted dropout; the mask is keyed per element so it is order-independent

template <typename T>
Tensor4<T> dropout_forward(const Tensor4<T>& x, double p, std::uint64_t key, Tensor4<T>& mask_out) {
    if (p < 0.0 || p >= 1.0) throw validation_error("dropout: p must be in [0, 1)");
    mask_out = Tensor4<T>(x.n, x.c, x.h, x.w);
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (size_t i = 0; i < x.v.size(); ++i) {
        std::uint64_t s = mix_seed(key, i);
        double u = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
        T m = u < p ? T{} : keep_scale;
        mask_out.v[i] = m;
        y.v[i] = x.v[i] * m;
    }
    return y;
}

template <typename T>
Tensor4<T> dropout_backward(const Tensor4<T>& mask, const Tensor4<T>& dy) {
    Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (size_t i = 0; i < dy.v.size(); ++i) dx.v[i] = dy.v[i] * mask.v[i];
    return dx;
}

// ---- 2x average pooling ----------------------------------------------------------

template <typename T>
Tensor4<T> avgpool2_forward(const Tensor4<T>& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0) throw validation_error("avgpool2: H and W must be even");
    Tensor4<T> y(x.n, x.c, x.h / 2, x.w / 2);
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < x.n; ++in)
        for (int c = 0; c < x.c; ++c)
            for (int oy = 0; oy < y.h; ++oy)
                for (int ox = 0; ox < y.w; ++ox)
                    y.at(in, c, oy, ox) = (x.at(in, c, 2 * oy, 2 * ox) + x.at(in, c, 2 * oy, 2 * ox + 1) +
                                           x.at(in, c, 2 * oy + 1, 2 * ox) +
                                           x.at(in, c, 2 * oy + 1, 2 * ox + 1)) /
                                          T(4);
    return y;
}

template <typename T>
Tensor4<T> avgpool2_backward(const Tensor4<T>& dy) {
    Tensor4<T> dx(dy.n, dy.c, dy.h * 2, dy.w * 2);
    for (int in = 0; in < dy.n; ++in)
        for (int c = 0; c < dy.c; ++c)
            for (int oy = 0; oy < dy.h; ++oy)
                for (int ox = 0; ox < dy.w; ++ox) {
                    T q = dy.at(in, c, oy, ox) / T(4);
                    dx.at(in, c, 2 * oy, 2 * ox) = q;
                    dx.at(in, c, 2 * oy, 2 * ox + 1) = q;
                    dx.at(in, c, 2 * oy + 1, 2 * ox) = q;
                    dx.at(in, c, 2 * oy + 1, 2 * ox + 1) = q;
                }
    return dx;
}

// ---- channel concatenation --------------------------------------------------------

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) throw validation_error("concat: spatial/batch mismatch");
    Tensor4<T> y(a.n, a.c + b.c, a.h, a.w);
    for (int in = 0; in < a.n; ++in) {
        for (int c = 0; c < a.c; ++c)
            for (int iy = 0; iy < a.h; ++iy)
                for (int ix = 0; ix < a.w; ++ix) y.at(in, c, iy, ix) = a.at(in, c, iy, ix);
        for (int c = 0; c < b.c; ++c)
            for (int iy = 0; iy < a.h; ++iy)
                for (int ix = 0; ix < a.w; ++ix) y.at(in, a.c + c, iy, ix) = b.at(in, c, iy, ix);
    }
    return y;
}

template <typename T>
void split_channels(const Tensor4<T>& dy, Tensor4<T>& da, Tensor4<T>& db, int c_first) {
    da = Tensor4<T>(dy.n, c_first, dy.h, dy.w);
    db = Tensor4<T>(dy.n, dy.c - c_first, dy.h, dy.w);
    for (int in = 0; in < dy.n; ++in) {
        for (int c = 0; c < c_first; ++c)
            for (int iy = 0; iy < dy.h; ++iy)
                for (int ix = 0; ix < dy.w; ++ix) da.at(in, c, iy, ix) = dy.at(in, c, iy, ix);
        for (int c = c_first; c < dy.c; ++c)
            for (int iy = 0; iy < dy.h; ++iy)
                for (int ix = 0; ix < dy.w; ++ix) db.at(in, c - c_first, iy, ix) = dy.at(in, c, iy, ix);
    }
}

// ---- dense (flatten + linear) --------------------------------------------------------
// weight (k, flat, 1, 1), bias (k, 1, 1, 1); input flattened per sample

template <typename T>
Tensor4<T> dense_forward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b) {
    const int flat = x.c * x.h * x.w;
    if (w.c != flat) throw validation_error("dense: weight/input size mismatch");
    Tensor4<T> y(x.n, w.n, 1, 1);
    for (int in = 0; in < x.n; ++in)
        for (int k = 0; k < w.n; ++k) {
            T acc = b.v[static_cast<size_t>(k)];
            const T* xp = &x.v[static_cast<size_t>(in) * flat];
            const T* wp = &w.v[static_cast<size_t>(k) * flat];
            for (int i = 0; i < flat; ++i) acc += xp[i] * wp[i];
            y.at(in, k, 0, 0) = acc;
        }
    return y;
}

template <typename T>
ConvGrads<T> dense_backward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dy) {
    const int flat = x.c * x.h * x.w;
    ConvGrads<T> out{Tensor4<T>(x.n, x.c, x.h, x.w), Tensor4<T>(w.n, w.c, 1, 1), Tensor4<T>(w.n, 1, 1, 1)};
    for (int in = 0; in < x.n; ++in)
        for (int k = 0; k < w.n; ++k) {
            T d = dy.at(in, k, 0, 0);
            T* dxp = &out.dx.v[static_cast<size_t>(in) * flat];
            const T* xp = &x.v[static_cast<size_t>(in) * flat];
            const T* wp = &w.v[static_cast<size_t>(k) * flat];
            T* dwp = &out.dw.v[static_cast<size_t>(k) * flat];
            for (int i = 0; i < flat; ++i) {
                dxp[i] += d * wp[i];
                dwp[i] += d * xp[i];
            }
            out.db.v[static_cast<size_t>(k)] += d;
        }
    return out;
}

}  // namespace ctmar::nn
