#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "canet/tensor.hpp"

namespace canet {

// Weight layout for all convolutions: tensor5 indexed as
// (out_channels, in_channels, kz, ky, kx). A transposed convolution reuses
// the same layout and computes the exact adjoint map, so
// <conv3d(x, w), y> == <x, transposed_conv3d(y, w)> holds identically.

inline std::int64_t conv_out_len(std::int64_t n, std::int64_t k, std::int64_t stride, std::int64_t pad) {
    return (n + 2 * pad - k) / stride + 1;
}

namespace detail {

template <typename T>
inline void axpy(T* __restrict out, const T* __restrict in, T wv, std::int64_t n) {
    for (std::int64_t x = 0; x < n; ++x) out[x] += wv * in[x];
}

// acc[x] += w0*in[x] + w1*in[x+1] + w2*in[x+2]; one pass over the row.
template <typename T>
inline void stencil3(T* __restrict acc, const T* __restrict in, T w0, T w1, T w2, std::int64_t n) {
    for (std::int64_t x = 0; x < n; ++x) acc[x] += w0 * in[x] + w1 * in[x + 1] + w2 * in[x + 2];
}

// Three correlation lags of g against in in one pass.
template <typename T>
inline void dot3(const T* __restrict g, const T* __restrict in, T* s, std::int64_t n) {
    T s0 = 0, s1 = 0, s2 = 0;
#pragma omp simd reduction(+ : s0, s1, s2)
    for (std::int64_t x = 0; x < n; ++x) {
        const T gv = g[x];
        s0 += gv * in[x];
        s1 += gv * in[x + 1];
        s2 += gv * in[x + 2];
    }
    s[0] += s0;
    s[1] += s1;
    s[2] += s2;
}

template <typename T>
inline T dot(const T* __restrict a, const T* __restrict b, std::int64_t n) {
    T s = 0;
#pragma omp simd reduction(+ : s)
    for (std::int64_t x = 0; x < n; ++x) s += a[x] * b[x];
    return s;
}

template <typename T>
inline void add_vec(std::vector<T>& dst, const std::vector<T>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline void check_conv_args(const char* who, std::int64_t in_c, std::int64_t w_ci,
                            std::int64_t stride, std::int64_t pad, std::int64_t k) {
    if (in_c != w_ci) throw std::invalid_argument(std::string(who) + ": channel mismatch");
    if (stride < 1) throw std::invalid_argument(std::string(who) + ": bad stride");
    if (pad < 0 || pad >= k) throw std::invalid_argument(std::string(who) + ": bad padding");
}

}  // namespace detail

/// Cross-correlation with kernel size 1 or 3 per axis, given stride and zero
/// padding. Bias is applied when non-empty.
template <typename T>
tensor5<T> conv3d(const tensor5<T>& in, const tensor5<T>& w, const std::vector<T>& bias,
                  std::int64_t stride, std::int64_t pad) {
    detail::check_conv_args("conv3d", in.c, w.c, stride, pad, w.w);
    const std::int64_t Co = w.b, Ci = w.c, kd = w.d, kh = w.h, kw = w.w;
    if (!bias.empty() && std::int64_t(bias.size()) != Co)
        throw std::invalid_argument("conv3d: bias size mismatch");
    const std::int64_t Do = conv_out_len(in.d, kd, stride, pad);
    const std::int64_t Ho = conv_out_len(in.h, kh, stride, pad);
    const std::int64_t Wo = conv_out_len(in.w, kw, stride, pad);
    if (Do < 1 || Ho < 1 || Wo < 1) throw std::invalid_argument("conv3d: input smaller than kernel");
    tensor5<T> out(in.b, Co, Do, Ho, Wo);

    const bool fused = (stride == 1 && kw == 3 && pad == 1 && in.w >= 3);
    std::vector<T> acc(std::size_t(Wo), T(0));
    for (std::int64_t bi = 0; bi < in.b; ++bi) {
        for (std::int64_t co = 0; co < Co; ++co) {
            T* outc = out.ptr(bi, co);
            const T bv = bias.empty() ? T(0) : bias[std::size_t(co)];
            for (std::int64_t zo = 0; zo < Do; ++zo) {
                for (std::int64_t yo = 0; yo < Ho; ++yo) {
                    std::fill(acc.begin(), acc.end(), bv);
                    for (std::int64_t ci = 0; ci < Ci; ++ci) {
                        const T* inc = in.ptr(bi, ci);
                        for (std::int64_t kz = 0; kz < kd; ++kz) {
                            const std::int64_t zi = zo * stride + kz - pad;
                            if (zi < 0 || zi >= in.d) continue;
                            for (std::int64_t ky = 0; ky < kh; ++ky) {
                                const std::int64_t yi = yo * stride + ky - pad;
                                if (yi < 0 || yi >= in.h) continue;
                                const T* inrow = inc + (zi * in.h + yi) * in.w;
                                const T* wrow = w.ptr(co, ci) + (kz * kh + ky) * kw;
                                if (fused) {
                                    acc[0] += wrow[1] * inrow[0] + wrow[2] * inrow[1];
                                    acc[std::size_t(Wo - 1)] +=
                                        wrow[0] * inrow[in.w - 2] + wrow[1] * inrow[in.w - 1];
                                    detail::stencil3(acc.data() + 1, inrow, wrow[0], wrow[1], wrow[2], Wo - 2);
                                    continue;
                                }
                                for (std::int64_t kx = 0; kx < kw; ++kx) {
                                    const T wv = wrow[kx];
                                    if (stride == 1) {
                                        const std::int64_t x0 = std::max<std::int64_t>(0, pad - kx);
                                        const std::int64_t x1 = std::min(Wo, in.w - kx + pad);
                                        if (x1 > x0)
                                            detail::axpy(acc.data() + x0, inrow + x0 + kx - pad, wv, x1 - x0);
                                    } else {
                                        for (std::int64_t xo = 0; xo < Wo; ++xo) {
                                            const std::int64_t xi = xo * stride + kx - pad;
                                            if (xi >= 0 && xi < in.w) acc[std::size_t(xo)] += wv * inrow[xi];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    T* outrow = outc + (zo * Ho + yo) * Wo;
                    for (std::int64_t x = 0; x < Wo; ++x) outrow[x] = acc[std::size_t(x)];
                }
            }
        }
    }
    return out;
}

/// Adjoint of conv3d with the same weights: maps a tensor on the conv output
/// grid back to the conv input grid of shape `in_dims`. Serves both as the
/// decoder upsampler (stride 2) and as conv3d's input gradient.
template <typename T>
tensor5<T> transposed_conv3d(const tensor5<T>& g, const tensor5<T>& w, std::int64_t stride,
                             std::int64_t pad, dims3 in_dims) {
    if (g.c != w.b) throw std::invalid_argument("transposed_conv3d: channel mismatch");
    const std::int64_t Co = w.b, Ci = w.c, kd = w.d, kh = w.h, kw = w.w;
    if (conv_out_len(in_dims.d, kd, stride, pad) != g.d ||
        conv_out_len(in_dims.h, kh, stride, pad) != g.h ||
        conv_out_len(in_dims.w, kw, stride, pad) != g.w)
        throw std::invalid_argument("transposed_conv3d: dims inconsistent with input grid");
    tensor5<T> out(g.b, Ci, in_dims.d, in_dims.h, in_dims.w);

    const bool fused = (stride == 1 && kw == 3 && pad == 1 && g.w == in_dims.w && g.w >= 3);
    for (std::int64_t bi = 0; bi < g.b; ++bi) {
        for (std::int64_t ci = 0; ci < Ci; ++ci) {
            T* outc = out.ptr(bi, ci);
            for (std::int64_t co = 0; co < Co; ++co) {
                const T* gc = g.ptr(bi, co);
                for (std::int64_t zo = 0; zo < g.d; ++zo) {
                    for (std::int64_t kz = 0; kz < kd; ++kz) {
                        const std::int64_t zi = zo * stride + kz - pad;
                        if (zi < 0 || zi >= in_dims.d) continue;
                        for (std::int64_t yo = 0; yo < g.h; ++yo) {
                            for (std::int64_t ky = 0; ky < kh; ++ky) {
                                const std::int64_t yi = yo * stride + ky - pad;
                                if (yi < 0 || yi >= in_dims.h) continue;
                                const T* grow = gc + (zo * g.h + yo) * g.w;
                                T* outrow = outc + (zi * in_dims.h + yi) * in_dims.w;
                                const T* wrow = w.ptr(co, ci) + (kz * kh + ky) * kw;
                                if (fused) {
                                    // out[x] += w2*g[x-1] + w1*g[x] + w0*g[x+1]
                                    const std::int64_t n = in_dims.w;
                                    outrow[0] += wrow[1] * grow[0] + wrow[0] * grow[1];
                                    outrow[n - 1] += wrow[2] * grow[n - 2] + wrow[1] * grow[n - 1];
                                    detail::stencil3(outrow + 1, grow, wrow[2], wrow[1], wrow[0], n - 2);
                                    continue;
                                }
                                for (std::int64_t kx = 0; kx < kw; ++kx) {
                                    const T wv = wrow[kx];
                                    if (stride == 1) {
                                        const std::int64_t x0 = std::max<std::int64_t>(0, pad - kx);
                                        const std::int64_t x1 = std::min(g.w, in_dims.w - kx + pad);
                                        if (x1 > x0)
                                            detail::axpy(outrow + x0 + kx - pad, grow + x0, wv, x1 - x0);
                                    } else {
                                        for (std::int64_t xo = 0; xo < g.w; ++xo) {
                                            const std::int64_t xi = xo * stride + kx - pad;
                                            if (xi >= 0 && xi < in_dims.w) outrow[xi] += wv * grow[xo];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

/// dL/dw for out = conv3d(in, w): correlate the input with the output gradient.
template <typename T>
tensor5<T> conv3d_weight_grad(const tensor5<T>& in, const tensor5<T>& dout, std::int64_t kd,
                              std::int64_t kh, std::int64_t kw, std::int64_t stride, std::int64_t pad) {
    if (in.b != dout.b) throw std::invalid_argument("conv3d_weight_grad: batch mismatch");
    tensor5<T> dw(dout.c, in.c, kd, kh, kw);
    const bool fused = (stride == 1 && kw == 3 && pad == 1 && in.w == dout.w && in.w >= 3);
    std::vector<T> acc(std::size_t(kd * kh * kw), T(0));
    for (std::int64_t bi = 0; bi < in.b; ++bi) {
        for (std::int64_t co = 0; co < dout.c; ++co) {
            const T* gc = dout.ptr(bi, co);
            for (std::int64_t ci = 0; ci < in.c; ++ci) {
                const T* inc = in.ptr(bi, ci);
                std::fill(acc.begin(), acc.end(), T(0));
                for (std::int64_t zo = 0; zo < dout.d; ++zo) {
                    for (std::int64_t kz = 0; kz < kd; ++kz) {
                        const std::int64_t zi = zo * stride + kz - pad;
                        if (zi < 0 || zi >= in.d) continue;
                        for (std::int64_t yo = 0; yo < dout.h; ++yo) {
                            for (std::int64_t ky = 0; ky < kh; ++ky) {
                                const std::int64_t yi = yo * stride + ky - pad;
                                if (yi < 0 || yi >= in.h) continue;
                                const T* grow = gc + (zo * dout.h + yo) * dout.w;
                                const T* inrow = inc + (zi * in.h + yi) * in.w;
                                T* arow = acc.data() + (kz * kh + ky) * kw;
                                if (fused) {
                                    const std::int64_t n = in.w;
                                    arow[1] += grow[0] * inrow[0] + grow[n - 1] * inrow[n - 1];
                                    arow[2] += grow[0] * inrow[1];
                                    arow[0] += grow[n - 1] * inrow[n - 2];
                                    detail::dot3(grow + 1, inrow, arow, n - 2);
                                    continue;
                                }
                                for (std::int64_t kx = 0; kx < kw; ++kx) {
                                    if (stride == 1) {
                                        const std::int64_t x0 = std::max<std::int64_t>(0, pad - kx);
                                        const std::int64_t x1 = std::min(dout.w, in.w - kx + pad);
                                        if (x1 > x0)
                                            arow[kx] += detail::dot(grow + x0, inrow + x0 + kx - pad, x1 - x0);
                                    } else {
                                        T s = 0;
                                        for (std::int64_t xo = 0; xo < dout.w; ++xo) {
                                            const std::int64_t xi = xo * stride + kx - pad;
                                            if (xi >= 0 && xi < in.w) s += grow[xo] * inrow[xi];
                                        }
                                        arow[kx] += s;
                                    }
                                }
                            }
                        }
                    }
                }
                T* dwp = dw.ptr(co, ci);
                for (std::size_t i = 0; i < acc.size(); ++i) dwp[i] += acc[i];
            }
        }
    }
    return dw;
}

template <typename T>
std::vector<T> conv3d_bias_grad(const tensor5<T>& dout) {
    std::vector<T> db(std::size_t(dout.c), T(0));
    const std::int64_t sp = dout.spatial_size();
    for (std::int64_t bi = 0; bi < dout.b; ++bi)
        for (std::int64_t co = 0; co < dout.c; ++co) {
            const T* p = dout.ptr(bi, co);
            T s = 0;
            for (std::int64_t v = 0; v < sp; ++v) s += p[v];
            db[std::size_t(co)] += s;
        }
    return db;
}

/// dL/dx for out = conv3d(x, w): exactly the adjoint map.
template <typename T>
tensor5<T> conv3d_input_grad(const tensor5<T>& dout, const tensor5<T>& w, std::int64_t stride,
                             std::int64_t pad, dims3 in_dims) {
    return transposed_conv3d(dout, w, stride, pad, in_dims);
}

}  // namespace canet
