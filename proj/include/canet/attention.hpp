#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "canet/conv.hpp"
#include "canet/tensor.hpp"

namespace canet {

enum class axis3 { depth = 0, height = 1, width = 2 };

inline const char* axis_name(axis3 a) {
    switch (a) {
        case axis3::depth: return "depth";
        case axis3::height: return "height";
        default: return "width";
    }
}

/// One axial self-attention branch: learned additive positional embedding
/// along `axis`, then scaled dot-product attention over every 1D line of
/// tokens along that axis. Projections are C -> C linear maps without bias;
/// the embedding table is (C x capacity) and errors out if a line is longer
/// than its capacity.
template <typename T>
struct axial_params {
    tensor5<T> wq, wk, wv;  // (C, C, 1, 1, 1)
    tensor5<T> pos;         // (1, C, capacity, 1, 1)
};

template <typename T>
struct axial_cache {
    tensor5<T> xp;           // position-embedded input
    tensor5<T> q, k, v;      // projected tokens, full tensor shape
    std::vector<T> attn;     // softmax rows, lines x heads x L x L in line order
};

namespace detail {

template <typename F>
void for_each_line(dims3 sp, std::int64_t batch, axis3 axis, F&& fn) {
    // fn(batch_index, spatial_offset_of_token0, token_stride, L)
    const std::int64_t plane = sp.h * sp.w;
    for (std::int64_t bi = 0; bi < batch; ++bi) {
        switch (axis) {
            case axis3::width:
                for (std::int64_t z = 0; z < sp.d; ++z)
                    for (std::int64_t y = 0; y < sp.h; ++y) fn(bi, z * plane + y * sp.w, 1, sp.w);
                break;
            case axis3::height:
                for (std::int64_t z = 0; z < sp.d; ++z)
                    for (std::int64_t x = 0; x < sp.w; ++x) fn(bi, z * plane + x, sp.w, sp.h);
                break;
            case axis3::depth:
                for (std::int64_t y = 0; y < sp.h; ++y)
                    for (std::int64_t x = 0; x < sp.w; ++x) fn(bi, y * sp.w + x, plane, sp.d);
                break;
        }
    }
}

// channel-major line buffers: buf[c*L + l]
template <typename T>
inline void gather_line(const tensor5<T>& src, std::int64_t bi, std::int64_t off,
                        std::int64_t stride, std::int64_t L, T* __restrict buf) {
    const std::int64_t chan_stride = src.spatial_size();
    const T* base = src.data.data() + bi * src.c * chan_stride + off;
    for (std::int64_t c = 0; c < src.c; ++c) {
        const T* s = base + c * chan_stride;
        T* d = buf + c * L;
        if (stride == 1)
            std::copy_n(s, L, d);
        else
            for (std::int64_t l = 0; l < L; ++l) d[l] = s[l * stride];
    }
}

template <typename T>
inline void scatter_line(tensor5<T>& dst, std::int64_t bi, std::int64_t off, std::int64_t stride,
                         std::int64_t L, const T* __restrict buf, bool accumulate) {
    const std::int64_t chan_stride = dst.spatial_size();
    T* base = dst.data.data() + bi * dst.c * chan_stride + off;
    for (std::int64_t c = 0; c < dst.c; ++c) {
        T* d = base + c * chan_stride;
        const T* s = buf + c * L;
        for (std::int64_t l = 0; l < L; ++l) {
            if (accumulate)
                d[l * stride] += s[l];
            else
                d[l * stride] = s[l];
        }
    }
}

// in-place softmax over a row of length n
template <typename T>
inline void softmax_row(T* __restrict row, std::int64_t n) {
    T mx = row[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T sum = 0;
#pragma omp simd reduction(+ : sum)
    for (std::int64_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    const T inv = T(1) / sum;
    for (std::int64_t j = 0; j < n; ++j) row[j] *= inv;
}

}  // namespace detail

template <typename T>
std::int64_t axis_length(const tensor5<T>& x, axis3 axis) {
    return axis == axis3::depth ? x.d : axis == axis3::height ? x.h : x.w;
}

template <typename T>
tensor5<T> add_pos_embedding(const tensor5<T>& x, const tensor5<T>& pos, axis3 axis) {
    const std::int64_t L = axis_length(x, axis);
    if (L > pos.d)
        throw std::invalid_argument(std::string("axial_attention: ") + axis_name(axis) +
                                    " length exceeds positional-embedding capacity");
    if (pos.c != x.c) throw std::invalid_argument("axial_attention: embedding channel mismatch");
    tensor5<T> out = x;
    for (std::int64_t bi = 0; bi < x.b; ++bi)
        for (std::int64_t ci = 0; ci < x.c; ++ci) {
            T* o = out.ptr(bi, ci);
            const T* pe = pos.ptr(0, ci);  // pos[l] at index l (d axis of the table)
            for (std::int64_t z = 0; z < x.d; ++z)
                for (std::int64_t y = 0; y < x.h; ++y) {
                    T* row = o + (z * x.h + y) * x.w;
                    if (axis == axis3::width) {
                        for (std::int64_t v = 0; v < x.w; ++v) row[v] += pe[v];
                    } else {
                        const T add = pe[axis == axis3::depth ? z : y];
                        for (std::int64_t v = 0; v < x.w; ++v) row[v] += add;
                    }
                }
        }
    return out;
}

/// Forward pass of one axial attention branch. Output has the input's shape.
template <typename T>
tensor5<T> axial_attention(const tensor5<T>& x, axis3 axis, const axial_params<T>& p,
                           std::int64_t heads, axial_cache<T>* cache = nullptr) {
    const std::int64_t C = x.c;
    if (p.wq.b != C || p.wq.c != C) throw std::invalid_argument("axial_attention: projection shape mismatch");
    if (heads < 1 || C % heads != 0) throw std::invalid_argument("axial_attention: channels not divisible by heads");
    const std::int64_t dh = C / heads;
    const T scale = T(1.0 / std::sqrt(double(dh)));

    tensor5<T> xp = add_pos_embedding(x, p.pos, axis);
    // the projections are per-voxel linear maps: 1x1x1 convolutions
    tensor5<T> q = conv3d(xp, p.wq, {}, 1, 0);
    tensor5<T> k = conv3d(xp, p.wk, {}, 1, 0);
    tensor5<T> v = conv3d(xp, p.wv, {}, 1, 0);
    tensor5<T> out(x.b, C, x.d, x.h, x.w);

    const dims3 sp{x.d, x.h, x.w};
    const std::int64_t L = axis_length(x, axis);
    const std::int64_t lines = x.b * (sp.count() / L);
    if (cache) cache->attn.assign(std::size_t(lines) * std::size_t(heads) * std::size_t(L * L), T(0));

    std::vector<T> qb(std::size_t(L * C)), kb(qb.size()), vb(qb.size()), ob(qb.size());
    std::vector<T> srow(std::size_t(L), T(0));
    std::int64_t line_index = 0;
    detail::for_each_line(sp, x.b, axis, [&](std::int64_t bi, std::int64_t off, std::int64_t stride,
                                             std::int64_t len) {
        detail::gather_line(q, bi, off, stride, len, qb.data());
        detail::gather_line(k, bi, off, stride, len, kb.data());
        detail::gather_line(v, bi, off, stride, len, vb.data());
        T* attn_line = cache ? cache->attn.data() +
                                   std::size_t(line_index) * std::size_t(heads) * std::size_t(len * len)
                             : nullptr;
        for (std::int64_t hd = 0; hd < heads; ++hd) {
            const std::int64_t c0 = hd * dh;
            for (std::int64_t i = 0; i < len; ++i) {
                std::fill(srow.begin(), srow.begin() + len, T(0));
                for (std::int64_t c = c0; c < c0 + dh; ++c)
                    detail::axpy(srow.data(), kb.data() + c * len, scale * qb[std::size_t(c * len + i)], len);
                detail::softmax_row(srow.data(), len);
                if (attn_line) std::copy_n(srow.data(), len, attn_line + (hd * len + i) * len);
                for (std::int64_t c = c0; c < c0 + dh; ++c)
                    ob[std::size_t(c * len + i)] = detail::dot(srow.data(), vb.data() + c * len, len);
            }
        }
        detail::scatter_line(out, bi, off, stride, len, ob.data(), false);
        ++line_index;
    });
    if (cache) {
        cache->xp = std::move(xp);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
    }
    return out;
}

/// Backward pass using the attention weights cached by the forward run.
/// Parameter gradients accumulate into `dp`; the return value is the gradient
/// w.r.t. the branch input (embedding gradients go to dp.pos).
template <typename T>
tensor5<T> axial_attention_backward(const tensor5<T>& dout, axis3 axis, const axial_params<T>& p,
                                    std::int64_t heads, const axial_cache<T>& cache,
                                    axial_params<T>& dp) {
    const tensor5<T>& xp = cache.xp;
    const std::int64_t C = xp.c;
    const std::int64_t dh = C / heads;
    const T scale = T(1.0 / std::sqrt(double(dh)));

    const dims3 sp{xp.d, xp.h, xp.w};
    const std::int64_t L = axis_length(xp, axis);
    tensor5<T> dq(xp.b, C, xp.d, xp.h, xp.w), dk(xp.b, C, xp.d, xp.h, xp.w),
        dv(xp.b, C, xp.d, xp.h, xp.w);

    std::vector<T> qb(std::size_t(L * C)), kb(qb.size()), vb(qb.size()), dob(qb.size());
    std::vector<T> dqb(qb.size()), dkb(qb.size()), dvb(qb.size());
    std::vector<T> darow(std::size_t(L), T(0)), dsrow(std::size_t(L), T(0));
    std::int64_t line_index = 0;
    detail::for_each_line(sp, xp.b, axis, [&](std::int64_t bi, std::int64_t off, std::int64_t stride,
                                              std::int64_t len) {
        detail::gather_line(cache.q, bi, off, stride, len, qb.data());
        detail::gather_line(cache.k, bi, off, stride, len, kb.data());
        detail::gather_line(cache.v, bi, off, stride, len, vb.data());
        detail::gather_line(dout, bi, off, stride, len, dob.data());
        std::fill(dqb.begin(), dqb.begin() + len * C, T(0));
        std::fill(dkb.begin(), dkb.begin() + len * C, T(0));
        std::fill(dvb.begin(), dvb.begin() + len * C, T(0));
        const T* attn_line = cache.attn.data() +
                             std::size_t(line_index) * std::size_t(heads) * std::size_t(len * len);
        for (std::int64_t hd = 0; hd < heads; ++hd) {
            const std::int64_t c0 = hd * dh;
            for (std::int64_t i = 0; i < len; ++i) {
                const T* arow = attn_line + (hd * len + i) * len;
                // dattn_ij = <dout_i, v_j>; dv_j += attn_ij * dout_i
                std::fill(darow.begin(), darow.begin() + len, T(0));
                for (std::int64_t c = c0; c < c0 + dh; ++c) {
                    const T g = dob[std::size_t(c * len + i)];
                    detail::axpy(darow.data(), vb.data() + c * len, g, len);
                    detail::axpy(dvb.data() + c * len, arow, g, len);
                }
                // softmax backward: ds = a * (da - <da, a>), then the 1/sqrt(dh) scale
                const T inner = detail::dot(darow.data(), arow, len);
                for (std::int64_t j = 0; j < len; ++j)
                    dsrow[std::size_t(j)] = arow[j] * (darow[std::size_t(j)] - inner) * scale;
                // dq_i += sum_j ds_ij k_j ; dk_j += ds_ij q_i
                for (std::int64_t c = c0; c < c0 + dh; ++c) {
                    dqb[std::size_t(c * len + i)] += detail::dot(dsrow.data(), kb.data() + c * len, len);
                    detail::axpy(dkb.data() + c * len, dsrow.data(), qb[std::size_t(c * len + i)], len);
                }
            }
        }
        detail::scatter_line(dq, bi, off, stride, len, dqb.data(), false);
        detail::scatter_line(dk, bi, off, stride, len, dkb.data(), false);
        detail::scatter_line(dv, bi, off, stride, len, dvb.data(), false);
        ++line_index;
    });

    // back through the projections (adjoint 1x1x1 convs) and their weights
    const dims3 in_dims{xp.d, xp.h, xp.w};
    tensor5<T> dxp = conv3d_input_grad(dq, p.wq, 1, 0, in_dims);
    detail::add_vec(dxp.data, conv3d_input_grad(dk, p.wk, 1, 0, in_dims).data);
    detail::add_vec(dxp.data, conv3d_input_grad(dv, p.wv, 1, 0, in_dims).data);
    detail::add_vec(dp.wq.data, conv3d_weight_grad(xp, dq, 1, 1, 1, 1, 0).data);
    detail::add_vec(dp.wk.data, conv3d_weight_grad(xp, dk, 1, 1, 1, 1, 0).data);
    detail::add_vec(dp.wv.data, conv3d_weight_grad(xp, dv, 1, 1, 1, 1, 0).data);

    // gradient of the additive embedding: sum dxp over the broadcast axes
    for (std::int64_t bi = 0; bi < xp.b; ++bi)
        for (std::int64_t ci = 0; ci < C; ++ci) {
            const T* g = dxp.ptr(bi, ci);
            T* pe = dp.pos.ptr(0, ci);
            for (std::int64_t z = 0; z < xp.d; ++z)
                for (std::int64_t y = 0; y < xp.h; ++y) {
                    const T* row = g + (z * xp.h + y) * xp.w;
                    if (axis == axis3::width) {
                        for (std::int64_t v = 0; v < xp.w; ++v) pe[v] += row[v];
                    } else {
                        T s = 0;
                        for (std::int64_t v = 0; v < xp.w; ++v) s += row[v];
                        pe[axis == axis3::depth ? z : y] += s;
                    }
                }
        }
    return dxp;  // additive embedding passes the gradient through unchanged
}

/// Analytic multiply-accumulate counts for one attention module over a
/// (d, h, w) grid with C channels. Both modes share one Q/K/V projection pass
/// over all N = d*h*w tokens (3*N*C^2). Score counts cover the QK^T product
/// and the weight application (2*C per attended pair); a single-token
/// sequence attends to nothing but itself and its score cost is counted as
/// zero, so at d=h=w=1 both modes reduce to the projections.
struct attention_cost {
    std::uint64_t projection_macs = 0;
    std::uint64_t token_score_macs[3] = {0, 0, 0};  // per-token cost per axis (axial mode)
    std::uint64_t score_macs = 0;
    std::uint64_t total_macs = 0;
};

enum class attention_mode { axial, full };

inline attention_cost attention_flops(dims3 dims, std::int64_t channels, attention_mode mode) {
    if (dims.d < 1 || dims.h < 1 || dims.w < 1 || channels < 1)
        throw std::invalid_argument("attention_flops: dims and channels must be positive");
    const std::uint64_t N = std::uint64_t(dims.count());
    const std::uint64_t C = std::uint64_t(channels);
    attention_cost cost;
    cost.projection_macs = 3 * N * C * C;
    if (mode == attention_mode::full) {
        cost.score_macs = N > 1 ? 2 * N * N * C : 0;
    } else {
        const std::uint64_t lens[3] = {std::uint64_t(dims.d), std::uint64_t(dims.h),
                                       std::uint64_t(dims.w)};
        for (int a = 0; a < 3; ++a) {
            cost.token_score_macs[a] = lens[a] > 1 ? 2 * C * lens[a] : 0;
            cost.score_macs += N * cost.token_score_macs[a];
        }
    }
    cost.total_macs = cost.projection_macs + cost.score_macs;
    return cost;
}

}  // namespace canet
