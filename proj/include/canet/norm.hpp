#pragma once

#include <cmath>
#include <vector>

#include "canet/tensor.hpp"

namespace canet {

constexpr double kLeakySlope = 0.01;

template <typename T>
struct norm_cache {
    tensor5<T> xhat;             // normalised pre-affine values
    std::vector<T> inv_sd;       // per (batch, channel)
};

/// Instance normalisation (per batch, per channel, over space) followed by an
/// affine transform and leaky activation. A zero-variance channel collapses
/// to activation(shift).
template <typename T>
tensor5<T> instance_norm_act(const tensor5<T>& x, const std::vector<T>& gamma,
                             const std::vector<T>& beta, double eps, norm_cache<T>* cache = nullptr) {
    if (std::int64_t(gamma.size()) != x.c || std::int64_t(beta.size()) != x.c)
        throw std::invalid_argument("instance_norm_act: affine size mismatch");
    const std::int64_t sp = x.spatial_size();
    tensor5<T> out(x.b, x.c, x.d, x.h, x.w);
    if (cache) {
        cache->xhat = tensor5<T>(x.b, x.c, x.d, x.h, x.w);
        cache->inv_sd.assign(std::size_t(x.b * x.c), T(0));
    }
    for (std::int64_t bi = 0; bi < x.b; ++bi) {
        for (std::int64_t ci = 0; ci < x.c; ++ci) {
            const T* p = x.ptr(bi, ci);
            double s = 0, s2 = 0;
            for (std::int64_t v = 0; v < sp; ++v) {
                s += double(p[v]);
                s2 += double(p[v]) * double(p[v]);
            }
            const double m = s / double(sp);
            const double var = std::max(0.0, s2 / double(sp) - m * m);
            const T inv = T(1.0 / std::sqrt(var + eps));
            if (cache) cache->inv_sd[std::size_t(bi * x.c + ci)] = inv;
            const T g = gamma[std::size_t(ci)], b = beta[std::size_t(ci)];
            T* o = out.ptr(bi, ci);
            T* xh = cache ? cache->xhat.ptr(bi, ci) : nullptr;
            for (std::int64_t v = 0; v < sp; ++v) {
                const T xhat = (p[v] - T(m)) * inv;
                if (xh) xh[v] = xhat;
                const T z = g * xhat + b;
                o[v] = z > T(0) ? z : T(kLeakySlope) * z;
            }
        }
    }
    return out;
}

/// Gradient of instance_norm_act. dgamma/dbeta are accumulated into.
template <typename T>
tensor5<T> instance_norm_act_backward(const tensor5<T>& dout, const std::vector<T>& gamma,
                                      const std::vector<T>& beta, const norm_cache<T>& cache,
                                      std::vector<T>& dgamma, std::vector<T>& dbeta) {
    const tensor5<T>& xhat = cache.xhat;
    const std::int64_t sp = xhat.spatial_size();
    tensor5<T> dx(xhat.b, xhat.c, xhat.d, xhat.h, xhat.w);
    for (std::int64_t bi = 0; bi < xhat.b; ++bi) {
        for (std::int64_t ci = 0; ci < xhat.c; ++ci) {
            const T g = gamma[std::size_t(ci)], b = beta[std::size_t(ci)];
            const T inv = cache.inv_sd[std::size_t(bi * xhat.c + ci)];
            const T* xh = xhat.ptr(bi, ci);
            const T* go = dout.ptr(bi, ci);
            T* dxp = dx.ptr(bi, ci);
            double sum_dz = 0, sum_dzxh = 0;
            for (std::int64_t v = 0; v < sp; ++v) {
                const T z = g * xh[v] + b;
                const T dz = go[v] * (z > T(0) ? T(1) : T(kLeakySlope));
                dxp[v] = dz;  // stash dz, rescaled below
                sum_dz += double(dz);
                sum_dzxh += double(dz) * double(xh[v]);
            }
            dgamma[std::size_t(ci)] += T(sum_dzxh);
            dbeta[std::size_t(ci)] += T(sum_dz);
            const T m1 = T(sum_dz * g / double(sp));
            const T m2 = T(sum_dzxh * g / double(sp));
            for (std::int64_t v = 0; v < sp; ++v)
                dxp[v] = inv * (g * dxp[v] - m1 - xh[v] * m2);
        }
    }
    return dx;
}

}  // namespace canet
