#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "canet/tensor.hpp"

namespace canet {

/// Channel-wise softmax over a (b,c,d,h,w) tensor. Numerically stabilised by
/// per-voxel max subtraction, so arbitrarily large finite logits are fine.
template <typename T>
tensor5<T> softmax_channels(const tensor5<T>& t) {
    tensor5<T> out(t.b, t.c, t.d, t.h, t.w);
    const std::int64_t sp = t.spatial_size();
    std::vector<T> buf(std::size_t(t.c));
    for (std::int64_t bi = 0; bi < t.b; ++bi) {
        for (std::int64_t v = 0; v < sp; ++v) {
            T mx = t.data[std::size_t(bi * t.c) * sp + v];
            for (std::int64_t ci = 0; ci < t.c; ++ci) {
                T x = t.data[std::size_t(bi * t.c + ci) * sp + v];
                if (!std::isfinite(double(x))) throw std::invalid_argument("softmax_channels: non-finite logits");
                mx = std::max(mx, x);
            }
            T sum = 0;
            for (std::int64_t ci = 0; ci < t.c; ++ci) {
                T e = std::exp(t.data[std::size_t(bi * t.c + ci) * sp + v] - mx);
                buf[std::size_t(ci)] = e;
                sum += e;
            }
            for (std::int64_t ci = 0; ci < t.c; ++ci)
                out.data[std::size_t(bi * t.c + ci) * sp + v] = buf[std::size_t(ci)] / sum;
        }
    }
    return out;
}

/// Percentile with linear interpolation between order statistics at rank
/// r = p/100 * (n-1). p in [0,100], values non-empty.
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sequence");
    if (p < 0.0 || p > 100.0) throw std::invalid_argument("percentile: p outside [0,100]");
    std::sort(values.begin(), values.end());
    const double r = p / 100.0 * double(values.size() - 1);
    const std::size_t lo = std::size_t(std::floor(r));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = r - double(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean: empty sequence");
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}

/// Population standard deviation (divides by n).
inline double stddev(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size()));
}

}  // namespace canet
