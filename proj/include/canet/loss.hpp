#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "canet/tensor.hpp"

namespace canet {

constexpr double kCeClamp = 1e-7;

enum class dice_aggregation { mean_over_foreground, mean_over_all };

struct loss_config {
    double smooth = 1e-5;
    std::vector<double> class_weights;  // empty = uniform
    dice_aggregation aggregation = dice_aggregation::mean_over_foreground;

    void validate(std::int64_t classes) const {
        if (smooth < 0) throw std::invalid_argument("loss_config: smooth must be >= 0");
        if (!class_weights.empty()) {
            if (std::int64_t(class_weights.size()) != classes)
                throw std::invalid_argument("loss_config: class_weights size mismatch");
            for (double w : class_weights)
                if (w <= 0) throw std::invalid_argument("loss_config: class_weights must be positive");
        }
    }
};

/// Writes the one-hot encoding of `labels` into batch slot `batch_index` of a
/// zero-initialised tensor.
template <typename T>
void one_hot_into(tensor5<T>& out, std::int64_t batch_index, const label_map& labels) {
    if (out.d != labels.dims.d || out.h != labels.dims.h || out.w != labels.dims.w)
        throw std::invalid_argument("one_hot: dims mismatch");
    const std::int64_t sp = out.spatial_size();
    for (std::int64_t v = 0; v < sp; ++v) {
        const std::uint8_t c = labels.data[std::size_t(v)];
        if (c >= out.c) throw std::invalid_argument("one_hot: label outside class set");
        out.data[std::size_t((batch_index * out.c + c) * sp + v)] = T(1);
    }
}

template <typename T>
tensor5<T> one_hot(const label_map& labels, std::int64_t classes) {
    tensor5<T> out(1, classes, labels.dims.d, labels.dims.h, labels.dims.w);
    one_hot_into(out, 0, labels);
    return out;
}

namespace detail {

template <typename T>
void check_loss_shapes(const tensor5<T>& pred, const tensor5<T>& target) {
    if (!pred.same_shape(target)) throw std::invalid_argument("loss: pred/target shape mismatch");
}

struct dice_terms {
    std::vector<double> num, den;  // per class: 2*intersection + s, |P|+|G| + s
};

template <typename T>
dice_terms dice_sums(const tensor5<T>& pred, const tensor5<T>& target, double smooth) {
    check_loss_shapes(pred, target);
    dice_terms t{std::vector<double>(std::size_t(pred.c)), std::vector<double>(std::size_t(pred.c))};
    const std::int64_t sp = pred.spatial_size();
    for (std::int64_t ci = 0; ci < pred.c; ++ci) {
        double inter = 0, psum = 0, gsum = 0;
        for (std::int64_t bi = 0; bi < pred.b; ++bi) {
            const T* p = pred.ptr(bi, ci);
            const T* g = target.ptr(bi, ci);
            for (std::int64_t v = 0; v < sp; ++v) {
                inter += double(p[v]) * double(g[v]);
                psum += double(p[v]);
                gsum += double(g[v]);
            }
        }
        t.num[std::size_t(ci)] = 2.0 * inter + smooth;
        t.den[std::size_t(ci)] = psum + gsum + smooth;
    }
    return t;
}

// classes included in the dice aggregate, with normalised weights
inline std::vector<std::pair<std::int64_t, double>> dice_classes(const loss_config& cfg,
                                                                 std::int64_t classes) {
    const std::int64_t first = cfg.aggregation == dice_aggregation::mean_over_foreground ? 1 : 0;
    std::vector<std::pair<std::int64_t, double>> out;
    double total = 0;
    for (std::int64_t c = first; c < classes; ++c) {
        const double w = cfg.class_weights.empty() ? 1.0 : cfg.class_weights[std::size_t(c)];
        out.emplace_back(c, w);
        total += w;
    }
    if (out.empty()) throw std::invalid_argument("dice_loss: no classes to aggregate");
    for (auto& [c, w] : out) w /= total;
    return out;
}

}  // namespace detail

/// Soft dice per class: (2*sum(p*g) + smooth) / (sum(p) + sum(g) + smooth),
/// summed over every voxel of the batch. An empty-empty class at smooth = 0
/// scores 1 by convention: absent structure predicted absent is correct.
template <typename T>
std::vector<double> dice_coefficient(const tensor5<T>& pred, const tensor5<T>& target, double smooth) {
    auto t = detail::dice_sums(pred, target, smooth);
    std::vector<double> dsc(t.num.size());
    for (std::size_t c = 0; c < dsc.size(); ++c)
        dsc[c] = t.den[c] == 0.0 ? 1.0 : t.num[c] / t.den[c];
    return dsc;
}

template <typename T>
double dice_loss(const tensor5<T>& pred, const tensor5<T>& target, const loss_config& cfg) {
    cfg.validate(pred.c);
    const auto dsc = dice_coefficient(pred, target, cfg.smooth);
    double agg = 0;
    for (const auto& [c, w] : detail::dice_classes(cfg, pred.c)) agg += w * dsc[std::size_t(c)];
    return 1.0 - agg;
}

/// Mean over voxels of -sum_c target_c * log(pred_c), with predictions
/// clamped at 1e-7 so a confident miss stays finite.
template <typename T>
double ce_loss(const tensor5<T>& pred, const tensor5<T>& target) {
    detail::check_loss_shapes(pred, target);
    const std::int64_t sp = pred.spatial_size();
    const double nvox = double(pred.b) * double(sp);
    double loss = 0;
    for (std::int64_t bi = 0; bi < pred.b; ++bi)
        for (std::int64_t ci = 0; ci < pred.c; ++ci) {
            const T* p = pred.ptr(bi, ci);
            const T* g = target.ptr(bi, ci);
            for (std::int64_t v = 0; v < sp; ++v)
                if (g[v] != T(0))
                    loss -= double(g[v]) * std::log(std::min(1.0, std::max(kCeClamp, double(p[v]))));
        }
    return loss / nvox;
}

template <typename T>
struct loss_result {
    double total = 0, dice = 0, ce = 0;
    tensor5<T> dlogits;  // exact gradient w.r.t. the pre-softmax logits
};

/// Combined loss: dice + cross-entropy with unit weights. `pred` must be the
/// softmax of the logits; the returned gradient is taken through that softmax.
template <typename T>
loss_result<T> total_loss(const tensor5<T>& pred, const tensor5<T>& target, const loss_config& cfg) {
    cfg.validate(pred.c);
    detail::check_loss_shapes(pred, target);
    loss_result<T> res;
    res.ce = ce_loss(pred, target);
    const auto terms = detail::dice_sums(pred, target, cfg.smooth);
    const auto agg = detail::dice_classes(cfg, pred.c);
    double dice_sum = 0;
    for (const auto& [c, w] : agg)
        dice_sum += w * (terms.den[std::size_t(c)] == 0.0 ? 1.0
                                                          : terms.num[std::size_t(c)] / terms.den[std::size_t(c)]);
    res.dice = 1.0 - dice_sum;
    res.total = res.dice + res.ce;

    // dL/dpred, then through softmax: dz_c = p_c * (g_c - sum_k g_k p_k)
    const std::int64_t sp = pred.spatial_size();
    const double nvox = double(pred.b) * double(sp);
    std::vector<double> dice_scale(std::size_t(pred.c), 0.0);  // weight on each class's dice term
    for (const auto& [c, w] : agg) dice_scale[std::size_t(c)] = w;
    tensor5<T> dpred(pred.b, pred.c, pred.d, pred.h, pred.w);
    for (std::int64_t bi = 0; bi < pred.b; ++bi)
        for (std::int64_t ci = 0; ci < pred.c; ++ci) {
            const double u = dice_scale[std::size_t(ci)];
            const double num = terms.num[std::size_t(ci)], den = terms.den[std::size_t(ci)];
            const T* p = pred.ptr(bi, ci);
            const T* g = target.ptr(bi, ci);
            T* dp = dpred.ptr(bi, ci);
            for (std::int64_t v = 0; v < sp; ++v) {
                double grad = 0;
                if (u != 0.0 && den != 0.0)
                    grad -= u * (2.0 * double(g[v]) * den - num) / (den * den);
                if (g[v] != T(0)) {
                    const double pv = double(p[v]);
                    if (pv > kCeClamp && pv < 1.0) grad -= double(g[v]) / (pv * nvox);
                }
                dp[v] = T(grad);
            }
        }
    res.dlogits = tensor5<T>(pred.b, pred.c, pred.d, pred.h, pred.w);
    for (std::int64_t bi = 0; bi < pred.b; ++bi)
        for (std::int64_t v = 0; v < sp; ++v) {
            double inner = 0;
            for (std::int64_t ci = 0; ci < pred.c; ++ci)
                inner += double(dpred.data[std::size_t((bi * pred.c + ci) * sp + v)]) *
                         double(pred.data[std::size_t((bi * pred.c + ci) * sp + v)]);
            for (std::int64_t ci = 0; ci < pred.c; ++ci) {
                const std::size_t idx = std::size_t((bi * pred.c + ci) * sp + v);
                res.dlogits.data[idx] =
                    T(double(pred.data[idx]) * (double(dpred.data[idx]) - inner));
            }
        }
    return res;
}

}  // namespace canet
