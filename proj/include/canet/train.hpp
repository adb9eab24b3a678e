#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "canet/augment.hpp"
#include "canet/config.hpp"
#include "canet/loss.hpp"
#include "canet/network.hpp"
#include "canet/numeric.hpp"
#include "canet/rng.hpp"
#include "canet/tensor.hpp"

namespace canet {

struct training_case {
    std::string id;
    volume image;   // already preprocessed (resampled + normalised)
    label_map labels;
};

struct epoch_stats {
    double train_loss = 0;
    double train_dice = 0;   // soft dice averaged over the epoch's steps
    double val_dice = -1;    // -1 when no validation cases were given
};

struct train_result {
    network<float> net;
    std::vector<epoch_stats> history;
    std::int64_t steps_done = 0;
    bool stopped_early = false;
};

namespace detail {

// stochastic-gradient step with (optionally Nesterov) momentum
template <typename T>
void sgd_step(network<T>& net, const network<T>& grads, network<T>& velocity,
              const train_config& tc, double lr) {
    std::vector<std::vector<T>*> p, g, v;
    visit_params(net, [&](const std::string&, std::vector<T>& d, const auto&) { p.push_back(&d); });
    visit_params(const_cast<network<T>&>(grads),
                 [&](const std::string&, std::vector<T>& d, const auto&) { g.push_back(&d); });
    visit_params(velocity, [&](const std::string&, std::vector<T>& d, const auto&) { v.push_back(&d); });
    for (std::size_t k = 0; k < p.size(); ++k) {
        auto& pd = *p[k];
        auto& gd = *g[k];
        auto& vd = *v[k];
        for (std::size_t i = 0; i < pd.size(); ++i) {
            T grad = gd[i] + T(tc.weight_decay) * pd[i];
            vd[i] = T(tc.momentum) * vd[i] + grad;
            const T update = tc.nesterov ? grad + T(tc.momentum) * vd[i] : vd[i];
            pd[i] -= T(lr) * update;
        }
    }
}

// copy a patch, padding with the image minimum / background where the patch
// sticks out of the case
inline void extract_patch(const training_case& c, dims3 patch, std::int64_t oz, std::int64_t oy,
                          std::int64_t ox, volume& vout, label_map& lout) {
    float pad = c.image.data.empty() ? 0.f : c.image.data[0];
    for (float v : c.image.data) pad = std::min(pad, v);
    vout = volume(patch, c.image.spacing);
    lout = label_map(patch, c.image.spacing);
    for (std::int64_t z = 0; z < patch.d; ++z)
        for (std::int64_t y = 0; y < patch.h; ++y)
            for (std::int64_t x = 0; x < patch.w; ++x) {
                const std::int64_t sz = oz + z, sy = oy + y, sx = ox + x;
                const bool in = sz >= 0 && sz < c.image.dims.d && sy >= 0 && sy < c.image.dims.h &&
                                sx >= 0 && sx < c.image.dims.w;
                vout.at(z, y, x) = in ? c.image.at(sz, sy, sx) : pad;
                lout.at(z, y, x) = in ? c.labels.at(sz, sy, sx) : kBackground;
            }
}

inline std::int64_t clamp_origin(std::int64_t center, std::int64_t patch, std::int64_t extent) {
    const std::int64_t o = center - patch / 2;
    return std::clamp<std::int64_t>(o, std::min<std::int64_t>(0, extent - patch),
                                    std::max<std::int64_t>(0, extent - patch));
}

}  // namespace detail

/// Patch-based training loop: foreground-biased sampling, augmentation,
/// forward, dice+CE, exact backward, SGD with momentum and polynomial
/// learning-rate decay. Deterministic for a fixed seed.
inline train_result train(const std::vector<training_case>& cases,
                          const std::vector<training_case>& val_cases, const train_config& tc,
                          const network_config& nc,
                          const std::function<void(std::int64_t, const epoch_stats&)>& on_epoch = {}) {
    tc.validate();
    nc.validate();
    if (cases.empty()) throw std::invalid_argument("train: no training cases");
    const std::int64_t f = nc.downsample_factor();
    if (tc.patch.d % f || tc.patch.h % f || tc.patch.w % f)
        throw std::invalid_argument("train: patch dims must be divisible by " + std::to_string(f));

    train_result res{network<float>(nc), {}, 0, false};
    init_params(res.net, tc.seed);
    network<float> velocity(nc);

    // per-case foreground voxel lists for biased sampling
    std::vector<std::vector<std::int64_t>> fg(cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i)
        for (std::size_t v = 0; v < cases[i].labels.size(); ++v)
            if (cases[i].labels.data[v] != kBackground) fg[i].push_back(std::int64_t(v));

    rng data_rng = rng(tc.seed).fork("data");
    rng aug_rng = rng(tc.seed).fork("augment");

    volume vpatch;
    label_map lpatch;
    for (std::int64_t epoch = 0; epoch < tc.epochs && !res.stopped_early; ++epoch) {
        const double lr = tc.learning_rate *
                          std::pow(1.0 - double(epoch) / double(tc.epochs), tc.poly_exponent);
        epoch_stats es;
        for (std::int64_t step = 0; step < tc.steps_per_epoch; ++step) {
            tensor5f input(tc.batch_size, nc.in_channels, tc.patch.d, tc.patch.h, tc.patch.w);
            tensor5f target(tc.batch_size, nc.num_classes, tc.patch.d, tc.patch.h, tc.patch.w);
            for (std::int64_t b = 0; b < tc.batch_size; ++b) {
                const std::size_t ci = std::size_t(data_rng.uniform_index(cases.size()));
                const auto& cs = cases[ci];
                std::int64_t cz, cy, cx;
                if (!fg[ci].empty() && data_rng.uniform() < tc.fg_bias) {
                    const std::int64_t v = fg[ci][std::size_t(data_rng.uniform_index(fg[ci].size()))];
                    cz = v / (cs.labels.dims.h * cs.labels.dims.w);
                    cy = (v / cs.labels.dims.w) % cs.labels.dims.h;
                    cx = v % cs.labels.dims.w;
                } else {
                    cz = std::int64_t(data_rng.uniform_index(std::uint64_t(cs.image.dims.d)));
                    cy = std::int64_t(data_rng.uniform_index(std::uint64_t(cs.image.dims.h)));
                    cx = std::int64_t(data_rng.uniform_index(std::uint64_t(cs.image.dims.w)));
                }
                detail::extract_patch(cs, tc.patch,
                                      detail::clamp_origin(cz, tc.patch.d, cs.image.dims.d),
                                      detail::clamp_origin(cy, tc.patch.h, cs.image.dims.h),
                                      detail::clamp_origin(cx, tc.patch.w, cs.image.dims.w), vpatch,
                                      lpatch);
                if (tc.augment_enabled) {
                    auto [va, la] = augment(vpatch, lpatch, tc.augment, aug_rng);
                    vpatch = std::move(va);
                    lpatch = std::move(la);
                }
                std::copy(vpatch.data.begin(), vpatch.data.end(), input.ptr(b, 0));
                one_hot_into(target, b, lpatch);
            }
            forward_cache<float> cache;
            auto pred = softmax_channels(forward(res.net, input, &cache));
            auto loss = total_loss(pred, target, tc.loss);
            if (!std::isfinite(loss.total))
                throw std::runtime_error("train: diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(step));
            auto back = backward(res.net, cache, loss.dlogits);
            detail::sgd_step(res.net, back.grads, velocity, tc, lr);
            es.train_loss += loss.total;
            es.train_dice += 1.0 - loss.dice;
            ++res.steps_done;
        }
        es.train_loss /= double(tc.steps_per_epoch);
        es.train_dice /= double(tc.steps_per_epoch);

        if (!val_cases.empty()) {
            double vd = 0;
            for (const auto& vc : val_cases) {
                detail::extract_patch(vc, tc.patch,
                                      detail::clamp_origin(vc.image.dims.d / 2, tc.patch.d, vc.image.dims.d),
                                      detail::clamp_origin(vc.image.dims.h / 2, tc.patch.h, vc.image.dims.h),
                                      detail::clamp_origin(vc.image.dims.w / 2, tc.patch.w, vc.image.dims.w),
                                      vpatch, lpatch);
                tensor5f input(1, nc.in_channels, tc.patch.d, tc.patch.h, tc.patch.w);
                std::copy(vpatch.data.begin(), vpatch.data.end(), input.ptr(0, 0));
                tensor5f target(1, nc.num_classes, tc.patch.d, tc.patch.h, tc.patch.w);
                one_hot_into(target, 0, lpatch);
                auto pred = softmax_channels(forward(res.net, input));
                vd += 1.0 - dice_loss(pred, target, tc.loss);
            }
            es.val_dice = vd / double(val_cases.size());
        }
        res.history.push_back(es);
        if (on_epoch) on_epoch(epoch, es);
        if (tc.stop_at_train_dice > 0 && es.train_dice >= tc.stop_at_train_dice)
            res.stopped_early = true;
    }
    return res;
}

}  // namespace canet
