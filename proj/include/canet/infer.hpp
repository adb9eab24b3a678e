#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "canet/network.hpp"
#include "canet/numeric.hpp"
#include "canet/postproc.hpp"
#include "canet/prep.hpp"
#include "canet/tensor.hpp"

namespace canet {

struct infer_config {
    dims3 patch{64, 64, 64};
    bool sliding_window = true;       // false: one whole-volume forward pass
    double overlap = 0.5;             // window step = patch * (1 - overlap)
    double gaussian_sigma_frac = 0.125;  // blending sigma = patch/8
    std::vector<std::uint8_t> cleanup_classes{kKidney, kTumor};
    int connectivity = 26;

    void validate() const {
        if (patch.d < 1 || patch.h < 1 || patch.w < 1) throw std::invalid_argument("infer: bad patch");
        if (overlap < 0 || overlap >= 1) throw std::invalid_argument("infer: overlap outside [0,1)");
        if (connectivity != 6 && connectivity != 26) throw std::invalid_argument("infer: bad connectivity");
    }
};

namespace detail {

// nearest-neighbour label resampling to explicit output dims (geometry restore)
inline label_map resample_mask_to(const label_map& m, dims3 out_dims, vec3 out_spacing) {
    label_map out(out_dims, out_spacing, m.origin);
    const double rz = double(m.dims.d) / double(out_dims.d);
    const double ry = double(m.dims.h) / double(out_dims.h);
    const double rx = double(m.dims.w) / double(out_dims.w);
    for (std::int64_t z = 0; z < out_dims.d; ++z) {
        const std::int64_t zi = std::clamp<std::int64_t>(std::llround(src_coord(z, rz)), 0, m.dims.d - 1);
        for (std::int64_t y = 0; y < out_dims.h; ++y) {
            const std::int64_t yi = std::clamp<std::int64_t>(std::llround(src_coord(y, ry)), 0, m.dims.h - 1);
            for (std::int64_t x = 0; x < out_dims.w; ++x) {
                const std::int64_t xi = std::clamp<std::int64_t>(std::llround(src_coord(x, rx)), 0, m.dims.w - 1);
                out.at(z, y, x) = m.at(zi, yi, xi);
            }
        }
    }
    return out;
}

inline std::vector<std::int64_t> window_origins(std::int64_t extent, std::int64_t patch,
                                                std::int64_t step) {
    std::vector<std::int64_t> out;
    for (std::int64_t o = 0;; o += step) {
        if (o + patch >= extent) {
            out.push_back(extent - patch);
            break;
        }
        out.push_back(o);
    }
    return out;
}

inline std::vector<float> gaussian_window(dims3 patch, double sigma_frac) {
    std::vector<float> w(std::size_t(patch.count()));
    const double sz = std::max(1e-6, sigma_frac * double(patch.d));
    const double sy = std::max(1e-6, sigma_frac * double(patch.h));
    const double sx = std::max(1e-6, sigma_frac * double(patch.w));
    const double cz = double(patch.d - 1) / 2, cy = double(patch.h - 1) / 2, cx = double(patch.w - 1) / 2;
    std::size_t i = 0;
    for (std::int64_t z = 0; z < patch.d; ++z)
        for (std::int64_t y = 0; y < patch.h; ++y)
            for (std::int64_t x = 0; x < patch.w; ++x, ++i) {
                const double ez = (double(z) - cz) / sz, ey = (double(y) - cy) / sy,
                             ex = (double(x) - cx) / sx;
                w[i] = float(std::exp(-0.5 * (ez * ez + ey * ey + ex * ex)));
            }
    return w;
}

}  // namespace detail

/// Full inference path: preprocess with the stored statistics, tile with
/// overlapping Gaussian-blended windows (or one whole-volume pass), argmax,
/// largest-component cleanup, then restore the native geometry.
inline label_map infer(const volume& native, const network<float>& net, const prep_stats& stats,
                       const infer_config& ic = {}) {
    ic.validate();
    stats.validate();
    if (net.cfg.in_channels != 1) throw std::invalid_argument("infer: expected a 1-channel network");
    const std::int64_t divisor = net.cfg.downsample_factor();

    volume work = clip_normalize(resample_image(native, stats.target_spacing), stats);
    const dims3 proc_dims = work.dims;

    // pad so every window (or the whole volume) fits the network
    dims3 padded = proc_dims;
    if (ic.sliding_window) {
        padded.d = std::max(padded.d, ic.patch.d);
        padded.h = std::max(padded.h, ic.patch.h);
        padded.w = std::max(padded.w, ic.patch.w);
    }
    padded.d = (padded.d + divisor - 1) / divisor * divisor;
    padded.h = (padded.h + divisor - 1) / divisor * divisor;
    padded.w = (padded.w + divisor - 1) / divisor * divisor;
    if (!(padded == proc_dims)) {
        const float pad = *std::min_element(work.data.begin(), work.data.end());
        volume grown(padded, work.spacing, work.origin);
        std::fill(grown.data.begin(), grown.data.end(), pad);
        for (std::int64_t z = 0; z < proc_dims.d; ++z)
            for (std::int64_t y = 0; y < proc_dims.h; ++y)
                std::copy_n(&work.at(z, y, 0), proc_dims.w, &grown.at(z, y, 0));
        work = std::move(grown);
    }

    tensor5f probs(1, net.cfg.num_classes, padded.d, padded.h, padded.w);
    if (!ic.sliding_window) {
        tensor5f input(1, 1, padded.d, padded.h, padded.w);
        std::copy(work.data.begin(), work.data.end(), input.ptr(0, 0));
        probs = softmax_channels(forward(net, input));
    } else {
        const dims3 patch = ic.patch;
        if (patch.d % divisor || patch.h % divisor || patch.w % divisor)
            throw std::invalid_argument("infer: patch dims must be divisible by " + std::to_string(divisor));
        const auto weights = detail::gaussian_window(patch, ic.gaussian_sigma_frac);
        std::vector<float> wsum(std::size_t(padded.count()), 0.f);
        auto step_of = [&](std::int64_t p) {
            return std::max<std::int64_t>(1, std::int64_t(std::llround(double(p) * (1.0 - ic.overlap))));
        };
        const auto oz = detail::window_origins(padded.d, patch.d, step_of(patch.d));
        const auto oy = detail::window_origins(padded.h, patch.h, step_of(patch.h));
        const auto ox = detail::window_origins(padded.w, patch.w, step_of(patch.w));
        tensor5f input(1, 1, patch.d, patch.h, patch.w);
        for (const std::int64_t z0 : oz)
            for (const std::int64_t y0 : oy)
                for (const std::int64_t x0 : ox) {
                    for (std::int64_t z = 0; z < patch.d; ++z)
                        for (std::int64_t y = 0; y < patch.h; ++y)
                            std::copy_n(&work.at(z0 + z, y0 + y, x0), patch.w,
                                        input.ptr(0, 0) + (z * patch.h + y) * patch.w);
                    auto p = softmax_channels(forward(net, input));
                    for (std::int64_t c = 0; c < p.c; ++c) {
                        const float* src = p.ptr(0, c);
                        float* dst = probs.ptr(0, c);
                        std::size_t i = 0;
                        for (std::int64_t z = 0; z < patch.d; ++z)
                            for (std::int64_t y = 0; y < patch.h; ++y) {
                                float* row = dst + ((z0 + z) * padded.h + (y0 + y)) * padded.w + x0;
                                for (std::int64_t x = 0; x < patch.w; ++x, ++i)
                                    row[x] += weights[i] * src[i];
                            }
                    }
                    std::size_t i = 0;
                    for (std::int64_t z = 0; z < patch.d; ++z)
                        for (std::int64_t y = 0; y < patch.h; ++y) {
                            float* row = wsum.data() + std::size_t(((z0 + z) * padded.h + (y0 + y)) * padded.w + x0);
                            for (std::int64_t x = 0; x < patch.w; ++x, ++i) row[x] += weights[i];
                        }
                }
        for (std::int64_t c = 0; c < probs.c; ++c) {
            float* p = probs.ptr(0, c);
            for (std::size_t i = 0; i < wsum.size(); ++i) p[i] /= wsum[i];
        }
    }

    label_map labels = argmax_labels(probs, stats.target_spacing, native.origin);
    labels = keep_largest(labels, ic.cleanup_classes, ic.connectivity);

    // drop padding, then restore native dims and spacing
    if (!(padded == proc_dims)) {
        label_map cropped(proc_dims, labels.spacing, labels.origin);
        for (std::int64_t z = 0; z < proc_dims.d; ++z)
            for (std::int64_t y = 0; y < proc_dims.h; ++y)
                std::copy_n(&labels.at(z, y, 0), proc_dims.w, &cropped.at(z, y, 0));
        labels = std::move(cropped);
    }
    if (!(proc_dims == native.dims) || !(labels.spacing == native.spacing))
        labels = detail::resample_mask_to(labels, native.dims, native.spacing);
    return labels;
}

}  // namespace canet
