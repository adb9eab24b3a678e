#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "canet/rng.hpp"
#include "canet/tensor.hpp"

namespace canet {

/// Training-time augmentation: isotropic scaling, rotation about a random
/// grid axis, elastic deformation, gamma transform. Each transform fires with
/// its own probability; parameters are drawn from the passed rng, so a fixed
/// seed reproduces the output bit for bit.
struct augment_config {
    double scale_lo = 0.85, scale_hi = 1.25, scale_prob = 0.2;
    double rotation_max_deg = 30.0, rotation_prob = 0.2;
    double elastic_alpha_mm = 8.0, elastic_sigma_mm = 4.0, elastic_prob = 0.2;
    bool elastic_enabled = true;
    double gamma_lo = 0.7, gamma_hi = 1.5, gamma_prob = 0.2;

    void validate() const {
        auto range = [](double lo, double hi, const char* what) {
            if (!(0 < lo && lo <= hi)) throw std::invalid_argument(std::string("augment_config: bad ") + what);
        };
        range(scale_lo, scale_hi, "scale range");
        range(gamma_lo, gamma_hi, "gamma range");
        for (double p : {scale_prob, rotation_prob, elastic_prob, gamma_prob})
            if (p < 0 || p > 1) throw std::invalid_argument("augment_config: probability outside [0,1]");
        if (rotation_max_deg < 0) throw std::invalid_argument("augment_config: negative rotation");
        if (elastic_alpha_mm < 0 || elastic_sigma_mm <= 0)
            throw std::invalid_argument("augment_config: bad elastic parameters");
    }
};

namespace detail {

inline void catmull_rom_aug(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = -0.5 * t3 + t2 - 0.5 * t;
    w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
    w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
    w[3] = 0.5 * t3 - 0.5 * t2;
}

// 4x4x4 cubic sample; taps outside the grid read `pad`
inline double sample_cubic_pad(const volume& v, double z, double y, double x, double pad) {
    const std::int64_t bz = std::int64_t(std::floor(z));
    const std::int64_t by = std::int64_t(std::floor(y));
    const std::int64_t bx = std::int64_t(std::floor(x));
    double wz[4], wy[4], wx[4];
    catmull_rom_aug(z - double(bz), wz);
    catmull_rom_aug(y - double(by), wy);
    catmull_rom_aug(x - double(bx), wx);
    double acc = 0;
    for (int kz = 0; kz < 4; ++kz) {
        const std::int64_t zi = bz - 1 + kz;
        for (int ky = 0; ky < 4; ++ky) {
            const std::int64_t yi = by - 1 + ky;
            const double wzy = wz[kz] * wy[ky];
            for (int kx = 0; kx < 4; ++kx) {
                const std::int64_t xi = bx - 1 + kx;
                const bool inside = zi >= 0 && zi < v.dims.d && yi >= 0 && yi < v.dims.h &&
                                    xi >= 0 && xi < v.dims.w;
                acc += wzy * wx[kx] * (inside ? double(v.at(zi, yi, xi)) : pad);
            }
        }
    }
    return acc;
}

inline std::uint8_t sample_nearest_pad(const label_map& m, double z, double y, double x) {
    const std::int64_t zi = std::llround(z), yi = std::llround(y), xi = std::llround(x);
    if (zi < 0 || zi >= m.dims.d || yi < 0 || yi >= m.dims.h || xi < 0 || xi >= m.dims.w) return 0;
    return m.at(zi, yi, xi);
}

// resample both grids through an arbitrary backward coordinate map
template <typename MapFn>
void warp_pair(volume& v, label_map& m, MapFn&& src_of) {
    const double pad = double(*std::min_element(v.data.begin(), v.data.end()));
    volume vo = v;
    label_map mo = m;
    for (std::int64_t z = 0; z < v.dims.d; ++z)
        for (std::int64_t y = 0; y < v.dims.h; ++y)
            for (std::int64_t x = 0; x < v.dims.w; ++x) {
                double sz, sy, sx;
                src_of(double(z), double(y), double(x), sz, sy, sx);
                vo.at(z, y, x) = float(sample_cubic_pad(v, sz, sy, sx, pad));
                mo.at(z, y, x) = sample_nearest_pad(m, sz, sy, sx);
            }
    v = std::move(vo);
    m = std::move(mo);
}

// separable Gaussian blur with replicate borders, sigma in voxels per axis
inline void gaussian_blur(std::vector<float>& f, dims3 d, double sz, double sy, double sx) {
    auto pass = [&](int axis, double sigma) {
        if (sigma <= 0) return;
        const std::int64_t radius = std::max<std::int64_t>(1, std::int64_t(std::ceil(3 * sigma)));
        std::vector<double> k(std::size_t(2 * radius + 1));
        double sum = 0;
        for (std::int64_t i = -radius; i <= radius; ++i) {
            k[std::size_t(i + radius)] = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
            sum += k[std::size_t(i + radius)];
        }
        for (auto& w : k) w /= sum;
        const std::int64_t n = axis == 0 ? d.d : axis == 1 ? d.h : d.w;
        std::vector<float> out(f.size());
        for (std::int64_t z = 0; z < d.d; ++z)
            for (std::int64_t y = 0; y < d.h; ++y)
                for (std::int64_t x = 0; x < d.w; ++x) {
                    double acc = 0;
                    for (std::int64_t i = -radius; i <= radius; ++i) {
                        std::int64_t zi = z, yi = y, xi = x;
                        (axis == 0 ? zi : axis == 1 ? yi : xi) =
                            std::clamp<std::int64_t>((axis == 0 ? z : axis == 1 ? y : x) + i, 0, n - 1);
                        acc += k[std::size_t(i + radius)] *
                               double(f[std::size_t((zi * d.h + yi) * d.w + xi)]);
                    }
                    out[std::size_t((z * d.h + y) * d.w + x)] = float(acc);
                }
        f = std::move(out);
    };
    pass(0, sz);
    pass(1, sy);
    pass(2, sx);
}

}  // namespace detail

/// Applies the configured augmentations in a fixed order: scale, rotation,
/// elastic, gamma. Out-of-range image samples read the volume's minimum;
/// out-of-range mask samples read background.
inline std::pair<volume, label_map> augment(const volume& v_in, const label_map& m_in,
                                            const augment_config& cfg, rng& r) {
    cfg.validate();
    if (!(v_in.dims == m_in.dims)) throw std::invalid_argument("augment: volume/mask dims mismatch");
    volume v = v_in;
    label_map m = m_in;
    const double cz = double(v.dims.d - 1) / 2.0;
    const double cy = double(v.dims.h - 1) / 2.0;
    const double cx = double(v.dims.w - 1) / 2.0;

    if (r.uniform() < cfg.scale_prob) {
        const double s = r.uniform(cfg.scale_lo, cfg.scale_hi);
        detail::warp_pair(v, m, [&](double z, double y, double x, double& sz, double& sy, double& sx) {
            sz = cz + (z - cz) / s;
            sy = cy + (y - cy) / s;
            sx = cx + (x - cx) / s;
        });
    }
    if (r.uniform() < cfg.rotation_prob) {
        const int axis = int(r.uniform_index(3));  // 0 depth, 1 height, 2 width
        const double a = r.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg) * 3.141592653589793 / 180.0;
        const double c = std::cos(a), s = std::sin(a);
        detail::warp_pair(v, m, [&](double z, double y, double x, double& sz, double& sy, double& sx) {
            sz = z; sy = y; sx = x;
            if (axis == 0) {  // rotate the (h, w) plane
                sy = cy + c * (y - cy) - s * (x - cx);
                sx = cx + s * (y - cy) + c * (x - cx);
            } else if (axis == 1) {  // (d, w) plane
                sz = cz + c * (z - cz) - s * (x - cx);
                sx = cx + s * (z - cz) + c * (x - cx);
            } else {  // (d, h) plane
                sz = cz + c * (z - cz) - s * (y - cy);
                sy = cy + s * (z - cz) + c * (y - cy);
            }
        });
    }
    if (cfg.elastic_enabled && r.uniform() < cfg.elastic_prob) {
        const dims3 d = v.dims;
        std::vector<float> disp[3];
        for (auto& f : disp) {
            f.resize(std::size_t(d.count()));
            for (auto& x : f) x = float(r.normal());
        }
        const double svox[3] = {cfg.elastic_sigma_mm / v.spacing.z, cfg.elastic_sigma_mm / v.spacing.y,
                                cfg.elastic_sigma_mm / v.spacing.x};
        const double spacing[3] = {v.spacing.z, v.spacing.y, v.spacing.x};
        for (int axis = 0; axis < 3; ++axis) {
            detail::gaussian_blur(disp[axis], d, svox[0], svox[1], svox[2]);
            double m2 = 0;
            for (float f : disp[axis]) m2 += double(f) * double(f);
            const double sd = std::sqrt(m2 / double(disp[axis].size()));
            // unit-variance field scaled to alpha millimetres, then to voxels
            const double gain = sd > 1e-12 ? cfg.elastic_alpha_mm / (sd * spacing[axis]) : 0.0;
            for (auto& f : disp[axis]) f = float(double(f) * gain);
        }
        detail::warp_pair(v, m, [&](double z, double y, double x, double& sz, double& sy, double& sx) {
            const std::size_t i = std::size_t((std::int64_t(z) * d.h + std::int64_t(y)) * d.w + std::int64_t(x));
            sz = z + double(disp[0][i]);
            sy = y + double(disp[1][i]);
            sx = x + double(disp[2][i]);
        });
    }
    if (r.uniform() < cfg.gamma_prob) {
        const double g = r.uniform(cfg.gamma_lo, cfg.gamma_hi);
        const auto [mn_it, mx_it] = std::minmax_element(v.data.begin(), v.data.end());
        const double mn = double(*mn_it), mx = double(*mx_it);
        if (mx - mn > 1e-12) {
            const double inv = 1.0 / (mx - mn);
            for (auto& x : v.data)
                x = float(mn + (mx - mn) * std::pow((double(x) - mn) * inv, g));
        }
    }
    return {std::move(v), std::move(m)};
}

}  // namespace canet
