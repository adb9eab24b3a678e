#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "canet/numeric.hpp"
#include "canet/tensor.hpp"

namespace canet {

/// Dataset-level preprocessing statistics. Training computes them once; the
/// serialized form is reloaded at inference so both phases normalise
/// identically.
struct prep_stats {
    vec3 target_spacing{1, 1, 1};
    double clip_lo = 0, clip_hi = 0;
    double mu = 0, sigma = 0;

    void validate() const {
        if (clip_lo > clip_hi) throw std::invalid_argument("prep_stats: clip_lo > clip_hi");
        if (sigma < 0) throw std::invalid_argument("prep_stats: sigma < 0");
        if (target_spacing.z <= 0 || target_spacing.y <= 0 || target_spacing.x <= 0)
            throw std::invalid_argument("prep_stats: spacing must be positive");
    }
};

/// Component-wise median over a set of spacings.
inline vec3 median_spacing(const std::vector<vec3>& spacings) {
    if (spacings.empty()) throw std::invalid_argument("median_spacing: empty set");
    std::vector<double> z, y, x;
    for (const auto& s : spacings) {
        z.push_back(s.z);
        y.push_back(s.y);
        x.push_back(s.x);
    }
    return {percentile(z, 50), percentile(y, 50), percentile(x, 50)};
}

namespace detail {

inline std::int64_t resampled_len(std::int64_t n, double spacing, double target) {
    return std::max<std::int64_t>(1, std::int64_t(std::llround(double(n) * spacing / target)));
}

// Catmull-Rom weights for taps at offsets -1, 0, 1, 2 from the base sample
inline void catmull_rom(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = -0.5 * t3 + t2 - 0.5 * t;
    w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
    w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
    w[3] = 0.5 * t3 - 0.5 * t2;
}

// voxel-centre aligned source coordinate of output index i
inline double src_coord(std::int64_t i, double ratio) { return (double(i) + 0.5) * ratio - 0.5; }

// one separable cubic pass along `axis` (0=depth 1=height 2=width), replicate
// borders; exact for constant fields, exact for linear fields away from them
inline std::vector<float> cubic_pass(const std::vector<float>& in, dims3 din, int axis,
                                     std::int64_t out_len, double ratio, dims3& dout) {
    dout = din;
    (axis == 0 ? dout.d : axis == 1 ? dout.h : dout.w) = out_len;
    std::vector<float> out(std::size_t(dout.count()));
    const std::int64_t n = axis == 0 ? din.d : axis == 1 ? din.h : din.w;
    for (std::int64_t zo = 0; zo < dout.d; ++zo)
        for (std::int64_t yo = 0; yo < dout.h; ++yo)
            for (std::int64_t xo = 0; xo < dout.w; ++xo) {
                const std::int64_t o = axis == 0 ? zo : axis == 1 ? yo : xo;
                const double s = src_coord(o, ratio);
                const std::int64_t base = std::int64_t(std::floor(s));
                double w[4];
                catmull_rom(s - double(base), w);
                double acc = 0;
                for (int k = 0; k < 4; ++k) {
                    const std::int64_t idx = std::clamp<std::int64_t>(base - 1 + k, 0, n - 1);
                    const std::int64_t zi = axis == 0 ? idx : zo;
                    const std::int64_t yi = axis == 1 ? idx : yo;
                    const std::int64_t xi = axis == 2 ? idx : xo;
                    acc += w[k] * double(in[std::size_t((zi * din.h + yi) * din.w + xi)]);
                }
                out[std::size_t((zo * dout.h + yo) * dout.w + xo)] = float(acc);
            }
    return out;
}

inline void check_resample_target(vec3 target) {
    if (target.z <= 0 || target.y <= 0 || target.x <= 0)
        throw std::invalid_argument("resample: target spacing must be positive");
}

}  // namespace detail

/// Resamples intensities to a new spacing with separable cubic (Catmull-Rom)
/// interpolation. Output extent per axis is round(dims * spacing / target).
inline volume resample_image(const volume& v, vec3 target) {
    detail::check_resample_target(target);
    if (v.dims.d < 2 || v.dims.h < 2 || v.dims.w < 2)
        throw std::invalid_argument("resample_image: dims must be >= 2 per axis");
    const dims3 out_dims{detail::resampled_len(v.dims.d, v.spacing.z, target.z),
                         detail::resampled_len(v.dims.h, v.spacing.y, target.y),
                         detail::resampled_len(v.dims.w, v.spacing.x, target.x)};
    dims3 cur = v.dims;
    std::vector<float> data = v.data;
    const double ratios[3] = {double(v.dims.d) / double(out_dims.d),
                              double(v.dims.h) / double(out_dims.h),
                              double(v.dims.w) / double(out_dims.w)};
    const std::int64_t lens[3] = {out_dims.d, out_dims.h, out_dims.w};
    for (int axis = 0; axis < 3; ++axis) {
        dims3 next;
        data = detail::cubic_pass(data, cur, axis, lens[axis], ratios[axis], next);
        cur = next;
    }
    volume out(out_dims, target, v.origin);
    out.data = std::move(data);
    return out;
}

/// Nearest-neighbour mask resampling: each output voxel takes the label of
/// the closest input sample centre (ties round half away from zero).
inline label_map resample_mask(const label_map& m, vec3 target) {
    detail::check_resample_target(target);
    const dims3 out_dims{detail::resampled_len(m.dims.d, m.spacing.z, target.z),
                         detail::resampled_len(m.dims.h, m.spacing.y, target.y),
                         detail::resampled_len(m.dims.w, m.spacing.x, target.x)};
    label_map out(out_dims, target, m.origin);
    const double rz = double(m.dims.d) / double(out_dims.d);
    const double ry = double(m.dims.h) / double(out_dims.h);
    const double rx = double(m.dims.w) / double(out_dims.w);
    for (std::int64_t z = 0; z < out_dims.d; ++z) {
        const std::int64_t zi = std::clamp<std::int64_t>(std::llround(detail::src_coord(z, rz)), 0, m.dims.d - 1);
        for (std::int64_t y = 0; y < out_dims.h; ++y) {
            const std::int64_t yi = std::clamp<std::int64_t>(std::llround(detail::src_coord(y, ry)), 0, m.dims.h - 1);
            for (std::int64_t x = 0; x < out_dims.w; ++x) {
                const std::int64_t xi = std::clamp<std::int64_t>(std::llround(detail::src_coord(x, rx)), 0, m.dims.w - 1);
                out.at(z, y, x) = m.at(zi, yi, xi);
            }
        }
    }
    return out;
}

enum class clip_percentile_mode {
    literal,       // [0.05, 99.5], the published range read as-is
    conventional,  // [0.5, 99.5]
};

/// Pools foreground intensities over the whole dataset and derives the clip
/// bounds and normalisation moments. mu/sigma are computed after clipping.
/// target_spacing is filled with the component-wise median of the inputs.
inline prep_stats foreground_stats(const std::vector<volume>& volumes,
                                   const std::vector<label_map>& masks,
                                   clip_percentile_mode mode = clip_percentile_mode::literal) {
    if (volumes.size() != masks.size() || volumes.empty())
        throw std::invalid_argument("foreground_stats: need matching volume/mask pairs");
    std::vector<double> pool;
    std::vector<vec3> spacings;
    for (std::size_t i = 0; i < volumes.size(); ++i) {
        if (!(volumes[i].dims == masks[i].dims))
            throw std::invalid_argument("foreground_stats: volume/mask dims mismatch");
        spacings.push_back(volumes[i].spacing);
        for (std::size_t v = 0; v < masks[i].size(); ++v)
            if (masks[i].data[v] != 0) pool.push_back(double(volumes[i].data[v]));
    }
    if (pool.empty()) throw std::invalid_argument("foreground_stats: empty foreground");

    prep_stats s;
    s.target_spacing = median_spacing(spacings);
    const double lo_p = mode == clip_percentile_mode::literal ? 0.05 : 0.5;
    s.clip_lo = percentile(pool, lo_p);
    s.clip_hi = percentile(pool, 99.5);
    for (auto& x : pool) x = std::clamp(x, s.clip_lo, s.clip_hi);
    s.mu = mean(pool);
    s.sigma = stddev(pool);
    return s;
}

/// Clip to [clip_lo, clip_hi] then z-score with the dataset moments. A
/// degenerate sigma maps everything to zero.
inline volume clip_normalize(const volume& v, const prep_stats& s) {
    s.validate();
    volume out = v;
    if (s.sigma < 1e-8) {
        std::fill(out.data.begin(), out.data.end(), 0.f);
        return out;
    }
    const double inv = 1.0 / s.sigma;
    for (auto& x : out.data)
        x = float((std::clamp(double(x), s.clip_lo, s.clip_hi) - s.mu) * inv);
    return out;
}

/// Key-value text form, one `key = value` per line, %.17g values so doubles
/// round-trip exactly.
inline void save_prep_stats(const prep_stats& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_prep_stats: cannot open " + path);
    char buf[64];
    auto emit = [&](const char* key, double value) {
        std::snprintf(buf, sizeof buf, "%.17g", value);
        f << key << " = " << buf << "\n";
    };
    emit("target_spacing_z", s.target_spacing.z);
    emit("target_spacing_y", s.target_spacing.y);
    emit("target_spacing_x", s.target_spacing.x);
    emit("clip_lo", s.clip_lo);
    emit("clip_hi", s.clip_hi);
    emit("mu", s.mu);
    emit("sigma", s.sigma);
}

inline prep_stats load_prep_stats(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_prep_stats: cannot open " + path);
    prep_stats s;
    std::string line;
    int seen = 0;
    while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string key, eq;
        double value;
        if (!(ls >> key >> eq >> value) || eq != "=")
            throw std::runtime_error("load_prep_stats: malformed line: " + line);
        ++seen;
        if (key == "target_spacing_z") s.target_spacing.z = value;
        else if (key == "target_spacing_y") s.target_spacing.y = value;
        else if (key == "target_spacing_x") s.target_spacing.x = value;
        else if (key == "clip_lo") s.clip_lo = value;
        else if (key == "clip_hi") s.clip_hi = value;
        else if (key == "mu") s.mu = value;
        else if (key == "sigma") s.sigma = value;
        else throw std::runtime_error("load_prep_stats: unknown key: " + key);
    }
    if (seen != 7) throw std::runtime_error("load_prep_stats: incomplete stats file");
    s.validate();
    return s;
}

}  // namespace canet
