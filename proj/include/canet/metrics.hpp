#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "canet/tensor.hpp"

namespace canet {

/// Per-class evaluation results for one case. Undefined entries (a mask was
/// empty) are flagged, never zero-filled, and excluded from aggregates.
struct class_metrics {
    double dsc = 0;
    std::optional<double> hd_mm;   // empty when either surface is missing
    std::optional<double> avd_mm;
    bool both_empty = false;       // dsc == 1 by the empty-empty convention
    bool pred_empty = false;
    bool gt_empty = false;
};

struct eval_report {
    // indexed by class id 1..4 (kidney, tumor, artery, vein) at [id - 1]
    std::array<class_metrics, 4> per_class;
};

inline void check_same_geometry(const label_map& a, const label_map& b, const char* who) {
    if (!(a.dims == b.dims)) throw std::invalid_argument(std::string(who) + ": dims mismatch");
    if (!(a.spacing == b.spacing)) throw std::invalid_argument(std::string(who) + ": spacing mismatch");
}

/// Evaluation dice: hard-mask overlap 2|P∩G| / (|P|+|G|). Both-empty pairs
/// score 1 (flag via evaluate_case / eval_dsc_flagged).
inline double eval_dsc(const label_map& pred, const label_map& gt, std::uint8_t class_id) {
    check_same_geometry(pred, gt, "eval_dsc");
    std::int64_t inter = 0, p = 0, g = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred.data[i] == class_id, b = gt.data[i] == class_id;
        inter += a && b;
        p += a;
        g += b;
    }
    if (p + g == 0) return 1.0;
    return 2.0 * double(inter) / double(p + g);
}

/// Foreground voxels with at least one 6-neighbour outside the mask; voxels
/// on the volume border count as boundary.
inline std::vector<std::array<std::int64_t, 3>> surface_voxels(const label_map& mask,
                                                               std::uint8_t class_id = 1) {
    std::vector<std::array<std::int64_t, 3>> out;
    const auto& d = mask.dims;
    auto fg = [&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return mask.at(z, y, x) == class_id;
    };
    for (std::int64_t z = 0; z < d.d; ++z)
        for (std::int64_t y = 0; y < d.h; ++y)
            for (std::int64_t x = 0; x < d.w; ++x) {
                if (!fg(z, y, x)) continue;
                const bool boundary = z == 0 || z == d.d - 1 || y == 0 || y == d.h - 1 || x == 0 ||
                                      x == d.w - 1 || !fg(z - 1, y, x) || !fg(z + 1, y, x) ||
                                      !fg(z, y - 1, x) || !fg(z, y + 1, x) || !fg(z, y, x - 1) ||
                                      !fg(z, y, x + 1);
                if (boundary) out.push_back({z, y, x});
            }
    return out;
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D lower envelope of parabolas (Felzenszwalb-Huttenlocher) with physical
// sample positions i*step; exact squared Euclidean distances. Infinite
// entries contribute no parabola.
inline void edt_1d(const double* f, double* out, std::int64_t n, double step, std::vector<int>& v,
                   std::vector<double>& z) {
    v.assign(std::size_t(n), 0);
    z.assign(std::size_t(n) + 1, 0);
    auto pos = [&](int i) { return double(i) * step; };
    int k = -1;
    for (int q = 0; q < int(n); ++q) {
        if (f[q] == kInf) continue;
        while (k >= 0) {
            const int p = v[std::size_t(k)];
            const double s = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) /
                             (2 * pos(q) - 2 * pos(p));
            if (s > z[std::size_t(k)]) {
                ++k;
                v[std::size_t(k)] = q;
                z[std::size_t(k)] = s;
                break;
            }
            --k;
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
        }
        z[std::size_t(k) + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < int(n); ++q) out[q] = kInf;
        return;
    }
    int k2 = 0;
    for (int q = 0; q < int(n); ++q) {
        while (z[std::size_t(k2) + 1] < pos(q)) ++k2;
        const int p = v[std::size_t(k2)];
        out[q] = f[p] + (pos(q) - pos(p)) * (pos(q) - pos(p));
    }
}

// exact anisotropic squared distance to the nearest seed voxel centre
inline std::vector<double> edt_sq(const std::vector<char>& seed, dims3 d, vec3 spacing) {
    std::vector<double> dist(std::size_t(d.count()));
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = seed[i] ? 0.0 : kInf;
    const std::int64_t lens[3] = {d.d, d.h, d.w};
    const double steps[3] = {spacing.z, spacing.y, spacing.x};
    std::vector<double> line, lout;
    std::vector<int> v;
    std::vector<double> z;
    for (int axis = 0; axis < 3; ++axis) {
        const std::int64_t n = lens[axis];
        line.resize(std::size_t(n));
        lout.resize(std::size_t(n));
        const std::int64_t n1 = axis == 0 ? d.h : d.d;
        const std::int64_t n2 = axis == 2 ? d.h : d.w;
        for (std::int64_t a = 0; a < n1; ++a)
            for (std::int64_t b = 0; b < n2; ++b) {
                for (std::int64_t i = 0; i < n; ++i) {
                    const std::int64_t zz = axis == 0 ? i : a;
                    const std::int64_t yy = axis == 0 ? a : (axis == 1 ? i : b);
                    const std::int64_t xx = axis == 2 ? i : b;
                    line[std::size_t(i)] = dist[std::size_t((zz * d.h + yy) * d.w + xx)];
                }
                edt_1d(line.data(), lout.data(), n, steps[axis], v, z);
                for (std::int64_t i = 0; i < n; ++i) {
                    const std::int64_t zz = axis == 0 ? i : a;
                    const std::int64_t yy = axis == 0 ? a : (axis == 1 ? i : b);
                    const std::int64_t xx = axis == 2 ? i : b;
                    dist[std::size_t((zz * d.h + yy) * d.w + xx)] = lout[std::size_t(i)];
                }
            }
    }
    return dist;
}

struct surface_distance_stats {
    double max = 0, sum = 0;
    std::int64_t count = 0;
};

// nearest-surface distances from each voxel of `from` to the surface `to`
inline surface_distance_stats directed_distances(const std::vector<std::array<std::int64_t, 3>>& from,
                                                 const std::vector<std::array<std::int64_t, 3>>& to,
                                                 dims3 d, vec3 spacing) {
    std::vector<char> seed(std::size_t(d.count()), 0);
    for (const auto& p : to) seed[std::size_t((p[0] * d.h + p[1]) * d.w + p[2])] = 1;
    const auto dist = edt_sq(seed, d, spacing);
    surface_distance_stats s;
    for (const auto& p : from) {
        const double dd = std::sqrt(dist[std::size_t((p[0] * d.h + p[1]) * d.w + p[2])]);
        s.max = std::max(s.max, dd);
        s.sum += dd;
        ++s.count;
    }
    return s;
}

struct bidirectional_stats {
    surface_distance_stats forward, reverse;
};

inline std::optional<bidirectional_stats> surface_stats(const label_map& pred, const label_map& gt,
                                                        std::uint8_t class_id) {
    const auto sp = surface_voxels(pred, class_id);
    const auto sg = surface_voxels(gt, class_id);
    if (sp.empty() || sg.empty()) return std::nullopt;
    return bidirectional_stats{directed_distances(sp, sg, pred.dims, pred.spacing),
                               directed_distances(sg, sp, pred.dims, pred.spacing)};
}

}  // namespace detail

/// Exact (HD100) symmetric Hausdorff distance between class surfaces, in mm.
/// Undefined (empty) when either mask has no voxels of the class.
inline std::optional<double> hausdorff_mm(const label_map& pred, const label_map& gt,
                                          std::uint8_t class_id) {
    check_same_geometry(pred, gt, "hausdorff_mm");
    const auto s = detail::surface_stats(pred, gt, class_id);
    if (!s) return std::nullopt;
    return std::max(s->forward.max, s->reverse.max);
}

/// Symmetric average surface distance: all nearest-surface distances pooled
/// over both directions, in mm.
inline std::optional<double> avd_mm(const label_map& pred, const label_map& gt,
                                    std::uint8_t class_id) {
    check_same_geometry(pred, gt, "avd_mm");
    const auto s = detail::surface_stats(pred, gt, class_id);
    if (!s) return std::nullopt;
    return (s->forward.sum + s->reverse.sum) / double(s->forward.count + s->reverse.count);
}

/// DSC, HD and AVD for the four kidney structures.
inline eval_report evaluate_case(const label_map& pred, const label_map& gt) {
    check_same_geometry(pred, gt, "evaluate_case");
    eval_report rep;
    for (std::uint8_t c = 1; c <= 4; ++c) {
        class_metrics& m = rep.per_class[std::size_t(c - 1)];
        std::int64_t p = 0, g = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            p += pred.data[i] == c;
            g += gt.data[i] == c;
        }
        m.pred_empty = p == 0;
        m.gt_empty = g == 0;
        m.both_empty = m.pred_empty && m.gt_empty;
        m.dsc = eval_dsc(pred, gt, c);
        if (const auto s = detail::surface_stats(pred, gt, c)) {
            m.hd_mm = std::max(s->forward.max, s->reverse.max);
            m.avd_mm = (s->forward.sum + s->reverse.sum) / double(s->forward.count + s->reverse.count);
        }
    }
    return rep;
}

}  // namespace canet
