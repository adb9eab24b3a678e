#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "canet/rng.hpp"
#include "canet/tensor.hpp"

namespace canet {

/// Geometry and intensity model for a synthetic abdominal case: an
/// ellipsoidal kidney holding a spherical tumor, plus two curved vessel
/// tubes, over a smoothly tilted, noisy background.
struct phantom_config {
    double background_hu = 0, kidney_hu = 140, tumor_hu = 90, vein_hu = 200, artery_hu = 260;
    double gradient_hu = 25;  // background ramp amplitude across the volume
    double noise_sd = 7;
    double kidney_semi_lo = 0.20, kidney_semi_hi = 0.30;  // semi-axes, fraction of each dim
    double tumor_radius_lo = 0.25, tumor_radius_hi = 0.40;  // fraction of min kidney semi-axis
    double vessel_radius = 0.04;  // fraction of the smallest dim
    double analytic_kidney_voxels(dims3 d) const {
        const double mid = 0.5 * (kidney_semi_lo + kidney_semi_hi);
        return 4.0 / 3.0 * 3.141592653589793 * mid * mid * mid * double(d.d) * double(d.h) *
               double(d.w);
    }
};

/// Generates one deterministic (volume, labels) pair. Labels: 1 kidney,
/// 2 tumor strictly inside the kidney, 3 artery, 4 vein.
inline std::pair<volume, label_map> gen_phantom(rng& r, dims3 dims, vec3 spacing,
                                                const phantom_config& cfg = {}) {
    if (dims.d < 32 || dims.h < 32 || dims.w < 32)
        throw std::invalid_argument("gen_phantom: dims must be >= 32 per axis");
    volume vol(dims, spacing);
    label_map lab(dims, spacing);

    const double D = double(dims.d), H = double(dims.h), W = double(dims.w);
    const double cz = D / 2 + r.uniform(-0.04, 0.04) * D;
    const double cy = H / 2 + r.uniform(-0.04, 0.04) * H;
    const double cx = W / 2 + r.uniform(-0.04, 0.04) * W;
    const double az = r.uniform(cfg.kidney_semi_lo, cfg.kidney_semi_hi) * D;
    const double ay = r.uniform(cfg.kidney_semi_lo, cfg.kidney_semi_hi) * H;
    const double ax = r.uniform(cfg.kidney_semi_lo, cfg.kidney_semi_hi) * W;
    const double min_semi = std::min({az, ay, ax});

    const double tr = r.uniform(cfg.tumor_radius_lo, cfg.tumor_radius_hi) * min_semi;
    const double max_off = std::max(0.0, 0.80 * min_semi - tr);
    const double off_len = r.uniform(0, max_off);
    const double theta = r.uniform(0, 2 * 3.141592653589793);
    const double phi = std::acos(std::clamp(r.uniform(-1, 1), -1.0, 1.0));
    const double tz = cz + off_len * std::cos(phi);
    const double ty = cy + off_len * std::sin(phi) * std::cos(theta);
    const double tx = cx + off_len * std::sin(phi) * std::sin(theta);

    // two vessel tubes running along the width axis, offset above and below
    // the kidney centre, with gentle sinusoidal wander
    const double vr = cfg.vessel_radius * std::min({D, H, W});
    struct tube {
        double y0, z0, amp_y, amp_z, phase_y, phase_z, freq;
        std::uint8_t label;
    };
    tube tubes[2];
    for (int i = 0; i < 2; ++i) {
        const double side = i == 0 ? 1.0 : -1.0;
        tubes[i].y0 = cy + side * 0.30 * H;
        tubes[i].z0 = cz + r.uniform(-0.08, 0.08) * D;
        tubes[i].amp_y = r.uniform(0.02, 0.06) * H;
        tubes[i].amp_z = r.uniform(0.02, 0.06) * D;
        tubes[i].phase_y = r.uniform(0, 6.283185307179586);
        tubes[i].phase_z = r.uniform(0, 6.283185307179586);
        tubes[i].freq = r.uniform(1.0, 2.0);
        tubes[i].label = i == 0 ? kArtery : kVein;
    }

    // background ramp direction
    const double gz = r.uniform(-1, 1), gy = r.uniform(-1, 1), gx = r.uniform(-1, 1);
    const double gn = std::max(1e-9, std::sqrt(gz * gz + gy * gy + gx * gx));

    for (std::int64_t z = 0; z < dims.d; ++z)
        for (std::int64_t y = 0; y < dims.h; ++y)
            for (std::int64_t x = 0; x < dims.w; ++x) {
                const double ez = (double(z) - cz) / az;
                const double ey = (double(y) - cy) / ay;
                const double ex = (double(x) - cx) / ax;
                std::uint8_t label = kBackground;
                if (ez * ez + ey * ey + ex * ex <= 1.0) label = kKidney;
                for (const auto& t : tubes) {
                    const double ph = 2 * 3.141592653589793 * t.freq * double(x) / W;
                    const double vy = t.y0 + t.amp_y * std::sin(ph + t.phase_y);
                    const double vz = t.z0 + t.amp_z * std::sin(ph + t.phase_z);
                    const double dy = double(y) - vy, dz = double(z) - vz;
                    if (dy * dy + dz * dz <= vr * vr) label = t.label;
                }
                const double dt = std::sqrt((double(z) - tz) * (double(z) - tz) +
                                            (double(y) - ty) * (double(y) - ty) +
                                            (double(x) - tx) * (double(x) - tx));
                if (dt <= tr) label = kTumor;
                else if (dt <= tr + 1.8 && label != kKidney)
                    label = kKidney;  // kidney rim so the tumor never touches anything else
                lab.at(z, y, x) = label;

                double hu = cfg.background_hu +
                            cfg.gradient_hu * ((double(z) / D) * gz + (double(y) / H) * gy +
                                               (double(x) / W) * gx) /
                                gn;
                switch (label) {
                    case kKidney: hu = cfg.kidney_hu; break;
                    case kTumor: hu = cfg.tumor_hu; break;
                    case kArtery: hu = cfg.artery_hu; break;
                    case kVein: hu = cfg.vein_hu; break;
                    default: break;
                }
                vol.at(z, y, x) = float(hu + cfg.noise_sd * r.normal());
            }
    return {std::move(vol), std::move(lab)};
}

}  // namespace canet
