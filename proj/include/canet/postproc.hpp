#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "canet/tensor.hpp"

namespace canet {

/// Per-voxel argmax over the channel axis; ties resolve to the lower class id.
inline label_map argmax_labels(const tensor5<float>& logits, vec3 spacing, vec3 origin,
                               std::int64_t batch_index = 0) {
    if (batch_index < 0 || batch_index >= logits.b)
        throw std::invalid_argument("argmax_labels: batch index out of range");
    label_map out(dims3{logits.d, logits.h, logits.w}, spacing, origin);
    const std::int64_t sp = logits.spatial_size();
    for (std::int64_t v = 0; v < sp; ++v) {
        std::int64_t best = 0;
        float best_val = logits.data[std::size_t(batch_index * logits.c) * std::size_t(sp) + std::size_t(v)];
        for (std::int64_t c = 1; c < logits.c; ++c) {
            const float val = logits.data[std::size_t((batch_index * logits.c + c) * sp + v)];
            if (val > best_val) {
                best_val = val;
                best = c;
            }
        }
        out.data[std::size_t(v)] = std::uint8_t(best);
    }
    return out;
}

struct component {
    std::int64_t size = 0;
    std::vector<std::int64_t> voxels;  // flat indices in scan order of discovery
};

struct component_set {
    std::uint8_t label = 0;
    std::vector<component> components;  // ordered by first voxel in scan order
};

/// Maximal connected components of mask != 0 under 6- or 26-adjacency.
inline component_set connected_components(const label_map& mask, int connectivity) {
    if (connectivity != 6 && connectivity != 26)
        throw std::invalid_argument("connected_components: connectivity must be 6 or 26");
    const auto& d = mask.dims;
    component_set out;
    std::vector<std::array<int, 3>> offs;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (!dz && !dy && !dx) continue;
                if (connectivity == 6 && std::abs(dz) + std::abs(dy) + std::abs(dx) != 1) continue;
                offs.push_back({dz, dy, dx});
            }
    std::vector<char> seen(mask.size(), 0);
    std::vector<std::int64_t> stack;
    for (std::int64_t z = 0; z < d.d; ++z)
        for (std::int64_t y = 0; y < d.h; ++y)
            for (std::int64_t x = 0; x < d.w; ++x) {
                const std::int64_t start = std::int64_t(mask.index(z, y, x));
                if (!mask.data[std::size_t(start)] || seen[std::size_t(start)]) continue;
                component comp;
                stack.assign(1, start);
                seen[std::size_t(start)] = 1;
                while (!stack.empty()) {
                    const std::int64_t cur = stack.back();
                    stack.pop_back();
                    comp.voxels.push_back(cur);
                    const std::int64_t cz = cur / (d.h * d.w);
                    const std::int64_t cy = (cur / d.w) % d.h;
                    const std::int64_t cx = cur % d.w;
                    for (const auto& o : offs) {
                        const std::int64_t nz = cz + o[0], ny = cy + o[1], nx = cx + o[2];
                        if (nz < 0 || nz >= d.d || ny < 0 || ny >= d.h || nx < 0 || nx >= d.w) continue;
                        const std::size_t ni = mask.index(nz, ny, nx);
                        if (mask.data[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            stack.push_back(std::int64_t(ni));
                        }
                    }
                }
                comp.size = std::int64_t(comp.voxels.size());
                out.components.push_back(std::move(comp));
            }
    return out;
}

/// For each listed class, clears every voxel outside its largest connected
/// component (ties keep the component discovered first in scan order).
/// Unlisted classes pass through untouched; the operation is idempotent.
inline label_map keep_largest(const label_map& labels, const std::vector<std::uint8_t>& class_ids,
                              int connectivity) {
    label_map out = labels;
    for (std::uint8_t cid : class_ids) {
        label_map mask(labels.dims, labels.spacing, labels.origin);
        for (std::size_t i = 0; i < labels.size(); ++i) mask.data[i] = labels.data[i] == cid;
        auto comps = connected_components(mask, connectivity);
        comps.label = cid;
        if (comps.components.size() < 2) continue;
        std::size_t best = 0;
        for (std::size_t i = 1; i < comps.components.size(); ++i)
            if (comps.components[i].size > comps.components[best].size) best = i;
        for (std::size_t i = 0; i < comps.components.size(); ++i) {
            if (i == best) continue;
            for (std::int64_t v : comps.components[i].voxels) out.data[std::size_t(v)] = kBackground;
        }
    }
    return out;
}

}  // namespace canet
