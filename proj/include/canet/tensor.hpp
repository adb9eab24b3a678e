#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace canet {

/// Dense rank-5 tensor with (batch, channel, depth, height, width) layout,
/// row-major, width fastest. This is the only activation/parameter layout
/// used anywhere in the library.
template <typename T>
struct tensor5 {
    std::int64_t b = 0, c = 0, d = 0, h = 0, w = 0;
    std::vector<T> data;

    tensor5() = default;
    tensor5(std::int64_t b_, std::int64_t c_, std::int64_t d_, std::int64_t h_, std::int64_t w_)
        : b(b_), c(c_), d(d_), h(h_), w(w_) {
        if (b_ <= 0 || c_ <= 0 || d_ <= 0 || h_ <= 0 || w_ <= 0)
            throw std::invalid_argument("tensor5: dims must be positive");
        data.assign(std::size_t(b_) * c_ * d_ * h_ * w_, T(0));
    }

    std::size_t size() const { return data.size(); }
    std::int64_t spatial_size() const { return d * h * w; }

    T* ptr(std::int64_t bi, std::int64_t ci) {
        return data.data() + ((bi * c + ci) * d * h * w);
    }
    const T* ptr(std::int64_t bi, std::int64_t ci) const {
        return data.data() + ((bi * c + ci) * d * h * w);
    }

    T& at(std::int64_t bi, std::int64_t ci, std::int64_t zi, std::int64_t yi, std::int64_t xi) {
        return data[std::size_t((((bi * c + ci) * d + zi) * h + yi) * w + xi)];
    }
    T at(std::int64_t bi, std::int64_t ci, std::int64_t zi, std::int64_t yi, std::int64_t xi) const {
        return data[std::size_t((((bi * c + ci) * d + zi) * h + yi) * w + xi)];
    }

    bool same_shape(const tensor5& o) const {
        return b == o.b && c == o.c && d == o.d && h == o.h && w == o.w;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const {
        return "(" + std::to_string(b) + "," + std::to_string(c) + "," + std::to_string(d) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }

    template <typename U>
    tensor5<U> cast() const {
        tensor5<U> out(b, c, d, h, w);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
        return out;
    }
};

using tensor5f = tensor5<float>;
using tensor5d = tensor5<double>;

/// Byte-level tensor serialization: five little-endian int64 dims followed by
/// the raw payload. Round trips are bit-identical.
template <typename T>
std::vector<std::uint8_t> serialize(const tensor5<T>& t) {
    std::vector<std::uint8_t> out(5 * sizeof(std::int64_t) + t.data.size() * sizeof(T));
    std::int64_t dims[5] = {t.b, t.c, t.d, t.h, t.w};
    std::memcpy(out.data(), dims, sizeof(dims));
    std::memcpy(out.data() + sizeof(dims), t.data.data(), t.data.size() * sizeof(T));
    return out;
}

template <typename T>
tensor5<T> deserialize(const std::vector<std::uint8_t>& bytes) {
    std::int64_t dims[5];
    if (bytes.size() < sizeof(dims)) throw std::runtime_error("tensor5: truncated header");
    std::memcpy(dims, bytes.data(), sizeof(dims));
    tensor5<T> t(dims[0], dims[1], dims[2], dims[3], dims[4]);
    if (bytes.size() != sizeof(dims) + t.data.size() * sizeof(T))
        throw std::runtime_error("tensor5: payload length mismatch");
    std::memcpy(t.data.data(), bytes.data() + sizeof(dims), t.data.size() * sizeof(T));
    return t;
}

struct vec3 {
    double z = 0, y = 0, x = 0;
    bool operator==(const vec3&) const = default;
};

struct dims3 {
    std::int64_t d = 0, h = 0, w = 0;
    std::int64_t count() const { return d * h * w; }
    bool operator==(const dims3&) const = default;
};

/// 3D grid with physical geometry. `volume` carries intensities, `label_map`
/// carries class ids in {0..4}: background, kidney, tumor, artery, vein.
template <typename T>
struct grid3 {
    dims3 dims;
    vec3 spacing{1, 1, 1};  // mm per voxel along (depth, height, width)
    vec3 origin{0, 0, 0};   // mm position of voxel (0,0,0)
    std::vector<T> data;

    grid3() = default;
    grid3(dims3 dm, vec3 sp = {1, 1, 1}, vec3 org = {0, 0, 0}) : dims(dm), spacing(sp), origin(org) {
        if (dm.d <= 0 || dm.h <= 0 || dm.w <= 0)
            throw std::invalid_argument("grid3: dims must be positive");
        if (sp.z <= 0 || sp.y <= 0 || sp.x <= 0)
            throw std::invalid_argument("grid3: spacing must be positive");
        data.assign(std::size_t(dm.count()), T(0));
    }

    std::size_t size() const { return data.size(); }
    std::size_t index(std::int64_t z, std::int64_t y, std::int64_t x) const {
        return std::size_t((z * dims.h + y) * dims.w + x);
    }
    T& at(std::int64_t z, std::int64_t y, std::int64_t x) { return data[index(z, y, x)]; }
    T at(std::int64_t z, std::int64_t y, std::int64_t x) const { return data[index(z, y, x)]; }

    bool same_geometry(const grid3& o) const {
        return dims == o.dims && spacing == o.spacing;
    }
};

using volume = grid3<float>;
using label_map = grid3<std::uint8_t>;

constexpr int kNumClasses = 5;  // background, kidney, tumor, artery, vein
constexpr std::uint8_t kBackground = 0, kKidney = 1, kTumor = 2, kArtery = 3, kVein = 4;

inline const char* class_name(int c) {
    static const char* names[kNumClasses] = {"background", "kidney", "tumor", "artery", "vein"};
    return (c >= 0 && c < kNumClasses) ? names[c] : "unknown";
}

}  // namespace canet
