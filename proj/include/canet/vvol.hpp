#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "canet/tensor.hpp"

namespace canet {

// VVOL volume container, version 1. Little-endian throughout:
//
//   bytes 0..3    magic "VVOL"
//   u32           version (1)
//   u32           dtype: 1 = real-32 (intensities), 2 = int-8 (labels)
//   3 x u64       dims (depth, height, width)
//   3 x f32       spacing mm (depth, height, width)
//   3 x f32       origin mm
//   payload       dims.d * dims.h * dims.w elements, width fastest
//
// Round trips are bit-exact.

static_assert(std::endian::native == std::endian::little, "VVOL I/O assumes a little-endian host");

constexpr std::uint32_t kVvolVersion = 1;
constexpr std::uint32_t kVvolF32 = 1;
constexpr std::uint32_t kVvolI8 = 2;

namespace detail {

template <typename T>
void write_raw(std::ostream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& f, const char* what) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw std::runtime_error(std::string("vvol: truncated ") + what);
    return v;
}

inline void write_vvol_header(std::ostream& f, std::uint32_t dtype, dims3 dims, vec3 spacing,
                              vec3 origin) {
    f.write("VVOL", 4);
    write_raw(f, kVvolVersion);
    write_raw(f, dtype);
    for (std::int64_t d : {dims.d, dims.h, dims.w}) write_raw(f, std::uint64_t(d));
    for (double s : {spacing.z, spacing.y, spacing.x}) write_raw(f, float(s));
    for (double o : {origin.z, origin.y, origin.x}) write_raw(f, float(o));
}

struct vvol_header {
    std::uint32_t dtype = 0;
    dims3 dims;
    vec3 spacing, origin;
};

inline vvol_header read_vvol_header(std::istream& f) {
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "VVOL", 4) != 0) throw std::runtime_error("vvol: bad magic");
    const auto version = read_raw<std::uint32_t>(f, "version");
    if (version != kVvolVersion)
        throw std::runtime_error("vvol: unsupported version " + std::to_string(version));
    vvol_header h;
    h.dtype = read_raw<std::uint32_t>(f, "dtype");
    if (h.dtype != kVvolF32 && h.dtype != kVvolI8)
        throw std::runtime_error("vvol: unknown dtype code " + std::to_string(h.dtype));
    h.dims.d = std::int64_t(read_raw<std::uint64_t>(f, "dims"));
    h.dims.h = std::int64_t(read_raw<std::uint64_t>(f, "dims"));
    h.dims.w = std::int64_t(read_raw<std::uint64_t>(f, "dims"));
    h.spacing.z = read_raw<float>(f, "spacing");
    h.spacing.y = read_raw<float>(f, "spacing");
    h.spacing.x = read_raw<float>(f, "spacing");
    h.origin.z = read_raw<float>(f, "origin");
    h.origin.y = read_raw<float>(f, "origin");
    h.origin.x = read_raw<float>(f, "origin");
    if (h.dims.d < 1 || h.dims.h < 1 || h.dims.w < 1) throw std::runtime_error("vvol: bad dims");
    return h;
}

template <typename T>
void read_payload(std::istream& f, std::vector<T>& data, const char* path) {
    f.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * sizeof(T)));
    if (std::size_t(f.gcount()) != data.size() * sizeof(T))
        throw std::runtime_error(std::string("vvol: payload length mismatch in ") + path);
    f.peek();
    if (!f.eof()) throw std::runtime_error(std::string("vvol: payload length mismatch in ") + path);
}

}  // namespace detail

inline void write_vvol(const std::string& path, const volume& v) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("vvol: cannot open " + path + " for writing");
    detail::write_vvol_header(f, kVvolF32, v.dims, v.spacing, v.origin);
    f.write(reinterpret_cast<const char*>(v.data.data()), std::streamsize(v.data.size() * sizeof(float)));
    if (!f) throw std::runtime_error("vvol: write failed for " + path);
}

inline void write_vvol(const std::string& path, const label_map& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("vvol: cannot open " + path + " for writing");
    detail::write_vvol_header(f, kVvolI8, m.dims, m.spacing, m.origin);
    f.write(reinterpret_cast<const char*>(m.data.data()), std::streamsize(m.data.size()));
    if (!f) throw std::runtime_error("vvol: write failed for " + path);
}

inline volume read_vvol_volume(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("vvol: cannot open " + path);
    const auto h = detail::read_vvol_header(f);
    if (h.dtype != kVvolF32)
        throw std::runtime_error("vvol: dtype mismatch, " + path + " does not hold real-32 intensities");
    volume v(h.dims, h.spacing, h.origin);
    detail::read_payload(f, v.data, path.c_str());
    return v;
}

inline label_map read_vvol_labels(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("vvol: cannot open " + path);
    const auto h = detail::read_vvol_header(f);
    if (h.dtype != kVvolI8)
        throw std::runtime_error("vvol: dtype mismatch, " + path + " does not hold int-8 labels");
    label_map m(h.dims, h.spacing, h.origin);
    detail::read_payload(f, m.data, path.c_str());
    for (std::uint8_t c : m.data)
        if (c >= kNumClasses) throw std::runtime_error("vvol: label outside class set in " + path);
    return m;
}

/// Reads either payload type.
inline std::variant<volume, label_map> read_vvol(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("vvol: cannot open " + path);
    const auto h = detail::read_vvol_header(f);
    f.close();
    if (h.dtype == kVvolF32) return read_vvol_volume(path);
    return read_vvol_labels(path);
}

}  // namespace canet
