#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "canet/network.hpp"
#include "canet/vvol.hpp"  // raw little-endian read/write helpers

namespace canet {

// Checkpoint container "CNCK" version 1, little-endian. The network config is
// stored first, then every named parameter tensor:
//
//   u32 name length, name bytes, u32 rank, rank x u64 dims, f32 payload
//
// Loading rebuilds the network from the stored config and fails on any
// missing, unknown or misshapen parameter; round trips are bit-exact.

namespace detail {

inline void ck_write_config(std::ostream& f, const network_config& cfg) {
    auto w64 = [&](std::int64_t v) { write_raw(f, v); };
    w64(cfg.stages);
    w64(cfg.base_filters);
    w64(cfg.filter_cap);
    w64(cfg.extended_cap);
    write_raw(f, std::uint8_t(cfg.channel_extend));
    write_raw(f, std::uint8_t(cfg.aac_enabled));
    write_raw(f, std::uint8_t(cfg.aac_sequential));
    w64(cfg.in_channels);
    w64(cfg.num_classes);
    w64(cfg.heads);
    write_raw(f, cfg.norm_eps);
    w64(cfg.pos_capacity);
    w64(std::int64_t(cfg.aac_stage_mask.size()));
    for (std::uint8_t m : cfg.aac_stage_mask) write_raw(f, m);
}

inline network_config ck_read_config(std::istream& f) {
    network_config cfg;
    auto r64 = [&] { return read_raw<std::int64_t>(f, "config"); };
    cfg.stages = r64();
    cfg.base_filters = r64();
    cfg.filter_cap = r64();
    cfg.extended_cap = r64();
    cfg.channel_extend = read_raw<std::uint8_t>(f, "config") != 0;
    cfg.aac_enabled = read_raw<std::uint8_t>(f, "config") != 0;
    cfg.aac_sequential = read_raw<std::uint8_t>(f, "config") != 0;
    cfg.in_channels = r64();
    cfg.num_classes = r64();
    cfg.heads = r64();
    cfg.norm_eps = read_raw<double>(f, "config");
    cfg.pos_capacity = r64();
    const std::int64_t n = r64();
    if (n < 0 || n > 64) throw std::runtime_error("checkpoint: bad aac mask length");
    cfg.aac_stage_mask.resize(std::size_t(n));
    for (auto& m : cfg.aac_stage_mask) m = read_raw<std::uint8_t>(f, "config");
    return cfg;
}

}  // namespace detail

inline void save_checkpoint(const network<float>& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    f.write("CNCK", 4);
    detail::write_raw(f, std::uint32_t(1));
    detail::ck_write_config(f, net.cfg);
    std::uint64_t count = 0;
    visit_params(net, [&](const std::string&, const std::vector<float>&, const auto&) { ++count; });
    detail::write_raw(f, count);
    visit_params(net, [&](const std::string& name, const std::vector<float>& data,
                          const std::vector<std::int64_t>& dims) {
        detail::write_raw(f, std::uint32_t(name.size()));
        f.write(name.data(), std::streamsize(name.size()));
        detail::write_raw(f, std::uint32_t(dims.size()));
        for (std::int64_t d : dims) detail::write_raw(f, std::uint64_t(d));
        f.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * sizeof(float)));
    });
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline network<float> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "CNCK", 4) != 0) throw std::runtime_error("checkpoint: bad magic");
    const auto version = detail::read_raw<std::uint32_t>(f, "version");
    if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
    network<float> net(detail::ck_read_config(f));

    std::uint64_t expected = 0;
    visit_params(net, [&](const std::string&, const std::vector<float>&, const auto&) { ++expected; });
    const auto count = detail::read_raw<std::uint64_t>(f, "param count");
    if (count != expected) throw std::runtime_error("checkpoint: parameter count mismatch");

    for (std::uint64_t p = 0; p < count; ++p) {
        const auto name_len = detail::read_raw<std::uint32_t>(f, "name");
        if (name_len > 4096) throw std::runtime_error("checkpoint: bad name length");
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const auto rank = detail::read_raw<std::uint32_t>(f, "rank");
        if (rank > 5) throw std::runtime_error("checkpoint: bad rank");
        std::vector<std::int64_t> dims(rank);
        std::uint64_t numel = 1;
        for (auto& d : dims) {
            d = std::int64_t(detail::read_raw<std::uint64_t>(f, "dims"));
            numel *= std::uint64_t(d);
        }
        bool matched = false;
        visit_params(net, [&](const std::string& n, std::vector<float>& data,
                              const std::vector<std::int64_t>& want_dims) {
            if (n != name) return;
            if (want_dims != dims || data.size() != numel)
                throw std::runtime_error("checkpoint: shape mismatch for " + name);
            f.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * sizeof(float)));
            matched = true;
        });
        if (!matched) throw std::runtime_error("checkpoint: unknown parameter " + name);
        if (!f) throw std::runtime_error("checkpoint: truncated payload at " + name);
    }
    f.peek();
    if (!f.eof()) throw std::runtime_error("checkpoint: trailing bytes");
    return net;
}

}  // namespace canet
