#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "canet/attention.hpp"
#include "canet/conv.hpp"
#include "canet/norm.hpp"
#include "canet/rng.hpp"
#include "canet/tensor.hpp"

namespace canet {

struct network_config {
    std::int64_t stages = 6;
    std::int64_t base_filters = 32;
    std::int64_t filter_cap = 320;     // decoder cap, and encoder cap without channel extending
    std::int64_t extended_cap = 512;   // encoder cap with channel extending
    bool channel_extend = false;
    bool aac_enabled = false;
    bool aac_sequential = false;       // chain the three attentions instead of running them in parallel
    std::int64_t in_channels = 1;
    std::int64_t num_classes = 5;
    std::int64_t heads = 1;
    double norm_eps = 1e-5;
    std::int64_t pos_capacity = 64;    // max axis length at full resolution for AAC embeddings
    std::vector<std::uint8_t> aac_stage_mask;  // per decoder stage; empty = every stage

    std::int64_t encoder_cap() const { return channel_extend ? extended_cap : filter_cap; }
    std::int64_t downsample_factor() const { return std::int64_t(1) << (stages - 1); }
    bool aac_at_stage(std::int64_t stage) const {
        if (!aac_enabled) return false;
        if (aac_stage_mask.empty()) return true;
        return stage < std::int64_t(aac_stage_mask.size()) && aac_stage_mask[std::size_t(stage)] != 0;
    }
    void validate() const {
        if (stages < 2) throw std::invalid_argument("network_config: stages must be >= 2");
        if (base_filters < 1) throw std::invalid_argument("network_config: base_filters must be >= 1");
        if (num_classes < 2) throw std::invalid_argument("network_config: num_classes must be >= 2");
        if (filter_cap < base_filters) throw std::invalid_argument("network_config: filter_cap < base_filters");
        if (heads < 1) throw std::invalid_argument("network_config: heads must be >= 1");
        if (pos_capacity < 1) throw std::invalid_argument("network_config: pos_capacity must be >= 1");
    }
};

/// Per-stage filter widths. The decoder is capped at filter_cap (320); channel
/// extending raises only the encoder cap (to 512), doubling the deep encoder
/// stages once the baseline cap binds.
inline std::pair<std::int64_t, std::int64_t> filter_schedule(const network_config& cfg,
                                                             std::int64_t stage) {
    if (stage < 0 || stage >= cfg.stages) throw std::invalid_argument("filter_schedule: stage out of range");
    std::int64_t f = cfg.base_filters;
    for (std::int64_t i = 0; i < stage && f < (std::int64_t(1) << 30); ++i) f *= 2;
    return {std::min(f, cfg.encoder_cap()), std::min(f, cfg.filter_cap)};
}

// conv -> instance norm -> leaky activation, the backbone's building block
template <typename T>
struct conv_unit {
    tensor5<T> w;
    std::vector<T> bias;
    std::vector<T> gamma, beta;
    std::int64_t stride = 1;
};

template <typename T>
struct aac_module {
    // branch order: vertical (height), horizontal (width), depth
    axial_params<T> branch[3];
    tensor5<T> merge_w;  // (C, 3C, 1, 1, 1)
    std::vector<T> merge_b;
};

inline constexpr axis3 kAacAxes[3] = {axis3::height, axis3::width, axis3::depth};
inline constexpr const char* kAacAxisKey[3] = {"v", "h", "d"};

template <typename T>
struct encoder_stage {
    conv_unit<T> a, b;
};

template <typename T>
struct decoder_stage {
    tensor5<T> up_w;  // conv-layout (channels_above, channels_here, 3, 3, 3)
    bool has_aac = false;
    aac_module<T> aac;
    conv_unit<T> a, b;
};

template <typename T>
struct network {
    network_config cfg;
    std::vector<encoder_stage<T>> encoder;
    std::vector<decoder_stage<T>> decoder;
    tensor5<T> out_w;
    std::vector<T> out_b;

    network() = default;

    /// Builds the parameter containers (all zero). Call init_params for the
    /// seeded scaled-normal initialisation.
    explicit network(const network_config& c) : cfg(c) {
        cfg.validate();
        encoder.resize(std::size_t(cfg.stages));
        for (std::int64_t i = 0; i < cfg.stages; ++i) {
            const auto [enc_f, dec_f] = filter_schedule(cfg, i);
            (void)dec_f;
            const std::int64_t cin = i == 0 ? cfg.in_channels : filter_schedule(cfg, i - 1).first;
            auto& st = encoder[std::size_t(i)];
            st.a.w = tensor5<T>(enc_f, cin, 3, 3, 3);
            st.a.stride = i == 0 ? 1 : 2;
            st.b.w = tensor5<T>(enc_f, enc_f, 3, 3, 3);
            init_unit(st.a, enc_f);
            init_unit(st.b, enc_f);
        }
        decoder.resize(std::size_t(cfg.stages - 1));
        for (std::int64_t i = cfg.stages - 2; i >= 0; --i) {
            auto& st = decoder[std::size_t(i)];
            const std::int64_t here = filter_schedule(cfg, i).second;
            const std::int64_t above = i == cfg.stages - 2 ? filter_schedule(cfg, i + 1).first
                                                           : filter_schedule(cfg, i + 1).second;
            const std::int64_t skip = filter_schedule(cfg, i).first;
            st.up_w = tensor5<T>(above, here, 3, 3, 3);
            st.has_aac = cfg.aac_at_stage(i);
            if (st.has_aac) {
                const std::int64_t cap =
                    std::max<std::int64_t>(1, (cfg.pos_capacity + (std::int64_t(1) << i) - 1) >> i);
                for (int a = 0; a < 3; ++a) {
                    st.aac.branch[a].wq = tensor5<T>(here, here, 1, 1, 1);
                    st.aac.branch[a].wk = tensor5<T>(here, here, 1, 1, 1);
                    st.aac.branch[a].wv = tensor5<T>(here, here, 1, 1, 1);
                    st.aac.branch[a].pos = tensor5<T>(1, here, cap, 1, 1);
                }
                st.aac.merge_w = tensor5<T>(here, 3 * here, 1, 1, 1);
                st.aac.merge_b.assign(std::size_t(here), T(0));
            }
            st.a.w = tensor5<T>(here, here + skip, 3, 3, 3);
            st.b.w = tensor5<T>(here, here, 3, 3, 3);
            init_unit(st.a, here);
            init_unit(st.b, here);
        }
        const std::int64_t dec0 = filter_schedule(cfg, 0).second;
        out_w = tensor5<T>(cfg.num_classes, dec0, 1, 1, 1);
        out_b.assign(std::size_t(cfg.num_classes), T(0));
    }

private:
    // containers only; init_params supplies the actual starting values
    static void init_unit(conv_unit<T>& u, std::int64_t channels) {
        u.bias.assign(std::size_t(channels), T(0));
        u.gamma.assign(std::size_t(channels), T(0));
        u.beta.assign(std::size_t(channels), T(0));
    }
};

/// Enumerates every parameter as (name, flat data, dims) in a fixed order.
/// Works on const and mutable networks alike.
template <typename Net, typename F>
void visit_params(Net& net, F&& fn) {
    auto tensor_dims = [](auto& t) {
        return std::vector<std::int64_t>{t.b, t.c, t.d, t.h, t.w};
    };
    auto vec_dims = [](auto& v) { return std::vector<std::int64_t>{std::int64_t(v.size())}; };
    auto unit = [&](const std::string& prefix, auto& u) {
        fn(prefix + ".w", u.w.data, tensor_dims(u.w));
        fn(prefix + ".b", u.bias, vec_dims(u.bias));
        fn(prefix + ".gamma", u.gamma, vec_dims(u.gamma));
        fn(prefix + ".beta", u.beta, vec_dims(u.beta));
    };
    for (std::size_t i = 0; i < net.encoder.size(); ++i) {
        const std::string p = "enc" + std::to_string(i);
        unit(p + ".a", net.encoder[i].a);
        unit(p + ".b", net.encoder[i].b);
    }
    for (std::size_t i = 0; i < net.decoder.size(); ++i) {
        const std::string p = "dec" + std::to_string(i);
        auto& st = net.decoder[i];
        fn(p + ".up.w", st.up_w.data, tensor_dims(st.up_w));
        if (st.has_aac) {
            for (int a = 0; a < 3; ++a) {
                const std::string q = p + ".aac." + kAacAxisKey[a];
                fn(q + ".wq", st.aac.branch[a].wq.data, tensor_dims(st.aac.branch[a].wq));
                fn(q + ".wk", st.aac.branch[a].wk.data, tensor_dims(st.aac.branch[a].wk));
                fn(q + ".wv", st.aac.branch[a].wv.data, tensor_dims(st.aac.branch[a].wv));
                fn(q + ".pos", st.aac.branch[a].pos.data, tensor_dims(st.aac.branch[a].pos));
            }
            fn(p + ".aac.merge.w", st.aac.merge_w.data, tensor_dims(st.aac.merge_w));
            fn(p + ".aac.merge.b", st.aac.merge_b, vec_dims(st.aac.merge_b));
        }
        unit(p + ".a", st.a);
        unit(p + ".b", st.b);
    }
    fn(std::string("out.w"), net.out_w.data, tensor_dims(net.out_w));
    fn(std::string("out.b"), net.out_b, vec_dims(net.out_b));
}

template <typename T>
std::int64_t param_count(const network<T>& net) {
    std::int64_t n = 0;
    visit_params(net, [&](const std::string&, const std::vector<T>& v, const auto&) {
        n += std::int64_t(v.size());
    });
    return n;
}

/// Scaled-normal (fan-in) initialisation. Every parameter draws from an rng
/// stream forked by its own name, so networks that share a parameter name get
/// bit-identical values for it regardless of which other parameters exist.
/// Positional embeddings and the AAC merge projection start at zero, which
/// makes a freshly built AAC module the identity (residual path only).
template <typename T>
void init_params(network<T>& net, std::uint64_t seed) {
    rng master(seed);
    visit_params(net, [&](const std::string& name, std::vector<T>& v, const std::vector<std::int64_t>& dims) {
        const bool is_weight = name.ends_with(".w") || name.ends_with(".wq") ||
                               name.ends_with(".wk") || name.ends_with(".wv");
        if (!is_weight) {
            if (name.ends_with(".gamma")) std::fill(v.begin(), v.end(), T(1));
            return;  // biases, betas, embeddings stay zero
        }
        if (name.find(".aac.merge") != std::string::npos) {
            std::fill(v.begin(), v.end(), T(0));
            return;
        }
        std::int64_t fan_in = 1;
        for (std::size_t i = 1; i < dims.size(); ++i) fan_in *= dims[i];
        const double scale = name.find(".aac.") != std::string::npos
                                 ? std::sqrt(1.0 / double(fan_in))
                                 : std::sqrt(2.0 / double(fan_in));
        rng r = master.fork(name);
        for (auto& x : v) x = T(r.normal() * scale);
    });
}

template <typename T>
struct unit_cache {
    tensor5<T> in;
    dims3 in_dims;
    norm_cache<T> norm;
};

template <typename T>
struct aac_cache {
    axial_cache<T> branch[3];
    tensor5<T> cat;
};

template <typename T>
struct decoder_cache {
    tensor5<T> up_in;
    dims3 up_out_dims;
    aac_cache<T> aac;
    unit_cache<T> a, b;
};

template <typename T>
struct forward_cache {
    bool valid = false;
    std::vector<unit_cache<T>> enc_a, enc_b;
    std::vector<decoder_cache<T>> dec;
    tensor5<T> out_in;
};

namespace detail {

template <typename T>
tensor5<T> concat_channels(const tensor5<T>* parts[], int n) {
    std::int64_t c = 0;
    for (int i = 0; i < n; ++i) c += parts[i]->c;
    tensor5<T> out(parts[0]->b, c, parts[0]->d, parts[0]->h, parts[0]->w);
    const std::int64_t sp = parts[0]->spatial_size();
    for (std::int64_t bi = 0; bi < out.b; ++bi) {
        std::int64_t co = 0;
        for (int i = 0; i < n; ++i) {
            for (std::int64_t ci = 0; ci < parts[i]->c; ++ci, ++co)
                std::copy_n(parts[i]->ptr(bi, ci), sp, out.ptr(bi, co));
        }
    }
    return out;
}

template <typename T>
tensor5<T> slice_channels(const tensor5<T>& x, std::int64_t c0, std::int64_t n) {
    tensor5<T> out(x.b, n, x.d, x.h, x.w);
    const std::int64_t sp = x.spatial_size();
    for (std::int64_t bi = 0; bi < x.b; ++bi)
        for (std::int64_t ci = 0; ci < n; ++ci)
            std::copy_n(x.ptr(bi, c0 + ci), sp, out.ptr(bi, ci));
    return out;
}

template <typename T>
void add_inplace(tensor5<T>& dst, const tensor5<T>& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
tensor5<T> conv_unit_forward(const tensor5<T>& x, const conv_unit<T>& u, double eps,
                             unit_cache<T>* cache) {
    const std::int64_t pad = u.w.w == 1 ? 0 : 1;
    tensor5<T> y = conv3d(x, u.w, u.bias, u.stride, pad);
    if (cache) {
        cache->in = x;
        cache->in_dims = {x.d, x.h, x.w};
    }
    return instance_norm_act(y, u.gamma, u.beta, eps, cache ? &cache->norm : nullptr);
}

template <typename T>
tensor5<T> conv_unit_backward(const tensor5<T>& dout, const conv_unit<T>& u, conv_unit<T>& du,
                              const unit_cache<T>& cache) {
    tensor5<T> dy = instance_norm_act_backward(dout, u.gamma, u.beta, cache.norm, du.gamma, du.beta);
    const std::int64_t pad = u.w.w == 1 ? 0 : 1;
    tensor5<T> dw = conv3d_weight_grad(cache.in, dy, u.w.d, u.w.h, u.w.w, u.stride, pad);
    add_inplace(du.w, dw);
    auto db = conv3d_bias_grad(dy);
    for (std::size_t i = 0; i < db.size(); ++i) du.bias[i] += db[i];
    return conv3d_input_grad(dy, u.w, u.stride, pad, cache.in_dims);
}

template <typename T>
tensor5<T> aac_forward_impl(const tensor5<T>& x, const aac_module<T>& m, const network_config& cfg,
                            aac_cache<T>* cache) {
    tensor5<T> br[3];
    for (int a = 0; a < 3; ++a) {
        const tensor5<T>& src = (cfg.aac_sequential && a > 0) ? br[a - 1] : x;
        br[a] = axial_attention(src, kAacAxes[a], m.branch[a], cfg.heads,
                                cache ? &cache->branch[a] : nullptr);
    }
    const tensor5<T>* parts[3] = {&br[0], &br[1], &br[2]};
    tensor5<T> cat = concat_channels(parts, 3);
    tensor5<T> merged = conv3d(cat, m.merge_w, m.merge_b, 1, 0);
    add_inplace(merged, x);  // residual
    if (cache) cache->cat = std::move(cat);
    return merged;
}

template <typename T>
tensor5<T> aac_backward_impl(const tensor5<T>& dout, const aac_module<T>& m, aac_module<T>& dm,
                             const network_config& cfg, const aac_cache<T>& cache) {
    const std::int64_t C = m.merge_w.b;
    tensor5<T> dw = conv3d_weight_grad(cache.cat, dout, 1, 1, 1, 1, 0);
    add_inplace(dm.merge_w, dw);
    auto db = conv3d_bias_grad(dout);
    for (std::size_t i = 0; i < db.size(); ++i) dm.merge_b[i] += db[i];
    tensor5<T> dcat =
        conv3d_input_grad(dout, m.merge_w, 1, 0, dims3{cache.cat.d, cache.cat.h, cache.cat.w});
    tensor5<T> dbr[3];
    for (int a = 0; a < 3; ++a) dbr[a] = slice_channels(dcat, a * C, C);
    tensor5<T> dx = dout;  // residual path
    if (!cfg.aac_sequential) {
        for (int a = 0; a < 3; ++a) {
            tensor5<T> g = axial_attention_backward(dbr[a], kAacAxes[a], m.branch[a], cfg.heads,
                                                    cache.branch[a], dm.branch[a]);
            add_inplace(dx, g);
        }
    } else {
        for (int a = 2; a >= 0; --a) {
            tensor5<T> g = axial_attention_backward(dbr[a], kAacAxes[a], m.branch[a], cfg.heads,
                                                    cache.branch[a], dm.branch[a]);
            if (a > 0)
                add_inplace(dbr[a - 1], g);
            else
                add_inplace(dx, g);
        }
    }
    return dx;
}

}  // namespace detail

/// Full forward pass: strided-conv encoder, transposed-conv decoder with AAC
/// modules and skip concatenation, 1x1x1 output projection to class logits.
/// Pass a cache to enable a subsequent backward().
template <typename T>
tensor5<T> forward(const network<T>& net, const tensor5<T>& x, forward_cache<T>* cache = nullptr) {
    const auto& cfg = net.cfg;
    if (x.c != cfg.in_channels) throw std::invalid_argument("forward: wrong input channel count");
    const std::int64_t f = cfg.downsample_factor();
    const std::int64_t dims[3] = {x.d, x.h, x.w};
    const char* names[3] = {"depth", "height", "width"};
    for (int i = 0; i < 3; ++i)
        if (dims[i] % f != 0)
            throw std::invalid_argument(std::string("forward: input ") + names[i] + "=" +
                                        std::to_string(dims[i]) + " not divisible by " +
                                        std::to_string(f));
    if (cache) {
        cache->enc_a.assign(std::size_t(cfg.stages), {});
        cache->enc_b.assign(std::size_t(cfg.stages), {});
        cache->dec.assign(std::size_t(cfg.stages - 1), {});
        cache->valid = false;
    }

    std::vector<tensor5<T>> skips(std::size_t(cfg.stages));
    tensor5<T> t = x;
    for (std::int64_t i = 0; i < cfg.stages; ++i) {
        t = detail::conv_unit_forward(t, net.encoder[std::size_t(i)].a, cfg.norm_eps,
                                      cache ? &cache->enc_a[std::size_t(i)] : nullptr);
        t = detail::conv_unit_forward(t, net.encoder[std::size_t(i)].b, cfg.norm_eps,
                                      cache ? &cache->enc_b[std::size_t(i)] : nullptr);
        skips[std::size_t(i)] = t;
    }
    for (std::int64_t i = cfg.stages - 2; i >= 0; --i) {
        const auto& st = net.decoder[std::size_t(i)];
        decoder_cache<T>* dc = cache ? &cache->dec[std::size_t(i)] : nullptr;
        const dims3 up_dims{skips[std::size_t(i)].d, skips[std::size_t(i)].h, skips[std::size_t(i)].w};
        if (dc) {
            dc->up_in = t;
            dc->up_out_dims = up_dims;
        }
        t = transposed_conv3d(t, st.up_w, 2, 1, up_dims);
        if (st.has_aac) t = detail::aac_forward_impl(t, st.aac, cfg, dc ? &dc->aac : nullptr);
        const tensor5<T>* parts[2] = {&t, &skips[std::size_t(i)]};
        t = detail::concat_channels(parts, 2);
        t = detail::conv_unit_forward(t, st.a, cfg.norm_eps, dc ? &dc->a : nullptr);
        t = detail::conv_unit_forward(t, st.b, cfg.norm_eps, dc ? &dc->b : nullptr);
    }
    if (cache) {
        cache->out_in = t;
        cache->valid = true;
    }
    return conv3d(t, net.out_w, net.out_b, 1, 0);
}

template <typename T>
struct backward_result {
    network<T> grads;    // same structure as the network, gradient per parameter
    tensor5<T> dinput;
};

/// Exact reverse-mode differentiation of forward(). Requires the cache of a
/// completed forward pass.
template <typename T>
backward_result<T> backward(const network<T>& net, const forward_cache<T>& cache,
                            const tensor5<T>& dlogits) {
    if (!cache.valid) throw std::logic_error("backward: no cached forward pass");
    const auto& cfg = net.cfg;
    backward_result<T> res{network<T>(cfg), {}};
    network<T>& g = res.grads;

    tensor5<T> dw = conv3d_weight_grad(cache.out_in, dlogits, 1, 1, 1, 1, 0);
    detail::add_inplace(g.out_w, dw);
    auto db = conv3d_bias_grad(dlogits);
    for (std::size_t i = 0; i < db.size(); ++i) g.out_b[i] += db[i];
    tensor5<T> d = conv3d_input_grad(dlogits, net.out_w, 1, 0,
                                     dims3{cache.out_in.d, cache.out_in.h, cache.out_in.w});

    // A skip tensor feeds both the decoder concat and the next encoder stage,
    // so its gradient accumulates from both before the encoder consumes it.
    std::vector<tensor5<T>> dskips(std::size_t(cfg.stages));
    for (std::int64_t i = 0; i < cfg.stages - 1; ++i) {
        const auto& st = net.decoder[std::size_t(i)];
        auto& dst = g.decoder[std::size_t(i)];
        const auto& dc = cache.dec[std::size_t(i)];
        d = detail::conv_unit_backward(d, st.b, dst.b, dc.b);
        d = detail::conv_unit_backward(d, st.a, dst.a, dc.a);
        const std::int64_t up_c = st.up_w.c;
        tensor5<T> dup = detail::slice_channels(d, 0, up_c);
        dskips[std::size_t(i)] = detail::slice_channels(d, up_c, d.c - up_c);
        if (st.has_aac) dup = detail::aac_backward_impl(dup, st.aac, dst.aac, cfg, dc.aac);
        // adjoint of the transposed conv: a plain strided conv with its weights
        tensor5<T> dprev = conv3d(dup, st.up_w, {}, 2, 1);
        tensor5<T> dwu = conv3d_weight_grad(dup, dc.up_in, 3, 3, 3, 2, 1);
        detail::add_inplace(dst.up_w, dwu);
        d = std::move(dprev);
    }
    dskips[std::size_t(cfg.stages - 1)] = std::move(d);  // bottleneck

    for (std::int64_t i = cfg.stages - 1; i >= 0; --i) {
        tensor5<T> dd = std::move(dskips[std::size_t(i)]);
        dd = detail::conv_unit_backward(dd, net.encoder[std::size_t(i)].b,
                                        g.encoder[std::size_t(i)].b, cache.enc_b[std::size_t(i)]);
        dd = detail::conv_unit_backward(dd, net.encoder[std::size_t(i)].a,
                                        g.encoder[std::size_t(i)].a, cache.enc_a[std::size_t(i)]);
        if (i == 0)
            res.dinput = std::move(dd);
        else
            detail::add_inplace(dskips[std::size_t(i - 1)], dd);
    }
    return res;
}

}  // namespace canet
