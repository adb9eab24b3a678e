#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "canet/attention.hpp"
#include "canet/rng.hpp"
#include "canet/tensor.hpp"

namespace canet {

struct bench_row {
    std::int64_t edge = 0;
    std::int64_t tokens = 0;
    std::uint64_t axial_macs = 0, full_macs = 0;        // analytic totals
    std::uint64_t axial_score_macs = 0, full_score_macs = 0;
    double axial_ms = 0;
    double full_ms = -1;  // -1 when the dense pass was skipped
};

namespace detail {

template <typename F>
double time_ms(F&& fn, int reps) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

}  // namespace detail

/// Analytic MAC counts plus measured wall time for the three-branch axial
/// pass versus dense attention over all tokens (the dense pass runs the same
/// kernel on the volume flattened to a single line). Dense timing is skipped
/// above `full_edge_limit` where the quadratic cost becomes impractical.
inline std::vector<bench_row> bench_attention(const std::vector<std::int64_t>& edges,
                                              std::int64_t channels, int reps = 3,
                                              std::int64_t full_edge_limit = 16) {
    std::vector<bench_row> rows;
    rng r(1);
    for (const std::int64_t e : edges) {
        bench_row row;
        row.edge = e;
        row.tokens = e * e * e;
        const auto ax = attention_flops({e, e, e}, channels, attention_mode::axial);
        const auto fl = attention_flops({e, e, e}, channels, attention_mode::full);
        row.axial_macs = ax.total_macs;
        row.full_macs = fl.total_macs;
        row.axial_score_macs = ax.score_macs;
        row.full_score_macs = fl.score_macs;

        axial_params<float> p;
        p.wq = tensor5f(channels, channels, 1, 1, 1);
        p.wk = tensor5f(channels, channels, 1, 1, 1);
        p.wv = tensor5f(channels, channels, 1, 1, 1);
        p.pos = tensor5f(1, channels, std::max(e, row.tokens), 1, 1);
        for (auto* t : {&p.wq, &p.wk, &p.wv})
            for (auto& v : t->data) v = float(r.normal() * 0.3);

        tensor5f x(1, channels, e, e, e);
        for (auto& v : x.data) v = float(r.normal());
        row.axial_ms = detail::time_ms(
            [&] {
                for (axis3 a : {axis3::height, axis3::width, axis3::depth})
                    axial_attention(x, a, p, 1);
            },
            reps);
        if (e <= full_edge_limit) {
            tensor5f flat(1, channels, 1, 1, row.tokens);
            flat.data = x.data;
            row.full_ms = detail::time_ms([&] { axial_attention(flat, axis3::width, p, 1); }, reps);
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::string format_bench_table(const std::vector<bench_row>& rows) {
    std::string out =
        "edge tokens axial_macs full_macs axial_score_macs full_score_macs axial_ms full_ms\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%lld %lld %llu %llu %llu %llu %.3f %.3f\n",
                      (long long)r.edge, (long long)r.tokens, (unsigned long long)r.axial_macs,
                      (unsigned long long)r.full_macs, (unsigned long long)r.axial_score_macs,
                      (unsigned long long)r.full_score_macs, r.axial_ms, r.full_ms);
        out += buf;
    }
    return out;
}

}  // namespace canet
