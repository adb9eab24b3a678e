#include <catch2/catch_amalgamated.hpp>

#include "canet/metrics.hpp"
#include "canet/rng.hpp"
#include "oracles.hpp"

using namespace canet;

namespace {

label_map single_voxel(dims3 d, vec3 sp, std::int64_t z, std::int64_t y, std::int64_t x,
                       std::uint8_t label = 1) {
    label_map m(d, sp);
    m.at(z, y, x) = label;
    return m;
}

label_map random_mask(rng& r, dims3 d, vec3 sp, double density) {
    label_map m(d, sp);
    for (auto& c : m.data) c = r.uniform() < density ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("evaluation dice: identity, half overlap, disjoint") {
    label_map a(dims3{5, 5, 5}), b(dims3{5, 5, 5});
    for (std::size_t i = 0; i < 100; ++i) a.data[i] = b.data[i] = 1;
    CHECK(eval_dsc(a, b, 1) == Catch::Approx(1.0));

    label_map p(dims3{5, 5, 5}), g(dims3{5, 5, 5});
    for (std::size_t i = 0; i < 10; ++i) p.data[i] = 1;       // 0..9
    for (std::size_t i = 5; i < 15; ++i) g.data[i] = 1;       // 5..14, overlap 5
    CHECK(eval_dsc(p, g, 1) == Catch::Approx(0.5));

    label_map none(dims3{5, 5, 5});
    CHECK(eval_dsc(none, g, 1) == Catch::Approx(0.0));
    CHECK(eval_dsc(none, none, 1) == Catch::Approx(1.0));  // both empty
}

TEST_CASE("eval_dsc is symmetric and validates geometry") {
    rng r(3);
    label_map a = random_mask(r, {6, 6, 6}, {1, 2, 1}, 0.3);
    label_map b = random_mask(r, {6, 6, 6}, {1, 2, 1}, 0.3);
    CHECK(eval_dsc(a, b, 1) == Catch::Approx(eval_dsc(b, a, 1)));
    label_map c(dims3{6, 6, 6}, vec3{1, 1, 1});
    CHECK_THROWS(eval_dsc(a, c, 1));
}

TEST_CASE("surface voxels: single voxel, solid cube, empty") {
    auto one = single_voxel({4, 4, 4}, {1, 1, 1}, 1, 2, 3);
    auto s = surface_voxels(one);
    REQUIRE(s.size() == 1);
    CHECK(s[0] == std::array<std::int64_t, 3>{1, 2, 3});

    label_map cube(dims3{5, 5, 5});
    for (std::int64_t z = 1; z <= 3; ++z)
        for (std::int64_t y = 1; y <= 3; ++y)
            for (std::int64_t x = 1; x <= 3; ++x) cube.at(z, y, x) = 1;
    CHECK(surface_voxels(cube).size() == 26);  // all but the centre

    label_map empty(dims3{4, 4, 4});
    CHECK(surface_voxels(empty).empty());
}

TEST_CASE("volume-border voxels count as boundary") {
    label_map full(dims3{3, 3, 3});
    full.data.assign(full.size(), 1);
    CHECK(surface_voxels(full).size() == 26);  // everything except the centre voxel
}

TEST_CASE("hausdorff: identity, 3-4-5 triangle, spacing scaling") {
    auto a = single_voxel({6, 6, 6}, {1, 1, 1}, 0, 0, 0);
    auto b = single_voxel({6, 6, 6}, {1, 1, 1}, 0, 3, 4);
    CHECK(*hausdorff_mm(a, a, 1) == Catch::Approx(0.0));
    CHECK(*hausdorff_mm(a, b, 1) == Catch::Approx(5.0));

    auto as = single_voxel({6, 6, 6}, {1, 2, 2}, 0, 0, 0);
    auto bs = single_voxel({6, 6, 6}, {1, 2, 2}, 0, 3, 4);
    CHECK(*hausdorff_mm(as, bs, 1) == Catch::Approx(10.0));  // sqrt(36 + 64)

    label_map empty(dims3{6, 6, 6});
    CHECK_FALSE(hausdorff_mm(a, empty, 1).has_value());
}

TEST_CASE("avd: identity and two-point case") {
    auto a = single_voxel({6, 6, 6}, {1, 1, 1}, 1, 1, 1);
    auto b = single_voxel({6, 6, 6}, {1, 1, 1}, 1, 4, 5);
    CHECK(*avd_mm(a, a, 1) == Catch::Approx(0.0));
    CHECK(*avd_mm(a, b, 1) == Catch::Approx(5.0));
}

TEST_CASE("distances match the all-pairs brute force on random masks") {
    rng r(17);
    int tested = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const dims3 d{2 + std::int64_t(r.uniform_index(11)), 2 + std::int64_t(r.uniform_index(11)),
                      2 + std::int64_t(r.uniform_index(11))};
        const vec3 sp{r.uniform(0.5, 2.5), r.uniform(0.5, 2.5), r.uniform(0.5, 2.5)};
        auto p = random_mask(r, d, sp, 0.15);
        auto g = random_mask(r, d, sp, 0.15);
        const auto sp_p = surface_voxels(p);
        const auto sp_g = surface_voxels(g);
        const auto hd = hausdorff_mm(p, g, 1);
        const auto av = avd_mm(p, g, 1);
        if (sp_p.empty() || sp_g.empty()) {
            CHECK_FALSE(hd.has_value());
            CHECK_FALSE(av.has_value());
            continue;
        }
        ++tested;
        const auto want = oracle::brute_force_surface_distances(sp_p, sp_g, sp);
        CHECK(*hd == Catch::Approx(want.hausdorff).margin(1e-6));
        CHECK(*av == Catch::Approx(want.avg).margin(1e-6));
        CHECK(*hd >= *av);
    }
    CHECK(tested > 30);
}

TEST_CASE("metrics are invariant under a simultaneous axis permutation") {
    rng r(23);
    const dims3 d{7, 7, 7};
    const vec3 sp{1.0, 1.5, 2.0};
    auto p = random_mask(r, d, sp, 0.2);
    auto g = random_mask(r, d, sp, 0.2);
    // swap depth and width in both masks, permuting the spacing accordingly
    auto swapzx = [](const label_map& m) {
        label_map out(dims3{m.dims.w, m.dims.h, m.dims.d}, vec3{m.spacing.x, m.spacing.y, m.spacing.z});
        for (std::int64_t z = 0; z < m.dims.d; ++z)
            for (std::int64_t y = 0; y < m.dims.h; ++y)
                for (std::int64_t x = 0; x < m.dims.w; ++x) out.at(x, y, z) = m.at(z, y, x);
        return out;
    };
    auto ps = swapzx(p), gs = swapzx(g);
    CHECK(eval_dsc(p, g, 1) == Catch::Approx(eval_dsc(ps, gs, 1)));
    const auto hd = hausdorff_mm(p, g, 1), hds = hausdorff_mm(ps, gs, 1);
    REQUIRE(hd.has_value());
    CHECK(*hd == Catch::Approx(*hds).margin(1e-9));
    const auto av = avd_mm(p, g, 1), avs = avd_mm(ps, gs, 1);
    CHECK(*av == Catch::Approx(*avs).margin(1e-9));
}

TEST_CASE("evaluate_case: identity, empty-empty flags, random full oracle") {
    rng r(31);
    const dims3 d{16, 16, 16};
    const vec3 sp{1.2, 0.9, 1.1};
    label_map gt(d, sp), pred(d, sp);
    for (auto& c : gt.data) c = std::uint8_t(r.uniform_index(4));  // classes 0..3, no vein
    pred = gt;
    auto rep = evaluate_case(pred, gt);
    for (int c = 1; c <= 3; ++c) {
        CHECK(rep.per_class[std::size_t(c - 1)].dsc == Catch::Approx(1.0));
        CHECK(*rep.per_class[std::size_t(c - 1)].hd_mm == Catch::Approx(0.0).margin(1e-9));
        CHECK(*rep.per_class[std::size_t(c - 1)].avd_mm == Catch::Approx(0.0).margin(1e-9));
    }
    CHECK(rep.per_class[3].both_empty);
    CHECK(rep.per_class[3].dsc == Catch::Approx(1.0));
    CHECK_FALSE(rep.per_class[3].hd_mm.has_value());

    // randomized case against the brute-force oracle, field by field
    for (auto& c : pred.data) c = std::uint8_t(r.uniform_index(5));
    for (auto& c : gt.data) c = std::uint8_t(r.uniform_index(5));
    rep = evaluate_case(pred, gt);
    for (std::uint8_t c = 1; c <= 4; ++c) {
        const auto& m = rep.per_class[std::size_t(c - 1)];
        std::int64_t np = 0, ng = 0, inter = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            np += pred.data[i] == c;
            ng += gt.data[i] == c;
            inter += pred.data[i] == c && gt.data[i] == c;
        }
        const double want_dsc = np + ng == 0 ? 1.0 : 2.0 * double(inter) / double(np + ng);
        CHECK(m.dsc == Catch::Approx(want_dsc));
        const auto surf_p = surface_voxels(pred, c);
        const auto surf_g = surface_voxels(gt, c);
        if (surf_p.empty() || surf_g.empty()) {
            CHECK_FALSE(m.hd_mm.has_value());
        } else {
            const auto want = oracle::brute_force_surface_distances(surf_p, surf_g, sp);
            CHECK(*m.hd_mm == Catch::Approx(want.hausdorff).margin(1e-6));
            CHECK(*m.avd_mm == Catch::Approx(want.avg).margin(1e-6));
        }
    }
}
