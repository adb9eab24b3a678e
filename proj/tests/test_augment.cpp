#include <catch2/catch_amalgamated.hpp>

#include "canet/augment.hpp"
#include "canet/phantom.hpp"
#include "canet/rng.hpp"

using namespace canet;

namespace {

std::pair<volume, label_map> random_pair(rng& r, dims3 d) {
    volume v(d);
    label_map m(d);
    for (auto& x : v.data) x = float(r.normal() * 50 + 100);
    for (auto& c : m.data) c = std::uint8_t(r.uniform_index(kNumClasses));
    return {v, m};
}

}  // namespace

TEST_CASE("zero probabilities are the identity") {
    rng r(1);
    auto [v, m] = random_pair(r, {8, 9, 10});
    augment_config cfg;
    cfg.scale_prob = cfg.rotation_prob = cfg.elastic_prob = cfg.gamma_prob = 0;
    rng ar(5);
    auto [va, ma] = augment(v, m, cfg, ar);
    CHECK(va.data == v.data);
    CHECK(ma.data == m.data);
}

TEST_CASE("gamma = 1 leaves the image unchanged") {
    rng r(2);
    auto [v, m] = random_pair(r, {8, 8, 8});
    augment_config cfg;
    cfg.scale_prob = cfg.rotation_prob = cfg.elastic_prob = 0;
    cfg.gamma_prob = 1;
    cfg.gamma_lo = cfg.gamma_hi = 1.0;
    rng ar(6);
    auto [va, ma] = augment(v, m, cfg, ar);
    CHECK(ma.data == m.data);
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(va.data[i] == Catch::Approx(v.data[i]).margin(1e-5 * 300));
}

TEST_CASE("fixed seed reproduces the augmentation bit for bit") {
    rng r(3);
    auto [v, m] = random_pair(r, {10, 10, 10});
    augment_config cfg;  // defaults, everything possible
    cfg.scale_prob = cfg.rotation_prob = cfg.elastic_prob = cfg.gamma_prob = 0.7;
    rng a1(99), a2(99);
    auto [v1, m1] = augment(v, m, cfg, a1);
    auto [v2, m2] = augment(v, m, cfg, a2);
    CHECK(v1.data == v2.data);
    CHECK(m1.data == m2.data);
    rng a3(100);
    auto [v3, m3] = augment(v, m, cfg, a3);
    CHECK(v1.data != v3.data);
}

TEST_CASE("rotation by 90 degrees about depth is the index permutation") {
    rng r(4);
    const std::int64_t n = 9;
    auto [v, m] = random_pair(r, {4, n, n});
    augment_config cfg;
    cfg.scale_prob = cfg.elastic_prob = cfg.gamma_prob = 0;
    cfg.rotation_prob = 1;
    cfg.rotation_max_deg = 90;

    // The angle is drawn as uniform(-90, 90), so scan for a seed whose draws
    // select the depth axis with an angle within 2e-3 degrees of +90. At that
    // angle every sample lands within 1e-4 voxels of a grid point, making the
    // permutation oracle exact for nearest-neighbour labels.
    std::uint64_t chosen = 0;
    bool found = false;
    for (std::uint64_t seed = 0; seed < 2000000 && !found; ++seed) {
        rng probe(seed);
        probe.uniform();                            // the scale-probability draw (scale off)
        if (probe.uniform() >= 1.0) continue;       // the rotation-probability draw
        if (probe.uniform_index(3) != 0) continue;  // depth axis
        if (probe.uniform() > 0.99999) {            // angle draw: 90*(2u-1) ~ +90
            chosen = seed;
            found = true;
        }
    }
    REQUIRE(found);
    rng ar(chosen);
    auto [va, ma] = augment(v, m, cfg, ar);
    // +90 degrees about depth: out[z][y][x] = in[z][n-1-x][y]
    for (std::int64_t z = 0; z < 4; ++z)
        for (std::int64_t y = 0; y < n; ++y)
            for (std::int64_t x = 0; x < n; ++x) {
                CHECK(int(ma.at(z, y, x)) == int(m.at(z, n - 1 - x, y)));
                CHECK(va.at(z, y, x) == Catch::Approx(v.at(z, n - 1 - x, y)).margin(2e-2 * 300));
            }
}

TEST_CASE("augmented phantoms keep plausible label sets") {
    rng gen(8);
    auto [v, m] = gen_phantom(gen, {32, 32, 32}, {1, 1, 1});
    augment_config cfg;
    cfg.scale_prob = cfg.rotation_prob = cfg.elastic_prob = cfg.gamma_prob = 1;
    rng ar(12);
    auto [va, ma] = augment(v, m, cfg, ar);
    REQUIRE(va.dims == v.dims);
    bool in_set = true;
    for (auto c : ma.data) in_set = in_set && c < kNumClasses;
    CHECK(in_set);
    for (float x : va.data) REQUIRE(std::isfinite(x));
}
