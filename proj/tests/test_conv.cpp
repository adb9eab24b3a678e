#include <catch2/catch_amalgamated.hpp>

#include "canet/conv.hpp"
#include "canet/rng.hpp"
#include "oracles.hpp"

using namespace canet;

namespace {

tensor5f random_tensor(rng& r, std::int64_t b, std::int64_t c, std::int64_t d, std::int64_t h,
                       std::int64_t w, double scale = 1.0) {
    tensor5f t(b, c, d, h, w);
    for (auto& v : t.data) v = float(r.normal() * scale);
    return t;
}

}  // namespace

TEST_CASE("identity 1x1x1 kernel reproduces the input") {
    rng r(1);
    auto x = random_tensor(r, 1, 3, 4, 4, 4);
    tensor5f w(3, 3, 1, 1, 1);
    for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0, 0) = 1.f;
    auto y = conv3d(x, w, {}, 1, 0);
    REQUIRE(y.same_shape(x));
    CHECK(y.data == x.data);
}

TEST_CASE("all-ones 3x3x3 kernel sums the 27-neighbourhood") {
    tensor5f x(1, 1, 5, 5, 5);
    const float c = 2.5f;
    x.fill(c);
    tensor5f w(1, 1, 3, 3, 3);
    w.fill(1.f);
    auto y = conv3d(x, w, {}, 1, 1);
    CHECK(y.at(0, 0, 2, 2, 2) == Catch::Approx(27 * c));
    CHECK(y.at(0, 0, 0, 0, 0) == Catch::Approx(8 * c));  // corner sees 2x2x2 inside
}

TEST_CASE("conv3d matches the naive loop reference") {
    rng r(11);
    for (auto [k, s] : {std::pair{3L, 1L}, {3L, 2L}, {1L, 1L}}) {
        const std::int64_t p = k == 3 ? 1 : 0;
        auto x = random_tensor(r, 2, 3, 6, 5, 7);
        auto w = random_tensor(r, 4, 3, k, k, k);
        std::vector<float> bias(4);
        for (auto& b : bias) b = float(r.normal());
        auto got = conv3d(x, w, bias, s, p);
        auto want = oracle::conv3d(x, w, bias, s, p);
        REQUIRE(got.same_shape(want));
        for (std::size_t i = 0; i < got.data.size(); ++i)
            CHECK(got.data[i] == Catch::Approx(want.data[i]).margin(1e-5));
    }
}

TEST_CASE("conv3d rejects channel mismatch") {
    tensor5f x(1, 2, 4, 4, 4), w(3, 5, 3, 3, 3);
    CHECK_THROWS(conv3d(x, w, {}, 1, 1));
}

TEST_CASE("transposed conv doubles spatial dims and zero maps to zero") {
    rng r(2);
    tensor5f x(1, 4, 2, 2, 2);
    for (auto& v : x.data) v = float(r.normal());
    auto w = random_tensor(r, 4, 6, 3, 3, 3);
    auto y = transposed_conv3d(x, w, 2, 1, {4, 4, 4});
    CHECK(y.b == 1);
    CHECK(y.c == 6);
    CHECK(y.d == 4);
    CHECK(y.h == 4);
    CHECK(y.w == 4);

    x.fill(0.f);
    auto z = transposed_conv3d(x, w, 2, 1, {4, 4, 4});
    for (float v : z.data) CHECK(v == 0.f);
}

TEST_CASE("adjoint identity <conv(x),y> == <x, conv_T(y)>") {
    rng r(17);
    for (auto [k, s] : {std::pair{3L, 1L}, {3L, 2L}, {1L, 1L}}) {
        const std::int64_t p = k == 3 ? 1 : 0;
        auto x = random_tensor(r, 1, 2, 6, 6, 6);
        auto w = random_tensor(r, 3, 2, k, k, k);
        auto cx = conv3d(x, w, {}, s, p);
        auto y = random_tensor(r, 1, 3, cx.d, cx.h, cx.w);
        auto ty = transposed_conv3d(y, w, s, p, {6, 6, 6});
        double lhs = 0, rhs = 0;
        for (std::size_t i = 0; i < cx.data.size(); ++i) lhs += double(cx.data[i]) * y.data[i];
        for (std::size_t i = 0; i < x.data.size(); ++i) rhs += double(x.data[i]) * ty.data[i];
        CHECK(lhs == Catch::Approx(rhs).margin(1e-4 * std::max(1.0, std::abs(lhs))));
    }
}

TEST_CASE("weight and bias gradients match the naive correlation") {
    rng r(23);
    for (auto [k, s] : {std::pair{3L, 1L}, {3L, 2L}}) {
        auto x = random_tensor(r, 2, 2, 6, 6, 6);
        auto dout = random_tensor(r, 2, 3, s == 1 ? 6 : 3, s == 1 ? 6 : 3, s == 1 ? 6 : 3);
        auto dw = conv3d_weight_grad(x, dout, k, k, k, s, 1);
        // reference via naive loops
        tensor5f want(3, 2, k, k, k);
        for (std::int64_t bi = 0; bi < 2; ++bi)
            for (std::int64_t co = 0; co < 3; ++co)
                for (std::int64_t ci = 0; ci < 2; ++ci)
                    for (std::int64_t kz = 0; kz < k; ++kz)
                        for (std::int64_t ky = 0; ky < k; ++ky)
                            for (std::int64_t kx = 0; kx < k; ++kx) {
                                double acc = want.at(co, ci, kz, ky, kx);
                                for (std::int64_t zo = 0; zo < dout.d; ++zo)
                                    for (std::int64_t yo = 0; yo < dout.h; ++yo)
                                        for (std::int64_t xo = 0; xo < dout.w; ++xo) {
                                            const std::int64_t zi = zo * s + kz - 1;
                                            const std::int64_t yi = yo * s + ky - 1;
                                            const std::int64_t xi = xo * s + kx - 1;
                                            if (zi < 0 || zi >= 6 || yi < 0 || yi >= 6 || xi < 0 || xi >= 6)
                                                continue;
                                            acc += double(dout.at(bi, co, zo, yo, xo)) *
                                                   double(x.at(bi, ci, zi, yi, xi));
                                        }
                                want.at(co, ci, kz, ky, kx) = float(acc);
                            }
        REQUIRE(dw.same_shape(want));
        for (std::size_t i = 0; i < dw.data.size(); ++i)
            CHECK(dw.data[i] == Catch::Approx(want.data[i]).margin(1e-4));

        auto db = conv3d_bias_grad(dout);
        for (std::int64_t co = 0; co < 3; ++co) {
            double s2 = 0;
            for (std::int64_t bi = 0; bi < 2; ++bi) {
                const float* pd = dout.ptr(bi, co);
                for (std::int64_t v = 0; v < dout.spatial_size(); ++v) s2 += pd[v];
            }
            CHECK(db[std::size_t(co)] == Catch::Approx(s2).margin(1e-4));
        }
    }
}
