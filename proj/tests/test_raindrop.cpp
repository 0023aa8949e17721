#include <set>

#include "derain/errors.hpp"
#include "derain/png_io.hpp"
#include "derain/raindrop.hpp"
#include "derain/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using derain::DropRange;
using derain::Pcg32;
using derain::RaindropSpec;
using derain::Tensor;

TEST_CASE("composition matches the per-pixel formula") {
    Pcg32 rng(21);
    auto b = derain::random_uniform<double>(3, 9, 8, rng);
    auto r = derain::random_uniform<double>(3, 9, 8, rng, 0.0, 0.6);
    Tensor<double> m(1, 9, 8);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.v[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;

    auto got = derain::compose(b, m, r);
    auto want = oracle::compose(b, m, r);
    CHECK((got.v - want.v).abs().maxCoeff() < 1e-15);

    Tensor<double> bad_mask(2, 9, 8);
    CHECK_THROWS_AS(derain::compose(b, bad_mask, r), derain::shape_error);
}

TEST_CASE("mask extraction matches the thresholded channel-max difference") {
    Pcg32 rng(22);
    auto clean = derain::random_uniform<double>(3, 12, 10, rng);
    auto degraded = clean;
    for (Eigen::Index i = 0; i < degraded.size(); ++i)
        if (rng.uniform() < 0.2) degraded.v[i] = rng.uniform();

    auto got = derain::extract_mask(degraded, clean);
    auto want = oracle::extract_mask(degraded, clean, 30.0 / 255.0);
    CHECK((got.v - want.v).abs().maxCoeff() == 0.0);
}

TEST_CASE("rendered droplets are deterministic in the seed") {
    Pcg32 rng(23);
    auto bg = derain::procedural_background<double>(32, 32, rng);
    std::vector<RaindropSpec> drops{{10.0, 12.0, 4.0, 1.1, 0.8, 0.7}, {20.0, 20.0, 5.0, 0.9, 1.2, 0.5}};
    auto [rain1, mask1] = derain::render_rain_layer(bg, drops, 99);
    auto [rain2, mask2] = derain::render_rain_layer(bg, drops, 99);
    CHECK((rain1.v - rain2.v).abs().maxCoeff() == 0.0);
    CHECK((mask1.v - mask2.v).abs().maxCoeff() == 0.0);

    auto [rain3, mask3] = derain::render_rain_layer(bg, drops, 100);
    CHECK((rain3.v - rain1.v).abs().maxCoeff() > 0.0);
}

TEST_CASE("droplet footprint is the expected ellipse") {
    auto bg = Tensor<double>::full(3, 32, 32, 0.5);
    std::vector<RaindropSpec> drops{{16.0, 16.0, 5.0, 1.0, 0.8, 0.7}};
    auto [rain, mask] = derain::render_rain_layer(bg, drops, 1);
    double count = mask.v.sum();
    // Area of a radius-5 disc is ~78.5; the rasterised count lands nearby.
    CHECK(count > 60);
    CHECK(count < 100);
    // Mask pixels obey the ellipse inequality; others are zero.
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double u2 = ((x - 16.0) / 5.0) * ((x - 16.0) / 5.0) + ((y - 16.0) / 5.0) * ((y - 16.0) / 5.0);
            CHECK(mask.at(0, y, x) == (u2 <= 1.0 ? 1.0 : 0.0));
        }
    // Rain layer is zero outside the mask.
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (mask.at(0, y, x) == 0.0) CHECK(rain.at(c, y, x) == 0.0);
}

TEST_CASE("every covered pixel survives mask extraction after 8-bit quantisation") {
    Pcg32 rng(25);
    auto bg = derain::procedural_background<double>(48, 48, rng);
    std::vector<RaindropSpec> drops{
        {12.0, 12.0, 6.0, 1.2, 0.6, 0.3},  // lowest supported opacity
        {30.0, 30.0, 7.0, 0.8, 1.4, 0.9},
        {15.0, 34.0, 5.0, 1.0, 1.0, 0.5},
    };
    auto [rain, mask] = derain::render_rain_layer(bg, drops, 7);
    auto degraded = derain::compose(bg, mask, rain);

    // Quantise both sides the way PNG storage would.
    auto dq = derain::tensor_from_bytes<double>(derain::bytes_from_tensor(degraded), 3);
    auto cq = derain::tensor_from_bytes<double>(derain::bytes_from_tensor(bg), 3);
    auto recovered = derain::extract_mask(dq, cq);
    CHECK((recovered.v - mask.v).abs().maxCoeff() == 0.0);
}

TEST_CASE("procedural backgrounds are deterministic, bounded, and non-trivial") {
    Pcg32 r1(31), r2(31), r3(32);
    auto a = derain::procedural_background<double>(24, 20, r1);
    auto b = derain::procedural_background<double>(24, 20, r2);
    auto c = derain::procedural_background<double>(24, 20, r3);
    CHECK((a.v - b.v).abs().maxCoeff() == 0.0);
    CHECK((a.v - c.v).abs().maxCoeff() > 0.0);
    CHECK(a.v.minCoeff() >= 0.0);
    CHECK(a.v.maxCoeff() <= 1.0);
    // Not a constant image.
    CHECK((a.v - a.v.mean()).square().mean() > 1e-4);
}

TEST_CASE("dataset generation yields valid, distinct, reproducible pairs") {
    auto pairs = derain::make_dataset<double>(5, 32, 36, {3, 6}, 1234);
    REQUIRE(pairs.size() == 5);
    std::set<std::uint64_t> seeds;
    for (const auto& p : pairs) {
        CHECK(p.clean.c == 3);
        CHECK(p.clean.h == 32);
        CHECK(p.clean.w == 36);
        CHECK(p.degraded.h == 32);
        CHECK(p.mask.c == 1);
        CHECK(p.drop_count >= 3);
        CHECK(p.drop_count <= 6);
        CHECK(p.clean.v.minCoeff() >= 0.0);
        CHECK(p.clean.v.maxCoeff() <= 1.0);
        CHECK(p.degraded.v.minCoeff() >= 0.0);
        CHECK(p.degraded.v.maxCoeff() <= 1.0);
        for (Eigen::Index i = 0; i < p.mask.size(); ++i)
            CHECK((p.mask.v[i] == 0.0 || p.mask.v[i] == 1.0));
        CHECK(p.mask.v.sum() > 0.0);                           // some droplets
        CHECK(p.mask.v.sum() < 0.75 * p.mask.size());          // not everything
        CHECK((p.degraded.v - p.clean.v).abs().maxCoeff() > 0.1);
        seeds.insert(p.seed);
    }
    CHECK(seeds.size() == 5);

    auto again = derain::make_dataset<double>(5, 32, 36, {3, 6}, 1234);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK((pairs[i].degraded.v - again[i].degraded.v).abs().maxCoeff() == 0.0);
        CHECK((pairs[i].clean.v - again[i].clean.v).abs().maxCoeff() == 0.0);
        CHECK((pairs[i].mask.v - again[i].mask.v).abs().maxCoeff() == 0.0);
    }

    auto other = derain::make_dataset<double>(1, 32, 36, {3, 6}, 5678);
    CHECK((other[0].degraded.v - pairs[0].degraded.v).abs().maxCoeff() > 0.0);
}

TEST_CASE("dataset masks survive PNG quantisation") {
    auto pairs = derain::make_dataset<double>(3, 32, 32, {2, 4}, 77);
    for (const auto& p : pairs) {
        auto dq = derain::tensor_from_bytes<double>(derain::bytes_from_tensor(p.degraded), 3);
        auto cq = derain::tensor_from_bytes<double>(derain::bytes_from_tensor(p.clean), 3);
        auto rec = derain::extract_mask(dq, cq);
        CHECK((rec.v - p.mask.v).abs().maxCoeff() == 0.0);
    }
}

TEST_CASE("dataset generation validates its arguments") {
    CHECK_THROWS_AS(derain::make_dataset<double>(0, 32, 32, {3, 6}, 1), derain::usage_error);
    CHECK_THROWS_AS(derain::make_dataset<double>(1, 12, 32, {3, 6}, 1), derain::usage_error);
    CHECK_THROWS_AS(derain::make_dataset<double>(1, 32, 33, {3, 6}, 1), derain::usage_error);
    CHECK_THROWS_AS(derain::make_dataset<double>(1, 32, 32, {6, 3}, 1), derain::usage_error);
    CHECK_THROWS_AS(derain::make_dataset<double>(1, 32, 32, {0, 3}, 1), derain::usage_error);
}
