#include <string>
#include <vector>

#include "derain/errors.hpp"
#include "derain/metrics.hpp"
#include "derain/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using derain::Tensor;

TEST_CASE("psnr closed forms and cap") {
    auto a = Tensor<double>::full(3, 16, 16, 0.5);
    CHECK(derain::psnr(a, a) == 99.0);

    auto b = Tensor<double>::full(3, 16, 16, 0.6);  // uniform error 0.1
    CHECK(derain::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));

    auto c = Tensor<double>::full(3, 16, 16, 0.5 + 1e-6);
    CHECK(derain::psnr(a, c) == 99.0);  // capped

    Tensor<double> wrong(3, 16, 15);
    CHECK_THROWS_AS(derain::psnr(a, wrong), derain::shape_error);
}

TEST_CASE("psnr matches the oracle on random images") {
    derain::Pcg32 rng(71);
    auto x = derain::random_uniform<double>(3, 20, 20, rng);
    auto y = derain::random_uniform<double>(3, 20, 20, rng);
    CHECK(derain::psnr(x, y) == doctest::Approx(oracle::psnr(x, y)).epsilon(1e-12));
}

TEST_CASE("ssim sanity: identity is 1, noise is less, tiny images throw") {
    derain::Pcg32 rng(72);
    auto x = derain::random_uniform<double>(1, 16, 16, rng);
    CHECK(derain::ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));

    auto noisy = x;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.v[i] += 0.2 * (rng.uniform() - 0.5);
    CHECK(derain::ssim(x, noisy) < 0.999);
    CHECK(derain::ssim(x, noisy) > -1.0);

    Tensor<double> small(1, 10, 16);
    CHECK_THROWS_AS(derain::ssim(small, small), derain::shape_error);
}

TEST_CASE("ssim matches the windowed oracle") {
    derain::Pcg32 rng(73);
    auto x = derain::random_uniform<double>(3, 14, 18, rng);
    auto y = derain::random_uniform<double>(3, 14, 18, rng);
    CHECK(derain::ssim(x, y) == doctest::Approx(oracle::ssim(x, y)).epsilon(1e-9));

    // A constant luminance shift is penalised by the luminance term only.
    auto shifted = x;
    shifted.v += 0.1;
    CHECK(derain::ssim(x, shifted) == doctest::Approx(oracle::ssim(x, shifted)).epsilon(1e-9));
    CHECK(derain::ssim(x, shifted) < 1.0);
}

TEST_CASE("attention IoU counts set overlap") {
    Tensor<double> mask = Tensor<double>::zeros(1, 4, 4);
    mask.at(0, 0, 0) = 1.0;
    mask.at(0, 0, 1) = 1.0;

    Tensor<double> map = Tensor<double>::zeros(1, 4, 4);
    map.at(0, 0, 0) = 0.9;  // hit
    map.at(0, 2, 2) = 0.8;  // false positive
    CHECK(derain::attention_iou(map, mask) == doctest::Approx(1.0 / 3.0));

    auto empty_map = Tensor<double>::zeros(1, 4, 4);
    auto empty_mask = Tensor<double>::zeros(1, 4, 4);
    CHECK(derain::attention_iou(empty_map, empty_mask) == 1.0);
    CHECK(derain::attention_iou(empty_map, mask) == 0.0);

    // Threshold boundary: exactly at threshold counts as predicted.
    Tensor<double> edge = Tensor<double>::zeros(1, 4, 4);
    edge.at(0, 0, 0) = 0.5;
    edge.at(0, 0, 1) = 0.5;
    CHECK(derain::attention_iou(edge, mask) == 1.0);

    derain::Pcg32 rng(74);
    auto rmap = derain::random_uniform<double>(1, 12, 12, rng);
    Tensor<double> rmask(1, 12, 12);
    for (Eigen::Index i = 0; i < rmask.size(); ++i) rmask.v[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
    CHECK(derain::attention_iou(rmap, rmask) == doctest::Approx(oracle::iou(rmap, rmask, 0.5)));
}

TEST_CASE("attention alignment tracks every step") {
    Tensor<double> mask = Tensor<double>::zeros(1, 4, 4);
    mask.at(0, 1, 1) = 1.0;
    Tensor<double> m1 = Tensor<double>::zeros(1, 4, 4);  // misses
    Tensor<double> m2 = Tensor<double>::zeros(1, 4, 4);
    m2.at(0, 1, 1) = 1.0;  // hits exactly
    auto iou = derain::attention_alignment<double>({m1, m2}, mask);
    REQUIRE(iou.size() == 2);
    CHECK(iou[0] == 0.0);
    CHECK(iou[1] == 1.0);
}

TEST_CASE("attention contrast is the inside/outside mean gap") {
    Tensor<double> mask = Tensor<double>::zeros(1, 2, 2);
    mask.at(0, 0, 0) = 1.0;
    Tensor<double> map(1, 2, 2);
    map.at(0, 0, 0) = 0.9;
    map.at(0, 0, 1) = 0.1;
    map.at(0, 1, 0) = 0.2;
    map.at(0, 1, 1) = 0.3;
    CHECK(derain::attention_contrast(map, mask) == doctest::Approx(0.9 - 0.2));

    auto all = Tensor<double>::full(1, 2, 2, 1.0);
    CHECK(derain::attention_contrast(map, all) == 0.0);  // no outside set
}

TEST_CASE("evaluation report aggregates and formats deterministically") {
    derain::EvalReport rep;
    rep.variant = "AA+AD";
    rep.rows = {{"0000", 30.0, 0.9}, {"0001", 20.0, 0.7}};
    rep.mean_iou = {0.25, 0.5};
    CHECK(rep.mean_psnr() == doctest::Approx(25.0));
    CHECK(rep.mean_ssim() == doctest::Approx(0.8));

    const std::string csv = derain::format_eval_csv(rep);
    CHECK(csv ==
          "id,psnr,ssim\n"
          "0000,30.000000,0.900000\n"
          "0001,20.000000,0.700000\n"
          "mean,25.000000,0.800000\n");
    CHECK(derain::format_eval_csv(rep) == csv);

    const std::string txt = derain::format_eval_text(rep);
    CHECK(txt.find("variant: AA+AD") != std::string::npos);
    CHECK(txt.find("attention IoU per step:") != std::string::npos);

    auto j = derain::eval_report_json(rep);
    CHECK(j["variant"] == "AA+AD");
    CHECK(j["rows"].size() == 2);
    CHECK(j["mean_psnr"].get<double>() == doctest::Approx(25.0));
    CHECK(j["mean_iou"].size() == 2);
}

TEST_CASE("pinned reference strings stay stable") {
    CHECK(derain::variant_reference(derain::Variant::A) == "full-scale reference 29.25 dB / 0.7853");
    CHECK(derain::variant_reference(derain::Variant::AD) == "full-scale reference 30.88 dB / 0.8670");
    CHECK(derain::variant_reference(derain::Variant::AAD) == "full-scale reference 30.60 dB / 0.8710");
    CHECK(derain::variant_reference(derain::Variant::AAAD) == "full-scale reference 31.57 dB / 0.9023");
}

TEST_CASE("ablation table includes every variant with references") {
    std::vector<derain::AblationRow> rows{
        {derain::Variant::A, true, 25.0, 0.8},
        {derain::Variant::AD, false, 0, 0},
        {derain::Variant::AAD, false, 0, 0},
        {derain::Variant::AAAD, true, 27.5, 0.85},
    };
    const std::string csv = derain::format_ablation_csv(rows);
    CHECK(csv.find("variant,psnr,ssim,reference\n") == 0);
    CHECK(csv.find("A,25.000000,0.800000,\"full-scale reference 29.25 dB / 0.7853\"") != std::string::npos);
    CHECK(csv.find("A+D,,,\"full-scale reference 30.88 dB / 0.8670\"") != std::string::npos);
    CHECK(csv.find("AA+AD,27.500000,0.850000,") != std::string::npos);

    const std::string txt = derain::format_ablation_text(rows);
    CHECK(txt.find("AA+AD") != std::string::npos);
    CHECK(txt.find("-") != std::string::npos);  // absent rows render dashes

    auto j = derain::ablation_json(rows);
    REQUIRE(j.size() == 4);
    CHECK(j[0]["variant"] == "A");
    CHECK(j[0]["present"] == true);
    CHECK(j[1]["present"] == false);
    CHECK(j[1].contains("psnr") == false);
    CHECK(j[3]["psnr"].get<double>() == doctest::Approx(27.5));
}
