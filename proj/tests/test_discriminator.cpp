#include <set>
#include <string>

#include "derain/discriminator.hpp"
#include "derain/errors.hpp"
#include "derain/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using derain::Discriminator;
using derain::Graph;
using derain::ModelConfig;
using derain::Pcg32;
using derain::Tensor;

namespace {

ModelConfig d_cfg(int h, int w) {
    ModelConfig cfg;
    cfg.in_h = h;
    cfg.in_w = w;
    cfg.d_widths = {2, 2, 3, 3, 3, 3, 2};
    cfg.d_fc = 8;
    cfg.d_map_mid = 2;
    return cfg;
}

}  // namespace

TEST_CASE("discriminator emits a scalar logit and an eighth-resolution map") {
    Pcg32 rng(61);
    auto cfg = d_cfg(32, 24);
    Discriminator<double> d;
    d.init(cfg, true, rng);
    CHECK(d.map_h == 4);  // 32 -> 16 -> 8 -> 8 -> 4 -> 4
    CHECK(d.map_w == 3);
    auto img = derain::random_uniform<double>(3, 32, 24, rng);
    Graph<double> g;
    auto out = d.apply(g, g.input(img));
    CHECK(g.val(out.logit).size() == 1);
    CHECK(g.val(out.map).c == 1);
    CHECK(g.val(out.map).h == 4);
    CHECK(g.val(out.map).w == 3);
    CHECK(g.val(out.map).v.minCoeff() > 0.0);
    CHECK(g.val(out.map).v.maxCoeff() < 1.0);
}

TEST_CASE("plain discriminator has no map branch or its parameters") {
    Pcg32 rng(62);
    auto cfg = d_cfg(16, 16);
    Discriminator<double> d;
    d.init(cfg, false, rng);
    auto img = derain::random_uniform<double>(3, 16, 16, rng);
    Graph<double> g;
    auto out = d.apply(g, g.input(img));
    CHECK(out.map == -1);
    std::set<std::string> names;
    d.visit_params([&](const std::string& n, Tensor<double>&) { names.insert(n); });
    CHECK(names.count("disc.map1.w") == 0);
    CHECK(names.count("disc.c1.w") == 1);
    CHECK(names.count("disc.fc2.b") == 1);

    Discriminator<double> da;
    da.init(cfg, true, rng);
    std::set<std::string> an;
    da.visit_params([&](const std::string& n, Tensor<double>&) { an.insert(n); });
    CHECK(an.count("disc.map1.w") == 1);
    CHECK(an.count("disc.map2.b") == 1);
}

TEST_CASE("discriminator validates input shape") {
    Pcg32 rng(63);
    Discriminator<double> d;
    d.init(d_cfg(16, 16), true, rng);
    Graph<double> g;
    auto wrong_size = derain::random_uniform<double>(3, 32, 32, rng);
    CHECK_THROWS_AS(d.apply(g, g.input(wrong_size)), derain::shape_error);
    auto wrong_c = derain::random_uniform<double>(1, 16, 16, rng);
    CHECK_THROWS_AS(d.apply(g, g.input(wrong_c)), derain::shape_error);
}

TEST_CASE("the predicted map multiplicatively gates the features") {
    Pcg32 rng(64);
    auto cfg = d_cfg(16, 16);
    Discriminator<double> d;
    d.init(cfg, true, rng);
    // Force the map branch to predict (numerically) zero everywhere: with the
    // gate closed, the logit must collapse to a constant that no longer
    // depends on the image.
    d.map2.w.v.setZero();
    d.map2.b.v.setConstant(-60.0);  // sigmoid(-60) underflows to 0
    auto img1 = derain::random_uniform<double>(3, 16, 16, rng);
    auto img2 = derain::random_uniform<double>(3, 16, 16, rng);
    Graph<double> g;
    auto o1 = d.apply(g, g.input(img1));
    auto o2 = d.apply(g, g.input(img2));
    CHECK(g.scalar(o1.logit) == doctest::Approx(g.scalar(o2.logit)).epsilon(1e-12));
}

TEST_CASE("frozen application adds no trainable parameters") {
    Pcg32 rng(65);
    Discriminator<double> d;
    d.init(d_cfg(16, 16), true, rng);
    auto img = derain::random_uniform<double>(3, 16, 16, rng);
    Graph<double> g;
    auto out = d.apply_frozen(g, g.input(img));
    g.backward(out.logit);
    CHECK(g.grad_of(d.convs[0].w) == nullptr);
    CHECK(g.grad_of(d.fc2.w) == nullptr);

    Graph<double> g2;
    auto out2 = d.apply(g2, g2.input(img));
    // Same forward values either way.
    CHECK(g.scalar(out.logit) == doctest::Approx(g2.scalar(out2.logit)).epsilon(1e-12));
    g2.backward(out2.logit);
    CHECK(g2.grad_of(d.convs[0].w) != nullptr);
}

TEST_CASE("map loss compares against the downscaled guide and zero") {
    Pcg32 rng(66);
    auto mf = derain::random_uniform<double>(1, 4, 4, rng);
    auto mr = derain::random_uniform<double>(1, 4, 4, rng);
    auto guide = derain::random_uniform<double>(1, 16, 16, rng);
    Graph<double> g;
    auto node = derain::map_loss_node<double>(g, g.input(mf), g.input(mr), guide);
    CHECK(g.scalar(node) == doctest::Approx(oracle::map_loss(mf, mr, guide)));

    // Equal-resolution guide is used as-is.
    auto guide_same = derain::random_uniform<double>(1, 4, 4, rng);
    Graph<double> g2;
    auto n2 = derain::map_loss_node<double>(g2, g2.input(mf), g2.input(mr), guide_same);
    CHECK(g2.scalar(n2) == doctest::Approx(oracle::map_loss(mf, mr, guide_same)));

    auto ragged = derain::random_uniform<double>(1, 15, 16, rng);
    Graph<double> g3;
    CHECK_THROWS_AS(derain::map_loss_node<double>(g3, g3.input(mf), g3.input(mr), ragged),
                    derain::shape_error);
}

TEST_CASE("discriminator loss matches the cross-entropy oracle") {
    for (double zr : {-2.0, 0.3, 4.0})
        for (double zf : {-3.0, 0.1, 2.5}) {
            Graph<double> g;
            auto lr = g.input(Tensor<double>::scalar(zr));
            auto lf = g.input(Tensor<double>::scalar(zf));
            auto node = derain::discriminator_loss_node<double>(g, lr, lf, -1, 0.05);
            CHECK(g.scalar(node) == doctest::Approx(oracle::disc_loss(zr, zf, 0.0, 0.05)).epsilon(1e-9));

            Graph<double> g2;
            auto mt = g2.input(Tensor<double>::scalar(1.75));
            auto n2 = derain::discriminator_loss_node<double>(
                g2, g2.input(Tensor<double>::scalar(zr)), g2.input(Tensor<double>::scalar(zf)), mt, 0.05);
            CHECK(g2.scalar(n2) == doctest::Approx(oracle::disc_loss(zr, zf, 1.75, 0.05)).epsilon(1e-9));
        }
}

TEST_CASE("extreme logits stay finite through the stabilised loss") {
    Graph<double> g;
    auto big = g.input(Tensor<double>::scalar(500.0));
    auto small = g.input(Tensor<double>::scalar(-500.0));
    auto node = derain::discriminator_loss_node<double>(g, small, big, -1, 0.05);
    CHECK(std::isfinite(g.scalar(node)));
    CHECK(g.scalar(node) == doctest::Approx(1000.0));  // softplus(500) ~= 500 each
    g.backward(node);
}

TEST_CASE("discriminator gradients match finite differences") {
    Pcg32 rng(67);
    auto cfg = d_cfg(16, 16);
    Discriminator<double> d;
    d.init(cfg, true, rng);
    auto real = derain::random_uniform<double>(3, 16, 16, rng);
    auto fake = derain::random_uniform<double>(3, 16, 16, rng);
    auto guide = derain::random_uniform<double>(1, 16, 16, rng);

    auto build = [&](Graph<double>& g) {
        auto r = d.apply(g, g.input(real));
        auto f = d.apply(g, g.input(fake));
        auto mt = derain::map_loss_node<double>(g, f.map, r.map, guide);
        return derain::discriminator_loss_node<double>(g, r.logit, f.logit, mt, 0.05);
    };
    std::vector<Tensor<double>*> params{&d.convs[0].w, &d.convs[4].w, &d.convs[6].w, &d.map1.w,
                                        &d.map2.b,     &d.fc1.w,      &d.fc2.b};
    auto rep = testutil::fd_vs_backward(build, params, 42, 1e-5, 1e-4, 4321);
    CHECK(rep.checked == 42);
    CHECK_MESSAGE(rep.failed == 0, "worst relative error ", rep.worst);
}
