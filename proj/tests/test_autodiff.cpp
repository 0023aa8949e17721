#include <functional>
#include <vector>

#include "derain/autodiff.hpp"
#include "derain/errors.hpp"
#include "derain/layers.hpp"
#include "derain/rng.hpp"
#include "derain/tensor.hpp"
#include "doctest.h"
#include "oracles.hpp"

using derain::Graph;
using derain::Pcg32;
using derain::Tensor;

namespace {

/// Runs a central-difference check of every parameter against one backward
/// pass. `build` must construct the whole forward pass from scratch on the
/// given graph and return the scalar loss node.
void fd_against_backward(const std::function<Graph<double>::Idx(Graph<double>&)>& build,
                         const std::vector<Tensor<double>*>& params, int samples = 60,
                         double step = 1e-5, double tol = 1e-4) {
    Graph<double> g;
    const auto root = build(g);
    REQUIRE(g.val(root).size() == 1);
    g.backward(root);
    std::vector<Tensor<double>> analytic;
    for (auto* p : params) {
        const auto* gp = g.grad_of(*p);
        REQUIRE(gp != nullptr);
        analytic.push_back(*gp);
    }
    auto loss = [&]() {
        Graph<double> g2;
        return static_cast<double>(g2.val(build(g2)).v[0]);
    };
    Pcg32 rng(2024);
    const auto rep = oracle::fd_check<double>(params, analytic, loss, step, tol, samples, rng);
    CHECK(rep.checked == samples);
    CHECK_MESSAGE(rep.failed == 0, "worst relative error ", rep.worst);
}

Tensor<double> rand_t(int c, int h, int w, Pcg32& rng, double lo = -1.0, double hi = 1.0) {
    return derain::random_uniform<double>(c, h, w, rng, lo, hi);
}

}  // namespace

TEST_CASE("elementwise arithmetic matches direct evaluation") {
    Pcg32 rng(1);
    auto a = rand_t(2, 3, 3, rng);
    auto b = rand_t(2, 3, 3, rng);
    Graph<double> g;
    auto ia = g.input(a), ib = g.input(b);
    CHECK((g.val(g.add(ia, ib)).v - (a.v + b.v)).abs().maxCoeff() < 1e-15);
    CHECK((g.val(g.sub(ia, ib)).v - (a.v - b.v)).abs().maxCoeff() < 1e-15);
    CHECK((g.val(g.mul(ia, ib)).v - (a.v * b.v)).abs().maxCoeff() < 1e-15);
    CHECK((g.val(g.scale(ia, -2.5)).v - (-2.5 * a.v)).abs().maxCoeff() < 1e-15);

    Tensor<double> wrong(2, 3, 4);
    CHECK_THROWS_AS(g.add(ia, g.input(wrong)), derain::shape_error);
}

TEST_CASE("activation values at known points") {
    Tensor<double> x(1, 1, 4);
    x.at(0, 0, 0) = -2.0;
    x.at(0, 0, 1) = 0.0;
    x.at(0, 0, 2) = 0.5;
    x.at(0, 0, 3) = 3.0;
    Graph<double> g;
    auto ix = g.input(x);
    const auto& r = g.val(g.relu(ix));
    CHECK(r.at(0, 0, 0) == 0.0);
    CHECK(r.at(0, 0, 2) == doctest::Approx(0.5));
    const auto& s = g.val(g.sigmoid(ix));
    CHECK(s.at(0, 0, 1) == doctest::Approx(0.5));
    CHECK(s.at(0, 0, 3) == doctest::Approx(oracle::sigmoid(3.0)));
    const auto& t = g.val(g.tanh_act(ix));
    CHECK(t.at(0, 0, 0) == doctest::Approx(std::tanh(-2.0)));
    const auto& sp = g.val(g.softplus(ix));
    CHECK(sp.at(0, 0, 1) == doctest::Approx(std::log(2.0)));
    CHECK(sp.at(0, 0, 3) == doctest::Approx(std::log1p(std::exp(3.0))));
}

TEST_CASE("gradients of elementwise ops match finite differences") {
    Pcg32 rng(2);
    auto a = rand_t(2, 4, 4, rng);
    auto b = rand_t(2, 4, 4, rng);
    auto target = rand_t(2, 4, 4, rng);
    fd_against_backward(
        [&](Graph<double>& g) {
            auto ia = g.param(a), ib = g.param(b);
            auto mix = g.add(g.mul(ia, ib), g.scale(g.sub(ia, ib), 0.7));
            return g.mse(mix, g.input(target));
        },
        {&a, &b});
}

TEST_CASE("gradients of activations match finite differences") {
    Pcg32 rng(3);
    // Keep magnitudes above the ReLU kink so central differences are clean.
    auto x = rand_t(2, 4, 4, rng, 0.1, 1.0);
    auto y = rand_t(2, 4, 4, rng, -1.0, -0.1);
    auto target = rand_t(2, 4, 4, rng);
    fd_against_backward(
        [&](Graph<double>& g) {
            auto ix = g.param(x), iy = g.param(y);
            auto h = g.add(g.relu(ix), g.sigmoid(iy));
            h = g.add(g.tanh_act(h), g.softplus(g.mul(ix, iy)));
            return g.mse(h, g.input(target));
        },
        {&x, &y});
}

TEST_CASE("convolution forward matches the direct loop") {
    Pcg32 rng(4);
    for (int stride : {1, 2}) {
        auto x = rand_t(3, 7, 6, rng);
        auto w = rand_t(4, 3, 9, rng, -0.5, 0.5);
        auto b = rand_t(4, 1, 1, rng, -0.2, 0.2);
        Graph<double> g;
        auto out = g.conv2d(g.input(x), g.input(w), g.input(b), stride);
        auto want = oracle::conv2d(x, w, &b, stride);
        CHECK(g.val(out).c == want.c);
        CHECK(g.val(out).h == want.h);
        CHECK(g.val(out).w == want.w);
        CHECK((g.val(out).v - want.v).abs().maxCoeff() < 1e-12);
    }
    // 1x1 kernels too (used by the output heads).
    auto x = rand_t(4, 5, 5, rng);
    auto w = rand_t(2, 4, 1, rng);
    auto b = rand_t(2, 1, 1, rng);
    Graph<double> g;
    auto out = g.conv2d(g.input(x), g.input(w), g.input(b), 1);
    auto want = oracle::conv2d(x, w, &b, 1);
    CHECK((g.val(out).v - want.v).abs().maxCoeff() < 1e-12);
}

TEST_CASE("convolution gradients match finite differences") {
    Pcg32 rng(5);
    auto x = rand_t(2, 6, 5, rng);
    auto w = rand_t(3, 2, 9, rng, -0.5, 0.5);
    auto b = rand_t(3, 1, 1, rng, -0.2, 0.2);
    for (int stride : {1, 2}) {
        auto target = rand_t(3, stride == 1 ? 6 : 3, stride == 1 ? 5 : 3, rng);
        fd_against_backward(
            [&, stride](Graph<double>& g) {
                return g.mse(g.conv2d(g.param(x), g.param(w), g.param(b), stride), g.input(target));
            },
            {&x, &w, &b});
    }
}

TEST_CASE("fully connected layer matches a dot product and its gradient") {
    Pcg32 rng(6);
    auto x = rand_t(3, 2, 2, rng);
    derain::Fc<double> fc;
    fc.init(12, 4, rng, 1.0);
    Graph<double> g;
    auto out = g.fc(g.input(x), g.param(fc.w), g.param(fc.b));
    REQUIRE(g.val(out).c == 4);
    for (int o = 0; o < 4; ++o) {
        double s = fc.b.at(o, 0, 0);
        for (int i = 0; i < 12; ++i) s += fc.w.at(0, o, i) * x.v[i];
        CHECK(g.val(out).at(o, 0, 0) == doctest::Approx(s));
    }
    auto target = rand_t(4, 1, 1, rng);
    fd_against_backward(
        [&](Graph<double>& g2) {
            return g2.mse(g2.fc(g2.param(x), g2.param(fc.w), g2.param(fc.b)), g2.input(target));
        },
        {&x, &fc.w, &fc.b});
}

TEST_CASE("channel concat and slice roundtrip with correct gradients") {
    Pcg32 rng(7);
    auto a = rand_t(1, 3, 3, rng);
    auto b = rand_t(2, 3, 3, rng);
    Graph<double> g;
    auto cat = g.concat_c(g.input(a), g.input(b));
    CHECK(g.val(cat).c == 3);
    auto back = g.slice_c(cat, 1, 2);
    CHECK((g.val(back).v - b.v).abs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(g.slice_c(cat, 2, 5), derain::shape_error);

    auto target = rand_t(2, 3, 3, rng);
    fd_against_backward(
        [&](Graph<double>& g2) {
            auto c2 = g2.concat_c(g2.param(a), g2.param(b));
            return g2.mse(g2.slice_c(c2, 0, 2), g2.input(target));
        },
        {&a, &b});
}

TEST_CASE("broadcast multiply applies one mask channel to all channels") {
    Pcg32 rng(8);
    auto x = rand_t(3, 4, 4, rng);
    auto m = rand_t(1, 4, 4, rng);
    Graph<double> g;
    auto out = g.mul_bcast(g.input(x), g.input(m));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int xx = 0; xx < 4; ++xx)
                CHECK(g.val(out).at(c, y, xx) == doctest::Approx(x.at(c, y, xx) * m.at(0, y, xx)));

    auto bad = rand_t(2, 4, 4, rng);
    CHECK_THROWS_AS(g.mul_bcast(g.input(x), g.input(bad)), derain::shape_error);

    auto target = rand_t(3, 4, 4, rng);
    fd_against_backward(
        [&](Graph<double>& g2) {
            return g2.mse(g2.mul_bcast(g2.param(x), g2.param(m)), g2.input(target));
        },
        {&x, &m});
}

TEST_CASE("nearest-neighbour upsampling doubles each axis") {
    Pcg32 rng(9);
    auto x = rand_t(2, 2, 3, rng);
    Graph<double> g;
    auto out = g.upsample_nearest2(g.input(x));
    REQUIRE(g.val(out).h == 4);
    REQUIRE(g.val(out).w == 6);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 4; ++y)
            for (int xx = 0; xx < 6; ++xx)
                CHECK(g.val(out).at(c, y, xx) == doctest::Approx(x.at(c, y / 2, xx / 2)));

    auto target = rand_t(2, 4, 6, rng);
    fd_against_backward(
        [&](Graph<double>& g2) { return g2.mse(g2.upsample_nearest2(g2.param(x)), g2.input(target)); },
        {&x});
}

TEST_CASE("bilinear resize is identity at equal size and differentiable") {
    Pcg32 rng(10);
    auto x = rand_t(1, 4, 4, rng);
    Graph<double> g;
    auto same = g.resize_bilinear(g.input(x), 4, 4);
    CHECK((g.val(same).v - x.v).abs().maxCoeff() < 1e-12);

    auto target = rand_t(1, 6, 6, rng);
    fd_against_backward(
        [&](Graph<double>& g2) { return g2.mse(g2.resize_bilinear(g2.param(x), 6, 6), g2.input(target)); },
        {&x});
}

TEST_CASE("clamp01 clamps forward values but passes gradients straight through") {
    Tensor<double> x(1, 1, 3);
    x.at(0, 0, 0) = -0.4;
    x.at(0, 0, 1) = 0.6;
    x.at(0, 0, 2) = 1.7;
    Graph<double> g;
    auto ix = g.param(x);
    auto out = g.clamp01_pass(ix);
    CHECK(g.val(out).at(0, 0, 0) == 0.0);
    CHECK(g.val(out).at(0, 0, 1) == doctest::Approx(0.6));
    CHECK(g.val(out).at(0, 0, 2) == 1.0);
    g.backward(g.mean_all(out));
    const auto* gp = g.grad_of(x);
    REQUIRE(gp != nullptr);
    for (int i = 0; i < 3; ++i) CHECK(gp->v[i] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("mse and weighted sums evaluate exactly") {
    Pcg32 rng(11);
    auto a = rand_t(2, 3, 3, rng);
    auto b = rand_t(2, 3, 3, rng);
    Graph<double> g;
    auto m = g.mse(g.input(a), g.input(b));
    CHECK(g.val(m).v[0] == doctest::Approx(oracle::mse(a, b)));

    auto s1 = g.mean_all(g.input(a));
    auto s2 = g.mean_all(g.input(b));
    auto w = g.wsum({{s1, 2.0}, {s2, -0.5}, {m, 1.5}});
    CHECK(g.val(w).v[0] ==
          doctest::Approx(2.0 * a.v.mean() - 0.5 * b.v.mean() + 1.5 * oracle::mse(a, b)));

    fd_against_backward(
        [&](Graph<double>& g2) {
            auto e = g2.mse(g2.param(a), g2.input(b));
            return g2.wsum({{e, 0.25}, {g2.mean_all(g2.param(a)), 3.0}});
        },
        {&a});
}

TEST_CASE("registering the same tensor twice reuses one parameter node") {
    Pcg32 rng(12);
    auto x = rand_t(1, 2, 2, rng);
    Graph<double> g;
    auto p1 = g.param(x);
    auto p2 = g.param(x);
    CHECK(p1 == p2);

    // Gradient of mse(x + x, t) wrt x must be twice the single-use gradient.
    auto target = rand_t(1, 2, 2, rng);
    fd_against_backward(
        [&](Graph<double>& g2) {
            return g2.mse(g2.add(g2.param(x), g2.param(x)), g2.input(target));
        },
        {&x}, 16);
}

TEST_CASE("frozen tensors contribute values but never gradients") {
    Pcg32 rng(13);
    auto x = rand_t(1, 3, 3, rng);
    auto w = rand_t(1, 3, 3, rng);
    Graph<double> g;
    auto out = g.mse(g.mul(g.param(x), g.frozen(w)), g.input(Tensor<double>::zeros(1, 3, 3)));
    g.backward(out);
    CHECK(g.grad_of(x) != nullptr);
    CHECK(g.grad_of(w) == nullptr);
}

TEST_CASE("backward is bitwise deterministic") {
    Pcg32 rng(14);
    auto x = rand_t(2, 8, 8, rng);
    auto w = rand_t(3, 2, 9, rng, -0.5, 0.5);
    auto b = rand_t(3, 1, 1, rng);
    auto run = [&]() {
        Graph<double> g;
        auto h = g.relu(g.conv2d(g.param(x), g.param(w), g.param(b), 1));
        g.backward(g.mean_all(h));
        return *g.grad_of(w);
    };
    auto g1 = run();
    auto g2 = run();
    for (Eigen::Index i = 0; i < g1.size(); ++i) CHECK(g1.v[i] == g2.v[i]);
}

TEST_CASE("deep chains reuse one node per shared subexpression") {
    // A diamond: y = relu(x); z = y*y + y. Gradient must account for all paths.
    Pcg32 rng(15);
    auto x = rand_t(1, 4, 4, rng, 0.1, 1.0);
    fd_against_backward(
        [&](Graph<double>& g) {
            auto y = g.relu(g.param(x));
            return g.mean_all(g.add(g.mul(y, y), y));
        },
        {&x}, 16);
}
