#include <doctest.h>

#include <random>

#include "ccswap/distill.hpp"
#include "ccswap/ssgu.hpp"
#include "support.hpp"

using namespace ccswap;
using namespace ccswap::testing;

namespace {

// 1x2x2 latent, so hand arithmetic stays small
ToyConfig tiny() {
    ToyConfig c;
    c.downsample = 1;
    c.height     = 2;
    c.width      = 2;
    return c;
}

Latent values2x2(double a, double b, double c, double d) { return Latent(Shape3{1, 2, 2}, {a, b, c, d}); }

GradientField field(const Latent& v) { return GradientField{v, 100, 1.0}; }

}  // namespace

TEST_CASE("cfg_combine endpoints and arithmetic") {
    const Latent u = random_latent(Shape3{2, 3, 3}, 1);
    const Latent c = random_latent(Shape3{2, 3, 3}, 2);
    CHECK(cfg_combine(u, c, 1.0) == c);
    CHECK(cfg_combine(u, c, 0.0) == u);
    const Latent out = cfg_combine(Latent(Shape3{1, 2, 2}, 0.0), Latent(Shape3{1, 2, 2}, 1.0), 7.5);
    for (double v : out.values()) CHECK(v == 7.5);
    CHECK_THROWS_AS(cfg_combine(u, Latent(Shape3{1, 3, 3}), 2.0), ShapeError);
}

TEST_CASE("gradient weight is one on the whole schedule") {
    ToyBackend backend;
    for (int t : {0, 1, 500, 999}) CHECK(gradient_weight(backend.schedule(), t) == 1.0);
    CHECK_THROWS_AS(gradient_weight(backend.schedule(), 1000), TimestepError);
}

TEST_CASE("SDS is zero at the toy fixed point without noise") {
    ToyBackend backend(tiny());
    const auto cond = backend.embed_prompt("a rose");
    const BranchInput b{backend.pattern(cond), cond, backend.embed_prompt(""), 1.0, Branch::None};
    const GradientField g = sds_gradient(b, 300, Latent(Shape3{1, 2, 2}), backend);
    for (double v : g.values.values()) CHECK(v == 0.0);
    CHECK(g.t == 300);
    CHECK(g.weight == 1.0);
}

TEST_CASE("SDS on a 2x2 toy case matches the closed form") {
    ToyBackend backend(tiny());
    backend.set_pattern("a rose", values2x2(0.5, -1.0, 2.0, 0.0));
    const auto cond = backend.embed_prompt("a rose");
    const Latent z   = values2x2(1.0, 1.0, -1.0, 3.0);
    const Latent eps = values2x2(0.2, -0.4, 0.0, 1.0);
    const int t      = 700;
    const double s   = backend.schedule().sigma(t);
    // pred = (z + s eps) - p ;  grad = pred - eps
    const double want[4] = {1.0 + s * 0.2 - 0.5 - 0.2, 1.0 - s * 0.4 + 1.0 + 0.4, -1.0 - 2.0, 3.0 + s - 0.0 - 1.0};
    const GradientField g = sds_gradient(BranchInput{z, cond, backend.embed_prompt(""), 1.0, Branch::None}, t, eps,
                                         backend);
    for (int i = 0; i < 4; ++i) CHECK(g.values[static_cast<std::size_t>(i)] == doctest::Approx(want[i]).epsilon(1e-12));
    CHECK_THROWS_AS(sds_gradient(BranchInput{z, cond, cond, 1.0, Branch::None}, 1000, eps, backend), TimestepError);
}

TEST_CASE("guidance controls the number of forward passes") {
    ToyBackend backend(tiny());
    const auto cond   = backend.embed_prompt("a rose");
    const auto uncond = backend.embed_prompt("");
    const Latent z(Shape3{1, 2, 2});
    guided_prediction(backend, z, 10, BranchInput{z, cond, uncond, 1.0, Branch::None});
    CHECK(backend.forward_count() == 1);
    guided_prediction(backend, z, 10, BranchInput{z, cond, uncond, 7.5, Branch::None});
    CHECK(backend.forward_count() == 3);
    CHECK(passes_per_prediction(1.0) == 1);
    CHECK(passes_per_prediction(7.5) == 2);
    CHECK_THROWS_AS(guided_prediction(backend, z, 10, BranchInput{z, cond, uncond, -1.0, Branch::None}), ParamError);
}

TEST_CASE("guided prediction on the toy is z_t minus the guided pattern") {
    ToyBackend backend(tiny());
    backend.set_pattern("a rose", values2x2(1, 2, 3, 4));
    backend.set_pattern("", values2x2(0, 0, 1, 1));
    const auto cond   = backend.embed_prompt("a rose");
    const auto uncond = backend.embed_prompt("");
    const Latent zt   = values2x2(10, 10, 10, 10);
    const Latent pred = guided_prediction(backend, zt, 10, BranchInput{zt, cond, uncond, 3.0, Branch::None});
    // p_u + 3 (p_c - p_u) = {3, 6, 7, 10}
    const double want[4] = {10 - 3.0, 10 - 6.0, 10 - 7.0, 10 - 10.0};
    for (int i = 0; i < 4; ++i) CHECK(pred[static_cast<std::size_t>(i)] == doctest::Approx(want[i]));
}

TEST_CASE("DDS with identical branches is exactly zero") {
    std::mt19937_64 rng(3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ToyBackend backend(toy_config(seed));
        const BranchInput b{random_latent(backend.info().latent, seed), backend.embed_prompt("a cat on a mat"),
                            backend.embed_prompt(""), 7.5, Branch::None};
        const GradientField g = dds_gradient(b, b, 50 + static_cast<int>(seed) * 40,
                                             random_latent(backend.info().latent, seed + 99), backend);
        for (double v : g.values.values()) CHECK(v == 0.0);
    }
}

TEST_CASE("DDS at the source latent is the pattern difference") {
    ToyBackend backend(tiny());
    const Latent ps = values2x2(0.1, 0.2, 0.3, 0.4);
    const Latent pt = values2x2(-1.0, 0.5, 0.0, 2.0);
    backend.set_pattern("a rose", ps);
    backend.set_pattern("a sks teapot", pt);
    const Latent z  = values2x2(3, 1, 4, 1);
    const auto unc  = backend.embed_prompt("");
    const BranchInput src{z, backend.embed_prompt("a rose"), unc, 1.0, Branch::None};
    const BranchInput tgt{z, backend.embed_prompt("a sks teapot"), unc, 1.0, Branch::None};
    const GradientField g = dds_gradient(tgt, src, 420, values2x2(0.3, -0.3, 1.0, 0.0), backend);
    for (std::size_t i = 0; i < 4; ++i) CHECK(g.values[i] == doctest::Approx(ps[i] - pt[i]).epsilon(1e-12));
}

TEST_CASE("DDS is antisymmetric in its branches") {
    ToyBackend backend(toy_config(4));
    const auto unc = backend.embed_prompt("");
    const BranchInput a{random_latent(backend.info().latent, 1), backend.embed_prompt("a cat"), unc, 7.5, Branch::None};
    const BranchInput b{random_latent(backend.info().latent, 2), backend.embed_prompt("a dog"), unc, 7.5, Branch::None};
    const Latent eps       = random_latent(backend.info().latent, 3);
    const GradientField ab = dds_gradient(a, b, 600, eps, backend);
    const GradientField ba = dds_gradient(b, a, 600, eps, backend);
    for (std::size_t i = 0; i < ab.values.size(); ++i) CHECK(ab.values[i] == doctest::Approx(-ba.values[i]));
}

TEST_CASE("DDS refuses branches noised differently") {
    ToyBackend backend(tiny());
    const auto emb = backend.embed_prompt("a rose");
    const BranchInput b{Latent(Shape3{1, 2, 2}), emb, emb, 1.0, Branch::None};
    const Latent e1 = values2x2(1, 0, 0, 0);
    const Latent e2 = values2x2(0, 1, 0, 0);
    CHECK_THROWS_AS(dds_gradient(noise_branch(backend, b, 10, e1), noise_branch(backend, b, 11, e1), backend),
                    ContractError);
    CHECK_THROWS_AS(dds_gradient(noise_branch(backend, b, 10, e1), noise_branch(backend, b, 10, e2), backend),
                    ContractError);
    CHECK_NOTHROW(dds_gradient(noise_branch(backend, b, 10, e1), noise_branch(backend, b, 10, e1), backend));
}

TEST_CASE("BGM with the full box is the identity") {
    const Latent v = random_latent(Shape3{4, 8, 8}, 1);
    CHECK(bgm_apply(field(v), BBox::full({8, 8})).values == v);
}

TEST_CASE("BGM zeroes everything outside the box") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<int> d(0, 7);
        int r0 = d(rng), r1 = d(rng), c0 = d(rng), c1 = d(rng);
        if (r0 > r1) std::swap(r0, r1);
        if (c0 > c1) std::swap(c0, c1);
        const BBox box{r0, c0, r1, c1, {8, 8}};
        const Latent v   = random_latent(Shape3{3, 8, 8}, 100 + trial);
        const Latent out = bgm_apply(field(v), box).values;
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < 8; ++y) {
                for (int x = 0; x < 8; ++x) {
                    if (box.contains(y, x)) {
                        CHECK(out.at(c, y, x) == v.at(c, y, x));
                    } else {
                        CHECK(out.at(c, y, x) == 0.0);
                    }
                }
            }
        }
    }
}

TEST_CASE("BGM sum equals the interior sum") {
    const Latent v = random_latent(Shape3{1, 8, 8}, 5);
    double interior = 0.0;
    for (int y = 2; y <= 5; ++y) {
        for (int x = 2; x <= 5; ++x) interior += v.at(0, y, x);
    }
    const Latent masked = bgm_apply(field(v), BBox{2, 2, 5, 5, {8, 8}}).values;
    double total        = 0.0;
    for (double x : masked.values()) total += x;
    CHECK(total == doctest::Approx(interior).epsilon(1e-12));
}

TEST_CASE("BGM is idempotent and linear") {
    const BBox box{1, 3, 4, 6, {8, 8}};
    const Latent a = random_latent(Shape3{2, 8, 8}, 1);
    const Latent b = random_latent(Shape3{2, 8, 8}, 2);
    const Latent once = bgm_apply(field(a), box).values;
    CHECK(bgm_apply(field(once), box).values == once);

    const Latent lhs = bgm_apply(field(axpy(a, 2.5, b)), box).values;
    const Latent rhs = axpy(once, 2.5, bgm_apply(field(b), box).values);
    CHECK(max_abs_diff(lhs, rhs) < 1e-14);
}

TEST_CASE("a masked update leaves the background untouched") {
    const BBox box{2, 2, 5, 5, {8, 8}};
    const Latent z    = random_latent(Shape3{4, 8, 8}, 9);
    const Latent g    = random_latent(Shape3{4, 8, 8}, 10);
    const Latent next = ssgu::apply_update(z, bgm_apply(field(g), box), 0.1);
    CHECK(bit_equal_outside(next, z, box));
    CHECK(max_diff_where(next, z, box, true) > 0.0);
}

TEST_CASE("BGM checks the grid") {
    CHECK_THROWS_AS(bgm_apply(field(Latent(Shape3{1, 8, 8})), BBox{0, 0, 1, 1, {16, 16}}), ShapeError);
    CHECK_THROWS_AS(bgm_apply(field(Latent(Shape3{1, 8, 8})), BBox{3, 0, 1, 1, {8, 8}}), ShapeError);
}
