// Loss family: values, subgradients, kink conventions, finite-difference
// agreement away from kinks, and convexity.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ntkeq/loss.hpp"
#include "ntkeq/philox.hpp"

using namespace ntkeq;

namespace {
LossSpec make(LossKind k, double C = 1.0, double eps = 0.0) {
    LossSpec s;
    s.kind = k;
    s.C = C;
    s.eps = eps;
    return s;
}
const LossKind kAll[] = {LossKind::hinge, LossKind::hinge_squared, LossKind::squared,
                         LossKind::logistic, LossKind::eps_insensitive};
}  // namespace

TEST_CASE("hand-checked values") {
    auto hinge = make(LossKind::hinge, 2.0);
    CHECK(loss(hinge, 0.5, 1.0) == doctest::Approx(1.0));   // 2 * (1 - 0.5)
    CHECK(loss(hinge, 2.0, 1.0) == 0.0);
    CHECK(dloss(hinge, 0.5, 1.0) == doctest::Approx(-2.0));
    CHECK(dloss(hinge, 2.0, 1.0) == 0.0);

    auto sq = make(LossKind::squared);
    CHECK(loss(sq, 0.25, 1.0) == doctest::Approx(0.5625));
    CHECK(dloss(sq, 0.25, 1.0) == doctest::Approx(-1.5));

    auto lg = make(LossKind::logistic);
    CHECK(loss(lg, 0.0, 1.0) == doctest::Approx(std::log(2.0)));
    CHECK(dloss(lg, 0.0, 1.0) == doctest::Approx(-0.5));
    CHECK(loss(lg, -40.0, 1.0) == doctest::Approx(40.0).epsilon(1e-9));  // stable tail

    auto ei = make(LossKind::eps_insensitive, 1.0, 0.5);
    CHECK(loss(ei, 1.2, 1.0) == 0.0);
    CHECK(loss(ei, 2.0, 1.0) == doctest::Approx(0.5));
    CHECK(dloss(ei, 2.0, 1.0) == 1.0);
    CHECK(dloss(ei, 0.0, 1.0) == -1.0);
}

TEST_CASE("kink subgradients are exactly zero") {
    auto hinge = make(LossKind::hinge, 3.0);
    CHECK(dloss(hinge, 1.0, 1.0) == 0.0);   // margin exactly 1
    CHECK(dloss(hinge, -1.0, -1.0) == 0.0);
    auto ei = make(LossKind::eps_insensitive, 1.0, 0.25);
    CHECK(dloss(ei, 1.25, 1.0) == 0.0);  // |r| == eps
    auto hs = make(LossKind::hinge_squared);
    CHECK(dloss(hs, 1.0, 1.0) == 0.0);  // smooth here anyway
}

TEST_CASE("subgradient matches finite differences away from kinks") {
    Philox rng(77);
    for (LossKind k : kAll) {
        auto spec = make(k, 1.7, 0.3);
        for (int trial = 0; trial < 200; ++trial) {
            double y = (rng.next_u32() & 1) ? 1.0 : -1.0;
            if (k == LossKind::squared || k == LossKind::eps_insensitive)
                y = 2.0 * rng.next_uniform() - 1.0;
            double z = 6.0 * rng.next_uniform() - 3.0;
            // Step far smaller than the distance to any kink we might straddle.
            double h = 1e-6;
            double dist = 1e9;
            if (k == LossKind::hinge || k == LossKind::hinge_squared)
                dist = std::fabs(1.0 - y * z);
            if (k == LossKind::eps_insensitive)
                dist = std::fabs(std::fabs(z - y) - spec.eps);
            if (dist < 1e-3) continue;
            double fd = (loss(spec, z + h, y) - loss(spec, z - h, y)) / (2.0 * h);
            CHECK(dloss(spec, z, y) == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("losses are convex in z along random chords") {
    Philox rng(78);
    for (LossKind k : kAll) {
        auto spec = make(k, 2.5, 0.4);
        for (int trial = 0; trial < 300; ++trial) {
            double y = (rng.next_u32() & 1) ? 1.0 : -1.0;
            double z1 = 8.0 * rng.next_uniform() - 4.0;
            double z2 = 8.0 * rng.next_uniform() - 4.0;
            double t = rng.next_uniform();
            double mid = loss(spec, t * z1 + (1 - t) * z2, y);
            double chord = t * loss(spec, z1, y) + (1 - t) * loss(spec, z2, y);
            CHECK(mid <= chord + 1e-12);
        }
    }
}

TEST_CASE("scale and lipschitz constants") {
    LossSpec s;
    s.mode = SumMode::mean;
    CHECK(s.scale(50) == doctest::Approx(0.02));
    s.mode = SumMode::sum;
    CHECK(s.scale(50) == 1.0);

    CHECK(loss_lipschitz(make(LossKind::hinge, 4.0)) == 4.0);
    CHECK(loss_lipschitz(make(LossKind::logistic)) == 1.0);

    LossSpec bad;
    bad.C = 0.0;
    CHECK_THROWS(bad.validate());
    CHECK(LossSpec::kind_from_name("hinge") == LossKind::hinge);
    CHECK_THROWS(LossSpec::kind_from_name("l0"));
}
