// Interval bounds for the two-layer kernel: Monte-Carlo containment over
// l-inf balls (the master soundness property, zero violations allowed),
// monotone widening in delta, the frozen critical point of h, and the
// degenerate/clamp cases.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ntkeq/interval.hpp"
#include "ntkeq/kernel.hpp"
#include "ntkeq/philox.hpp"
#include "ntkeq/util.hpp"

using namespace ntkeq;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Frozen from the independent bisection in tests/oracle/kernel_ref.py.
constexpr double kUStar = -0.7940998648103226;
constexpr double kHMin = -0.42973782051831577;

std::vector<double> random_point(Philox& rng, std::size_t d, double scale = 1.0) {
    std::vector<double> v(d);
    for (auto& x : v) x = scale * rng.next_gauss();
    return v;
}

// x0 + coordinatewise uniform perturbation in [-delta, delta].
std::vector<double> sample_ball(Philox& rng, const std::vector<double>& x0, double delta) {
    std::vector<double> x(x0);
    for (auto& v : x) v += delta * (2.0 * rng.next_uniform() - 1.0);
    return x;
}

double norm2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i];
    const double u = ab / (norm2(a) * norm2(b));
    return u < -1.0 ? -1.0 : (u > 1.0 ? 1.0 : u);
}

}  // namespace

TEST_CASE("norm interval: degenerate, zero-center, and clamp examples") {
    Philox rng(3, 0);
    auto x0 = random_point(rng, 6);

    // delta = 0 collapses to the exact norm.
    Interval iv0 = norm_interval(x0, 0.0);
    CHECK(iv0.lo == doctest::Approx(norm2(x0)).epsilon(1e-15));
    CHECK(iv0.hi == iv0.lo);

    // Zero center: [0, sqrt(d) * delta].
    std::vector<double> zero(4, 0.0);
    Interval ivz = norm_interval(zero, 0.1);
    CHECK(ivz.lo == 0.0);
    CHECK(ivz.hi == doctest::Approx(0.2).epsilon(1e-15));

    // Unit-norm center, delta = 1, d = 4: lower clamp active -> [0, 3].
    std::vector<double> e1 = {1.0, 0.0, 0.0, 0.0};
    Interval ivc = norm_interval(e1, 1.0);
    CHECK(ivc.lo == 0.0);
    CHECK(ivc.hi == doctest::Approx(3.0).epsilon(1e-15));

    CHECK_THROWS_AS(norm_interval(x0, -0.25), Error);
}

TEST_CASE("containment: sampled norms, cosines, and kernel values stay inside") {
    Philox rng(11, 0);
    const std::size_t d = 20;
    int violations = 0;
    for (int cfg = 0; cfg < 4; ++cfg) {
        auto x0 = random_point(rng, d);
        auto xref = random_point(rng, d);
        const double delta = (cfg + 1) * 0.025;  // 0.025 .. 0.1

        const Interval niv = norm_interval(x0, delta);
        const Interval uiv = u_interval(x0, xref, delta, niv);
        const Interval tiv = theta_interval(x0, xref, delta);
        for (int s = 0; s < 10000; ++s) {
            auto x = sample_ball(rng, x0, delta);
            if (!niv.contains(norm2(x))) ++violations;
            if (!uiv.contains(cosine(x, xref))) ++violations;
            if (!tiv.contains(ntk2_relu(x, xref))) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("monotone widening: every op nests as delta grows") {
    Philox rng(17, 0);
    const std::size_t d = 12;
    auto x0 = random_point(rng, d);
    auto xref = random_point(rng, d);

    Interval prev_n, prev_u, prev_t;
    bool first = true;
    for (double delta : {0.0, 0.01, 0.05, 0.1, 0.3, 1.0, 3.0}) {
        const Interval niv = norm_interval(x0, delta);
        const Interval uiv = u_interval(x0, xref, delta, niv);
        const Interval tiv = theta_interval(x0, xref, delta);
        if (!first) {
            CHECK(niv.contains(prev_n));
            CHECK(uiv.contains(prev_u));
            CHECK(tiv.contains(prev_t));
        }
        prev_n = niv;
        prev_u = uiv;
        prev_t = tiv;
        first = false;
    }
}

TEST_CASE("u interval: exact at delta zero, clamped at one, widened at zero norm") {
    Philox rng(23, 0);
    auto x0 = random_point(rng, 8);
    auto xref = random_point(rng, 8);

    const Interval niv0 = norm_interval(x0, 0.0);
    const Interval uiv0 = u_interval(x0, xref, 0.0, niv0);
    const double u_exact = cosine(x0, xref);
    CHECK(uiv0.lo == doctest::Approx(u_exact).epsilon(1e-14));
    CHECK(uiv0.hi == doctest::Approx(u_exact).epsilon(1e-14));

    // x0 == xref with a small ball: the upper end hits the u <= 1 clamp.
    const Interval nivs = norm_interval(x0, 0.01);
    const Interval uivs = u_interval(x0, x0, 0.01, nivs);
    CHECK(uivs.hi == 1.0);
    CHECK(uivs.contains(1.0));
    CHECK(uivs.lo < 1.0);

    // delta large enough that |x| can reach zero: universal [-1, 1].
    const Interval nivw = norm_interval(x0, norm2(x0));  // sqrt(d)*delta > |x0|
    REQUIRE(nivw.lo == 0.0);
    const Interval uivw = u_interval(x0, xref, norm2(x0), nivw);
    CHECK(uivw.lo == -1.0);
    CHECK(uivw.hi == 1.0);

    std::vector<double> zero(8, 0.0);
    CHECK_THROWS_AS(u_interval(x0, zero, 0.1, niv0), Error);
}

TEST_CASE("h interval: frozen critical point, grid oracle, monotone segments") {
    // Full domain: min at the interior critical point, max at u = 1.
    const Interval full = h_interval({-1.0, 1.0});
    CHECK(full.hi == doctest::Approx(kTwoPi).epsilon(1e-15));
    CHECK(full.lo == doctest::Approx(kHMin).epsilon(1e-14));
    CHECK(h_argmin() == doctest::Approx(kUStar).epsilon(1e-13));

    // Dense-grid oracle: the reported minimum matches a 1e6-point scan.
    double grid_min = 1e300;
    const int kGrid = 1000000;
    for (int i = 0; i <= kGrid; ++i)
        grid_min = std::min(grid_min, h_of_u(-1.0 + 2.0 * i / kGrid));
    CHECK(std::fabs(full.lo - grid_min) < 1e-6);
    CHECK(full.lo <= grid_min);  // the true min is never above the bound

    // Degenerate point u = 1.
    const Interval one = h_interval({1.0, 1.0});
    CHECK(one.lo == doctest::Approx(kTwoPi).epsilon(1e-15));
    CHECK(one.hi == one.lo);

    // Segment right of the critical point: h is increasing there.
    const Interval seg = h_interval({0.2, 0.3});
    CHECK(seg.lo == doctest::Approx(h_of_u(0.2)).epsilon(1e-15));
    CHECK(seg.hi == doctest::Approx(h_of_u(0.3)).epsilon(1e-15));

    // Segment left of the critical point: h is decreasing there.
    const Interval segl = h_interval({-0.99, -0.9});
    CHECK(segl.lo == doctest::Approx(h_of_u(-0.9)).epsilon(1e-15));
    CHECK(segl.hi == doctest::Approx(h_of_u(-0.99)).epsilon(1e-15));

    CHECK_THROWS_AS(h_interval({-1.5, 0.0}), Error);
    CHECK_THROWS_AS(h_interval({0.5, 0.2}), Error);
}

TEST_CASE("theta interval: degenerate equals the kernel, zero reference point") {
    Philox rng(31, 0);
    for (int rep = 0; rep < 8; ++rep) {
        auto x0 = random_point(rng, 10);
        auto xref = random_point(rng, 10);
        const double theta = ntk2_relu(x0, xref);
        const Interval tiv = theta_interval(x0, xref, 0.0);
        CHECK(tiv.lo == doctest::Approx(theta).epsilon(1e-12));
        CHECK(tiv.hi == doctest::Approx(theta).epsilon(1e-12));
    }

    auto x0 = random_point(rng, 10);
    std::vector<double> zero(10, 0.0);
    const Interval tz = theta_interval(x0, zero, 0.1);
    CHECK(tz.lo == 0.0);
    CHECK(tz.hi == 0.0);

    // Zero center: the kernel of every ball point with xref is still bounded.
    const Interval t0 = theta_interval(zero, x0, 0.05);
    int violations = 0;
    for (int s = 0; s < 10000; ++s) {
        auto x = sample_ball(rng, zero, 0.05);
        if (!t0.contains(ntk2_relu(x, x0))) ++violations;
    }
    CHECK(violations == 0);
}
