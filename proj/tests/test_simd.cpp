// Backend equivalence and semantics for the runtime-dispatched vector core.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "ntkeq/philox.hpp"
#include "ntkeq/simd.hpp"

using namespace ntkeq;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    Philox rng(seed);
    std::vector<T> v(n);
    for (auto& x : v) x = (T)(rng.next_gauss() * scale);
    return v;
}

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 31, 32, 33, 100, 1023, 1024, 4097};

}  // namespace

TEST_CASE("active backend reports a known name") {
    std::string name(simd::active_backend());
    CHECK((name == "scalar" || name == "avx2"));
}

TEST_CASE("dot and sum agree across backends within tolerance") {
    if (!simd::force_backend("avx2")) return;  // nothing to compare on this host
    for (std::size_t n : kSizes) {
        auto xd = random_vec<double>(n, 11 + n);
        auto yd = random_vec<double>(n, 23 + n);
        auto xf = random_vec<float>(n, 31 + n);
        auto yf = random_vec<float>(n, 47 + n);

        simd::force_backend("scalar");
        double d_s = simd::dot(xd.data(), yd.data(), n);
        double s_s = simd::sum(xd.data(), n);
        float df_s = simd::dot(xf.data(), yf.data(), n);
        float sf_s = simd::sum(xf.data(), n);

        simd::force_backend("avx2");
        double d_v = simd::dot(xd.data(), yd.data(), n);
        double s_v = simd::sum(xd.data(), n);
        float df_v = simd::dot(xf.data(), yf.data(), n);
        float sf_v = simd::sum(xf.data(), n);

        double scale = std::max(1.0, (double)n);
        CHECK(std::abs(d_s - d_v) <= 1e-13 * scale);
        CHECK(std::abs(s_s - s_v) <= 1e-13 * scale);
        CHECK(std::abs((double)df_s - (double)df_v) <= 1e-6 * scale);
        CHECK(std::abs((double)sf_s - (double)sf_v) <= 1e-6 * scale);
    }
}

TEST_CASE("axpy scale relu relu_grad abs are bitwise identical across backends") {
    if (!simd::force_backend("avx2")) return;
    for (std::size_t n : kSizes) {
        auto x = random_vec<double>(n, 101 + n);
        auto y0 = random_vec<double>(n, 211 + n);
        auto g = random_vec<double>(n, 307 + n);
        double a = 1.7;

        auto ys = y0, yv = y0;
        std::vector<double> rs(n), rv(n), gs(n), gv(n);

        simd::force_backend("scalar");
        simd::axpy(a, x.data(), ys.data(), n);
        simd::relu(x.data(), rs.data(), n);
        simd::relu_grad(x.data(), g.data(), gs.data(), n);
        std::vector<double> abss(n), absv(n);
        simd::abs(x.data(), abss.data(), n);
        auto scs = x;
        simd::scale(0.75, scs.data(), n);

        simd::force_backend("avx2");
        simd::axpy(a, x.data(), yv.data(), n);
        simd::relu(x.data(), rv.data(), n);
        simd::relu_grad(x.data(), g.data(), gv.data(), n);
        simd::abs(x.data(), absv.data(), n);
        auto scv = x;
        simd::scale(0.75, scv.data(), n);

        CHECK(std::memcmp(ys.data(), yv.data(), n * sizeof(double)) == 0);
        CHECK(std::memcmp(rs.data(), rv.data(), n * sizeof(double)) == 0);
        CHECK(std::memcmp(gs.data(), gv.data(), n * sizeof(double)) == 0);
        CHECK(std::memcmp(abss.data(), absv.data(), n * sizeof(double)) == 0);
        CHECK(std::memcmp(scs.data(), scv.data(), n * sizeof(double)) == 0);
    }
}

TEST_CASE("relu zeroes negatives and keeps positives") {
    std::vector<double> x = {-3.5, -0.0, 0.0, 1e-300, 2.25, -1e-300};
    std::vector<double> out(x.size());
    simd::relu(x.data(), out.data(), x.size());
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 0.0);
    CHECK(out[3] == 1e-300);
    CHECK(out[4] == 2.25);
    CHECK(out[5] == 0.0);
}

TEST_CASE("relu_grad uses the strict z > 0 indicator") {
    std::vector<double> z = {-1.0, 0.0, 1e-12, 5.0};
    std::vector<double> g = {10.0, 10.0, 10.0, 10.0};
    std::vector<double> out(z.size());
    simd::relu_grad(z.data(), g.data(), out.data(), z.size());
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);  // derivative at the kink is fixed to 0
    CHECK(out[2] == 10.0);
    CHECK(out[3] == 10.0);
}

TEST_CASE("dot matches a long-double reference") {
    auto x = random_vec<double>(513, 7);
    auto y = random_vec<double>(513, 9);
    long double ref = 0;
    for (std::size_t i = 0; i < x.size(); ++i) ref += (long double)x[i] * y[i];
    CHECK(std::abs(simd::dot(x.data(), y.data(), x.size()) - (double)ref) < 1e-12);
}

TEST_CASE("force_backend rejects unknown names") {
    CHECK(!simd::force_backend("sse9"));
}
