// Analytic kernels: hand-frozen reference values (computed with an
// independent high-precision implementation), structural properties, Gram
// assembly route equivalence, PSD, and the cache blob.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "ntkeq/blasx.hpp"
#include "ntkeq/dataset.hpp"
#include "ntkeq/kernel.hpp"
#include "ntkeq/philox.hpp"
#include "ntkeq/util.hpp"

using namespace ntkeq;

namespace {
constexpr double kPi = 3.14159265358979323846;

struct Frozen {
    std::vector<double> x, y;
    double ntk2, deep3, deep4, deep5;
};
// Reference values frozen from an independent implementation.
const Frozen kFrozen[] = {
    {{1, 0, 0, 0}, {1, 0, 0, 0}, 0.25, 0.1875, 0.125, 0.078125},
    {{1, 2, -0.5, 0.25}, {0.5, -1, 2, 1.5},
     0.028931589902261523, 0.16854691130454941, 0.16157516408981742, 0.11862052921571392},
    {{3, -1}, {0.5, 0.5},
     0.482946751917112, 0.35211523629383945, 0.22905120284686387, 0.14005631470333887},
    {{1, 1, 1}, {-1, -1, -1},
     0.0, 0.079577471545947673, 0.085713579535367818, 0.066274256675161444},
    {{0.125, -2.5, 0.75, 4, -0.375}, {1.5, 0.0625, -3.25, 0.5, 2},
     0.51781721763997479, 0.62546410772609917, 0.49957632028972043, 0.34196298559396288},
};

std::vector<double> random_unit(Philox& rng, std::size_t d) {
    std::vector<double> v(d);
    double norm = 0;
    for (auto& x : v) {
        x = rng.next_gauss();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}
}  // namespace

TEST_CASE("h endpoints and domain handling") {
    CHECK(h_of_u(-1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(h_of_u(0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(h_of_u(1.0) == doctest::Approx(2.0 * kPi).epsilon(1e-15));
    CHECK(h_of_u(1.0 + 0.5e-9) == doctest::Approx(2.0 * kPi));  // clamped
    CHECK_THROWS(h_of_u(1.0 + 1e-6));
    CHECK_THROWS(h_of_u(-1.1));
}

TEST_CASE("h minimum location matches the frozen reference") {
    // Bisected root of h' and the attained minimum, frozen independently.
    CHECK(std::fabs(h_argmin() - (-0.79409986481032258)) < 1e-9);
    CHECK(std::fabs(h_min() - (-0.42973782051831577)) < 1e-11);
    // Exhaustive grid: nothing on [-1, 1] dips below the claimed minimum.
    double grid_min = 1e300;
    for (int i = 0; i <= 1000000; ++i) {
        double u = -1.0 + 2.0 * i / 1000000.0;
        grid_min = std::min(grid_min, h_of_u(u));
    }
    CHECK(grid_min >= h_min() - 1e-12);
    CHECK(grid_min <= h_min() + 1e-6);
}

TEST_CASE("frozen kernel values at depths 2 through 5") {
    for (const auto& f : kFrozen) {
        CAPTURE(f.x[0]);
        CHECK(ntk2_relu(f.x, f.y) == doctest::Approx(f.ntk2).epsilon(1e-12));
        CHECK(ntk_deep_relu(f.x, f.y, 2) == doctest::Approx(f.ntk2).epsilon(1e-12));
        CHECK(ntk_deep_relu(f.x, f.y, 3) == doctest::Approx(f.deep3).epsilon(1e-12));
        CHECK(ntk_deep_relu(f.x, f.y, 4) == doctest::Approx(f.deep4).epsilon(1e-12));
        CHECK(ntk_deep_relu(f.x, f.y, 5) == doctest::Approx(f.deep5).epsilon(1e-12));
    }
}

TEST_CASE("structural properties: symmetry, homogeneity, diagonal, zeros") {
    Philox rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t d = 2 + rng.next_u32() % 8;
        auto x = random_unit(rng, d);
        auto y = random_unit(rng, d);
        double a = 0.1 + 3.0 * rng.next_uniform();
        double b = 0.1 + 3.0 * rng.next_uniform();
        auto ax = x, by = y;
        for (auto& v : ax) v *= a;
        for (auto& v : by) v *= b;

        for (int depth : {2, 3, 4}) {
            double k_xy = ntk_deep_relu(x, y, depth);
            double k_yx = ntk_deep_relu(y, x, depth);
            CHECK(k_xy == doctest::Approx(k_yx).epsilon(1e-13));
            // degree-(1,1) positive homogeneity
            CHECK(ntk_deep_relu(ax, by, depth) == doctest::Approx(a * b * k_xy).epsilon(1e-11));
        }
        // two-layer closed form == depth-2 recursion
        CHECK(ntk2_relu(x, y) == doctest::Approx(ntk_deep_relu(x, y, 2)).epsilon(1e-12));
        // Diagonal of the two-layer kernel is |x|^2 / d. Tolerance is loose
        // because h has a square-root cusp at u = 1: a one-ulp wobble in u
        // moves h by ~sqrt(eps).
        double nx2 = 0;
        for (double v : ax) nx2 += v * v;
        CHECK(ntk2_relu(ax, ax) == doctest::Approx(nx2 / (double)d).epsilon(1e-7));
    }
    std::vector<double> z(5, 0.0), w = {1, 2, 3, 4, 5};
    CHECK(ntk2_relu(z, w) == 0.0);
    CHECK(ntk_deep_relu(z, w, 4) == 0.0);
    CHECK_THROWS(ntk_deep_relu(w, w, 1));
}

TEST_CASE("gram fast route matches the scalar route and is PSD") {
    auto data = synthetic_gaussian(17, 80, 12, 1.0);
    for (int depth : {2, 3}) {
        auto desc = KernelDescriptor::analytic(depth);
        auto fast = gram(desc, data);
        auto slow = gram(desc, data, /*force_scalar=*/true);
        REQUIRE(fast.values.size() == slow.values.size());
        double max_rel = 0;
        for (std::size_t i = 0; i < fast.values.size(); ++i) {
            double denom = std::max(1e-12, std::fabs(slow.values[i]));
            max_rel = std::max(max_rel, std::fabs(fast.values[i] - slow.values[i]) / denom);
        }
        CHECK(max_rel < 1e-10);

        // exact symmetry by construction
        for (std::size_t i = 0; i < data.n; ++i)
            for (std::size_t j = 0; j < i; ++j)
                CHECK(fast.values[i * data.n + j] == fast.values[j * data.n + i]);

        auto eig = blasx::sym_eigenvalues(fast.values, data.n);
        CHECK(eig.front() >= -1e-10 * std::max(1.0, eig.back()));
    }
}

TEST_CASE("cross_gram agrees with pairwise evaluation") {
    auto data = synthetic_gaussian(19, 40, 6, 1.0);
    auto probe_ds = synthetic_gaussian(20, 8, 6, 1.0);
    auto desc = KernelDescriptor::analytic(2);
    auto cg = cross_gram(desc, data, probe_ds.inputs, probe_ds.n);
    REQUIRE(cg.rows == data.n);
    REQUIRE(cg.cols == probe_ds.n);
    for (std::size_t i = 0; i < data.n; ++i)
        for (std::size_t j = 0; j < probe_ds.n; ++j)
            CHECK(cg.at(i, j) == doctest::Approx(ntk2_relu(data.row(i), probe_ds.row(j))).epsilon(1e-10));
}

TEST_CASE("gram cache round-trips and detects corruption") {
    auto dir = std::filesystem::temp_directory_path() / "ntkeq_kernel_cache";
    std::filesystem::remove_all(dir);
    auto data = synthetic_gaussian(23, 30, 5, 1.0);
    auto desc = KernelDescriptor::analytic(2);

    auto first = gram_cached(desc, data, dir.string());
    auto second = gram_cached(desc, data, dir.string());  // served from disk
    CHECK(first.values == second.values);
    CHECK(first.fingerprint == second.fingerprint);

    // blob round-trip is bit-exact
    auto blob_path = (dir / "manual.kmat").string();
    write_kernel_blob(blob_path, first);
    auto back = read_kernel_blob(blob_path);
    CHECK(back.values == first.values);

    // truncated cache entries are rejected
    auto bytes = read_file_bytes(blob_path);
    bytes.resize(bytes.size() - 8);
    write_file_bytes(blob_path, bytes);
    CHECK_THROWS(read_kernel_blob(blob_path));
    std::filesystem::remove_all(dir);
}
