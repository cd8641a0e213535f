// RKHS norms, trace Rademacher bounds, the population-loss bound, and the
// bound-trajectory driver that tracks a reconstructed kernel machine.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "ntkeq/dataset.hpp"
#include "ntkeq/genbound.hpp"
#include "ntkeq/kernel.hpp"
#include "ntkeq/philox.hpp"
#include "ntkeq/simd.hpp"
#include "ntkeq/util.hpp"

using namespace ntkeq;

namespace {

KernelMatrix dense(std::size_t n, std::vector<double> vals) {
    KernelMatrix k;
    k.rows = k.cols = n;
    k.values = std::move(vals);
    k.descriptor = "test";
    return k;
}

}  // namespace

TEST_CASE("rkhs norm: basis vectors, feature-space oracle, homogeneity") {
    const auto data = synthetic_gaussian(3, 12, 7, 1.0);
    const KernelMatrix k = gram(KernelDescriptor::analytic(2), data);

    std::vector<double> a(data.n, 0.0);
    CHECK(rkhs_norm(a, k) == 0.0);
    a[0] = 1.0;
    CHECK(rkhs_norm(a, k) == doctest::Approx(std::sqrt(k.at(0, 0))).epsilon(1e-14));

    // Linear kernel: the norm of sum_i a_i K(., x_i) is the plain Euclidean
    // norm of the combined feature vector sum_i a_i x_i.
    const std::vector<std::vector<double>> xs = {
        {1.0, 0.5, -2.0}, {0.0, 3.0, 1.0}, {-1.5, 0.25, 0.75}};
    std::vector<double> lin(9);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            lin[i * 3 + j] = simd::dot(xs[i].data(), xs[j].data(), 3);
    const std::vector<double> coef = {0.7, -1.2, 0.4};
    std::vector<double> feat(3, 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) feat[j] += coef[i] * xs[i][j];
    const double ref = std::sqrt(simd::dot(feat.data(), feat.data(), 3));
    CHECK(rkhs_norm(coef, dense(3, lin)) == doctest::Approx(ref).epsilon(1e-13));

    // Absolute homogeneity (power-of-two scales are exact in fp).
    Philox rng(5, 0);
    std::vector<double> r(data.n), r2(data.n), rneg(data.n);
    for (std::size_t i = 0; i < data.n; ++i) {
        r[i] = rng.next_gauss();
        r2[i] = 2.0 * r[i];
        rneg[i] = -r[i];
    }
    CHECK(rkhs_norm(r2, k) == doctest::Approx(2.0 * rkhs_norm(r, k)).epsilon(1e-15));
    CHECK(rkhs_norm(rneg, k) == rkhs_norm(r, k));
}

TEST_CASE("rkhs norm: roundoff clamp vs real PSD violations") {
    // Quadratic form -1e-10 on a gram with entries O(1): roundoff scale.
    const KernelMatrix tiny = dense(2, {1.0, -1.0, -1.0, 1.0 - 1e-10});
    const std::vector<double> ones = {1.0, 1.0};
    CHECK(rkhs_norm(ones, tiny) == 0.0);

    // Indefinite gram: q = -2 is far beyond roundoff.
    const KernelMatrix flip = dense(2, {0.0, 1.0, 1.0, 0.0});
    const std::vector<double> diff = {1.0, -1.0};
    CHECK_THROWS_WITH_AS(rkhs_norm(diff, flip), doctest::Contains("PSD"), Error);

    const std::vector<double> bad_size = {1.0};
    CHECK_THROWS_AS(rkhs_norm(bad_size, flip), Error);
    KernelMatrix rect = dense(2, {1.0, 0.0, 0.0, 1.0});
    rect.cols = 4;
    rect.values.resize(8, 0.0);
    CHECK_THROWS_AS(rkhs_norm(ones, rect), Error);
}

TEST_CASE("rademacher bound: arithmetic and the 1/sqrt(n) trace scaling") {
    CHECK(rademacher_bound(0.0, dense(1, {4.0})) == 0.0);
    CHECK(rademacher_bound(3.0, dense(1, {4.0})) == doctest::Approx(6.0).epsilon(1e-15));

    // Identity diagonal: bound = B / sqrt(n), so 4x the points halves it.
    auto ident = [](std::size_t n) {
        std::vector<double> v(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
        return dense(n, std::move(v));
    };
    const double b4 = rademacher_bound(1.0, ident(4));
    const double b16 = rademacher_bound(1.0, ident(16));
    CHECK(b4 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b16 == doctest::Approx(0.25).epsilon(1e-15));

    CHECK(rademacher_bound(2.0, ident(4)) == doctest::Approx(2.0 * b4).epsilon(1e-15));
    CHECK_THROWS_AS(rademacher_bound(-1.0, ident(4)), Error);
}

TEST_CASE("generalization bound: hand value, limits, monotonicity, bad confidence") {
    const double hand = generalization_bound(0.1, 1.0, 0.05, 1.0, 0.01, 1000);
    CHECK(hand == doctest::Approx(0.1 + 0.1 + 3.0 * std::sqrt(std::log(200.0) / 2000.0))
                      .epsilon(1e-15));
    CHECK(hand == doctest::Approx(0.3545).epsilon(2e-4));

    // Vanishing complexity and deviation terms leave the empirical loss.
    CHECK(generalization_bound(0.1, 1.0, 0.0, 1.0, 0.01, 1u << 30) ==
          doctest::Approx(0.1).epsilon(1e-3));

    const double base = generalization_bound(0.1, 1.0, 0.05, 1.0, 0.05, 100);
    CHECK(generalization_bound(0.1, 2.0, 0.05, 1.0, 0.05, 100) > base);
    CHECK(generalization_bound(0.1, 1.0, 0.10, 1.0, 0.05, 100) > base);
    CHECK(generalization_bound(0.1, 1.0, 0.05, 2.0, 0.05, 100) > base);
    CHECK(generalization_bound(0.1, 1.0, 0.05, 1.0, 0.05, 400) < base);
    CHECK(generalization_bound(0.2, 1.0, 0.05, 1.0, 0.05, 100) > base);
    CHECK(base >= 0.1);  // bound dominates the empirical loss structurally

    for (double d : {0.0, 1.0, -0.5, 1.5})
        CHECK_THROWS_WITH_AS(generalization_bound(0.1, 1.0, 0.05, 1.0, d, 100),
                             doctest::Contains("(0, 1)"), Error);
    CHECK_THROWS_AS(generalization_bound(0.1, 1.0, 0.05, 1.0, 0.05, 0), Error);
}

namespace {

TrainConfig bound_cfg(std::uint64_t steps, double lr) {
    TrainConfig cfg;
    cfg.loss.kind = LossKind::hinge;
    cfg.loss.mode = SumMode::mean;
    cfg.loss.C = 1.0;
    cfg.lambda = 0.0;
    cfg.lr = lr;
    cfg.steps = steps;
    return cfg;
}

}  // namespace

TEST_CASE("bound trajectory: dominates losses, logs every cadence, closes the window") {
    const auto train = synthetic_gaussian(101, 16, 6, 1.0);
    const auto test = synthetic_gaussian(102, 10, 6, 1.0);

    MlpNetD net({6, 24}, 11);
    const TrainConfig cfg = bound_cfg(30, 0.05);
    BoundTrajectory traj = bound_trajectory(net, train.inputs.data(), train.labels.data(),
                                            train.n, test.inputs.data(), test.labels.data(),
                                            test.n, cfg, 0.01, 5);

    REQUIRE(!traj.rows.empty());
    CHECK(traj.window_steps >= 1);
    CHECK(traj.rows.back().step == traj.window_steps);
    CHECK(traj.full_window == (traj.window_steps == cfg.steps));

    for (const auto& r : traj.rows) {
        CHECK(r.step >= 1);
        CHECK(r.train_loss >= 0.0);
        CHECK(r.test_loss >= 0.0);
        CHECK(r.rkhs_norm >= 0.0);
        CHECK(r.rademacher >= 0.0);
        CHECK(r.loss_cap >= cfg.loss.C);
        CHECK(r.final_bound >= r.train_loss);
        // At n = 16 the deviation term alone exceeds the loss cap, so the
        // bound must sit above the held-out loss with room to spare.
        CHECK(r.final_bound > r.test_loss);
    }
    // Cadence: all but the closing row sit on multiples of log_every.
    for (std::size_t i = 0; i + 1 < traj.rows.size(); ++i)
        CHECK(traj.rows[i].step % 5 == 0);

    const BoundReport& rep = traj.report;
    CHECK(rep.empirical_loss == traj.rows.back().train_loss);
    CHECK(rep.final_bound == traj.rows.back().final_bound);
    CHECK(rep.confidence == doctest::Approx(0.99).epsilon(1e-15));
    CHECK(rep.loss_lipschitz == 1.0);
    CHECK(rep.n == train.n);

    // The prefix machine tracks the net it was rebuilt from: its training
    // loss matches the net's logged data term at the same step.
    const auto& last = traj.rows.back();
    const double nn_loss = traj.nn.data_term[last.step];
    CHECK(last.train_loss == doctest::Approx(nn_loss).epsilon(0.05));
}

TEST_CASE("bound trajectory: window closes when a margin crosses the hinge") {
    const auto train = synthetic_gaussian(103, 12, 5, 3.0);
    const auto test = synthetic_gaussian(104, 8, 5, 3.0);

    // Well-separated classes and a large step: margins hit 1 quickly, the
    // derivative pattern changes, and the window must close early.
    MlpNetD net({5, 32}, 13);
    const TrainConfig cfg = bound_cfg(400, 0.5);
    BoundTrajectory traj = bound_trajectory(net, train.inputs.data(), train.labels.data(),
                                            train.n, test.inputs.data(), test.labels.data(),
                                            test.n, cfg, 0.01, 1);
    REQUIRE(!traj.full_window);
    CHECK(traj.window_steps < cfg.steps);
    CHECK(traj.rows.size() == traj.window_steps);  // log_every = 1, closing row included
    CHECK(traj.rows.back().step == traj.window_steps);
}

TEST_CASE("bound trajectory: argument validation") {
    const auto train = synthetic_gaussian(105, 8, 4, 1.0);
    const auto test = synthetic_gaussian(106, 4, 4, 1.0);
    MlpNetD net({4, 8}, 17);
    auto run = [&](const TrainConfig& cfg, double delta, std::uint64_t every,
                   std::size_t n_test) {
        MlpNetD fresh({4, 8}, 17);
        return bound_trajectory(fresh, train.inputs.data(), train.labels.data(), train.n,
                                test.inputs.data(), test.labels.data(), n_test, cfg, delta,
                                every);
    };

    TrainConfig cfg = bound_cfg(5, 0.05);
    cfg.minibatch = 4;
    CHECK_THROWS_WITH_AS(run(cfg, 0.01, 1, test.n), doctest::Contains("full-batch"), Error);

    cfg = bound_cfg(5, 0.05);
    cfg.loss.kind = LossKind::squared;
    CHECK_THROWS_WITH_AS(run(cfg, 0.01, 1, test.n), doctest::Contains("hinge"), Error);

    cfg = bound_cfg(5, 0.05);
    cfg.probe = test.inputs.data();
    cfg.n_probe = test.n;
    CHECK_THROWS_WITH_AS(run(cfg, 0.01, 1, test.n), doctest::Contains("probe"), Error);

    cfg = bound_cfg(5, 0.05);
    CHECK_THROWS_AS(run(cfg, 0.0, 1, test.n), Error);
    CHECK_THROWS_AS(run(cfg, 1.0, 1, test.n), Error);
    CHECK_THROWS_AS(run(cfg, 0.01, 0, test.n), Error);
    CHECK_THROWS_AS(run(cfg, 0.01, 1, 0), Error);
}

TEST_CASE("bound trajectory: csv round structure") {
    const auto train = synthetic_gaussian(107, 10, 4, 1.0);
    const auto test = synthetic_gaussian(108, 6, 4, 1.0);
    MlpNetD net({4, 12}, 19);
    BoundTrajectory traj = bound_trajectory(net, train.inputs.data(), train.labels.data(),
                                            train.n, test.inputs.data(), test.labels.data(),
                                            test.n, bound_cfg(8, 0.05), 0.01, 2);

    const auto path = std::filesystem::temp_directory_path() / "ntkeq_test_bound.csv";
    traj.write_csv(path, {"seed = 19"});
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::size_t meta = 0, data = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') {
            ++meta;
        } else if (!saw_header) {
            saw_header = true;
            CHECK(line == "step,train_loss,test_loss,rkhs_norm,rademacher,bound");
        } else {
            ++data;
        }
    }
    CHECK(meta >= 6);  // caller line + window, full_window, confidence, rho, cap
    CHECK(data == traj.rows.size());
    std::filesystem::remove(path);
}
