#include "ntkeq/genbound.hpp"

#include <algorithm>
#include <cmath>

#include "ntkeq/equiv.hpp"
#include "ntkeq/loss.hpp"
#include "ntkeq/util.hpp"

namespace ntkeq {

double rkhs_norm(std::span<const double> a, const KernelMatrix& gram) {
    if (gram.rows != gram.cols) throw Error("rkhs_norm: gram must be square");
    if (a.size() != gram.rows) throw Error("rkhs_norm: coefficient size != gram size");
    const std::size_t n = a.size();
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == 0.0) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += gram.values[i * n + j] * a[j];
        q += a[i] * row;
    }
    if (q < 0.0) {
        double a2 = 0.0, kmax = 0.0;
        for (double v : a) a2 += v * v;
        for (double v : gram.values) kmax = std::max(kmax, std::fabs(v));
        if (q < -1e-8 * a2 * kmax)
            throw Error("rkhs_norm: quadratic form " + std::to_string(q) +
                        " is negative beyond roundoff; gram is not PSD");
        q = 0.0;  // roundoff-scale negative
    }
    return std::sqrt(q);
}

double rademacher_bound(double b_norm, const KernelMatrix& gram) {
    if (!(b_norm >= 0.0)) throw Error("rademacher_bound: norm bound must be >= 0");
    if (gram.rows != gram.cols) throw Error("rademacher_bound: gram must be square");
    if (gram.rows == 0) throw Error("rademacher_bound: empty gram");
    double trace = 0.0;
    for (std::size_t i = 0; i < gram.rows; ++i) trace += gram.at(i, i);
    return b_norm / static_cast<double>(gram.rows) * std::sqrt(std::max(trace, 0.0));
}

double generalization_bound(double empirical_loss, double rho, double rademacher,
                            double cap, double delta_conf, std::size_t n) {
    if (!(empirical_loss >= 0.0)) throw Error("generalization_bound: loss must be >= 0");
    if (!(rho >= 0.0) || !(rademacher >= 0.0) || !(cap >= 0.0))
        throw Error("generalization_bound: rho, rademacher, cap must be >= 0");
    if (!(delta_conf > 0.0 && delta_conf < 1.0))
        throw Error("generalization_bound: confidence level delta must lie in (0, 1)");
    if (n == 0) throw Error("generalization_bound: n must be >= 1");
    const double dev = std::sqrt(std::log(2.0 / delta_conf) / (2.0 * static_cast<double>(n)));
    return empirical_loss + 2.0 * rho * rademacher + 3.0 * cap * dev;
}

void BoundTrajectory::write_csv(const std::filesystem::path& p,
                                const std::vector<std::string>& meta_lines) const {
    CsvWriter csv(p);
    for (const auto& line : meta_lines) csv.meta(line);
    csv.meta("window_steps = " + std::to_string(window_steps));
    csv.meta("full_window = " + std::string(full_window ? "true" : "false"));
    csv.meta("confidence = " + CsvWriter::format_f64(report.confidence));
    csv.meta("loss_lipschitz = " + CsvWriter::format_f64(report.loss_lipschitz));
    csv.meta("loss_cap = " + CsvWriter::format_f64(report.loss_cap));
    csv.header({"step", "train_loss", "test_loss", "rkhs_norm", "rademacher", "bound"});
    for (const auto& r : rows)
        csv.row({static_cast<double>(r.step), r.train_loss, r.test_loss, r.rkhs_norm,
                 r.rademacher, r.final_bound});
}

template <class T>
BoundTrajectory bound_trajectory(MlpNet<T>& net, const double* x, const double* y,
                                 std::size_t n, const double* test_x, const double* test_y,
                                 std::size_t n_test, const TrainConfig& cfg,
                                 double delta_conf, std::uint64_t log_every) {
    cfg.validate();
    if (cfg.loss.kind != LossKind::hinge)
        throw Error("bound_trajectory: the loss cap and Lipschitz constant are derived "
                    "for hinge loss; got " + cfg.loss.kind_name());
    if (cfg.minibatch != 0)
        throw Error("bound_trajectory: full-batch training required (the path kernel "
                    "integrates the whole-batch derivative)");
    if (cfg.probe != nullptr || cfg.n_probe != 0)
        throw Error("bound_trajectory: cfg.probe must be unset; the held-out set "
                    "supplies the probe points");
    if (n_test == 0) throw Error("bound_trajectory: held-out set is empty");
    if (log_every == 0) throw Error("bound_trajectory: log_every must be >= 1");
    if (!(delta_conf > 0.0 && delta_conf < 1.0))
        throw Error("bound_trajectory: confidence level delta must lie in (0, 1)");

    TrainConfig run_cfg = cfg;
    run_cfg.probe = test_x;
    run_cfg.n_probe = n_test;

    KbarAccum acc(n, n_test, cfg.lambda, cfg.lr, /*with_train=*/true);
    {
        // Centered nets output exactly zero at t = 0, so the step-0 pattern is
        // known up front; hinge at zero margin is always active, so the window
        // cannot start empty.
        std::vector<double> d0(n);
        const double s = cfg.loss.scale(n);
        for (std::size_t i = 0; i < n; ++i) d0[i] = s * dloss(cfg.loss, 0.0, y[i]);
        acc.admit(0, d0);
    }

    // Per-sample hinge is C-Lipschitz in f and bounded by C (1 + max |f|) on
    // any set where |f| is observed; both sides of the bound use the mean
    // per-sample loss regardless of the training mode.
    const double rho = cfg.loss.C;

    BoundTrajectory out;
    std::vector<double> f_train(n), f_test(n_test);

    auto log_row = [&](std::uint64_t prefix) {
        acc.predict_train(f_train);
        acc.predict_probe(f_test);
        double train_sum = 0.0, test_sum = 0.0, fmax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            train_sum += cfg.loss.C * std::max(0.0, 1.0 - y[i] * f_train[i]);
            fmax = std::max(fmax, std::fabs(f_train[i]));
        }
        for (std::size_t j = 0; j < n_test; ++j) {
            test_sum += cfg.loss.C * std::max(0.0, 1.0 - test_y[j] * f_test[j]);
            fmax = std::max(fmax, std::fabs(f_test[j]));
        }

        KernelMatrix kbar;
        kbar.rows = kbar.cols = n;
        kbar.values = acc.kbar_train();
        kbar.descriptor = "path-kernel";

        BoundTrajectoryRow r;
        r.step = prefix;
        r.train_loss = train_sum / static_cast<double>(n);
        r.test_loss = test_sum / static_cast<double>(n_test);
        r.rkhs_norm = rkhs_norm(acc.a(), kbar);
        r.rademacher = rademacher_bound(r.rkhs_norm, kbar);
        r.loss_cap = cfg.loss.C * (1.0 + fmax);
        r.final_bound =
            generalization_bound(r.train_loss, rho, r.rademacher, r.loss_cap, delta_conf, n);
        out.rows.push_back(r);
    };

    StepObserver<T> observer = [&](std::uint64_t step, const MlpNet<T>& live,
                                   const typename MlpNet<T>::Batch&,
                                   std::span<const double>, std::span<const double> d) {
        if (!acc.open()) return;
        if (!acc.admit(step, d)) return;
        KernelMatrix cross = live.empirical_cross_gram(x, n, run_cfg.probe, n_test);
        KernelMatrix train = live.empirical_gram(x, n);
        acc.add(step, d, cross.values.data(), train.values.data());
        if (acc.window_steps() % log_every == 0) log_row(acc.window_steps());
    };

    out.nn = nn_train(net, x, y, n, run_cfg, observer);

    out.window_steps = acc.window_steps();
    out.full_window = acc.window_steps() == cfg.steps;
    if (out.window_steps == 0)
        throw Error("bound_trajectory: the loss derivative changed at the first step; "
                    "no prefix to bound");
    if (out.rows.empty() || out.rows.back().step != out.window_steps)
        log_row(out.window_steps);  // always close with the full admitted prefix

    const BoundTrajectoryRow& last = out.rows.back();
    out.report.empirical_loss = last.train_loss;
    out.report.rkhs_norm = last.rkhs_norm;
    out.report.rademacher_bound = last.rademacher;
    out.report.confidence = 1.0 - delta_conf;
    out.report.loss_lipschitz = rho;
    out.report.loss_cap = last.loss_cap;
    out.report.final_bound = last.final_bound;
    out.report.n = n;
    return out;
}

template BoundTrajectory bound_trajectory<float>(MlpNet<float>&, const double*, const double*,
                                                 std::size_t, const double*, const double*,
                                                 std::size_t, const TrainConfig&, double,
                                                 std::uint64_t);
template BoundTrajectory bound_trajectory<double>(MlpNet<double>&, const double*, const double*,
                                                  std::size_t, const double*, const double*,
                                                  std::size_t, const TrainConfig&, double,
                                                  std::uint64_t);

}  // namespace ntkeq
