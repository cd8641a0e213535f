#pragma once
// Capacity-based generalization bounds for kernel machines: RKHS norm
// B = sqrt(a' K a), the trace bound on empirical Rademacher complexity
// R <= (B/n) sqrt(sum_i K_ii), and the population-loss bound
//   L_D <= L_S + 2 rho R + 3 c sqrt(log(2 / delta) / (2 n)).
// A trajectory driver trains a centered net full batch, rebuilds it prefix
// by prefix as a path-kernel machine, and logs the bound against held-out
// loss while the reconstruction stays exact.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ntkeq/kernel.hpp"
#include "ntkeq/mlp.hpp"
#include "ntkeq/trainer.hpp"
#include "ntkeq/traj.hpp"

namespace ntkeq {

// |f|_H for f(x) = sum_i a_i K(x, x_i). Tiny negative quadratic forms from
// roundoff are clamped to zero; anything below -1e-8 |a|^2 max|K| is a real
// PSD violation and throws.
double rkhs_norm(std::span<const double> a, const KernelMatrix& gram);

// Empirical Rademacher complexity bound (B / n) sqrt(trace of gram) for the
// ball of RKHS norm <= b_norm.
double rademacher_bound(double b_norm, const KernelMatrix& gram);

// L_S + 2 rho rademacher + 3 cap sqrt(log(2 / delta_conf) / (2 n)), holding
// with probability >= 1 - delta_conf over the n-sample draw. rho is the
// Lipschitz constant of the per-sample loss in f, cap its upper bound.
double generalization_bound(double empirical_loss, double rho, double rademacher,
                            double cap, double delta_conf, std::size_t n);

struct BoundReport {
    double empirical_loss = 0.0;   // L_S: mean per-sample loss on the sample
    double rkhs_norm = 0.0;        // B
    double rademacher_bound = 0.0;
    double confidence = 0.0;       // 1 - delta_conf
    double loss_lipschitz = 0.0;   // rho
    double loss_cap = 0.0;         // c
    double final_bound = 0.0;      // on the population loss L_D
    std::size_t n = 0;
};

struct BoundTrajectoryRow {
    std::uint64_t step = 0;     // prefix length T of the path-kernel machine
    double train_loss = 0.0;    // mean hinge of the prefix machine on train
    double test_loss = 0.0;     // same on the held-out set
    double rkhs_norm = 0.0;     // B at this prefix
    double rademacher = 0.0;
    double loss_cap = 0.0;      // c = C (1 + max |f|) over train + test
    double final_bound = 0.0;
};

struct BoundTrajectory {
    std::vector<BoundTrajectoryRow> rows;  // one per logged prefix
    BoundReport report;                    // components at the last logged prefix
    std::size_t window_steps = 0;          // prefix with the loss derivative constant
    bool full_window = false;              // window covered every training step
    Trajectory nn;                         // source-net trajectory, for reference

    // Columns: step, train_loss, test_loss, rkhs_norm, rademacher, bound.
    void write_csv(const std::filesystem::path& p,
                   const std::vector<std::string>& meta_lines) const;
};

// Trains net (in place, full batch, hinge loss) and logs the bound of the
// reconstructed kernel machine every log_every admitted steps, stopping when
// the per-sample loss derivative first changes (beyond that prefix the
// machine no longer equals the net). cfg.probe must be unset: the held-out
// set supplies the probe points.
template <class T>
BoundTrajectory bound_trajectory(MlpNet<T>& net, const double* x, const double* y,
                                 std::size_t n, const double* test_x, const double* test_y,
                                 std::size_t n_test, const TrainConfig& cfg,
                                 double delta_conf, std::uint64_t log_every = 1);

}  // namespace ntkeq
