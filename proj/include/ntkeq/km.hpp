#pragma once
// Kernel machines in dual coordinates: g(x) = sum_i alpha_i K(x, x_i) with
// the primal weights beta never materialized. Subgradient training updates
// alpha directly (full-batch and minibatch rules), and ridge regression has
// the closed form alpha = (K + (lambda/2) I)^-1 y -- note the factor
// lambda/2, which is the stationary point of
//   (lambda/2)|beta|^2 + sum_i (y_i - g(x_i))^2,
// not the textbook lambda.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ntkeq/kernel.hpp"
#include "ntkeq/loss.hpp"
#include "ntkeq/traj.hpp"

namespace ntkeq {

struct KmConfig {
    LossSpec loss;
    double lambda = 0.0;  // l2 coefficient
    double lr = 1e-3;     // step size

    void validate() const {
        loss.validate();
        if (!(lambda >= 0.0)) throw Error("km: lambda must be >= 0");
        if (!(lr > 0.0)) throw Error("km: lr must be > 0");
        if (lr * lambda >= 1.0) throw Error("km: lr * lambda must be < 1 (decay would oscillate)");
    }
};

struct KmState {
    const KernelMatrix* gram = nullptr;  // n x n training Gram, not owned
    std::vector<double> alpha;           // dual weights, init 0 -> g == 0
    std::vector<double> y;
    KmConfig cfg;
    std::uint64_t step = 0;

    KmState(const KernelMatrix& gram_in, std::vector<double> y_in, KmConfig cfg_in);

    std::size_t size() const { return alpha.size(); }

    // g on the training points: gram * alpha.
    void outputs_into(std::span<double> out) const;
    std::vector<double> outputs() const;
    // g at one point given its kernel row K(x, x_1..n).
    double eval_row(std::span<const double> krow) const;
    // g at p points given the n x p cross-kernel (rows = train, cols = probe).
    void eval_cross(const KernelMatrix& cross, std::span<double> out) const;

    // Simultaneous update: all g_t are read before any alpha is written.
    //   alpha_i <- (1 - lr*lambda) alpha_i - lr * s * dloss(g_i, y_i),
    // s = 1/n in mean mode, 1 in sum mode.
    void step_fullbatch();
    // Minibatch rule: only sampled indices move (including their decay),
    //   alpha_i <- (1 - lr*lambda) alpha_i - (lr/|S|) * dloss(g_i, y_i), i in S.
    void step_minibatch(std::span<const std::size_t> batch);

    // (regularizer, data term): (lambda/2) alpha'K alpha and the mode-scaled
    // loss sum.
    std::pair<double, double> loss_terms() const;
    struct LossTerms {
        double reg = 0, data = 0, model_norm2 = 0;  // model_norm2 = alpha'K alpha
    };
    LossTerms loss_terms_full() const;
};

class Philox;
// Shared minibatch sampler (uniform with replacement, deduplicated per step)
// so a net and a kernel machine driven from the same seed see identical
// index schedules.
void sample_batch(Philox& rng, std::size_t n, std::size_t k, std::vector<std::size_t>& out);

// Stream id for batch-schedule RNGs; both trainers key on this.
inline constexpr std::uint32_t kBatchStream = 0x6b6d7367u;

struct KmTrainOptions {
    std::uint64_t max_steps = 0;
    const KernelMatrix* probe_cross = nullptr;  // n x p, optional
    std::size_t minibatch = 0;                  // 0 = full batch
    std::uint64_t batch_seed = 0;               // Philox stream for sampling
    double converge_tol = 0.0;  // >0: stop when |alpha_{t+1}-alpha_t|_inf <= tol
    bool record_losses = true;  // false skips the O(n^2) loss evaluation per step
};

// Runs the subgradient iteration, logging losses and probe outputs each step
// (t = 0 is the untrained state). Minibatch indices are drawn uniformly with
// replacement from a Philox stream keyed by batch_seed, so trajectories are
// reproducible bit-for-bit.
Trajectory km_train(KmState& state, const KmTrainOptions& opt);

// alpha = (K + (lambda/2) I)^-1 y. lambda = 0 gives the interpolant; a
// singular system falls back to the eigendecomposition pseudo-inverse and
// reports it through used_pseudoinverse (and a stderr warning).
std::vector<double> krr_closed_form(const KernelMatrix& gram, std::span<const double> y,
                                    double lambda, bool* used_pseudoinverse = nullptr);

}  // namespace ntkeq
