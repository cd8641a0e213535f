#pragma once
// Subgradient training of an MlpNet on the last-layer-regularized objective
//   (lambda/2)|W^(L+1)|^2 + sum_i s * l(f(x_i), y_i),
// where f is the centered output (raw minus frozen init) and the weight
// decay -eta*lambda*W touches only the stored output layer -- hidden layers
// receive pure data gradients. The trainer exploits hinge sparsity: on steps
// where no sample has a nonzero subgradient, only wout scales, the cached
// batch activations stay valid, and outputs refresh with a single GEMV.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ntkeq/loss.hpp"
#include "ntkeq/mlp.hpp"
#include "ntkeq/traj.hpp"

namespace ntkeq {

struct TrainConfig {
    LossSpec loss;
    double lambda = 0.0;
    double lr = 0.1;
    std::uint64_t steps = 0;

    const double* probe = nullptr;  // row-major n_probe x d, optional
    std::size_t n_probe = 0;

    std::size_t minibatch = 0;    // 0 = full batch
    std::uint64_t batch_seed = 0; // schedule matches km_train for equal seeds

    bool compute_tk0_lambda_min = false;  // eigen-decomposes an n x n Gram at init

    std::uint64_t snapshot_every = 0;  // 0 = no weight snapshots
    std::filesystem::path snapshot_dir;

    void validate() const {
        loss.validate();
        if (!(lambda >= 0.0)) throw Error("train: lambda must be >= 0");
        if (!(lr > 0.0)) throw Error("train: lr must be > 0");
        if (lr * lambda >= 1.0) throw Error("train: lr * lambda must be < 1");
        if (snapshot_every > 0 && snapshot_dir.empty())
            throw Error("train: snapshot_every needs snapshot_dir");
    }
};

// Called at w_t before the update: step index, the net at w_t, cached batch
// activations, centered train outputs f_t(X), and the mode-scaled loss
// derivatives s * dloss(f_t(x_i), y_i). Reconstruction and bound drivers
// accumulate their per-step kernels here instead of storing snapshots.
template <class T>
using StepObserver =
    std::function<void(std::uint64_t step, const MlpNet<T>& net,
                       const typename MlpNet<T>::Batch& batch,
                       std::span<const double> outputs, std::span<const double> dloss_scaled)>;

// Incremental training state; exposed so tests and drivers can single-step.
template <class T>
struct NnTrainState {
    MlpNet<T>& net;
    TrainConfig cfg;
    std::size_t n = 0;
    std::vector<T> x;        // n x d
    std::vector<double> y;   // n
    std::vector<T> probe_x;  // n_probe x d

    typename MlpNet<T>::Batch train_batch, probe_batch;
    std::vector<double> f0_train, f0_probe;     // frozen-net outputs (constant)
    std::vector<double> raw_train, raw_probe;   // live-net outputs at w_t
    bool train_fresh = false, probe_fresh = false;

    std::uint64_t step_index = 0;

    NnTrainState(MlpNet<T>& net_in, const double* x_in, const double* y_in, std::size_t n_in,
                 TrainConfig cfg_in);

    // Centered outputs at the current weights (recomputing lazily: full
    // forward only if hidden weights moved since the caches were filled).
    void ensure_train_forward();
    void ensure_probe_forward();
    double train_output(std::size_t i) const { return raw_train[i] - f0_train[i]; }
    double probe_output(std::size_t j) const { return raw_probe[j] - f0_probe[j]; }

    // One subgradient step at the current weights. batch empty = full batch.
    void step(std::span<const std::size_t> batch, const StepObserver<T>& observer = nullptr);

    // (data term, regularizer, |wout|^2) at the current weights.
    struct LossTerms {
        double data = 0, reg = 0, wout_norm2 = 0;
    };
    LossTerms loss_terms();

  private:
    // Workspaces for the active-set gathers (size k x width).
    std::vector<T> act_top_, dz_, da_, x_active_;
    std::vector<T> delta_t_;
    std::vector<std::size_t> active_;
};

// Full training loop: logs state at t = 0..steps (losses, |wout|^2, probe
// outputs), calls the observer at every w_t before the update, and writes
// weight snapshots at the configured cadence. Deterministic given seeds.
template <class T>
Trajectory nn_train(MlpNet<T>& net, const double* x, const double* y, std::size_t n,
                    const TrainConfig& cfg, const StepObserver<T>& observer = nullptr);

}  // namespace ntkeq
