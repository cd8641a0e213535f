#pragma once
// Paired NN / kernel-machine experiments: train both sides on the same task
// with the same schedule and compare probe-point dynamics, sweep the gap
// across widths, and rebuild a trained net as an explicit kernel machine by
// accumulating its tangent kernel along the training path.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ntkeq/kernel.hpp"
#include "ntkeq/km.hpp"
#include "ntkeq/mlp.hpp"
#include "ntkeq/trainer.hpp"
#include "ntkeq/traj.hpp"

namespace ntkeq {

enum class PairedKernel {
    empirical_init,  // tangent Gram of the net at its own initialization
    analytic,        // infinite-width closed form for the net's depth
};

std::string paired_kernel_name(PairedKernel k);

struct PairedRun {
    Trajectory nn;
    Trajectory km;
    std::vector<double> gap;  // steps+1 entries: max over probes |f_t - g_t|
    double sup_gap = 0.0;
    std::string kernel_name;  // descriptor of the Gram the KM trained on

    // Columns: step, nn_probe_*, km_probe_*, gap, nn_data_loss, km_data_loss.
    void write_csv(const std::filesystem::path& p,
                   const std::vector<std::string>& meta_lines) const;
};

// Trains net (in place) and a kernel machine side by side. Both sides must
// share loss, lambda, lr, and batch schedule; km_cfg exists so callers state
// the KM side explicitly and any mismatch is rejected up front. The KM kernel
// is the net's tangent Gram at init by default; PairedKernel::analytic swaps
// in the infinite-width kernel for the net's depth.
template <class T>
PairedRun run_paired(MlpNet<T>& net, const double* x, const double* y, std::size_t n,
                     const double* probe_x, std::size_t n_probe,
                     const TrainConfig& nn_cfg, const KmConfig& km_cfg,
                     PairedKernel kernel = PairedKernel::empirical_init);

struct WidthSweepPoint {
    std::size_t width = 0;
    std::vector<double> gaps;  // sup_t gap per surviving seed
    double median_gap = 0.0;
};

struct WidthSweepResult {
    std::vector<WidthSweepPoint> points;  // ascending width, surviving only
    double slope = 0.0;                   // least-squares d log(median gap) / d log(width)
    std::size_t excluded_runs = 0;        // diverged (width, seed) pairs dropped

    std::string to_json() const;
};

struct WidthSweepConfig {
    std::size_t input_dim = 0;
    std::size_t hidden_layers = 1;  // hidden layers per net; widths sweep their size
    std::vector<std::size_t> widths;
    std::vector<std::uint64_t> seeds;  // net seeds; every width runs all of them
    TrainConfig train;                 // probe pointers are supplied separately
    KmConfig km;
    PairedKernel kernel = PairedKernel::empirical_init;
};

// Runs run_paired for every (width, seed), in float precision. Requires at
// least three distinct widths spanning >= 1.5 decades; diverged runs are
// dropped with a warning and at least three widths must survive.
WidthSweepResult width_sweep(const double* x, const double* y, std::size_t n,
                             const double* probe_x, std::size_t n_probe,
                             const WidthSweepConfig& cfg);

// Online left-Riemann accumulator for the path kernel
//   Kbar_T(x, x_i) = e^{-lambda T} * sum_{t < T} |d_i(t)| Theta(w_t; x, x_i) e^{lambda t} dt
// with dt = lr and d_i the mode-scaled loss derivative. Valid while the
// per-sample sign of d stays what it was at step 0; the first violation
// closes the window and later steps are ignored.
class KbarAccum {
  public:
    KbarAccum(std::size_t n, std::size_t n_probe, double lambda, double lr, bool with_train);

    // Checks the step-0 sign pattern; returns true while the window is open
    // and this step belongs to it. The first call fixes the signs (a zero
    // derivative at step 0 leaves the window empty, which is an error).
    bool admit(std::uint64_t step, std::span<const double> dloss);
    // Folds one admitted step in. cross is n x n_probe, train n x n (row-major,
    // training samples as rows); train may be null unless with_train was set.
    void add(std::uint64_t step, std::span<const double> dloss, const double* cross,
             const double* train);

    bool open() const { return open_; }
    std::size_t window_steps() const { return steps_in_; }
    // True while |d| has stayed exactly constant per sample (the reconstructed
    // kernel is symmetric only in that case).
    bool lprime_constant() const { return lprime_constant_; }
    std::span<const double> a() const { return a_; }

    // Kbar at the current prefix T = window_steps * lr.
    std::vector<double> kbar_probe() const;
    std::vector<double> kbar_train() const;
    // sum_i a_i Kbar(x_i, probe_j) for the current prefix; out has n_probe slots.
    void predict_probe(std::span<double> out) const;
    // a' Kbar_train a for the current prefix (needs with_train).
    double norm2_train() const;
    // Per-sample KM outputs on the training set: sum_i a_i Kbar(x_i, x_j).
    void predict_train(std::span<double> out) const;

  private:
    double prefix_scale() const;  // e^{-lambda T} * dt

    std::size_t n_ = 0, n_probe_ = 0;
    double lambda_ = 0.0, lr_ = 0.0;
    bool with_train_ = false;
    bool open_ = true;
    bool signs_set_ = false;
    bool lprime_constant_ = true;
    std::size_t steps_in_ = 0;
    std::vector<double> a_;            // -sign of the step-0 derivatives
    std::vector<double> abs_d0_;       // |d| at step 0, for the constancy flag
    std::vector<double> s_probe_;      // n x n_probe running Riemann sum (unscaled)
    std::vector<double> s_train_;      // n x n running Riemann sum (unscaled)
    std::vector<double> weights_;      // scratch: |d_i| e^{lambda t}
};

struct ReconstructedKm {
    std::vector<double> a;     // n entries, each +1 or -1
    double b = 0.0;            // output offset; identically 0 for centered nets
    std::vector<double> kbar;  // n x n_probe reconstructed kernel at window end
    std::size_t n = 0;
    std::size_t n_probe = 0;
    std::size_t window_steps = 0;  // prefix with per-sample sign(d) constant
    bool full_window = false;      // window covered every requested step
    bool valid = false;            // |d| constant over the window
    // max |K - K'| / max |K| over the training-set kernel (NaN when that
    // matrix was not built). Nonzero whenever |d| varied; reported, never
    // repaired.
    double asymmetry = std::numeric_limits<double>::quiet_NaN();

    double predict(std::size_t j) const;
};

struct ReconstructionResult {
    ReconstructedKm km;
    Trajectory nn;  // full training trajectory of the source net
    // (window_steps + 1) x n_probe reconstructed probe outputs, one row per
    // prefix T = 0..window_steps.
    std::vector<double> km_probe;
    std::vector<double> kbar_train;  // n x n at window end (empty unless requested)
    std::size_t n_probe = 0;

    double km_probe_at(std::size_t t, std::size_t j) const {
        return km_probe[t * n_probe + j];
    }
};

// Trains net (in place, full batch) and accumulates its path kernel step by
// step, truncating at the first per-sample sign change of the loss
// derivative. cfg.snapshot_every > 1 is rejected: the accumulation needs the
// weights at every step.
template <class T>
ReconstructionResult reconstruct_km(MlpNet<T>& net, const double* x, const double* y,
                                    std::size_t n, const TrainConfig& cfg,
                                    bool want_train_kbar = false);

}  // namespace ntkeq
