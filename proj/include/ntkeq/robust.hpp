#pragma once
// Certified l-inf robustness. Two routes to a certificate:
//   - kernel machines g(x) = sum_i alpha_i Theta(x, x_i) over the two-layer
//     analytic kernel, bounded below on the ball via the Theta intervals and
//     an alpha sign split, then bisected for the largest certified radius;
//   - finite two-layer ReLU nets via interval bound propagation (IBP).
// A randomized attack falsifier provides the soundness cross-check: no flip
// may ever be found inside a certified radius.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntkeq/dataset.hpp"
#include "ntkeq/interval.hpp"
#include "ntkeq/mlp.hpp"

namespace ntkeq {

struct Certificate {
    std::vector<double> x0;   // center of the certified ball
    int predicted_sign = 0;   // sign of the model output at the center
    double delta = 0.0;       // certified l-inf radius (>= 0)
    int iterations = 0;       // bisection steps spent
    std::string method;       // "ntk-interval" | "ibp"
};

// g(x) = sum_i alpha_i Theta(x, x_i) with the two-layer analytic kernel.
double km_eval(std::span<const double> alpha, const LabeledDataset& train,
               std::span<const double> x);

// Same over a row-major batch (p x d) with one cross-Gram GEMM; out: p values.
void km_eval_batch(std::span<const double> alpha, const LabeledDataset& train,
                   const double* pts, std::size_t p, double* out);

// Sound lower bound of min over the ball B_inf(x0, delta) of g: positive
// alphas take the kernel's lower endpoint, negative ones the upper. Equals
// g(x0) at delta = 0.
double km_lower_bound(std::span<const double> alpha, const LabeledDataset& train,
                      std::span<const double> x0, double delta);

// Largest delta in [0, delta_max] whose lower bound certifies the predicted
// sign, bisected to absolute tolerance tol (at most max_iter halvings).
// Negative predictions are certified on the negated model; an exactly-zero
// output at the center is an undefined-prediction error.
Certificate certify_km(std::span<const double> alpha, const LabeledDataset& train,
                       std::span<const double> x0, double delta_max = 1.0,
                       double tol = 1e-7, int max_iter = 40);

// Sound output interval of a two-layer (single hidden layer) ReLU net over
// B_inf(x0, delta) by interval propagation: mu/radius through the scaled
// affine layer, elementwise ReLU clamp, then the output layer. centered
// bounds the deployed model f(w,.) - f(w0,.) by differencing the live and
// frozen passes crosswise.
template <class T>
Interval ibp_certify(const MlpNet<T>& net, std::span<const double> x0, double delta,
                     bool centered = true);

// Certified radius for the IBP bound via the same bisection as certify_km.
template <class T>
Certificate ibp_radius(const MlpNet<T>& net, std::span<const double> x0,
                       double delta_max = 1.0, double tol = 1e-7, int max_iter = 40,
                       bool centered = true);

// Evaluates the model on a row-major batch of points; out: count values.
using BatchEval = std::function<void(const double* pts, std::size_t count, double* out)>;

// Tries to flip the model's sign inside B_inf(x0, delta): random sign-corner
// samples plus greedy coordinate sign-descent, each found flip shrunk by ray
// bisection. Returns the smallest flipping radius observed, or nullopt.
// budget caps the total number of model evaluations. Deterministic in seed.
std::optional<double> attack_falsify(const BatchEval& eval, std::span<const double> x0,
                                     double delta, std::size_t budget,
                                     std::uint64_t seed = 0);

}  // namespace ntkeq
