#pragma once
// Finite-width fully-connected ReLU net, NTK parameterization: hidden weights
// are N(0,1) with an explicit 1/sqrt(fan-in) forward scaling, no biases, and
// the output layer is stored post-scaling (wout = w/sqrt(m_L)) so the
// regularizer (lambda/2)|wout|^2 and its gradient are literal. A frozen deep
// copy of the init supports output centering (f0 == 0) and lets certification
// compare trained vs initial nets. ReLU'(0) = 0 everywhere.
//
// The weight element type T is float for the training hot path and double for
// analysis/tests; all public scalar interfaces take and return f64.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ntkeq/kernel.hpp"

namespace ntkeq {

template <class T>
struct MlpNet {
    // widths[0] = input dim d; widths[1..L] = hidden widths. L may be 0, in
    // which case the net is the linear map x -> <wout, x> with wout stored as
    // w/sqrt(d) (fan-in of the output layer is widths.back()).
    std::vector<std::size_t> widths;
    std::vector<std::vector<T>> w;   // w[l]: widths[l+1] x widths[l], row-major, l = 0..L-1
    std::vector<T> wout;             // widths.back(), stored post-scaling
    std::vector<std::vector<T>> w0;  // frozen init (immutable after construction)
    std::vector<T> wout0;
    std::uint64_t seed = 0;

    MlpNet(std::vector<std::size_t> widths_in, std::uint64_t seed_in);

    std::size_t input_dim() const { return widths.front(); }
    std::size_t hidden_count() const { return widths.size() - 1; }
    std::size_t last_width() const { return widths.back(); }
    std::size_t param_count() const;
    double wout_norm2() const;  // |W^(L+1)|^2 of the live net

    // Single-point forward passes (f64 in/out; internal math in T).
    double forward_raw(std::span<const double> x) const;     // live weights
    double forward_frozen(std::span<const double> x) const;  // init weights
    double forward_centered(std::span<const double> x) const {
        return forward_raw(x) - forward_frozen(x);
    }

    // Flat gradient of the (centered == raw) output w.r.t. all live
    // parameters, layout [w[0] row-major, ..., w[L-1], wout].
    void flat_gradient(std::span<const double> x, std::span<double> out) const;

    // Tangent kernel <grad f(x), grad f(y)> via the layerwise decomposition
    //   <aL(x), aL(y)> + sum_l <dz_l(x), dz_l(y)> <a_{l-1}(x), a_{l-1}(y)> / m_{l-1};
    // cross-checked against flat_gradient dot products in tests.
    double tangent_kernel(std::span<const double> x, std::span<const double> y) const;

    // --- batch interface (row-major x: n rows of input_dim) ---------------

    struct Batch {
        std::size_t n = 0;
        std::vector<std::vector<T>> a;  // post-ReLU activations, a[l]: n x widths[l+1]
    };

    // Fills batch activations and writes raw outputs (f64). frozen selects
    // the init weights.
    void forward_batch(const T* x, std::size_t n, Batch& batch, double* out,
                       bool frozen = false) const;
    // Recomputes outputs from existing activations (valid while hidden
    // weights are unchanged; only wout may have moved).
    void outputs_from_batch(const Batch& batch, const T* x, double* out) const;

    // Empirical tangent Gram over rows of x (n x n, f64 accumulation of
    // T-precision GEMMs).
    KernelMatrix empirical_gram(const double* x, std::size_t n) const;
    // rows = x points (n), cols = probe points (p).
    KernelMatrix empirical_cross_gram(const double* x, std::size_t n,
                                      const double* probe, std::size_t p) const;

    // Versioned blob: widths header + row-major f64 payloads (live then
    // frozen weights). T = float round-trips exactly through f64.
    void save_blob(const std::filesystem::path& p) const;
    static MlpNet load_blob(const std::filesystem::path& p);
};

using MlpNetF = MlpNet<float>;
using MlpNetD = MlpNet<double>;

}  // namespace ntkeq
