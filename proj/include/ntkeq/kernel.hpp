#pragma once
// Analytic tangent kernels for fully-connected ReLU nets without biases,
// plus Gram/cross-Gram assembly with an on-disk cache.
//
// Two-layer closed form:  Theta(x,y) = |x||y| h(u) / (2 pi d),  u = cos angle,
// with h(u) = 2u(pi - acos u) + sqrt(1 - u^2).  Deeper nets use the layerwise
// arc-cosine recursion; at depth 2 it reduces exactly to the closed form.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntkeq/dataset.hpp"

namespace ntkeq {

// h(u) on [-1, 1]; inputs within 1e-9 outside are clamped, anything farther
// is a domain error. h(-1) = 0, h(0) = 1, h(1) = 2 pi.
double h_of_u(double u);
// First derivative (strictly increasing on the open interval); used by the
// interval bounds and the attack gradient.
double h_prime(double u);
// Argmin of h on [-1, 1] and the attained minimum. Computed once by
// bisection on h' to ~1e-12 and cached.
double h_argmin();
double h_min();

// Two-layer ReLU tangent kernel. Either argument all-zero gives 0.
double ntk2_relu(std::span<const double> x, std::span<const double> y);

// Depth = number of weight layers (depth 2 = one hidden layer). depth >= 2.
double ntk_deep_relu(std::span<const double> x, std::span<const double> y, int depth);

// Identifies a kernel for Gram assembly and cache keying.
struct KernelDescriptor {
    enum class Kind { analytic2, analytic_deep };
    Kind kind = Kind::analytic2;
    int depth = 2;  // used by analytic_deep

    std::string name() const;
    static KernelDescriptor analytic(int depth);
};

struct KernelMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major
    std::string descriptor;
    std::uint64_t fingerprint = 0;  // over values

    double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    void refresh_fingerprint();
};

// Symmetric Gram over a dataset. The fast path forms X X^T with one GEMM and
// maps entries through the closed form; a scalar pairwise route exists for
// cross-checking (force_scalar).
KernelMatrix gram(const KernelDescriptor& desc, const LabeledDataset& data,
                  bool force_scalar = false);

// rows = dataset points, cols = probe points (probe is row-major p x d).
KernelMatrix cross_gram(const KernelDescriptor& desc, const LabeledDataset& data,
                        const std::vector<double>& probe, std::size_t p);

// Gram with a binary cache keyed by kernel descriptor + dataset fingerprint.
// Blob layout: u64 n, then n*n little-endian f64.
KernelMatrix gram_cached(const KernelDescriptor& desc, const LabeledDataset& data,
                         const std::string& cache_dir);

void write_kernel_blob(const std::string& path, const KernelMatrix& km);
KernelMatrix read_kernel_blob(const std::string& path);

}  // namespace ntkeq
