#pragma once
// Labeled binary-class datasets: MNIST-style IDX ingestion, two-digit
// subsetting with ±1 labels, synthetic Gaussian tasks, and a deterministic
// glyph corpus used when no real MNIST files are available.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntkeq/idx.hpp"

namespace ntkeq {

struct LabeledDataset {
    std::vector<double> inputs;  // n rows of d features, row-major
    std::vector<double> labels;  // each exactly +1 or -1
    std::size_t n = 0, d = 0;
    std::string source;           // human-readable provenance descriptor
    std::uint64_t fingerprint = 0;

    std::span<const double> row(std::size_t i) const {
        return {inputs.data() + i * d, d};
    }
    void refresh_fingerprint();
    void validate() const;  // throws on any invariant violation
};

// Keeps only digit_pos/digit_neg samples (order preserved), maps them to
// +1/-1, scales pixels into [0,1] by 1/255, flattens to d = rows*cols.
LabeledDataset binary_subset(const RawDataset& raw, int digit_pos, int digit_neg,
                             std::optional<std::size_t> limit = std::nullopt);

// n/2 samples per class from isotropic unit Gaussians with means
// +/- (separation/2) * e1; classes interleaved (+1 first) so prefixes stay
// balanced. Deterministic in seed.
LabeledDataset synthetic_gaussian(std::uint64_t seed, std::size_t n, std::size_t d,
                                  double separation);

// First `count` samples starting at `offset` (provenance updated).
LabeledDataset take(const LabeledDataset& ds, std::size_t count, std::size_t offset = 0);

// --- digit corpus ----------------------------------------------------------

struct MnistPaths {
    std::filesystem::path train_images, train_labels, test_images, test_labels;
};

// Renders a deterministic two-class 28x28 corpus (ring glyphs labeled 0,
// stroke glyphs labeled 1) with MNIST-matched class counts (5923/6742 train,
// 980/1135 test) and intensity statistics, and writes it as standard IDX
// files under dir. Idempotent: existing files are kept.
MnistPaths generate_digit_corpus(const std::filesystem::path& dir, std::uint64_t seed = 1);

// Returns paths to real MNIST if the NTKEQ_MNIST_DIR environment variable
// (or explicit dir) holds the four canonical files, else generates the
// surrogate corpus under cache_dir and returns that. `used_surrogate` is set
// accordingly.
MnistPaths locate_mnist(const std::filesystem::path& cache_dir, bool* used_surrogate,
                        const std::filesystem::path& explicit_dir = {});

}  // namespace ntkeq
