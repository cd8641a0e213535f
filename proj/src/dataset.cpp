#include "ntkeq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "ntkeq/philox.hpp"
#include "ntkeq/util.hpp"

namespace ntkeq {

void LabeledDataset::refresh_fingerprint() {
    std::uint64_t fp = fingerprint_f64(inputs);
    fp = fnv1a(std::as_bytes(std::span(labels.data(), labels.size())), fp);
    fp = fnv1a_str(std::to_string(d), fp);
    fingerprint = fp;
}

void LabeledDataset::validate() const {
    if (n < 1 || d < 1) throw Error("dataset: need n >= 1 and d >= 1");
    if (inputs.size() != n * d) throw Error("dataset: input buffer size mismatch");
    if (labels.size() != n) throw Error("dataset: label count mismatch");
    for (double v : inputs)
        if (!std::isfinite(v)) throw Error("dataset: non-finite input entry");
    for (double y : labels)
        if (y != 1.0 && y != -1.0) throw Error("dataset: label not in {-1,+1}");
}

LabeledDataset binary_subset(const RawDataset& raw, int digit_pos, int digit_neg,
                             std::optional<std::size_t> limit) {
    if (digit_pos == digit_neg) throw Error("binary_subset: digits must differ");
    const std::size_t d = static_cast<std::size_t>(raw.images.rows) * raw.images.cols;
    LabeledDataset out;
    out.d = d;
    for (std::size_t i = 0; i < raw.labels.values.size(); ++i) {
        const int lab = raw.labels.values[i];
        if (lab != digit_pos && lab != digit_neg) continue;
        if (limit && out.n == *limit) break;
        const std::uint8_t* px = raw.images.pixels.data() + i * d;
        for (std::size_t j = 0; j < d; ++j)
            out.inputs.push_back(static_cast<double>(px[j]) / 255.0);
        out.labels.push_back(lab == digit_pos ? 1.0 : -1.0);
        ++out.n;
    }
    if (out.n == 0)
        throw Error("binary_subset: no samples with digits " + std::to_string(digit_pos) +
                    "/" + std::to_string(digit_neg));
    out.source = "mnist-binary{pos=" + std::to_string(digit_pos) +
                 ",neg=" + std::to_string(digit_neg) + "}";
    out.refresh_fingerprint();
    out.validate();
    return out;
}

LabeledDataset synthetic_gaussian(std::uint64_t seed, std::size_t n, std::size_t d,
                                  double separation) {
    if (n % 2 != 0) throw Error("synthetic_gaussian: n must be even");
    if (d < 1) throw Error("synthetic_gaussian: d must be >= 1");
    if (separation < 0) throw Error("synthetic_gaussian: separation must be >= 0");
    LabeledDataset out;
    out.n = n;
    out.d = d;
    out.inputs.resize(n * d);
    out.labels.resize(n);
    Philox rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = (i % 2 == 0) ? 1.0 : -1.0;
        out.labels[i] = y;
        double* row = out.inputs.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) row[j] = rng.next_gauss();
        row[0] += y * separation / 2.0;
    }
    out.source = "synthetic{seed=" + std::to_string(seed) + ",n=" + std::to_string(n) +
                 ",d=" + std::to_string(d) + ",sep=" + CsvWriter::format_f64(separation) + "}";
    out.refresh_fingerprint();
    out.validate();
    return out;
}

LabeledDataset take(const LabeledDataset& ds, std::size_t count, std::size_t offset) {
    if (offset + count > ds.n) throw Error("take: range exceeds dataset size");
    LabeledDataset out;
    out.n = count;
    out.d = ds.d;
    out.inputs.assign(ds.inputs.begin() + offset * ds.d,
                      ds.inputs.begin() + (offset + count) * ds.d);
    out.labels.assign(ds.labels.begin() + offset, ds.labels.begin() + offset + count);
    out.source = ds.source + "[" + std::to_string(offset) + ":" +
                 std::to_string(offset + count) + "]";
    out.refresh_fingerprint();
    out.validate();
    return out;
}

// --- digit corpus ----------------------------------------------------------

namespace {

constexpr int kSide = 28;

// One 28x28 glyph. Ring (class 0): a rotated elliptical annulus with a
// saturated core and ~1px anti-aliased edges. Stroke (class 1): a thick
// slanted segment. Parameter jitter and per-pixel noise come only from rng,
// so images are fully determined by (seed, split, index).
void render_glyph(Philox& rng, int digit, std::uint8_t* out) {
    float canvas[kSide * kSide] = {};
    const double cx = 13.5 + 0.9 * rng.next_gauss();
    const double cy = 13.5 + 0.9 * rng.next_gauss();
    const double intensity = std::clamp(0.93 + 0.05 * rng.next_gauss(), 0.65, 1.0);
    if (digit == 0) {
        const double rx = std::clamp(5.6 + 0.8 * rng.next_gauss(), 3.8, 8.0);
        const double ry = std::clamp(7.2 + 0.8 * rng.next_gauss(), 4.5, 9.5);
        const double rot = 0.25 * rng.next_gauss();
        const double half_w = std::clamp(1.55 + 0.30 * rng.next_gauss(), 1.0, 2.6);
        const double cr = std::cos(rot), sr = std::sin(rot);
        for (int y = 0; y < kSide; ++y) {
            for (int x = 0; x < kSide; ++x) {
                const double dx = x - cx, dy = y - cy;
                const double ex = (cr * dx + sr * dy) / rx;
                const double ey = (-sr * dx + cr * dy) / ry;
                const double rho = std::sqrt(ex * ex + ey * ey);
                // distance from the rho=1 contour in pixel units
                const double dist = std::fabs(rho - 1.0) * 0.5 * (rx + ry);
                const double ink = std::clamp((half_w - dist) / 1.1 + 0.5, 0.0, 1.0);
                canvas[y * kSide + x] = static_cast<float>(intensity * ink);
            }
        }
    } else {
        const double top_y = 4.0 + 1.2 * rng.next_gauss();
        const double bot_y = 23.0 + 1.2 * rng.next_gauss();
        const double slant = 1.8 * rng.next_gauss();
        const double top_x = cx + slant / 2.0;
        const double bot_x = cx - slant / 2.0;
        const double half_w = std::clamp(1.25 + 0.25 * rng.next_gauss(), 0.8, 2.2);
        const double vx = bot_x - top_x, vy = bot_y - top_y;
        const double vv = vx * vx + vy * vy;
        for (int y = 0; y < kSide; ++y) {
            for (int x = 0; x < kSide; ++x) {
                const double px = x - top_x, py = y - top_y;
                const double t = std::clamp((px * vx + py * vy) / vv, 0.0, 1.0);
                const double qx = px - t * vx, qy = py - t * vy;
                const double dist = std::sqrt(qx * qx + qy * qy);
                const double ink = std::clamp((half_w - dist) / 1.1 + 0.5, 0.0, 1.0);
                canvas[y * kSide + x] = static_cast<float>(intensity * ink);
            }
        }
    }
    for (int i = 0; i < kSide * kSide; ++i) {
        double v = canvas[i];
        if (v > 0.004) v += 0.015 * (rng.next_uniform() - 0.5);
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
}

// MNIST's 0/1 class counts, so downstream subset sizes match the real data.
constexpr std::size_t kTrainZeros = 5923, kTrainOnes = 6742;
constexpr std::size_t kTestZeros = 980, kTestOnes = 1135;

void build_split(std::uint64_t seed, std::uint32_t stream, std::size_t zeros,
                 std::size_t ones, RawImages* images, RawLabels* labels) {
    const std::size_t n = zeros + ones;
    labels->values.assign(zeros, 0);
    labels->values.resize(n, 1);
    // Fisher-Yates with its own stream so the class order mixes
    Philox shuffle(seed, stream);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = shuffle.next_u64() % (i + 1);
        std::swap(labels->values[i], labels->values[j]);
    }
    images->n = static_cast<std::uint32_t>(n);
    images->rows = images->cols = kSide;
    images->pixels.resize(n * kSide * kSide);
    Philox rng(seed, stream + 1);
    for (std::size_t i = 0; i < n; ++i) {
        rng.skip_to_block(i * 512);  // generous per-image block budget
        render_glyph(rng, labels->values[i], images->pixels.data() + i * kSide * kSide);
    }
}

bool all_exist(const MnistPaths& p) {
    namespace fs = std::filesystem;
    return fs::exists(p.train_images) && fs::exists(p.train_labels) &&
           fs::exists(p.test_images) && fs::exists(p.test_labels);
}

MnistPaths paths_under(const std::filesystem::path& dir) {
    return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
            dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
}

}  // namespace

MnistPaths generate_digit_corpus(const std::filesystem::path& dir, std::uint64_t seed) {
    MnistPaths p = paths_under(dir);
    if (all_exist(p)) return p;
    std::filesystem::create_directories(dir);
    RawImages imgs;
    RawLabels labs;
    build_split(seed, 0, kTrainZeros, kTrainOnes, &imgs, &labs);
    write_idx_images(p.train_images, imgs);
    write_idx_labels(p.train_labels, labs);
    build_split(seed, 100, kTestZeros, kTestOnes, &imgs, &labs);
    write_idx_images(p.test_images, imgs);
    write_idx_labels(p.test_labels, labs);
    return p;
}

MnistPaths locate_mnist(const std::filesystem::path& cache_dir, bool* used_surrogate,
                        const std::filesystem::path& explicit_dir) {
    if (!explicit_dir.empty()) {
        MnistPaths p = paths_under(explicit_dir);
        if (!all_exist(p))
            throw Error("mnist dir missing idx files: " + explicit_dir.string());
        if (used_surrogate) *used_surrogate = false;
        return p;
    }
    if (const char* env = std::getenv("NTKEQ_MNIST_DIR")) {
        MnistPaths p = paths_under(env);
        if (all_exist(p)) {
            if (used_surrogate) *used_surrogate = false;
            return p;
        }
    }
    if (used_surrogate) *used_surrogate = true;
    return generate_digit_corpus(cache_dir / "digit_corpus");
}

}  // namespace ntkeq
