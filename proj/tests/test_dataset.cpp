// IDX round-trips, binary subsetting, synthetic tasks, and the deterministic
// digit corpus used as an MNIST stand-in.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "ntkeq/dataset.hpp"
#include "ntkeq/idx.hpp"
#include "ntkeq/util.hpp"

using namespace ntkeq;

namespace {
std::filesystem::path scratch(const char* name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}
}  // namespace

TEST_CASE("idx files round-trip byte-exactly") {
    auto dir = scratch("ntkeq_idx_rt");
    RawImages imgs;
    imgs.n = 3;
    imgs.rows = 2;
    imgs.cols = 4;
    imgs.pixels.resize(3 * 2 * 4);
    for (std::size_t i = 0; i < imgs.pixels.size(); ++i)
        imgs.pixels[i] = (std::uint8_t)(i * 11 % 256);
    RawLabels labs;
    labs.values = {7, 0, 255};

    write_idx_images(dir / "imgs", imgs);
    write_idx_labels(dir / "labs", labs);
    auto imgs2 = read_idx_images(dir / "imgs");
    auto labs2 = read_idx_labels(dir / "labs");
    CHECK(imgs2.n == imgs.n);
    CHECK(imgs2.rows == imgs.rows);
    CHECK(imgs2.cols == imgs.cols);
    CHECK(imgs2.pixels == imgs.pixels);
    CHECK(labs2.values == labs.values);

    auto ds = load_mnist_idx(dir / "imgs", dir / "labs");
    CHECK(ds.images.n == 3);
    CHECK(ds.labels.values.size() == 3);
    std::filesystem::remove_all(dir);
}

TEST_CASE("idx loader rejects truncated and mislabeled files") {
    auto dir = scratch("ntkeq_idx_bad");
    RawImages imgs;
    imgs.n = 2;
    imgs.rows = 2;
    imgs.cols = 2;
    imgs.pixels.assign(8, 42);
    write_idx_images(dir / "imgs", imgs);
    RawLabels labs;
    labs.values = {1, 2, 3};  // count mismatch vs 2 images
    write_idx_labels(dir / "labs", labs);
    CHECK_THROWS(load_mnist_idx(dir / "imgs", dir / "labs"));
    CHECK_THROWS(read_idx_labels(dir / "imgs"));  // wrong magic

    auto bytes = read_file_bytes(dir / "imgs");
    bytes.resize(bytes.size() - 3);
    write_file_bytes(dir / "trunc", bytes);
    CHECK_THROWS(read_idx_images(dir / "trunc"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("binary_subset keeps order, maps labels, scales pixels") {
    RawDataset raw;
    raw.images.n = 5;
    raw.images.rows = 1;
    raw.images.cols = 2;
    raw.images.pixels = {0, 255, 10, 20, 30, 40, 255, 0, 50, 60};
    raw.labels.values = {0, 3, 1, 0, 1};

    auto ds = binary_subset(raw, 0, 1);
    CHECK(ds.n == 4);
    CHECK(ds.d == 2);
    // order: idx 0 (digit 0 -> +1), idx 2 (digit 1 -> -1), idx 3 (+1), idx 4 (-1)
    CHECK(ds.labels[0] == 1.0);
    CHECK(ds.labels[1] == -1.0);
    CHECK(ds.labels[2] == 1.0);
    CHECK(ds.labels[3] == -1.0);
    CHECK(ds.inputs[0] == doctest::Approx(0.0));
    CHECK(ds.inputs[1] == doctest::Approx(1.0));
    CHECK(ds.inputs[2] == doctest::Approx(30.0 / 255.0));
    ds.validate();

    auto limited = binary_subset(raw, 0, 1, 2);
    CHECK(limited.n == 2);
    CHECK_THROWS(binary_subset(raw, 8, 9));  // no matching samples
}

TEST_CASE("synthetic_gaussian is deterministic, balanced, separated") {
    auto a = synthetic_gaussian(5, 200, 10, 4.0);
    auto b = synthetic_gaussian(5, 200, 10, 4.0);
    auto c = synthetic_gaussian(6, 200, 10, 4.0);
    CHECK(a.inputs == b.inputs);
    CHECK(a.fingerprint == b.fingerprint);
    CHECK(a.fingerprint != c.fingerprint);
    a.validate();

    double npos = 0;
    for (double y : a.labels) npos += (y > 0);
    CHECK(npos == 100);
    // Class means should be near +/- 2 e1.
    double mpos = 0, mneg = 0;
    for (std::size_t i = 0; i < a.n; ++i)
        (a.labels[i] > 0 ? mpos : mneg) += a.inputs[i * a.d];
    mpos /= npos;
    mneg /= (a.n - npos);
    CHECK(mpos == doctest::Approx(2.0).epsilon(0.2));
    CHECK(mneg == doctest::Approx(-2.0).epsilon(0.2));
}

TEST_CASE("take slices rows with labels") {
    auto a = synthetic_gaussian(1, 50, 4, 1.0);
    auto t = take(a, 10, 5);
    CHECK(t.n == 10);
    CHECK(t.d == 4);
    CHECK(std::equal(t.inputs.begin(), t.inputs.end(), a.inputs.begin() + 5 * 4));
    CHECK(std::equal(t.labels.begin(), t.labels.end(), a.labels.begin() + 5));
    CHECK_THROWS(take(a, 100, 0));
}

TEST_CASE("digit corpus has MNIST-matched shape and is reproducible") {
    auto dir = scratch("ntkeq_corpus");
    auto paths = generate_digit_corpus(dir);
    auto train = load_mnist_idx(paths.train_images, paths.train_labels);
    auto test = load_mnist_idx(paths.test_images, paths.test_labels);

    CHECK(train.images.n == 5923 + 6742);
    CHECK(test.images.n == 980 + 1135);
    CHECK(train.images.rows == 28);
    CHECK(train.images.cols == 28);

    std::size_t zeros = std::count(train.labels.values.begin(), train.labels.values.end(), 0);
    std::size_t ones = std::count(train.labels.values.begin(), train.labels.values.end(), 1);
    CHECK(zeros == 5923);
    CHECK(ones == 6742);

    // Both classes present early (shuffled, not blocked).
    std::size_t zeros_head = std::count(train.labels.values.begin(),
                                        train.labels.values.begin() + 100, 0);
    CHECK(zeros_head > 10);
    CHECK(zeros_head < 90);

    // Ink statistics in a plausible MNIST range: mean pixel of inked glyphs.
    double total = 0;
    for (auto px : train.images.pixels) total += px;
    double mean = total / train.images.pixels.size();
    CHECK(mean > 15.0);
    CHECK(mean < 70.0);

    // Classes are visually distinct: average center-pixel differs. Ring
    // glyphs are hollow at the center, strokes pass through it.
    double center0 = 0, center1 = 0;
    std::size_t c0 = 0, c1 = 0;
    for (std::uint32_t i = 0; i < train.images.n; ++i) {
        double v = train.images.pixels[i * 784 + 14 * 28 + 14];
        if (train.labels.values[i] == 0) { center0 += v; ++c0; }
        else { center1 += v; ++c1; }
    }
    CHECK(center0 / c0 < 40.0);
    CHECK(center1 / c1 > 80.0);

    // Idempotent: second call must not rewrite (same bytes).
    auto before = read_file_bytes(paths.train_images);
    auto paths2 = generate_digit_corpus(dir);
    auto after = read_file_bytes(paths2.train_images);
    CHECK(before == after);
    std::filesystem::remove_all(dir);
}

TEST_CASE("locate_mnist falls back to the surrogate corpus") {
    auto dir = scratch("ntkeq_locate");
    bool surrogate = false;
    auto paths = locate_mnist(dir, &surrogate);
    CHECK(surrogate);
    auto train = load_mnist_idx(paths.train_images, paths.train_labels);
    auto ds = binary_subset(train, 0, 1, 256);
    ds.validate();
    CHECK(ds.n == 256);
    CHECK(ds.d == 784);
    std::filesystem::remove_all(dir);
}
