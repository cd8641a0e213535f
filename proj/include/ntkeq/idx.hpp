#pragma once
// IDX image/label container format: big-endian u32 magic and dimension
// fields, then a row-major u8 payload (magic 0x00000803 for 3-d image files,
// 0x00000801 for 1-d label files).

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ntkeq {

struct RawImages {
    std::uint32_t n = 0, rows = 0, cols = 0;
    std::vector<std::uint8_t> pixels;  // n * rows * cols, row-major
};

struct RawLabels {
    std::vector<std::uint8_t> values;
};

struct RawDataset {
    RawImages images;
    RawLabels labels;
};

RawImages read_idx_images(const std::filesystem::path& p);
RawLabels read_idx_labels(const std::filesystem::path& p);

// Loads the pair and enforces count agreement between the two files.
RawDataset load_mnist_idx(const std::filesystem::path& images_path,
                          const std::filesystem::path& labels_path);

void write_idx_images(const std::filesystem::path& p, const RawImages& imgs);
void write_idx_labels(const std::filesystem::path& p, const RawLabels& labels);

}  // namespace ntkeq
