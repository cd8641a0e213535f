#include "ntkeq/idx.hpp"

#include "ntkeq/util.hpp"

namespace ntkeq {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803u;
constexpr std::uint32_t kLabelsMagic = 0x00000801u;

std::uint32_t read_u32_be(const std::vector<std::byte>& buf, std::size_t off,
                          const char* what) {
    if (off + 4 > buf.size())
        throw Error(std::string("idx: truncated file while reading ") + what);
    return (static_cast<std::uint32_t>(buf[off]) << 24) |
           (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[off + 2]) << 8) |
           static_cast<std::uint32_t>(buf[off + 3]);
}

void put_u32_be(std::vector<std::byte>& out, std::uint32_t v) {
    out.push_back(static_cast<std::byte>((v >> 24) & 0xFF));
    out.push_back(static_cast<std::byte>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::byte>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::byte>(v & 0xFF));
}

}  // namespace

RawImages read_idx_images(const std::filesystem::path& p) {
    const auto buf = read_file_bytes(p);
    const std::uint32_t magic = read_u32_be(buf, 0, "magic");
    if (magic != kImagesMagic)
        throw Error("idx: bad image magic in " + p.string() + " (got " +
                    std::to_string(magic) + ", want 2051)");
    RawImages out;
    out.n = read_u32_be(buf, 4, "image count");
    out.rows = read_u32_be(buf, 8, "row count");
    out.cols = read_u32_be(buf, 12, "column count");
    const std::size_t want = static_cast<std::size_t>(out.n) * out.rows * out.cols;
    if (buf.size() != 16 + want)
        throw Error("idx: image payload length mismatch in " + p.string() + " (file " +
                    std::to_string(buf.size()) + " bytes, header implies " +
                    std::to_string(16 + want) + ")");
    out.pixels.resize(want);
    for (std::size_t i = 0; i < want; ++i)
        out.pixels[i] = static_cast<std::uint8_t>(buf[16 + i]);
    return out;
}

RawLabels read_idx_labels(const std::filesystem::path& p) {
    const auto buf = read_file_bytes(p);
    const std::uint32_t magic = read_u32_be(buf, 0, "magic");
    if (magic != kLabelsMagic)
        throw Error("idx: bad label magic in " + p.string() + " (got " +
                    std::to_string(magic) + ", want 2049)");
    const std::uint32_t n = read_u32_be(buf, 4, "label count");
    if (buf.size() != 8 + static_cast<std::size_t>(n))
        throw Error("idx: label payload length mismatch in " + p.string());
    RawLabels out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.values[i] = static_cast<std::uint8_t>(buf[8 + i]);
    return out;
}

RawDataset load_mnist_idx(const std::filesystem::path& images_path,
                          const std::filesystem::path& labels_path) {
    RawDataset out;
    out.images = read_idx_images(images_path);
    out.labels = read_idx_labels(labels_path);
    if (out.images.n != out.labels.values.size())
        throw Error("idx: image/label count mismatch (" + std::to_string(out.images.n) +
                    " images vs " + std::to_string(out.labels.values.size()) + " labels)");
    return out;
}

void write_idx_images(const std::filesystem::path& p, const RawImages& imgs) {
    if (imgs.pixels.size() != static_cast<std::size_t>(imgs.n) * imgs.rows * imgs.cols)
        throw Error("idx: pixel buffer inconsistent with header fields");
    std::vector<std::byte> buf;
    buf.reserve(16 + imgs.pixels.size());
    put_u32_be(buf, kImagesMagic);
    put_u32_be(buf, imgs.n);
    put_u32_be(buf, imgs.rows);
    put_u32_be(buf, imgs.cols);
    for (std::uint8_t px : imgs.pixels) buf.push_back(static_cast<std::byte>(px));
    write_file_bytes(p, buf);
}

void write_idx_labels(const std::filesystem::path& p, const RawLabels& labels) {
    std::vector<std::byte> buf;
    buf.reserve(8 + labels.values.size());
    put_u32_be(buf, kLabelsMagic);
    put_u32_be(buf, static_cast<std::uint32_t>(labels.values.size()));
    for (std::uint8_t v : labels.values) buf.push_back(static_cast<std::byte>(v));
    write_file_bytes(p, buf);
}

}  // namespace ntkeq
