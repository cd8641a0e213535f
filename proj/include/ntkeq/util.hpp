#pragma once
// Shared plumbing: error type, FNV-1a content fingerprints, flat key=value
// config files, CSV emission with '#' metadata lines, and little-endian
// binary blob helpers used by the kernel cache and weight snapshots.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ntkeq {

static_assert(std::endian::native == std::endian::little,
              "blob and cache formats are little-endian; big-endian hosts are unsupported");

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- fingerprints ---------------------------------------------------------

// FNV-1a, 64-bit. Stable across platforms; used to key kernel caches and to
// stamp emitted artifacts with their input identity.
std::uint64_t fnv1a(std::span<const std::byte> bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a_str(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fingerprint_f64(std::span<const double> values);
std::string fingerprint_hex(std::uint64_t fp);

// --- config ---------------------------------------------------------------

// Flat key=value file; '#' starts a comment; keys are unique; values are
// free-form strings interpreted by the typed getters. serialize() emits keys
// sorted so parse->serialize->parse is the identity.
class Config {
public:
    Config() = default;
    static Config parse_file(const std::filesystem::path& p);
    static Config parse_string(std::string_view text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, std::string value) { kv_[key] = std::move(value); }

    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, std::string fallback) const;
    double get_f64(const std::string& key) const;
    double get_f64(const std::string& key, double fallback) const;
    std::int64_t get_i64(const std::string& key) const;
    std::int64_t get_i64(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // comma-separated lists
    std::vector<double> get_f64_list(const std::string& key) const;
    std::vector<std::int64_t> get_i64_list(const std::string& key) const;

    std::string serialize() const;
    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

// --- CSV ------------------------------------------------------------------

// RFC-4180-style writer: optional '#'-prefixed metadata lines, one header
// row, then data rows. Numbers are printed round-trippably (%.17g).
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& p);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void meta(std::string_view line);
    void header(const std::vector<std::string>& cols);
    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& fields);
    void flush();

    static std::string format_f64(double v);
    static std::string escape(std::string_view field);

private:
    struct Impl;
    Impl* impl_;
};

// --- binary blobs ---------------------------------------------------------

void write_file_bytes(const std::filesystem::path& p, std::span<const std::byte> bytes);
std::vector<std::byte> read_file_bytes(const std::filesystem::path& p);

// Little-endian primitive IO against a growing byte buffer / cursor.
void put_u64(std::vector<std::byte>& out, std::uint64_t v);
void put_f64(std::vector<std::byte>& out, double v);
void put_f64_span(std::vector<std::byte>& out, std::span<const double> v);

struct ByteReader {
    std::span<const std::byte> data;
    std::size_t pos = 0;
    std::uint64_t u64();
    double f64();
    void f64_span(std::span<double> out);
    bool done() const { return pos == data.size(); }
};

}  // namespace ntkeq
