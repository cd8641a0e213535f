#include "ntkeq/util.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ntkeq {

// --- fingerprints ---------------------------------------------------------

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (std::byte b : bytes) {
        h ^= static_cast<std::uint64_t>(b);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a_str(std::string_view s, std::uint64_t seed) {
    return fnv1a(std::as_bytes(std::span(s.data(), s.size())), seed);
}

std::uint64_t fingerprint_f64(std::span<const double> values) {
    return fnv1a(std::as_bytes(values));
}

std::string fingerprint_hex(std::uint64_t fp) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
    return buf;
}

// --- config ---------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

Config Config::parse_string(std::string_view text) {
    Config c;
    std::size_t lineno = 0;
    while (!text.empty()) {
        std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = (nl == std::string_view::npos) ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        std::string_view body = line.substr(0, line.find('#'));
        body = trim(body);
        if (body.empty()) continue;
        std::size_t eq = body.find('=');
        if (eq == std::string_view::npos)
            throw Error("config line " + std::to_string(lineno) + ": expected key=value, got '" + std::string(line) + "'");
        std::string key(trim(body.substr(0, eq)));
        std::string val(trim(body.substr(eq + 1)));
        if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
        if (c.kv_.count(key)) throw Error("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        c.kv_.emplace(std::move(key), std::move(val));
    }
    return c;
}

Config Config::parse_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error("cannot open config file: " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

std::string Config::get_str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw Error("missing config key: " + key);
    return it->second;
}

std::string Config::get_str(const std::string& key, std::string fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? std::move(fallback) : it->second;
}

double Config::get_f64(const std::string& key) const {
    const std::string v = get_str(key);
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw Error("");
        return out;
    } catch (...) {
        throw Error("config key '" + key + "': not a number: '" + v + "'");
    }
}

double Config::get_f64(const std::string& key, double fallback) const {
    return has(key) ? get_f64(key) : fallback;
}

std::int64_t Config::get_i64(const std::string& key) const {
    const std::string v = get_str(key);
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw Error("config key '" + key + "': not an integer: '" + v + "'");
    return out;
}

std::int64_t Config::get_i64(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_i64(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error("config key '" + key + "': not a bool: '" + v + "'");
}

namespace {

template <class T, class Parse>
std::vector<T> parse_list(const std::string& key, const std::string& v, Parse parse) {
    std::vector<T> out;
    std::string_view rest = v;
    while (!rest.empty()) {
        std::size_t comma = rest.find(',');
        std::string_view item = trim(rest.substr(0, comma));
        rest = (comma == std::string_view::npos) ? std::string_view{} : rest.substr(comma + 1);
        if (item.empty()) throw Error("config key '" + key + "': empty list element");
        out.push_back(parse(item));
    }
    if (out.empty()) throw Error("config key '" + key + "': empty list");
    return out;
}

}  // namespace

std::vector<double> Config::get_f64_list(const std::string& key) const {
    return parse_list<double>(key, get_str(key), [&](std::string_view s) {
        try {
            std::size_t used = 0;
            double d = std::stod(std::string(s), &used);
            if (used != s.size()) throw Error("");
            return d;
        } catch (...) {
            throw Error("config key '" + key + "': bad list number '" + std::string(s) + "'");
        }
    });
}

std::vector<std::int64_t> Config::get_i64_list(const std::string& key) const {
    return parse_list<std::int64_t>(key, get_str(key), [&](std::string_view s) {
        std::int64_t out = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw Error("config key '" + key + "': bad list integer '" + std::string(s) + "'");
        return out;
    });
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

// --- CSV ------------------------------------------------------------------

struct CsvWriter::Impl {
    std::ofstream out;
    bool wrote_header = false;
    std::size_t ncols = 0;
};

CsvWriter::CsvWriter(const std::filesystem::path& p) : impl_(new Impl) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    impl_->out.open(p, std::ios::trunc);
    if (!impl_->out) {
        delete impl_;
        throw Error("cannot open for writing: " + p.string());
    }
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::meta(std::string_view line) {
    if (impl_->wrote_header) throw Error("csv: metadata must precede the header");
    impl_->out << "# " << line << '\n';
}

void CsvWriter::header(const std::vector<std::string>& cols) {
    if (impl_->wrote_header) throw Error("csv: header already written");
    if (cols.empty()) throw Error("csv: empty header");
    for (std::size_t i = 0; i < cols.size(); ++i)
        impl_->out << (i ? "," : "") << escape(cols[i]);
    impl_->out << '\n';
    impl_->wrote_header = true;
    impl_->ncols = cols.size();
}

void CsvWriter::row(const std::vector<double>& values) {
    if (!impl_->wrote_header) throw Error("csv: row before header");
    if (values.size() != impl_->ncols) throw Error("csv: row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i)
        impl_->out << (i ? "," : "") << format_f64(values[i]);
    impl_->out << '\n';
}

void CsvWriter::row_mixed(const std::vector<std::string>& fields) {
    if (!impl_->wrote_header) throw Error("csv: row before header");
    if (fields.size() != impl_->ncols) throw Error("csv: row width mismatch");
    for (std::size_t i = 0; i < fields.size(); ++i)
        impl_->out << (i ? "," : "") << escape(fields[i]);
    impl_->out << '\n';
}

void CsvWriter::flush() { impl_->out.flush(); }

std::string CsvWriter::format_f64(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string CsvWriter::escape(std::string_view field) {
    bool needs_quote = field.find_first_of(",\"\n") != std::string_view::npos;
    if (!needs_quote) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// --- binary blobs ---------------------------------------------------------

void write_file_bytes(const std::filesystem::path& p, std::span<const std::byte> bytes) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + p.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + p.string());
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary | std::ios::ate);
    if (!in) throw Error("cannot open: " + p.string());
    std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::byte> out(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(out.data()), size);
    if (!in) throw Error("read failed: " + p.string());
    return out;
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
    std::byte raw[8];
    std::memcpy(raw, &v, 8);
    out.insert(out.end(), raw, raw + 8);
}

void put_f64(std::vector<std::byte>& out, double v) {
    std::byte raw[8];
    std::memcpy(raw, &v, 8);
    out.insert(out.end(), raw, raw + 8);
}

void put_f64_span(std::vector<std::byte>& out, std::span<const double> v) {
    const std::byte* raw = reinterpret_cast<const std::byte*>(v.data());
    out.insert(out.end(), raw, raw + v.size_bytes());
}

std::uint64_t ByteReader::u64() {
    if (pos + 8 > data.size()) throw Error("blob truncated: u64 past end");
    std::uint64_t v;
    std::memcpy(&v, data.data() + pos, 8);
    pos += 8;
    return v;
}

double ByteReader::f64() {
    if (pos + 8 > data.size()) throw Error("blob truncated: f64 past end");
    double v;
    std::memcpy(&v, data.data() + pos, 8);
    pos += 8;
    return v;
}

void ByteReader::f64_span(std::span<double> out) {
    if (pos + out.size_bytes() > data.size()) throw Error("blob truncated: payload past end");
    std::memcpy(out.data(), data.data() + pos, out.size_bytes());
    pos += out.size_bytes();
}

}  // namespace ntkeq
