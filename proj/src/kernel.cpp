#include "ntkeq/kernel.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

#include "ntkeq/blasx.hpp"
#include "ntkeq/util.hpp"

namespace ntkeq {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDomainTol = 1e-9;

double clamp_unit(double u) { return u < -1.0 ? -1.0 : (u > 1.0 ? 1.0 : u); }
}  // namespace

double h_of_u(double u) {
    if (u < -1.0 - kDomainTol || u > 1.0 + kDomainTol)
        throw Error("h_of_u: argument " + std::to_string(u) + " outside [-1, 1]");
    u = clamp_unit(u);
    return 2.0 * u * (kPi - std::acos(u)) + std::sqrt(std::max(0.0, 1.0 - u * u));
}

double h_prime(double u) {
    if (u < -1.0 - kDomainTol || u > 1.0 + kDomainTol)
        throw Error("h_prime: argument outside [-1, 1]");
    u = clamp_unit(u);
    // h'(u) = 2(pi - acos u) + 2u/sqrt(1-u^2) - u/sqrt(1-u^2)
    //       = 2(pi - acos u) + u/sqrt(1-u^2);  strictly increasing on (-1, 1).
    double s = std::sqrt(std::max(0.0, 1.0 - u * u));
    if (s == 0.0) return u > 0 ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
    return 2.0 * (kPi - std::acos(u)) + u / s;
}

namespace {
double compute_h_argmin() {
    // h' is strictly increasing with h'(-1) = -inf, h'(0) = pi > 0: unique
    // root in (-1, 0). Bisect to ~1e-12.
    double lo = -1.0 + 1e-15, hi = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        (h_prime(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}
}  // namespace

double h_argmin() {
    static const double v = compute_h_argmin();
    return v;
}

double h_min() {
    static const double v = h_of_u(h_argmin());
    return v;
}

double ntk2_relu(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error("ntk2_relu: dimension mismatch");
    const std::size_t d = x.size();
    double xx = 0, yy = 0, xy = 0;
    for (std::size_t i = 0; i < d; ++i) {
        xx += x[i] * x[i];
        yy += y[i] * y[i];
        xy += x[i] * y[i];
    }
    if (xx == 0.0 || yy == 0.0) return 0.0;
    double nx = std::sqrt(xx), ny = std::sqrt(yy);
    double u = clamp_unit(xy / (nx * ny));
    return nx * ny * h_of_u(u) / (2.0 * kPi * (double)d);
}

namespace {
// Shared scalar core for the deep recursion, parameterized by the three
// second moments at the input: a = <x,x>/d, b = <y,y>/d, c = <x,y>/d.
double deep_from_moments(double a, double b, double c, int depth) {
    if (a == 0.0 || b == 0.0) return 0.0;
    const int hidden = depth - 1;
    double sigma = c;    // Sigma^0
    double theta = c;    // running sum of Sigma^h * prod of later Sigmadot
    for (int l = 1; l <= hidden; ++l) {
        double sab = std::sqrt(a * b);
        double u = clamp_unit(sigma / sab);
        double acosu = std::acos(u);
        double sigma_next = sab * (std::sqrt(std::max(0.0, 1.0 - u * u)) + (kPi - acosu) * u) / (2.0 * kPi);
        double sigma_dot = (kPi - acosu) / (2.0 * kPi);
        theta = theta * sigma_dot + sigma_next;
        sigma = sigma_next;
        a *= 0.5;
        b *= 0.5;
    }
    return theta;
}
}  // namespace

double ntk_deep_relu(std::span<const double> x, std::span<const double> y, int depth) {
    if (x.size() != y.size()) throw Error("ntk_deep_relu: dimension mismatch");
    if (depth < 2) throw Error("ntk_deep_relu: depth must be >= 2");
    const std::size_t d = x.size();
    double xx = 0, yy = 0, xy = 0;
    for (std::size_t i = 0; i < d; ++i) {
        xx += x[i] * x[i];
        yy += y[i] * y[i];
        xy += x[i] * y[i];
    }
    return deep_from_moments(xx / (double)d, yy / (double)d, xy / (double)d, depth);
}

std::string KernelDescriptor::name() const {
    switch (kind) {
        case Kind::analytic2: return "ntk2_relu";
        case Kind::analytic_deep: return "ntk_deep_relu:" + std::to_string(depth);
    }
    return "?";
}

KernelDescriptor KernelDescriptor::analytic(int depth) {
    KernelDescriptor d;
    if (depth == 2) {
        d.kind = Kind::analytic2;
        d.depth = 2;
    } else {
        d.kind = Kind::analytic_deep;
        d.depth = depth;
    }
    return d;
}

void KernelMatrix::refresh_fingerprint() {
    fingerprint = fingerprint_f64(values);
}

namespace {
// Maps an inner-product matrix entry to the kernel value given the two
// squared norms (all divided by nothing yet; d passed separately).
double entry_from_products(const KernelDescriptor& desc, double sii, double sjj,
                           double sij, std::size_t d) {
    if (sii <= 0.0 || sjj <= 0.0) return 0.0;
    if (desc.kind == KernelDescriptor::Kind::analytic2) {
        double nx = std::sqrt(sii), ny = std::sqrt(sjj);
        double u = clamp_unit(sij / (nx * ny));
        return nx * ny * h_of_u(u) / (2.0 * kPi * (double)d);
    }
    return deep_from_moments(sii / (double)d, sjj / (double)d, sij / (double)d, desc.depth);
}

// Diagonal entries have u = 1 exactly, where the generic route loses ~sqrt(eps)
// of accuracy to the square-root cusp of h. With u pinned the recursion
// collapses: every level contributes |x|^2 / (d 2^H), so the diagonal is
// (H+1) |x|^2 / (d 2^H) with H = depth - 1 hidden layers (depth 2 gives
// |x|^2 / d).
double diag_from_norm(const KernelDescriptor& desc, double sii, std::size_t d) {
    if (sii <= 0.0) return 0.0;
    int hidden = desc.kind == KernelDescriptor::Kind::analytic2 ? 1 : desc.depth - 1;
    return (double)(hidden + 1) * sii / ((double)d * std::ldexp(1.0, hidden));
}
}  // namespace

KernelMatrix gram(const KernelDescriptor& desc, const LabeledDataset& data, bool force_scalar) {
    const std::size_t n = data.n, d = data.d;
    KernelMatrix km;
    km.rows = km.cols = n;
    km.values.assign(n * n, 0.0);
    km.descriptor = desc.name();

    if (force_scalar) {
        // Reference route: pairwise scalar kernel evaluations.
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                double v = desc.kind == KernelDescriptor::Kind::analytic2
                               ? ntk2_relu(data.row(i), data.row(j))
                               : ntk_deep_relu(data.row(i), data.row(j), desc.depth);
                km.values[i * n + j] = v;
                km.values[j * n + i] = v;
            }
            double sii = 0;
            for (double v : data.row(i)) sii += v * v;
            km.values[i * n + i] = diag_from_norm(desc, sii, d);
        }
    } else {
        // Fast route: S = X X^T in one GEMM, then map entries. Only the lower
        // triangle is mapped; the mirror makes symmetry exact.
        std::vector<double> s(n * n);
        blasx::gemm(false, true, n, n, d, 1.0, data.inputs.data(), d,
                    data.inputs.data(), d, 0.0, s.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                double v = entry_from_products(desc, s[i * n + i], s[j * n + j], s[i * n + j], d);
                km.values[i * n + j] = v;
                km.values[j * n + i] = v;
            }
            km.values[i * n + i] = diag_from_norm(desc, s[i * n + i], d);
        }
    }
    km.refresh_fingerprint();
    return km;
}

KernelMatrix cross_gram(const KernelDescriptor& desc, const LabeledDataset& data,
                        const std::vector<double>& probe, std::size_t p) {
    const std::size_t n = data.n, d = data.d;
    if (probe.size() != p * d) throw Error("cross_gram: probe size mismatch");
    KernelMatrix km;
    km.rows = n;
    km.cols = p;
    km.values.assign(n * p, 0.0);
    km.descriptor = desc.name();

    std::vector<double> s(n * p);
    blasx::gemm(false, true, n, p, d, 1.0, data.inputs.data(), d, probe.data(), d,
                0.0, s.data(), p);
    std::vector<double> sii(n), pjj(p);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = data.row(i);
        double acc = 0;
        for (double v : r) acc += v * v;
        sii[i] = acc;
    }
    for (std::size_t j = 0; j < p; ++j) {
        double acc = 0;
        for (std::size_t k = 0; k < d; ++k) acc += probe[j * d + k] * probe[j * d + k];
        pjj[j] = acc;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            km.values[i * p + j] = entry_from_products(desc, sii[i], pjj[j], s[i * p + j], d);
    km.refresh_fingerprint();
    return km;
}

void write_kernel_blob(const std::string& path, const KernelMatrix& km) {
    if (km.rows != km.cols) throw Error("write_kernel_blob: matrix must be square");
    std::vector<std::byte> bytes;
    bytes.reserve(8 + km.values.size() * 8);
    put_u64(bytes, km.rows);
    put_f64_span(bytes, km.values);
    write_file_bytes(path, bytes);
}

KernelMatrix read_kernel_blob(const std::string& path) {
    auto bytes = read_file_bytes(path);
    ByteReader r{bytes};
    KernelMatrix km;
    km.rows = km.cols = r.u64();
    if (bytes.size() != 8 + km.rows * km.rows * 8)
        throw Error("gram cache corrupt: " + path);
    km.values.assign(km.rows * km.rows, 0.0);
    r.f64_span(km.values);
    km.refresh_fingerprint();
    return km;
}

KernelMatrix gram_cached(const KernelDescriptor& desc, const LabeledDataset& data,
                         const std::string& cache_dir) {
    std::filesystem::create_directories(cache_dir);
    std::string key = desc.name() + ":" + fingerprint_hex(data.fingerprint);
    std::string path = cache_dir + "/gram_" + fingerprint_hex(fnv1a_str(key)) + ".kmat";
    if (std::filesystem::exists(path)) {
        KernelMatrix km = read_kernel_blob(path);
        if (km.rows != data.n) throw Error("gram cache corrupt (size mismatch): " + path);
        km.descriptor = desc.name();
        return km;
    }
    KernelMatrix km = gram(desc, data);
    write_kernel_blob(path, km);
    return km;
}

}  // namespace ntkeq
