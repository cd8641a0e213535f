#include "ntkeq/interval.hpp"

#include <cmath>

#include "ntkeq/kernel.hpp"
#include "ntkeq/simd.hpp"
#include "ntkeq/util.hpp"

namespace ntkeq {

namespace {
constexpr double kPi = 3.14159265358979323846;

double clamp_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

Interval norm_iv_from(double n0, std::size_t d, double delta) {
    const double slack = std::sqrt(static_cast<double>(d)) * delta;
    return {std::max(n0 - slack, 0.0), n0 + slack};
}

Interval u_iv_from(double dot0, double nref, const Interval& norm_iv, std::size_t d,
                   double delta) {
    const double slack = std::sqrt(static_cast<double>(d)) * delta * nref;
    const double num_lo = dot0 - slack;
    const double num_hi = dot0 + slack;

    // A nonnegative numerator shrinks when divided by the larger norm and
    // grows with the smaller one; a negative numerator swaps the pairing. The
    // loosening choice per endpoint keeps the bound sound.
    const double div_lo = num_lo >= 0.0 ? norm_iv.hi : norm_iv.lo;
    const double div_hi = num_hi >= 0.0 ? norm_iv.lo : norm_iv.hi;
    if (div_lo == 0.0 || div_hi == 0.0) return {-1.0, 1.0};

    return {clamp_unit(num_lo / (div_lo * nref)), clamp_unit(num_hi / (div_hi * nref))};
}
}  // namespace

Interval norm_interval(std::span<const double> x0, double delta) {
    if (!(delta >= 0.0)) throw Error("norm_interval: delta must be >= 0");
    const double n0 = std::sqrt(simd::dot(x0.data(), x0.data(), x0.size()));
    return norm_iv_from(n0, x0.size(), delta);
}

Interval u_interval(std::span<const double> x0, std::span<const double> xref,
                    double delta, const Interval& norm_iv) {
    if (x0.size() != xref.size()) throw Error("u_interval: dimension mismatch");
    const double nref = std::sqrt(simd::dot(xref.data(), xref.data(), xref.size()));
    if (nref == 0.0) throw Error("u_interval: reference point has zero norm");
    const double dot0 = simd::dot(x0.data(), xref.data(), x0.size());
    return u_iv_from(dot0, nref, norm_iv, x0.size(), delta);
}

Interval h_interval(const Interval& u_iv) {
    if (u_iv.lo < -1.0 - 1e-9 || u_iv.hi > 1.0 + 1e-9 || u_iv.lo > u_iv.hi)
        throw Error("h_interval: argument interval not inside [-1, 1]");
    const double lo = clamp_unit(u_iv.lo), hi = clamp_unit(u_iv.hi);
    const double h_lo = h_of_u(lo), h_hi = h_of_u(hi);
    const double hmax = std::max(h_lo, h_hi);
    const double ustar = h_argmin();
    const double hmin = (lo <= ustar && ustar <= hi) ? h_min() : std::min(h_lo, h_hi);
    return {hmin, hmax};
}

Interval theta_interval_from_moments(double dot0, double norm0, double normref,
                                     std::size_t d, double delta) {
    if (normref == 0.0) return {0.0, 0.0};  // Theta(., 0) is identically zero

    const Interval niv = norm_iv_from(norm0, d, delta);
    const Interval hiv = h_interval(u_iv_from(dot0, normref, niv, d, delta));

    // Negative h flips which norm endpoint is the loose one.
    const double s = normref / (2.0 * kPi * static_cast<double>(d));
    const double theta_lo = (hiv.lo >= 0.0 ? niv.lo : niv.hi) * hiv.lo * s;
    const double theta_hi = (hiv.hi >= 0.0 ? niv.hi : niv.lo) * hiv.hi * s;
    return {theta_lo, theta_hi};
}

Interval theta_interval(std::span<const double> x0, std::span<const double> xref,
                        double delta) {
    if (x0.size() != xref.size()) throw Error("theta_interval: dimension mismatch");
    if (!(delta >= 0.0)) throw Error("theta_interval: delta must be >= 0");
    const double n0 = std::sqrt(simd::dot(x0.data(), x0.data(), x0.size()));
    const double nref = std::sqrt(simd::dot(xref.data(), xref.data(), xref.size()));
    const double dot0 = simd::dot(x0.data(), xref.data(), x0.size());
    return theta_interval_from_moments(dot0, n0, nref, x0.size(), delta);
}

}  // namespace ntkeq
