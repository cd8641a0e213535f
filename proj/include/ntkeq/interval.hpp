#pragma once
// Interval bounds for the two-layer ReLU tangent kernel over l-inf balls:
// given a center x0 and radius delta, encloses the reachable values of |x|,
// of the cosine u(x, xref), of the angular factor h(u), and of the kernel
// Theta(x, xref) for every x with |x - x0|_inf <= delta. All bounds are sound
// (outward-directed); widening is monotone in delta.

#include <span>

namespace ntkeq {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
    double width() const { return hi - lo; }
};

// Range of |x|_2 over the ball: [max(|x0| - sqrt(d) delta, 0), |x0| + sqrt(d) delta].
Interval norm_interval(std::span<const double> x0, double delta);

// Range of u = <x, xref> / (|x| |xref|) over the ball, given the norm bounds
// from norm_interval(x0, delta). Each endpoint of the inner-product range is
// divided by whichever norm bound loosens it (sign-dependent), then the
// result is clamped into [-1, 1]. If the division would need a zero lower
// norm bound, the interval widens to the universal [-1, 1].
Interval u_interval(std::span<const double> x0, std::span<const double> xref,
                    double delta, const Interval& norm_iv);

// Range of h over u_iv (subset of [-1, 1]). h is strictly convex, so the max
// sits at an endpoint and the min at the interior critical point when u_iv
// straddles it, else at the nearer endpoint.
Interval h_interval(const Interval& u_iv);

// Range of Theta(x, xref) = |x| |xref| h(u) / (2 pi d) over the ball, pairing
// each h bound with the norm bound that loosens it (sign-dependent).
Interval theta_interval(std::span<const double> x0, std::span<const double> xref,
                        double delta);

// Same bound from precomputed moments <x0, xref>, |x0|, |xref|. The span form
// above delegates here; batched certifiers call this directly so a bisection
// over delta reuses the O(d) dot products.
Interval theta_interval_from_moments(double dot0, double norm0, double normref,
                                     std::size_t d, double delta);

}  // namespace ntkeq
