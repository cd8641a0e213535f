#include "ntkeq/robust.hpp"

#include <algorithm>
#include <cmath>

#include "ntkeq/blasx.hpp"
#include "ntkeq/kernel.hpp"
#include "ntkeq/philox.hpp"
#include "ntkeq/simd.hpp"
#include "ntkeq/util.hpp"

namespace ntkeq {

double km_eval(std::span<const double> alpha, const LabeledDataset& train,
               std::span<const double> x) {
    if (alpha.size() != train.n) throw Error("km_eval: alpha size != training set size");
    if (x.size() != train.d) throw Error("km_eval: input dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < train.n; ++i)
        if (alpha[i] != 0.0) acc += alpha[i] * ntk2_relu(x, train.row(i));
    return acc;
}

void km_eval_batch(std::span<const double> alpha, const LabeledDataset& train,
                   const double* pts, std::size_t p, double* out) {
    if (alpha.size() != train.n) throw Error("km_eval_batch: alpha size != training set size");
    std::vector<double> probe(pts, pts + p * train.d);
    KernelMatrix k = cross_gram(KernelDescriptor::analytic(2), train, probe, p);
    // out(p) = K^T(p x n) alpha.
    blasx::gemm(true, false, p, 1, train.n, 1.0, k.values.data(), p, alpha.data(), 1,
                0.0, out, 1);
}

namespace {

// Per-(model, center) context: the delta-independent moments, so a bisection
// over delta costs O(n) per probe instead of O(n d).
struct KmBoundCtx {
    std::span<const double> alpha;
    std::size_t n, d;
    double n0;
    std::vector<double> dots;   // <x0, x_i>
    std::vector<double> xnorm;  // |x_i|

    KmBoundCtx(std::span<const double> alpha_in, const LabeledDataset& train,
               std::span<const double> x0)
        : alpha(alpha_in), n(train.n), d(train.d) {
        if (alpha.size() != n) throw Error("km_lower_bound: alpha size != training set size");
        if (x0.size() != d) throw Error("km_lower_bound: x0 dimension mismatch");
        n0 = std::sqrt(simd::dot(x0.data(), x0.data(), d));
        dots.assign(n, 0.0);
        blasx::gemv(n, d, 1.0, train.inputs.data(), d, x0.data(), 0.0, dots.data());
        xnorm.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = train.row(i);
            xnorm[i] = std::sqrt(simd::dot(r.data(), r.data(), d));
        }
    }

    // sign = -1 bounds the negated model (used for negative predictions).
    double bound(double delta, double sign) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = sign * alpha[i];
            if (a == 0.0) continue;
            const Interval t = theta_interval_from_moments(dots[i], n0, xnorm[i], d, delta);
            acc += a > 0.0 ? a * t.lo : a * t.hi;
        }
        return acc;
    }
};

// Shared bisection: largest delta in [0, delta_max] with certified(delta)
// true, assuming certified(0). iterations counts bisection steps (the initial
// full-radius probe is not one), so it is <= ceil(log2(delta_max / tol)).
template <class Pred>
double bisect_radius(const Pred& certified, double delta_max, double tol, int max_iter,
                     int& iterations) {
    if (!(delta_max > 0.0)) throw Error("certify: delta_max must be > 0");
    if (!(tol > 0.0)) throw Error("certify: tol must be > 0");
    if (max_iter < 1) throw Error("certify: max_iter must be >= 1");
    iterations = 0;
    if (certified(delta_max)) return delta_max;
    double lo = 0.0, hi = delta_max;
    while (hi - lo > tol && iterations < max_iter) {
        const double mid = 0.5 * (lo + hi);
        (certified(mid) ? lo : hi) = mid;
        ++iterations;
    }
    return lo;
}

}  // namespace

double km_lower_bound(std::span<const double> alpha, const LabeledDataset& train,
                      std::span<const double> x0, double delta) {
    if (!(delta >= 0.0)) throw Error("km_lower_bound: delta must be >= 0");
    return KmBoundCtx(alpha, train, x0).bound(delta, 1.0);
}

Certificate certify_km(std::span<const double> alpha, const LabeledDataset& train,
                       std::span<const double> x0, double delta_max, double tol,
                       int max_iter) {
    KmBoundCtx ctx(alpha, train, x0);
    const double g0 = ctx.bound(0.0, 1.0);  // degenerate intervals: exactly g(x0)
    if (g0 == 0.0)
        throw Error("certify_km: model output at the center is exactly zero; "
                    "prediction undefined");
    const double sign = g0 > 0.0 ? 1.0 : -1.0;

    Certificate cert;
    cert.x0.assign(x0.begin(), x0.end());
    cert.predicted_sign = g0 > 0.0 ? 1 : -1;
    cert.method = "ntk-interval";
    cert.delta = bisect_radius([&](double dlt) { return ctx.bound(dlt, sign) > 0.0; },
                               delta_max, tol, max_iter, cert.iterations);
    return cert;
}

namespace {

// Delta-independent halves of the IBP pass: hidden pre-activation midpoints
// mu = W x0 / sqrt(d) and per-unit radius slopes rs = |W| 1 / sqrt(d) (the
// input box has constant radius delta), plus the output weights, all in f64.
template <class T>
struct IbpCtx {
    std::size_t m;
    std::vector<double> mu_live, rs_live, wo_live;
    std::vector<double> mu_frz, rs_frz, wo_frz;

    IbpCtx(const MlpNet<T>& net, std::span<const double> x0) {
        if (net.hidden_count() != 1)
            throw Error("ibp: interval propagation covers two-layer nets (one hidden "
                        "layer); this net has " +
                        std::to_string(net.hidden_count()) + " hidden layers");
        const std::size_t d = net.input_dim();
        if (x0.size() != d) throw Error("ibp: input dimension mismatch");
        m = net.last_width();
        const double inv = 1.0 / std::sqrt(static_cast<double>(d));

        auto build = [&](const std::vector<T>& w, const std::vector<T>& wo,
                         std::vector<double>& mu, std::vector<double>& rs,
                         std::vector<double>& wod) {
            mu.assign(m, 0.0);
            rs.assign(m, 0.0);
            wod.resize(m);
            for (std::size_t r = 0; r < m; ++r) {
                const T* row = &w[r * d];
                double acc = 0.0, asum = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double wj = static_cast<double>(row[j]);
                    acc += wj * x0[j];
                    asum += std::fabs(wj);
                }
                const double wor = static_cast<double>(wo[r]);
                if (!std::isfinite(acc) || !std::isfinite(asum) || !std::isfinite(wor))
                    throw Error("ibp: nonfinite weight");
                mu[r] = acc * inv;
                rs[r] = asum * inv;
                wod[r] = wor;
            }
        };
        build(net.w[0], net.wout, mu_live, rs_live, wo_live);
        build(net.w0[0], net.wout0, mu_frz, rs_frz, wo_frz);
    }

    static Interval propagate(const std::vector<double>& mu, const std::vector<double>& rs,
                              const std::vector<double>& wo, double delta) {
        double out_mu = 0.0, out_r = 0.0;
        for (std::size_t r = 0; r < mu.size(); ++r) {
            const double zlo = mu[r] - delta * rs[r];
            const double zhi = mu[r] + delta * rs[r];
            const double alo = zlo > 0.0 ? zlo : 0.0;
            const double ahi = zhi > 0.0 ? zhi : 0.0;
            out_mu += wo[r] * 0.5 * (ahi + alo);
            out_r += std::fabs(wo[r]) * 0.5 * (ahi - alo);
        }
        return {out_mu - out_r, out_mu + out_r};
    }

    Interval output(double delta, bool centered) const {
        const Interval live = propagate(mu_live, rs_live, wo_live, delta);
        if (!centered) return live;
        const Interval frz = propagate(mu_frz, rs_frz, wo_frz, delta);
        return {live.lo - frz.hi, live.hi - frz.lo};
    }
};

}  // namespace

template <class T>
Interval ibp_certify(const MlpNet<T>& net, std::span<const double> x0, double delta,
                     bool centered) {
    if (!(delta >= 0.0)) throw Error("ibp_certify: delta must be >= 0");
    return IbpCtx<T>(net, x0).output(delta, centered);
}

template <class T>
Certificate ibp_radius(const MlpNet<T>& net, std::span<const double> x0, double delta_max,
                       double tol, int max_iter, bool centered) {
    IbpCtx<T> ctx(net, x0);
    const double f0 = ctx.output(0.0, centered).lo;  // degenerate at the forward value
    if (f0 == 0.0)
        throw Error("ibp_radius: model output at the center is exactly zero; "
                    "prediction undefined");
    const bool pos = f0 > 0.0;

    Certificate cert;
    cert.x0.assign(x0.begin(), x0.end());
    cert.predicted_sign = pos ? 1 : -1;
    cert.method = "ibp";
    auto certified = [&](double dlt) {
        const Interval iv = ctx.output(dlt, centered);
        return pos ? iv.lo > 0.0 : iv.hi < 0.0;
    };
    cert.delta = bisect_radius(certified, delta_max, tol, max_iter, cert.iterations);
    return cert;
}

template Interval ibp_certify<float>(const MlpNet<float>&, std::span<const double>, double, bool);
template Interval ibp_certify<double>(const MlpNet<double>&, std::span<const double>, double, bool);
template Certificate ibp_radius<float>(const MlpNet<float>&, std::span<const double>, double,
                                       double, int, bool);
template Certificate ibp_radius<double>(const MlpNet<double>&, std::span<const double>, double,
                                        double, int, bool);

std::optional<double> attack_falsify(const BatchEval& eval, std::span<const double> x0,
                                     double delta, std::size_t budget, std::uint64_t seed) {
    if (budget < 1) throw Error("attack_falsify: budget must be >= 1");
    if (!(delta >= 0.0)) throw Error("attack_falsify: delta must be >= 0");
    const std::size_t d = x0.size();

    double g0 = 0.0;
    eval(x0.data(), 1, &g0);
    if (delta == 0.0) return std::nullopt;
    if (g0 == 0.0) return 0.0;  // unclassified center: flipped at radius zero
    const bool pos = g0 > 0.0;
    auto flipped = [&](double v) { return pos ? v <= 0.0 : v >= 0.0; };

    std::size_t used = 1;
    std::optional<double> best;
    std::vector<double> pt(d);

    // Shrink a found flip along its ray x0 + t * dir (dir at full radius):
    // bisect the smallest flipping t, seeded by flip at t = 1.
    auto refine_ray = [&](const std::vector<double>& dir) {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 30 && used < budget && hi - lo > 1e-9; ++it) {
            const double mid = 0.5 * (lo + hi);
            for (std::size_t j = 0; j < d; ++j) pt[j] = x0[j] + mid * dir[j];
            double v = 0.0;
            eval(pt.data(), 1, &v);
            ++used;
            (flipped(v) ? hi : lo) = mid;
        }
        const double r = hi * delta;
        if (!best || r < *best) best = r;
    };

    Philox rng(seed, 0x61747461u);

    // Phase 1: random sign corners at full radius; remember the deepest flip.
    const std::size_t n_corner = std::max<std::size_t>(1, budget / 2);
    std::vector<double> batch, vals;
    std::vector<double> deep_dir;
    double deepest = 0.0;
    std::size_t done = 0;
    while (done < n_corner && used < budget) {
        const std::size_t b =
            std::min({static_cast<std::size_t>(128), n_corner - done, budget - used});
        batch.assign(b * d, 0.0);
        for (std::size_t k = 0; k < b; ++k)
            for (std::size_t j = 0; j < d; ++j)
                batch[k * d + j] = x0[j] + (rng.next_uniform() < 0.5 ? -delta : delta);
        vals.assign(b, 0.0);
        eval(batch.data(), b, vals.data());
        used += b;
        done += b;
        for (std::size_t k = 0; k < b; ++k) {
            const double depth = pos ? -vals[k] : vals[k];
            if (flipped(vals[k]) && (deep_dir.empty() || depth > deepest)) {
                deepest = depth;
                deep_dir.assign(batch.begin() + k * d, batch.begin() + (k + 1) * d);
                for (std::size_t j = 0; j < d; ++j) deep_dir[j] -= x0[j];
            }
        }
    }
    if (!deep_dir.empty()) refine_ray(deep_dir);

    // Phase 2: greedy coordinate sign-descent. Each round probes both signs of
    // every coordinate from the current point (one batched eval), composes the
    // per-coordinate winners, and ray-refines any flip.
    std::vector<double> cur(x0.begin(), x0.end());
    std::vector<double> dir(d, 0.0);
    double cur_val = g0;
    while (used + 2 * d + 1 <= budget) {
        batch.assign(2 * d * d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            double* plus = &batch[(2 * j) * d];
            double* minus = &batch[(2 * j + 1) * d];
            std::copy(cur.begin(), cur.end(), plus);
            std::copy(cur.begin(), cur.end(), minus);
            plus[j] = x0[j] + delta;
            minus[j] = x0[j] - delta;
        }
        vals.assign(2 * d, 0.0);
        eval(batch.data(), 2 * d, vals.data());
        used += 2 * d;
        for (std::size_t j = 0; j < d; ++j) {
            const bool plus_wins =
                pos ? vals[2 * j] < vals[2 * j + 1] : vals[2 * j] > vals[2 * j + 1];
            dir[j] = plus_wins ? delta : -delta;
        }
        for (std::size_t j = 0; j < d; ++j) pt[j] = x0[j] + dir[j];
        double v = 0.0;
        eval(pt.data(), 1, &v);
        ++used;
        if (flipped(v)) refine_ray(dir);
        const bool improved = pos ? v < cur_val : v > cur_val;
        if (!improved) break;
        cur_val = v;
        cur = pt;
    }
    return best;
}

}  // namespace ntkeq
