#include "ntkeq/km.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "ntkeq/blasx.hpp"
#include "ntkeq/philox.hpp"

namespace ntkeq {

namespace {

void check_finite_outputs(std::span<const double> g, std::uint64_t step,
                          std::span<const double> alpha) {
    for (double v : g) {
        if (!std::isfinite(v)) {
            double amax = 0;
            for (double a : alpha) amax = std::max(amax, std::fabs(a));
            throw Error("km: diverged at step " + std::to_string(step) +
                        " (nonfinite output, max |alpha| = " + std::to_string(amax) + ")");
        }
    }
}

}  // namespace

void sample_batch(Philox& rng, std::size_t n, std::size_t k, std::vector<std::size_t>& out) {
    if (k == 0 || k > n) throw Error("sample_batch: need 0 < k <= n");
    // Uniform draws with replacement, deduplicated (the update rules are
    // defined on index sets), so E|distinct| per draw stays uniform.
    out.clear();
    out.reserve(k);
    std::vector<char> seen(n, 0);
    while (out.size() < k) {
        const std::size_t idx = static_cast<std::size_t>(rng.next_u64() % n);
        if (!seen[idx]) {
            seen[idx] = 1;
            out.push_back(idx);
        }
    }
}

KmState::KmState(const KernelMatrix& gram_in, std::vector<double> y_in, KmConfig cfg_in)
    : gram(&gram_in), y(std::move(y_in)), cfg(cfg_in) {
    cfg.validate();
    if (gram->rows != gram->cols) throw Error("km: training Gram must be square");
    if (gram->rows != y.size()) throw Error("km: label count does not match Gram size");
    if (y.empty()) throw Error("km: empty training set");
    alpha.assign(y.size(), 0.0);
}

void KmState::outputs_into(std::span<double> out) const {
    const std::size_t n = size();
    if (out.size() != n) throw Error("km: output span size mismatch");
    blasx::gemv(n, n, 1.0, gram->values.data(), n, alpha.data(), 0.0, out.data());
}

std::vector<double> KmState::outputs() const {
    std::vector<double> g(size());
    outputs_into(g);
    return g;
}

double KmState::eval_row(std::span<const double> krow) const {
    if (krow.size() != size()) throw Error("km: kernel row length mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < krow.size(); ++i) acc += alpha[i] * krow[i];
    return acc;
}

void KmState::eval_cross(const KernelMatrix& cross, std::span<double> out) const {
    const std::size_t n = size(), p = cross.cols;
    if (cross.rows != n) throw Error("km: cross-kernel row count mismatch");
    if (out.size() != p) throw Error("km: output span size mismatch");
    // out (1 x p) = alpha (1 x n) * cross (n x p)
    blasx::gemm(false, false, 1, p, n, 1.0, alpha.data(), n, cross.values.data(), p, 0.0,
                out.data(), p);
}

void KmState::step_fullbatch() {
    const std::size_t n = size();
    std::vector<double> g(n);
    outputs_into(g);
    check_finite_outputs(g, step, alpha);

    const double decay = 1.0 - cfg.lr * cfg.lambda;
    const double s = cfg.loss.scale(n);
    for (std::size_t i = 0; i < n; ++i)
        alpha[i] = decay * alpha[i] - cfg.lr * s * dloss(cfg.loss, g[i], y[i]);
    ++step;
}

void KmState::step_minibatch(std::span<const std::size_t> batch) {
    if (batch.empty()) throw Error("km: empty minibatch");
    const std::size_t n = size();
    std::vector<char> seen(n, 0);
    for (std::size_t i : batch) {
        if (i >= n) throw Error("km: minibatch index out of range");
        if (seen[i]) throw Error("km: duplicate index in minibatch");
        seen[i] = 1;
    }

    // Read phase: g for sampled indices only (full rows of the Gram).
    std::vector<double> g(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const double* row = gram->values.data() + batch[k] * n;
        g[k] = eval_row({row, n});
    }
    check_finite_outputs(g, step, alpha);

    // Write phase: decay applies only to sampled indices.
    const double decay = 1.0 - cfg.lr * cfg.lambda;
    const double scale = cfg.lr / static_cast<double>(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const std::size_t i = batch[k];
        alpha[i] = decay * alpha[i] - scale * dloss(cfg.loss, g[k], y[i]);
    }
    ++step;
}

std::pair<double, double> KmState::loss_terms() const {
    const auto t = loss_terms_full();
    return {t.reg, t.data};
}

KmState::LossTerms KmState::loss_terms_full() const {
    const std::size_t n = size();
    std::vector<double> g(n);
    outputs_into(g);
    LossTerms t;
    for (std::size_t i = 0; i < n; ++i) t.model_norm2 += alpha[i] * g[i];
    t.reg = 0.5 * cfg.lambda * t.model_norm2;
    for (std::size_t i = 0; i < n; ++i) t.data += loss(cfg.loss, g[i], y[i]);
    t.data *= cfg.loss.scale(n);
    return t;
}

Trajectory km_train(KmState& state, const KmTrainOptions& opt) {
    const std::size_t n = state.size();
    if (opt.probe_cross && opt.probe_cross->rows != n)
        throw Error("km: probe cross-kernel row count mismatch");
    if (opt.minibatch > n) throw Error("km: minibatch larger than training set");

    Trajectory traj;
    traj.n = n;
    traj.n_probe = opt.probe_cross ? opt.probe_cross->cols : 0;
    traj.reserve(static_cast<std::size_t>(opt.max_steps));

    std::vector<double> probe_out(traj.n_probe);
    auto log_state = [&] {
        KmState::LossTerms terms;
        if (opt.record_losses) terms = state.loss_terms_full();
        if (opt.probe_cross) state.eval_cross(*opt.probe_cross, probe_out);
        traj.push(terms.data, terms.reg, terms.model_norm2, probe_out.data());
    };
    log_state();

    Philox rng(opt.batch_seed, kBatchStream);
    std::vector<std::size_t> batch;
    std::vector<double> prev;
    const bool check_conv = opt.converge_tol > 0.0;

    for (std::uint64_t t = 0; t < opt.max_steps; ++t) {
        if (check_conv) prev = state.alpha;
        if (opt.minibatch == 0) {
            state.step_fullbatch();
        } else {
            sample_batch(rng, n, opt.minibatch, batch);
            state.step_minibatch(batch);
        }
        log_state();
        if (check_conv) {
            double dmax = 0;
            for (std::size_t i = 0; i < n; ++i)
                dmax = std::max(dmax, std::fabs(state.alpha[i] - prev[i]));
            if (dmax <= opt.converge_tol) break;
        }
    }
    traj.final_train_outputs = state.outputs();
    return traj;
}

std::vector<double> krr_closed_form(const KernelMatrix& gram, std::span<const double> y,
                                    double lambda, bool* used_pseudoinverse) {
    if (gram.rows != gram.cols) throw Error("krr: Gram must be square");
    const std::size_t n = gram.rows;
    if (y.size() != n) throw Error("krr: label count does not match Gram size");
    if (!(lambda >= 0.0)) throw Error("krr: lambda must be >= 0");
    if (used_pseudoinverse) *used_pseudoinverse = false;

    std::vector<double> alpha(n);
    if (blasx::solve_spd(gram.values, n, 0.5 * lambda, y.data(), alpha.data())) return alpha;

    // Singular (or indefinite from rounding): eigendecomposition pseudo-inverse.
    if (used_pseudoinverse) *used_pseudoinverse = true;
    std::fprintf(stderr,
                 "krr: warning: K + (lambda/2) I is singular at lambda=%g; "
                 "using pseudo-inverse (minimum-norm solution)\n",
                 lambda);
    std::vector<double> a(gram.values);
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 0.5 * lambda;
    std::vector<double> eigvals(n);
    blasx::sym_eigen(a, n, eigvals);  // a now holds eigenvectors (row-major columns)
    double emax = 0;
    for (double e : eigvals) emax = std::max(emax, std::fabs(e));
    const double cutoff = emax * static_cast<double>(n) * 2.220446049250313e-16;

    // alpha = V diag(1/e) V' y over eigenvalues above the cutoff. LAPACK wrote
    // eigenvector j as column j; with row-major storage a[i*n+j] = V_ij.
    std::vector<double> vty(n, 0.0);
    blasx::gemm(true, false, n, 1, n, 1.0, a.data(), n, y.data(), 1, 0.0, vty.data(), 1);
    for (std::size_t j = 0; j < n; ++j) vty[j] = std::fabs(eigvals[j]) > cutoff ? vty[j] / eigvals[j] : 0.0;
    blasx::gemm(false, false, n, 1, n, 1.0, a.data(), n, vty.data(), 1, 0.0, alpha.data(), 1);
    return alpha;
}

}  // namespace ntkeq
