#include "ntkeq/mlp.hpp"

#include <cmath>
#include <cstring>

#include "ntkeq/blasx.hpp"
#include "ntkeq/philox.hpp"
#include "ntkeq/simd.hpp"
#include "ntkeq/util.hpp"

namespace ntkeq {

namespace {

template <class T>
std::vector<T> to_t(std::span<const double> x) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (T)x[i];
    return out;
}

constexpr std::uint64_t kBlobMagic = 0x31304c504d4b544eULL;  // "NTKMLP01" LE

}  // namespace

template <class T>
MlpNet<T>::MlpNet(std::vector<std::size_t> widths_in, std::uint64_t seed_in)
    : widths(std::move(widths_in)), seed(seed_in) {
    if (widths.empty()) throw Error("mlp: widths must at least contain the input dim");
    for (std::size_t m : widths)
        if (m == 0) throw Error("mlp: zero width");
    const std::size_t L = widths.size() - 1;
    Philox rng(seed);
    w.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        w[l].resize(widths[l + 1] * widths[l]);
        for (auto& v : w[l]) v = (T)rng.next_gauss();
    }
    const double out_scale = 1.0 / std::sqrt((double)widths.back());
    wout.resize(widths.back());
    for (auto& v : wout) v = (T)(rng.next_gauss() * out_scale);
    w0 = w;
    wout0 = wout;
}

template <class T>
std::size_t MlpNet<T>::param_count() const {
    std::size_t c = wout.size();
    for (const auto& m : w) c += m.size();
    return c;
}

template <class T>
double MlpNet<T>::wout_norm2() const {
    double acc = 0;
    for (T v : wout) acc += (double)v * (double)v;
    return acc;
}

namespace {

// Shared single-point forward keeping every post-ReLU activation. acts[l] is
// a_{l+1} (the input itself is not copied), so acts.size() == hidden count.
template <class T>
double forward_keep(const std::vector<std::size_t>& widths,
                    const std::vector<std::vector<T>>& w, const std::vector<T>& wout,
                    std::span<const double> x, std::vector<std::vector<T>>* acts) {
    if (x.size() != widths.front()) throw Error("mlp: input dimension mismatch");
    std::vector<T> a = to_t<T>(x);
    if (acts) acts->clear();
    for (std::size_t l = 0; l < w.size(); ++l) {
        std::vector<T> z(widths[l + 1]);
        blasx::gemv(widths[l + 1], widths[l], (T)(1.0 / std::sqrt((double)widths[l])),
                    w[l].data(), widths[l], a.data(), (T)0, z.data());
        simd::relu(z.data(), z.data(), z.size());
        a = std::move(z);
        if (acts) acts->push_back(a);
    }
    return (double)simd::dot(wout.data(), a.data(), a.size());
}

}  // namespace

template <class T>
double MlpNet<T>::forward_raw(std::span<const double> x) const {
    return forward_keep<T>(widths, w, wout, x, nullptr);
}

template <class T>
double MlpNet<T>::forward_frozen(std::span<const double> x) const {
    return forward_keep<T>(widths, w0, wout0, x, nullptr);
}

namespace {

// Backprop vectors dz_l = df/dz_l for l = 1..L given the activations; the
// ReLU mask is a_l > 0 (strict).
template <class T>
std::vector<std::vector<T>> backprop_vectors(const std::vector<std::size_t>& widths,
                                             const std::vector<std::vector<T>>& w,
                                             const std::vector<T>& wout,
                                             const std::vector<std::vector<T>>& acts) {
    const std::size_t L = w.size();
    std::vector<std::vector<T>> dz(L);
    if (L == 0) return dz;
    dz[L - 1].resize(widths[L]);
    simd::relu_grad(acts[L - 1].data(), wout.data(), dz[L - 1].data(), widths[L]);
    for (std::size_t l = L - 1; l-- > 0;) {
        // da_{l+1} = w[l+1]^T dz_{l+2} / sqrt(widths[l+1])
        std::vector<T> da(widths[l + 1], (T)0);
        const auto& mat = w[l + 1];  // widths[l+2] x widths[l+1]
        const T s = (T)(1.0 / std::sqrt((double)widths[l + 1]));
        for (std::size_t r = 0; r < widths[l + 2]; ++r)
            simd::axpy((T)(dz[l + 1][r] * s), mat.data() + r * widths[l + 1], da.data(), widths[l + 1]);
        dz[l].resize(widths[l + 1]);
        simd::relu_grad(acts[l].data(), da.data(), dz[l].data(), widths[l + 1]);
    }
    return dz;
}

}  // namespace

template <class T>
void MlpNet<T>::flat_gradient(std::span<const double> x, std::span<double> out) const {
    if (out.size() != param_count()) throw Error("mlp: gradient buffer size mismatch");
    std::vector<std::vector<T>> acts;
    forward_keep<T>(widths, w, wout, x, &acts);
    auto dz = backprop_vectors<T>(widths, w, wout, acts);
    std::vector<T> xt = to_t<T>(x);

    std::size_t off = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        const T* below = (l == 0) ? xt.data() : acts[l - 1].data();
        const double s = 1.0 / std::sqrt((double)widths[l]);
        for (std::size_t r = 0; r < widths[l + 1]; ++r)
            for (std::size_t c = 0; c < widths[l]; ++c)
                out[off++] = (double)dz[l][r] * (double)below[c] * s;
    }
    // Output block: gradient wrt the latent output weights w_out = sqrt(m_L) W_out,
    // i.e. a_L / sqrt(m_L); this is the scaling under which the kernel stays O(1).
    const T* last = w.empty() ? xt.data() : acts.back().data();
    const double so = 1.0 / std::sqrt((double)widths.back());
    for (std::size_t c = 0; c < widths.back(); ++c) out[off++] = (double)last[c] * so;
}

template <class T>
double MlpNet<T>::tangent_kernel(std::span<const double> x, std::span<const double> y) const {
    std::vector<std::vector<T>> ax, ay;
    forward_keep<T>(widths, w, wout, x, &ax);
    forward_keep<T>(widths, w, wout, y, &ay);
    auto dzx = backprop_vectors<T>(widths, w, wout, ax);
    auto dzy = backprop_vectors<T>(widths, w, wout, ay);
    std::vector<T> xt = to_t<T>(x), yt = to_t<T>(y);

    const std::size_t L = w.size();
    // output-layer term <a_L(x), a_L(y)> / m_L
    double k = ((L == 0) ? (double)simd::dot(xt.data(), yt.data(), xt.size())
                         : (double)simd::dot(ax.back().data(), ay.back().data(), widths.back())) /
               (double)widths.back();
    for (std::size_t l = 0; l < L; ++l) {
        const T* bx = (l == 0) ? xt.data() : ax[l - 1].data();
        const T* by = (l == 0) ? yt.data() : ay[l - 1].data();
        double d_dz = (double)simd::dot(dzx[l].data(), dzy[l].data(), widths[l + 1]);
        double d_a = (double)simd::dot(bx, by, widths[l]);
        k += d_dz * d_a / (double)widths[l];
    }
    return k;
}

// --- batch -----------------------------------------------------------------

template <class T>
void MlpNet<T>::forward_batch(const T* x, std::size_t n, Batch& batch, double* out,
                              bool frozen) const {
    const auto& wref = frozen ? w0 : w;
    const auto& wo = frozen ? wout0 : wout;
    const std::size_t L = wref.size();
    batch.n = n;
    batch.a.resize(L);
    const T* below = x;
    for (std::size_t l = 0; l < L; ++l) {
        batch.a[l].assign(n * widths[l + 1], (T)0);
        blasx::gemm(false, true, n, widths[l + 1], widths[l],
                    (T)(1.0 / std::sqrt((double)widths[l])), below, widths[l],
                    wref[l].data(), widths[l], (T)0, batch.a[l].data(), widths[l + 1]);
        simd::relu(batch.a[l].data(), batch.a[l].data(), batch.a[l].size());
        below = batch.a[l].data();
    }
    std::vector<T> outs(n);
    blasx::gemv(n, widths.back(), (T)1, below, widths.back(), wo.data(), (T)0, outs.data());
    for (std::size_t i = 0; i < n; ++i) out[i] = (double)outs[i];
}

template <class T>
void MlpNet<T>::outputs_from_batch(const Batch& batch, const T* x, double* out) const {
    const T* last = w.empty() ? x : batch.a.back().data();
    std::vector<T> outs(batch.n);
    blasx::gemv(batch.n, widths.back(), (T)1, last, widths.back(), wout.data(), (T)0, outs.data());
    for (std::size_t i = 0; i < batch.n; ++i) out[i] = (double)outs[i];
}

namespace {

// Batched backprop rows: D_L = wout o mask(A_L); D_l = (D_{l+1} w[l+1]) /
// sqrt(widths[l+1]) o mask(A_l). Returns L matrices, D[l]: n x widths[l+1].
template <class T>
std::vector<std::vector<T>> batch_backprop(const std::vector<std::size_t>& widths,
                                           const std::vector<std::vector<T>>& w,
                                           const std::vector<T>& wout,
                                           const typename MlpNet<T>::Batch& batch) {
    const std::size_t L = w.size(), n = batch.n;
    std::vector<std::vector<T>> d(L);
    if (L == 0) return d;
    d[L - 1].assign(n * widths[L], (T)0);
    for (std::size_t i = 0; i < n; ++i)
        simd::relu_grad(batch.a[L - 1].data() + i * widths[L], wout.data(),
                        d[L - 1].data() + i * widths[L], widths[L]);
    for (std::size_t l = L - 1; l-- > 0;) {
        d[l].assign(n * widths[l + 1], (T)0);
        blasx::gemm(false, false, n, widths[l + 1], widths[l + 2],
                    (T)(1.0 / std::sqrt((double)widths[l + 1])), d[l + 1].data(), widths[l + 2],
                    w[l + 1].data(), widths[l + 1], (T)0, d[l].data(), widths[l + 1]);
        for (std::size_t i = 0; i < n; ++i)
            simd::relu_grad(batch.a[l].data() + i * widths[l + 1], d[l].data() + i * widths[l + 1],
                            d[l].data() + i * widths[l + 1], widths[l + 1]);
    }
    return d;
}

}  // namespace

template <class T>
KernelMatrix MlpNet<T>::empirical_gram(const double* x, std::size_t n) const {
    const std::size_t dim = input_dim(), L = w.size();
    std::vector<T> xt(n * dim);
    for (std::size_t i = 0; i < n * dim; ++i) xt[i] = (T)x[i];

    Batch batch;
    std::vector<double> outs(n);
    forward_batch(xt.data(), n, batch, outs.data());
    auto d = batch_backprop<T>(widths, w, wout, batch);

    KernelMatrix km;
    km.rows = km.cols = n;
    km.values.assign(n * n, 0.0);
    km.descriptor = "empirical_tangent:" + std::to_string(seed);

    std::vector<T> p(n * n), q(n * n);
    // output-layer term A_L A_L^T / m_L
    const T* last = L == 0 ? xt.data() : batch.a.back().data();
    blasx::gemm(false, true, n, n, widths.back(), (T)1, last, widths.back(), last,
                widths.back(), (T)0, p.data(), n);
    const double inv_top = 1.0 / (double)widths.back();
    for (std::size_t i = 0; i < n * n; ++i) km.values[i] = (double)p[i] * inv_top;
    // hidden-layer terms
    for (std::size_t l = 0; l < L; ++l) {
        const T* below = (l == 0) ? xt.data() : batch.a[l - 1].data();
        blasx::gemm(false, true, n, n, widths[l + 1], (T)1, d[l].data(), widths[l + 1],
                    d[l].data(), widths[l + 1], (T)0, p.data(), n);
        blasx::gemm(false, true, n, n, widths[l], (T)1, below, widths[l], below, widths[l],
                    (T)0, q.data(), n);
        const double inv_m = 1.0 / (double)widths[l];
        for (std::size_t i = 0; i < n * n; ++i)
            km.values[i] += (double)p[i] * (double)q[i] * inv_m;
    }
    // exact symmetry: mirror the lower triangle
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) km.values[j * n + i] = km.values[i * n + j];
    km.refresh_fingerprint();
    return km;
}

template <class T>
KernelMatrix MlpNet<T>::empirical_cross_gram(const double* x, std::size_t n,
                                             const double* probe, std::size_t p) const {
    const std::size_t dim = input_dim(), L = w.size();
    std::vector<T> xt(n * dim), pt(p * dim);
    for (std::size_t i = 0; i < n * dim; ++i) xt[i] = (T)x[i];
    for (std::size_t i = 0; i < p * dim; ++i) pt[i] = (T)probe[i];

    Batch bx, bp;
    std::vector<double> ox(n), op(p);
    forward_batch(xt.data(), n, bx, ox.data());
    forward_batch(pt.data(), p, bp, op.data());
    auto dx = batch_backprop<T>(widths, w, wout, bx);
    auto dp = batch_backprop<T>(widths, w, wout, bp);

    KernelMatrix km;
    km.rows = n;
    km.cols = p;
    km.values.assign(n * p, 0.0);
    km.descriptor = "empirical_tangent_cross:" + std::to_string(seed);

    std::vector<T> pr(n * p), qr(n * p);
    const T* lastx = L == 0 ? xt.data() : bx.a.back().data();
    const T* lastp = L == 0 ? pt.data() : bp.a.back().data();
    blasx::gemm(false, true, n, p, widths.back(), (T)1, lastx, widths.back(), lastp,
                widths.back(), (T)0, pr.data(), p);
    const double inv_top = 1.0 / (double)widths.back();
    for (std::size_t i = 0; i < n * p; ++i) km.values[i] = (double)pr[i] * inv_top;
    for (std::size_t l = 0; l < L; ++l) {
        const T* belowx = (l == 0) ? xt.data() : bx.a[l - 1].data();
        const T* belowp = (l == 0) ? pt.data() : bp.a[l - 1].data();
        blasx::gemm(false, true, n, p, widths[l + 1], (T)1, dx[l].data(), widths[l + 1],
                    dp[l].data(), widths[l + 1], (T)0, pr.data(), p);
        blasx::gemm(false, true, n, p, widths[l], (T)1, belowx, widths[l], belowp, widths[l],
                    (T)0, qr.data(), p);
        const double inv_m = 1.0 / (double)widths[l];
        for (std::size_t i = 0; i < n * p; ++i)
            km.values[i] += (double)pr[i] * (double)qr[i] * inv_m;
    }
    km.refresh_fingerprint();
    return km;
}

// --- serialization ----------------------------------------------------------

template <class T>
void MlpNet<T>::save_blob(const std::filesystem::path& p) const {
    std::vector<std::byte> bytes;
    put_u64(bytes, kBlobMagic);
    put_u64(bytes, widths.size());
    for (std::size_t m : widths) put_u64(bytes, m);
    put_u64(bytes, seed);
    auto put_matrix = [&](const std::vector<T>& m) {
        for (T v : m) put_f64(bytes, (double)v);
    };
    for (const auto& m : w) put_matrix(m);
    put_matrix(wout);
    for (const auto& m : w0) put_matrix(m);
    put_matrix(wout0);
    write_file_bytes(p, bytes);
}

template <class T>
MlpNet<T> MlpNet<T>::load_blob(const std::filesystem::path& p) {
    auto bytes = read_file_bytes(p);
    ByteReader r{bytes};
    if (r.u64() != kBlobMagic) throw Error("net blob: bad magic in " + p.string());
    std::size_t nw = r.u64();
    if (nw == 0 || nw > 64) throw Error("net blob: implausible widths count");
    std::vector<std::size_t> widths(nw);
    for (auto& m : widths) m = r.u64();
    std::uint64_t seed = r.u64();

    MlpNet<T> net(widths, seed);  // shapes + seed; payload overwritten below
    auto get_matrix = [&](std::vector<T>& m) {
        for (auto& v : m) v = (T)r.f64();
    };
    for (auto& m : net.w) get_matrix(m);
    get_matrix(net.wout);
    for (auto& m : net.w0) get_matrix(m);
    get_matrix(net.wout0);
    if (!r.done()) throw Error("net blob: trailing bytes in " + p.string());
    return net;
}

template struct MlpNet<float>;
template struct MlpNet<double>;

}  // namespace ntkeq
