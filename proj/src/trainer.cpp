#include "ntkeq/trainer.hpp"

#include <cmath>
#include <string>

#include "ntkeq/blasx.hpp"
#include "ntkeq/km.hpp"
#include "ntkeq/philox.hpp"
#include "ntkeq/simd.hpp"

namespace ntkeq {

namespace {

template <class T>
void gather_rows(const T* src, std::size_t width, std::span<const std::size_t> rows, T* dst) {
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy_n(src + rows[r] * width, width, dst + r * width);
}

}  // namespace

template <class T>
NnTrainState<T>::NnTrainState(MlpNet<T>& net_in, const double* x_in, const double* y_in,
                              std::size_t n_in, TrainConfig cfg_in)
    : net(net_in), cfg(std::move(cfg_in)), n(n_in) {
    cfg.validate();
    if (n == 0) throw Error("train: empty dataset");
    const std::size_t d = net.input_dim();
    x.resize(n * d);
    for (std::size_t i = 0; i < n * d; ++i) x[i] = static_cast<T>(x_in[i]);
    y.assign(y_in, y_in + n);
    if (cfg.n_probe) {
        if (!cfg.probe) throw Error("train: n_probe > 0 but no probe points");
        probe_x.resize(cfg.n_probe * d);
        for (std::size_t i = 0; i < probe_x.size(); ++i)
            probe_x[i] = static_cast<T>(cfg.probe[i]);
    }

    // Frozen-net outputs are constant along the trajectory; cache them once.
    f0_train.resize(n);
    raw_train.resize(n);
    {
        typename MlpNet<T>::Batch scratch;
        net.forward_batch(x.data(), n, scratch, f0_train.data(), /*frozen=*/true);
    }
    if (cfg.n_probe) {
        f0_probe.resize(cfg.n_probe);
        raw_probe.resize(cfg.n_probe);
        typename MlpNet<T>::Batch scratch;
        net.forward_batch(probe_x.data(), cfg.n_probe, scratch, f0_probe.data(), /*frozen=*/true);
    }
}

template <class T>
void NnTrainState<T>::ensure_train_forward() {
    if (train_fresh) return;
    if (train_batch.n == 0) {
        net.forward_batch(x.data(), n, train_batch, raw_train.data());
    } else {
        // Hidden weights unchanged since the batch was filled; only wout moved.
        net.outputs_from_batch(train_batch, x.data(), raw_train.data());
    }
    train_fresh = true;
}

template <class T>
void NnTrainState<T>::ensure_probe_forward() {
    if (probe_fresh || cfg.n_probe == 0) {
        probe_fresh = true;
        return;
    }
    if (probe_batch.n == 0) {
        net.forward_batch(probe_x.data(), cfg.n_probe, probe_batch, raw_probe.data());
    } else {
        net.outputs_from_batch(probe_batch, probe_x.data(), raw_probe.data());
    }
    probe_fresh = true;
}

template <class T>
typename NnTrainState<T>::LossTerms NnTrainState<T>::loss_terms() {
    ensure_train_forward();
    LossTerms lt;
    const double s = cfg.loss.scale(n);
    for (std::size_t i = 0; i < n; ++i) lt.data += loss(cfg.loss, train_output(i), y[i]);
    lt.data *= s;
    lt.wout_norm2 = net.wout_norm2();
    lt.reg = 0.5 * cfg.lambda * lt.wout_norm2;
    if (!std::isfinite(lt.data) || !std::isfinite(lt.wout_norm2))
        throw Error("train: diverged at step " + std::to_string(step_index) +
                    " (nonfinite loss)");
    return lt;
}

template <class T>
void NnTrainState<T>::step(std::span<const std::size_t> batch, const StepObserver<T>& observer) {
    ensure_train_forward();

    // Mode-scaled loss derivatives at w_t; zero outside the minibatch.
    std::vector<double> delta(n, 0.0);
    if (batch.empty()) {
        const double s = cfg.loss.scale(n);
        for (std::size_t i = 0; i < n; ++i) delta[i] = s * dloss(cfg.loss, train_output(i), y[i]);
    } else {
        const double s = 1.0 / static_cast<double>(batch.size());
        for (std::size_t i : batch) {
            if (i >= n) throw Error("train: minibatch index out of range");
            delta[i] = s * dloss(cfg.loss, train_output(i), y[i]);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(raw_train[i]) || !std::isfinite(delta[i]))
            throw Error("train: diverged at step " + std::to_string(step_index) +
                        " (nonfinite output)");

    if (observer) {
        std::vector<double> centered(n);
        for (std::size_t i = 0; i < n; ++i) centered[i] = train_output(i);
        observer(step_index, net, train_batch, centered, delta);
    }

    active_.clear();
    for (std::size_t i = 0; i < n; ++i)
        if (delta[i] != 0.0) active_.push_back(i);
    const std::size_t k = active_.size();
    const T lr = static_cast<T>(cfg.lr);
    const T decay = static_cast<T>(1.0 - cfg.lr * cfg.lambda);
    const std::size_t L = net.hidden_count();

    if (k == 0) {
        // Pure weight decay: hidden weights and activations are untouched.
        if (cfg.lambda > 0.0) simd::scale(decay, net.wout.data(), net.wout.size());
    } else {
        const std::size_t mtop = net.last_width();
        const T* top = (L > 0) ? train_batch.a[L - 1].data() : x.data();
        act_top_.resize(k * mtop);
        gather_rows(top, mtop, active_, act_top_.data());
        delta_t_.resize(k);
        for (std::size_t r = 0; r < k; ++r) delta_t_[r] = static_cast<T>(delta[active_[r]]);

        if (L > 0) {
            // dz at the top hidden level, with the data-term weight folded in;
            // must read wout before its update below.
            dz_.resize(k * mtop);
            for (std::size_t r = 0; r < k; ++r) {
                const T dr = delta_t_[r];
                const T* arow = act_top_.data() + r * mtop;
                T* zrow = dz_.data() + r * mtop;
                for (std::size_t j = 0; j < mtop; ++j)
                    zrow[j] = arow[j] > T(0) ? dr * net.wout[j] : T(0);
            }
        }

        // wout <- decay * wout - (lr / m_L) * sum_i delta_i a_L(x_i): the data
        // term descends in the latent output coordinates (gradient a_L /
        // sqrt(m_L), mapped back through the same sqrt(m_L)), while the decay
        // stays the literal lambda * wout.
        blasx::gemm(false, false, 1, mtop, k, static_cast<T>(-cfg.lr / (double)mtop),
                    delta_t_.data(), k, act_top_.data(), mtop, decay, net.wout.data(), mtop);

        // Hidden layers, top-down. Math level l = L..1: preactivation
        // z_l = w[l-1] a_{l-1} / sqrt(widths[l-1]), a_0 = x, and the batch
        // cache stores a_l at a[l-1].
        for (std::size_t l = L; l >= 1; --l) {
            const std::size_t wl = net.widths[l], wb = net.widths[l - 1];
            const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(wb)));
            const T* below = (l == 1) ? x.data() : train_batch.a[l - 2].data();
            x_active_.resize(k * wb);
            gather_rows(below, wb, active_, x_active_.data());

            if (l > 1) {
                // Backpropagate through the old w[l-1] before updating it.
                da_.resize(k * wb);
                blasx::gemm(false, false, k, wb, wl, inv_sqrt, dz_.data(), wl,
                            net.w[l - 1].data(), wb, T(0), da_.data(), wb);
            }
            blasx::gemm(true, false, wl, wb, k, -lr * inv_sqrt, dz_.data(), wl,
                        x_active_.data(), wb, T(1), net.w[l - 1].data(), wb);
            if (l > 1) {
                // dz_{l-1} = dA ∘ 1(a_{l-1} > 0), using the gathered rows.
                dz_.resize(k * wb);
                for (std::size_t r = 0; r < k * wb; ++r)
                    dz_[r] = x_active_[r] > T(0) ? da_[r] : T(0);
            }
        }

        if (L > 0) {
            // Hidden weights moved: cached activations are stale.
            train_batch = typename MlpNet<T>::Batch{};
            probe_batch = typename MlpNet<T>::Batch{};
        }
    }

    train_fresh = false;
    probe_fresh = false;
    ++step_index;
}

template <class T>
Trajectory nn_train(MlpNet<T>& net, const double* x, const double* y, std::size_t n,
                    const TrainConfig& cfg, const StepObserver<T>& observer) {
    NnTrainState<T> st(net, x, y, n, cfg);
    Trajectory traj;
    traj.n = n;
    traj.n_probe = cfg.n_probe;
    traj.reserve(static_cast<std::size_t>(cfg.steps));

    if (cfg.compute_tk0_lambda_min) {
        KernelMatrix tk0 = net.empirical_gram(x, n);
        traj.lambda_min_tk0 = blasx::sym_eigenvalues(tk0.values, n).front();
    }

    std::vector<double> probe_out(cfg.n_probe);
    auto log_state = [&] {
        auto lt = st.loss_terms();
        st.ensure_probe_forward();
        for (std::size_t j = 0; j < cfg.n_probe; ++j) probe_out[j] = st.probe_output(j);
        traj.push(lt.data, lt.reg, lt.wout_norm2, probe_out.data());
    };
    auto snapshot = [&](std::uint64_t t) {
        if (cfg.snapshot_every == 0) return;
        if (t % cfg.snapshot_every == 0 || t == cfg.steps) {
            std::filesystem::create_directories(cfg.snapshot_dir);
            net.save_blob(cfg.snapshot_dir / ("step_" + std::to_string(t) + ".net"));
        }
    };

    log_state();
    snapshot(0);

    Philox rng(cfg.batch_seed, kBatchStream);
    std::vector<std::size_t> batch;
    for (std::uint64_t t = 0; t < cfg.steps; ++t) {
        if (cfg.minibatch > 0) {
            sample_batch(rng, n, cfg.minibatch, batch);
            st.step(batch, observer);
        } else {
            st.step({}, observer);
        }
        log_state();
        snapshot(st.step_index);
    }

    traj.final_train_outputs.resize(n);
    st.ensure_train_forward();
    for (std::size_t i = 0; i < n; ++i) traj.final_train_outputs[i] = st.train_output(i);
    return traj;
}

template struct NnTrainState<float>;
template struct NnTrainState<double>;
template Trajectory nn_train<float>(MlpNet<float>&, const double*, const double*, std::size_t,
                                    const TrainConfig&, const StepObserver<float>&);
template Trajectory nn_train<double>(MlpNet<double>&, const double*, const double*, std::size_t,
                                     const TrainConfig&, const StepObserver<double>&);

}  // namespace ntkeq
