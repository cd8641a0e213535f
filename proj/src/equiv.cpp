#include "ntkeq/equiv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include <json.hpp>

#include "ntkeq/loss.hpp"
#include "ntkeq/simd.hpp"

namespace ntkeq {

namespace {

// q50 of an unsorted sample (average of the middle pair for even sizes).
double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    if (v.size() % 2 == 1) return v[k];
    return 0.5 * (v[k - 1] + v[k]);
}

void check_shared_config(const TrainConfig& nn_cfg, const KmConfig& km_cfg) {
    const LossSpec& a = nn_cfg.loss;
    const LossSpec& b = km_cfg.loss;
    if (a.kind != b.kind || a.C != b.C || a.eps != b.eps || a.mode != b.mode)
        throw Error("run_paired: loss mismatch between NN and KM sides");
    if (nn_cfg.lambda != km_cfg.lambda)
        throw Error("run_paired: lambda mismatch between NN and KM sides");
    if (nn_cfg.lr != km_cfg.lr)
        throw Error("run_paired: lr mismatch between NN and KM sides");
}

LabeledDataset dataset_view(const double* x, const double* y, std::size_t n, std::size_t d) {
    LabeledDataset data;
    data.inputs.assign(x, x + n * d);
    data.labels.assign(y, y + n);
    data.n = n;
    data.d = d;
    data.source = "in-memory";
    data.refresh_fingerprint();
    return data;
}

}  // namespace

std::string paired_kernel_name(PairedKernel k) {
    switch (k) {
        case PairedKernel::empirical_init: return "empirical-init";
        case PairedKernel::analytic: return "analytic";
    }
    throw Error("paired kernel: unknown kind");
}

void PairedRun::write_csv(const std::filesystem::path& p,
                          const std::vector<std::string>& meta_lines) const {
    CsvWriter csv(p);
    for (const auto& line : meta_lines) csv.meta(line);
    csv.meta("km_kernel = " + kernel_name);
    const std::size_t np = nn.n_probe;
    std::vector<std::string> cols = {"step"};
    for (std::size_t j = 0; j < np; ++j) cols.push_back("nn_probe_" + std::to_string(j));
    for (std::size_t j = 0; j < np; ++j) cols.push_back("km_probe_" + std::to_string(j));
    cols.push_back("gap");
    cols.push_back("nn_data_loss");
    cols.push_back("km_data_loss");
    csv.header(cols);
    std::vector<double> row(cols.size());
    for (std::size_t t = 0; t <= nn.steps; ++t) {
        std::size_t c = 0;
        row[c++] = static_cast<double>(t);
        for (std::size_t j = 0; j < np; ++j) row[c++] = nn.probe_at(t, j);
        for (std::size_t j = 0; j < np; ++j) row[c++] = km.probe_at(t, j);
        row[c++] = gap[t];
        row[c++] = nn.data_term[t];
        row[c++] = km.data_term[t];
        csv.row(row);
    }
}

template <class T>
PairedRun run_paired(MlpNet<T>& net, const double* x, const double* y, std::size_t n,
                     const double* probe_x, std::size_t n_probe, const TrainConfig& nn_cfg,
                     const KmConfig& km_cfg, PairedKernel kernel) {
    nn_cfg.validate();
    km_cfg.validate();
    check_shared_config(nn_cfg, km_cfg);
    if (n == 0) throw Error("run_paired: empty training set");
    if (n_probe == 0 || probe_x == nullptr)
        throw Error("run_paired: probe set required (the gap is measured on it)");

    // The KM kernel is fixed at the net's initialization, so both Grams are
    // taken before any training step.
    KernelMatrix gram_train, gram_cross;
    if (kernel == PairedKernel::empirical_init) {
        gram_train = net.empirical_gram(x, n);
        gram_cross = net.empirical_cross_gram(x, n, probe_x, n_probe);
    } else {
        const LabeledDataset data = dataset_view(x, y, n, net.input_dim());
        const KernelDescriptor desc =
            KernelDescriptor::analytic(static_cast<int>(net.hidden_count()) + 1);
        gram_train = gram(desc, data);
        std::vector<double> probe_copy(probe_x, probe_x + n_probe * net.input_dim());
        gram_cross = cross_gram(desc, data, probe_copy, n_probe);
    }

    TrainConfig cfg = nn_cfg;
    cfg.probe = probe_x;
    cfg.n_probe = n_probe;

    PairedRun out;
    out.kernel_name = gram_train.descriptor;
    out.nn = nn_train(net, x, y, n, cfg);

    KmState km_state(gram_train, std::vector<double>(y, y + n), km_cfg);
    KmTrainOptions opt;
    opt.max_steps = cfg.steps;
    opt.probe_cross = &gram_cross;
    opt.minibatch = cfg.minibatch;
    opt.batch_seed = cfg.batch_seed;
    out.km = km_train(km_state, opt);

    out.gap.resize(cfg.steps + 1, 0.0);
    for (std::size_t t = 0; t <= cfg.steps; ++t) {
        double g = 0.0;
        for (std::size_t j = 0; j < n_probe; ++j)
            g = std::max(g, std::fabs(out.nn.probe_at(t, j) - out.km.probe_at(t, j)));
        out.gap[t] = g;
        out.sup_gap = std::max(out.sup_gap, g);
    }
    return out;
}

template PairedRun run_paired<float>(MlpNet<float>&, const double*, const double*, std::size_t,
                                     const double*, std::size_t, const TrainConfig&,
                                     const KmConfig&, PairedKernel);
template PairedRun run_paired<double>(MlpNet<double>&, const double*, const double*, std::size_t,
                                      const double*, std::size_t, const TrainConfig&,
                                      const KmConfig&, PairedKernel);

std::string WidthSweepResult::to_json() const {
    nlohmann::json j;
    j["points"] = nlohmann::json::array();
    for (const auto& pt : points) {
        nlohmann::json e;
        e["width"] = pt.width;
        e["gaps"] = pt.gaps;
        e["median_gap"] = pt.median_gap;
        j["points"].push_back(e);
    }
    j["slope"] = slope;
    j["excluded_runs"] = excluded_runs;
    return j.dump(2);
}

WidthSweepResult width_sweep(const double* x, const double* y, std::size_t n,
                             const double* probe_x, std::size_t n_probe,
                             const WidthSweepConfig& cfg) {
    if (cfg.input_dim == 0) throw Error("width_sweep: input_dim required");
    if (cfg.hidden_layers == 0) throw Error("width_sweep: at least one hidden layer");
    if (cfg.seeds.empty()) throw Error("width_sweep: at least one seed");
    std::vector<std::size_t> widths = cfg.widths;
    std::sort(widths.begin(), widths.end());
    if (std::adjacent_find(widths.begin(), widths.end()) != widths.end())
        throw Error("width_sweep: duplicate widths make the slope fit degenerate");
    if (widths.size() < 3) throw Error("width_sweep: need at least 3 widths");
    if (widths.front() == 0) throw Error("width_sweep: width must be positive");
    const double decades =
        std::log10(static_cast<double>(widths.back()) / static_cast<double>(widths.front()));
    if (decades < 1.5) throw Error("width_sweep: widths must span at least 1.5 decades");

    WidthSweepResult out;
    for (std::size_t m : widths) {
        WidthSweepPoint pt;
        pt.width = m;
        std::vector<std::size_t> arch(1 + cfg.hidden_layers, m);
        arch[0] = cfg.input_dim;
        for (std::uint64_t seed : cfg.seeds) {
            try {
                MlpNetF net(arch, seed);
                PairedRun run = run_paired(net, x, y, n, probe_x, n_probe, cfg.train, cfg.km,
                                           cfg.kernel);
                pt.gaps.push_back(run.sup_gap);
            } catch (const Error& e) {
                ++out.excluded_runs;
                std::fprintf(stderr, "width_sweep: width %zu seed %llu excluded: %s\n", m,
                             static_cast<unsigned long long>(seed), e.what());
            }
        }
        if (pt.gaps.empty()) {
            std::fprintf(stderr, "width_sweep: width %zu dropped (no surviving seeds)\n", m);
            continue;
        }
        pt.median_gap = median_of(pt.gaps);
        out.points.push_back(std::move(pt));
    }
    if (out.points.size() < 3)
        throw Error("width_sweep: fewer than 3 widths survived");

    double sx = 0, sy = 0;
    for (const auto& pt : out.points) {
        if (!(pt.median_gap > 0.0))
            throw Error("width_sweep: zero gap at width " + std::to_string(pt.width) +
                        ", log-log slope undefined");
        sx += std::log(static_cast<double>(pt.width));
        sy += std::log(pt.median_gap);
    }
    const double k = static_cast<double>(out.points.size());
    const double mx = sx / k, my = sy / k;
    double num = 0, den = 0;
    for (const auto& pt : out.points) {
        const double dx = std::log(static_cast<double>(pt.width)) - mx;
        num += dx * (std::log(pt.median_gap) - my);
        den += dx * dx;
    }
    out.slope = num / den;
    return out;
}

KbarAccum::KbarAccum(std::size_t n, std::size_t n_probe, double lambda, double lr,
                     bool with_train)
    : n_(n), n_probe_(n_probe), lambda_(lambda), lr_(lr), with_train_(with_train) {
    if (n_ == 0) throw Error("reconstruct: empty training set");
    if (!(lr_ > 0.0)) throw Error("reconstruct: lr must be > 0");
    a_.assign(n_, 0.0);
    abs_d0_.assign(n_, 0.0);
    weights_.assign(n_, 0.0);
    if (n_probe_) s_probe_.assign(n_ * n_probe_, 0.0);
    if (with_train_) s_train_.assign(n_ * n_, 0.0);
}

bool KbarAccum::admit(std::uint64_t, std::span<const double> dloss) {
    if (!open_) return false;
    if (dloss.size() != n_) throw Error("reconstruct: dloss size mismatch");
    if (!signs_set_) {
        for (std::size_t i = 0; i < n_; ++i) {
            const double d = dloss[i];
            if (d == 0.0)
                throw Error("reconstruct: loss derivative is zero at step 0 (sample " +
                            std::to_string(i) + "), validity window is empty");
            a_[i] = d > 0.0 ? -1.0 : 1.0;
            abs_d0_[i] = std::fabs(d);
        }
        signs_set_ = true;
        return true;
    }
    for (std::size_t i = 0; i < n_; ++i) {
        const double d = dloss[i];
        // Required sign is -a_i; zero counts as a change.
        if (d == 0.0 || (d > 0.0) != (a_[i] < 0.0)) {
            open_ = false;
            return false;
        }
    }
    for (std::size_t i = 0; i < n_; ++i)
        if (std::fabs(dloss[i]) != abs_d0_[i]) lprime_constant_ = false;
    return true;
}

void KbarAccum::add(std::uint64_t step, std::span<const double> dloss, const double* cross,
                    const double* train) {
    if (!open_) throw Error("reconstruct: add after the validity window closed");
    if (step != steps_in_)
        throw Error("reconstruct: step " + std::to_string(steps_in_) +
                    " missing; per-step snapshots required");
    if (n_probe_ && cross == nullptr) throw Error("reconstruct: cross kernel missing");
    if (with_train_ && train == nullptr) throw Error("reconstruct: train kernel missing");
    const double growth = std::exp(lambda_ * lr_ * static_cast<double>(step));
    for (std::size_t i = 0; i < n_; ++i) weights_[i] = std::fabs(dloss[i]) * growth;
    for (std::size_t i = 0; i < n_; ++i) {
        if (n_probe_)
            simd::axpy(weights_[i], cross + i * n_probe_, s_probe_.data() + i * n_probe_,
                       n_probe_);
        if (with_train_)
            simd::axpy(weights_[i], train + i * n_, s_train_.data() + i * n_, n_);
    }
    ++steps_in_;
}

double KbarAccum::prefix_scale() const {
    return std::exp(-lambda_ * lr_ * static_cast<double>(steps_in_)) * lr_;
}

std::vector<double> KbarAccum::kbar_probe() const {
    std::vector<double> k = s_probe_;
    simd::scale(prefix_scale(), k.data(), k.size());
    return k;
}

std::vector<double> KbarAccum::kbar_train() const {
    if (!with_train_) throw Error("reconstruct: training-set kernel was not accumulated");
    std::vector<double> k = s_train_;
    simd::scale(prefix_scale(), k.data(), k.size());
    return k;
}

void KbarAccum::predict_probe(std::span<double> out) const {
    if (out.size() != n_probe_) throw Error("reconstruct: probe output size mismatch");
    const double s = prefix_scale();
    for (std::size_t j = 0; j < n_probe_; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
        simd::axpy(s * a_[i], s_probe_.data() + i * n_probe_, out.data(), n_probe_);
}

void KbarAccum::predict_train(std::span<double> out) const {
    if (!with_train_) throw Error("reconstruct: training-set kernel was not accumulated");
    if (out.size() != n_) throw Error("reconstruct: train output size mismatch");
    const double s = prefix_scale();
    for (std::size_t j = 0; j < n_; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
        simd::axpy(s * a_[i], s_train_.data() + i * n_, out.data(), n_);
}

double KbarAccum::norm2_train() const {
    if (!with_train_) throw Error("reconstruct: training-set kernel was not accumulated");
    double q = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n_; ++j) row += s_train_[i * n_ + j] * a_[j];
        q += a_[i] * row;
    }
    return q * prefix_scale();
}

double ReconstructedKm::predict(std::size_t j) const {
    double g = b;
    for (std::size_t i = 0; i < n; ++i) g += a[i] * kbar[i * n_probe + j];
    return g;
}

template <class T>
ReconstructionResult reconstruct_km(MlpNet<T>& net, const double* x, const double* y,
                                    std::size_t n, const TrainConfig& cfg,
                                    bool want_train_kbar) {
    cfg.validate();
    if (cfg.minibatch != 0)
        throw Error("reconstruct: full-batch training required (the path kernel integrates "
                    "the whole-batch derivative)");
    if (cfg.snapshot_every > 1)
        throw Error("reconstruct: per-step snapshots required, cadence " +
                    std::to_string(cfg.snapshot_every) + " is too coarse");

    const std::size_t np = cfg.n_probe;
    KbarAccum acc(n, np, cfg.lambda, cfg.lr, want_train_kbar);

    // Centered nets start at exactly zero output, so the step-0 sign pattern
    // is known before training; a zero derivative fails here, before any work.
    {
        std::vector<double> d0(n);
        const double s = cfg.loss.scale(n);
        for (std::size_t i = 0; i < n; ++i) d0[i] = s * dloss(cfg.loss, 0.0, y[i]);
        acc.admit(0, d0);
    }

    ReconstructionResult out;
    out.n_probe = np;
    out.km_probe.assign(np, 0.0);  // T = 0 row: prediction is the offset, zero
    std::vector<double> probe_row(np);

    StepObserver<T> observer = [&](std::uint64_t step, const MlpNet<T>& live,
                                   const typename MlpNet<T>::Batch&,
                                   std::span<const double>, std::span<const double> d) {
        if (!acc.open()) return;
        if (!acc.admit(step, d)) return;
        KernelMatrix cross, train;
        if (np) cross = live.empirical_cross_gram(x, n, cfg.probe, np);
        if (want_train_kbar) train = live.empirical_gram(x, n);
        acc.add(step, d, np ? cross.values.data() : nullptr,
                want_train_kbar ? train.values.data() : nullptr);
        if (np) {
            acc.predict_probe(probe_row);
            out.km_probe.insert(out.km_probe.end(), probe_row.begin(), probe_row.end());
        }
    };

    out.nn = nn_train(net, x, y, n, cfg, observer);

    out.km.a.assign(acc.a().begin(), acc.a().end());
    out.km.b = 0.0;
    out.km.kbar = acc.kbar_probe();
    out.km.n = n;
    out.km.n_probe = np;
    out.km.window_steps = acc.window_steps();
    out.km.full_window = acc.window_steps() == cfg.steps;
    out.km.valid = acc.lprime_constant();
    if (want_train_kbar) {
        out.kbar_train = acc.kbar_train();
        double off = 0.0, mag = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                mag = std::max(mag, std::fabs(out.kbar_train[i * n + j]));
                off = std::max(off, std::fabs(out.kbar_train[i * n + j] -
                                              out.kbar_train[j * n + i]));
            }
        out.km.asymmetry = mag > 0.0 ? off / mag : 0.0;
    }
    return out;
}

template ReconstructionResult reconstruct_km<float>(MlpNet<float>&, const double*, const double*,
                                                    std::size_t, const TrainConfig&, bool);
template ReconstructionResult reconstruct_km<double>(MlpNet<double>&, const double*,
                                                     const double*, std::size_t,
                                                     const TrainConfig&, bool);

}  // namespace ntkeq
