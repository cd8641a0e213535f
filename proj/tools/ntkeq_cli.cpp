// Experiment driver. Subcommands bind the library into reproducible runs:
//   equiv        paired net / kernel-machine training, single runs or width sweeps
//   robust       certified l-inf radii for kernel models (ntk) or two-layer nets (ibp)
//   genbound     generalization-bound trajectory of a reconstructed kernel machine
//   krr          ridge-regression accuracy + certificate table over a lambda grid
//   reconstruct  rebuild a trained net as an explicit kernel machine and compare
// Every artifact embeds the resolved config and input fingerprints in '#'
// metadata, so a CSV is self-describing; identical config + seeds reproduce
// identical bytes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ntkeq/blasx.hpp"
#include "ntkeq/dataset.hpp"
#include "ntkeq/equiv.hpp"
#include "ntkeq/genbound.hpp"
#include "ntkeq/kernel.hpp"
#include "ntkeq/km.hpp"
#include "ntkeq/robust.hpp"
#include "ntkeq/trainer.hpp"
#include "ntkeq/util.hpp"

namespace {

using namespace ntkeq;
namespace fs = std::filesystem;

// --- invocation -------------------------------------------------------------

struct CliArgs {
    std::string subcommand;
    fs::path config_path;
    fs::path out_dir = "out";
    fs::path cache_dir = "cache";
    std::size_t jobs = 1;
    std::uint64_t seed_offset = 0;
};

constexpr const char* kUsage =
    "usage: ntkeq <equiv|robust|genbound|krr|reconstruct> --config FILE\n"
    "             [--out DIR] [--cache DIR] [--jobs N] [--seed-offset K]\n";

CliArgs parse_args(int argc, char** argv) {
    if (argc < 2) throw Error(std::string("missing subcommand\n") + kUsage);
    CliArgs args;
    args.subcommand = argv[1];
    const std::vector<std::string> known = {"equiv", "robust", "genbound", "krr",
                                            "reconstruct"};
    if (std::find(known.begin(), known.end(), args.subcommand) == known.end())
        throw Error("unknown subcommand '" + args.subcommand + "'\n" + kUsage);

    auto need_value = [&](int i, const char* flag) {
        if (i + 1 >= argc) throw Error(std::string(flag) + " needs a value\n" + kUsage);
        return std::string(argv[i + 1]);
    };
    for (int i = 2; i < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--config") {
            args.config_path = need_value(i, "--config");
        } else if (flag == "--out") {
            args.out_dir = need_value(i, "--out");
        } else if (flag == "--cache") {
            args.cache_dir = need_value(i, "--cache");
        } else if (flag == "--jobs") {
            args.jobs = static_cast<std::size_t>(std::stoull(need_value(i, "--jobs")));
            if (args.jobs < 1) throw Error("--jobs must be >= 1");
        } else if (flag == "--seed-offset") {
            args.seed_offset =
                static_cast<std::uint64_t>(std::stoull(need_value(i, "--seed-offset")));
        } else {
            throw Error("unknown flag '" + flag + "'\n" + kUsage);
        }
    }
    if (args.config_path.empty())
        throw Error(std::string("--config is required\n") + kUsage);
    return args;
}

// --- config -> domain objects ------------------------------------------------

struct Splits {
    LabeledDataset train, test;
    bool surrogate = false;
};

Splits load_splits(const Config& cfg, const CliArgs& args) {
    Splits s;
    const std::string kind = cfg.get_str("dataset", "synthetic");
    if (kind == "synthetic") {
        const auto seed = static_cast<std::uint64_t>(cfg.get_i64("data_seed", 1));
        const auto d = static_cast<std::size_t>(cfg.get_i64("input_dim"));
        const auto train_n = static_cast<std::size_t>(cfg.get_i64("train_n"));
        const auto test_n = static_cast<std::size_t>(cfg.get_i64("test_n", 64));
        const double sep = cfg.get_f64("separation", 2.0);
        s.train = synthetic_gaussian(seed, train_n, d, sep);
        s.test = synthetic_gaussian(seed + 1, test_n, d, sep);
        return s;
    }
    if (kind == "mnist") {
        const MnistPaths paths = locate_mnist(args.cache_dir / "mnist", &s.surrogate,
                                              cfg.get_str("mnist_dir", ""));
        const RawDataset raw_train = load_mnist_idx(paths.train_images, paths.train_labels);
        const RawDataset raw_test = load_mnist_idx(paths.test_images, paths.test_labels);
        const int pos = static_cast<int>(cfg.get_i64("digit_pos", 0));
        const int neg = static_cast<int>(cfg.get_i64("digit_neg", 1));
        auto limit = [](std::int64_t v) {
            return v > 0 ? std::optional<std::size_t>(static_cast<std::size_t>(v))
                         : std::nullopt;
        };
        s.train = binary_subset(raw_train, pos, neg, limit(cfg.get_i64("train_limit", 0)));
        s.test = binary_subset(raw_test, pos, neg, limit(cfg.get_i64("test_limit", 0)));
        return s;
    }
    throw Error("dataset must be 'synthetic' or 'mnist', got '" + kind + "'");
}

LossSpec loss_from(const Config& cfg) {
    LossSpec loss;
    loss.kind = LossSpec::kind_from_name(cfg.get_str("loss", "hinge"));
    loss.C = cfg.get_f64("loss_c", 1.0);
    loss.eps = cfg.get_f64("loss_eps", 0.0);
    const std::string mode = cfg.get_str("loss_mode", "mean");
    if (mode != "mean" && mode != "sum")
        throw Error("loss_mode must be 'mean' or 'sum', got '" + mode + "'");
    loss.mode = mode == "mean" ? SumMode::mean : SumMode::sum;
    loss.validate();
    return loss;
}

TrainConfig train_config_from(const Config& cfg) {
    TrainConfig tc;
    tc.loss = loss_from(cfg);
    tc.lambda = cfg.get_f64("lambda", 0.0);
    tc.lr = cfg.get_f64("lr");
    tc.steps = static_cast<std::uint64_t>(cfg.get_i64("steps"));
    tc.minibatch = static_cast<std::size_t>(cfg.get_i64("minibatch", 0));
    tc.batch_seed = static_cast<std::uint64_t>(cfg.get_i64("batch_seed", 0));
    tc.validate();
    return tc;
}

std::vector<std::uint64_t> seed_list(const Config& cfg, std::uint64_t offset) {
    std::vector<std::uint64_t> seeds;
    for (std::int64_t v : cfg.get_i64_list("seeds")) {
        if (v < 0) throw Error("seeds must be >= 0");
        seeds.push_back(static_cast<std::uint64_t>(v) + offset);
    }
    if (seeds.empty()) throw Error("seeds list is empty");
    return seeds;
}

std::vector<std::size_t> width_list(const Config& cfg) {
    std::vector<std::size_t> widths;
    const std::string key = cfg.has("widths") ? "widths" : "width";
    for (std::int64_t v : cfg.get_i64_list(key)) {
        if (v < 1) throw Error("widths must be >= 1");
        widths.push_back(static_cast<std::size_t>(v));
    }
    if (widths.empty()) throw Error("width list is empty");
    return widths;
}

std::vector<std::size_t> net_shape(std::size_t input_dim, std::size_t width,
                                   std::size_t hidden_layers) {
    if (hidden_layers < 1) throw Error("hidden_layers must be >= 1");
    std::vector<std::size_t> shape(1 + hidden_layers, width);
    shape[0] = input_dim;
    return shape;
}

// Metadata stamped into every artifact: the resolved config plus the
// identity of the inputs it was computed from.
std::vector<std::string> artifact_meta(const CliArgs& args, const Config& cfg,
                                       const Splits& data) {
    std::vector<std::string> meta;
    meta.push_back("tool = ntkeq " + args.subcommand);
    meta.push_back("seed_offset = " + std::to_string(args.seed_offset));
    for (const auto& [k, v] : cfg.entries()) meta.push_back("config." + k + " = " + v);
    meta.push_back("train_source = " + data.train.source);
    meta.push_back("train_fingerprint = " + fingerprint_hex(data.train.fingerprint));
    meta.push_back("test_source = " + data.test.source);
    meta.push_back("test_fingerprint = " + fingerprint_hex(data.test.fingerprint));
    return meta;
}

// Runs fn(0..count-1) on `jobs` worker threads; the first exception wins and
// is rethrown after all workers drain.
void parallel_for(std::size_t jobs, std::size_t count,
                  const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double q = 0.0;
    for (double x : v) q += (x - m) * (x - m);
    return std::sqrt(q / static_cast<double>(v.size()));
}

// Fraction of test points whose predicted sign matches the label, given the
// n x p train-to-test kernel.
double cross_accuracy(std::span<const double> alpha, const KernelMatrix& cross,
                      std::span<const double> labels) {
    const std::size_t p = cross.cols;
    std::vector<double> g(p, 0.0);
    blasx::gemm(true, false, p, 1, cross.rows, 1.0, cross.values.data(), p, alpha.data(), 1,
                0.0, g.data(), 1);
    std::size_t hits = 0;
    for (std::size_t j = 0; j < p; ++j)
        if ((g[j] > 0.0 ? 1.0 : -1.0) == labels[j]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(p);
}

// --- equiv -------------------------------------------------------------------

int cmd_equiv(const Config& cfg, const CliArgs& args) {
    const Splits data = load_splits(cfg, args);
    const auto seeds = seed_list(cfg, args.seed_offset);
    const auto widths = width_list(cfg);
    const auto hidden = static_cast<std::size_t>(cfg.get_i64("hidden_layers", 1));
    const auto probe_n =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.get_i64("probe_n", 10)), data.test.n);
    if (probe_n == 0) throw Error("equiv: probe_n must be >= 1");

    TrainConfig tc = train_config_from(cfg);
    tc.probe = data.test.inputs.data();
    tc.n_probe = probe_n;
    KmConfig kc;
    kc.loss = tc.loss;
    kc.lambda = tc.lambda;
    kc.lr = tc.lr;
    const std::string kernel_key = cfg.get_str("kernel", "empirical");
    if (kernel_key != "empirical" && kernel_key != "analytic")
        throw Error("kernel must be 'empirical' or 'analytic', got '" + kernel_key + "'");
    const PairedKernel kernel = kernel_key == "analytic" ? PairedKernel::analytic
                                                         : PairedKernel::empirical_init;
    const auto meta = artifact_meta(args, cfg, data);
    fs::create_directories(args.out_dir);

    if (cfg.get_str("mode", "paired") == "sweep") {
        WidthSweepConfig sc;
        sc.input_dim = data.train.d;
        sc.hidden_layers = hidden;
        sc.widths = widths;
        sc.seeds = seeds;
        sc.train = tc;
        sc.km = kc;
        sc.kernel = kernel;
        const WidthSweepResult res = width_sweep(data.train.inputs.data(),
                                                 data.train.labels.data(), data.train.n,
                                                 tc.probe, probe_n, sc);
        const std::string json = res.to_json();
        write_file_bytes(args.out_dir / "width_sweep.json",
                         std::as_bytes(std::span(json.data(), json.size())));
        CsvWriter csv(args.out_dir / "summary.csv");
        for (const auto& line : meta) csv.meta(line);
        csv.meta("slope = " + CsvWriter::format_f64(res.slope));
        csv.meta("excluded_runs = " + std::to_string(res.excluded_runs));
        csv.header({"width", "median_gap", "surviving_seeds"});
        for (const auto& pt : res.points)
            csv.row({static_cast<double>(pt.width), pt.median_gap,
                     static_cast<double>(pt.gaps.size())});
        std::cout << "wrote " << (args.out_dir / "width_sweep.json").string()
                  << " (slope = " << res.slope << ")\n";
        return 0;
    }

    const bool f64 = cfg.get_str("precision", "f32") == "f64";
    struct Row {
        std::size_t width = 0;
        std::uint64_t seed = 0;
        double sup_gap = 0.0, nn_scale = 0.0;
    };
    std::vector<Row> rows(widths.size() * seeds.size());
    parallel_for(args.jobs, rows.size(), [&](std::size_t idx) {
        const std::size_t w = widths[idx / seeds.size()];
        const std::uint64_t seed = seeds[idx % seeds.size()];
        const auto shape = net_shape(data.train.d, w, hidden);
        PairedRun run = [&] {
            if (f64) {
                MlpNetD net(shape, seed);
                return run_paired(net, data.train.inputs.data(), data.train.labels.data(),
                                  data.train.n, tc.probe, probe_n, tc, kc, kernel);
            }
            MlpNetF net(shape, seed);
            return run_paired(net, data.train.inputs.data(), data.train.labels.data(),
                              data.train.n, tc.probe, probe_n, tc, kc, kernel);
        }();
        double scale = 0.0;
        for (double v : run.nn.probe) scale = std::max(scale, std::fabs(v));
        auto m = meta;
        m.push_back("width = " + std::to_string(w));
        m.push_back("seed = " + std::to_string(seed));
        const fs::path p =
            args.out_dir / ("paired_w" + std::to_string(w) + "_s" + std::to_string(seed) + ".csv");
        run.write_csv(p, m);
        rows[idx] = {w, seed, run.sup_gap, scale};
    });

    CsvWriter csv(args.out_dir / "summary.csv");
    for (const auto& line : meta) csv.meta(line);
    csv.header({"width", "seed", "sup_gap", "nn_scale", "relative_gap"});
    for (const auto& r : rows)
        csv.row({static_cast<double>(r.width), static_cast<double>(r.seed), r.sup_gap,
                 r.nn_scale, r.nn_scale > 0.0 ? r.sup_gap / r.nn_scale : 0.0});
    std::cout << "wrote " << rows.size() << " paired runs under " << args.out_dir.string()
              << "\n";
    return 0;
}

// --- robust ------------------------------------------------------------------

struct CertStats {
    std::vector<double> radii;
    std::size_t skipped = 0;      // undefined prediction at the center
    std::size_t attack_flips = 0;
};

void write_cert_csv(const fs::path& p, const std::vector<std::string>& meta,
                    const std::vector<Certificate>& certs, std::span<const double> labels,
                    const CertStats& stats) {
    CsvWriter csv(p);
    for (const auto& line : meta) csv.meta(line);
    csv.meta("mean_radius = " + CsvWriter::format_f64(mean_of(stats.radii)));
    csv.meta("std_radius = " + CsvWriter::format_f64(std_of(stats.radii)));
    csv.meta("skipped = " + std::to_string(stats.skipped));
    csv.meta("attack_flips = " + std::to_string(stats.attack_flips));
    csv.header({"index", "true_label", "predicted_sign", "certified_radius", "method"});
    for (std::size_t j = 0; j < certs.size(); ++j)
        csv.row_mixed({std::to_string(j), CsvWriter::format_f64(labels[j]),
                       std::to_string(certs[j].predicted_sign),
                       CsvWriter::format_f64(certs[j].delta), certs[j].method});
}

int cmd_robust(const Config& cfg, const CliArgs& args) {
    const Splits data = load_splits(cfg, args);
    const std::string method = cfg.get_str("method");
    const auto cert_n =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.get_i64("cert_n", 100)), data.test.n);
    const double delta_max = cfg.get_f64("delta_max", 1.0);
    const double tol = cfg.get_f64("tol", 1e-7);
    const auto budget = static_cast<std::size_t>(cfg.get_i64("attack_budget", 0));
    const auto meta = artifact_meta(args, cfg, data);

    if (method == "ntk") {
        const int depth = static_cast<int>(cfg.get_i64("depth", 2));
        if (depth != 2)
            throw Error("robust: interval certification covers the two-layer kernel "
                        "(depth = 2); got depth = " + std::to_string(depth));
        const KernelMatrix gram = gram_cached(KernelDescriptor::analytic(depth), data.train,
                                              args.cache_dir.string());
        std::vector<double> alpha;
        const std::string model = cfg.get_str("model", "svm");
        if (model == "krr") {
            bool pseudo = false;
            alpha = krr_closed_form(gram, data.train.labels, cfg.get_f64("krr_lambda"), &pseudo);
        } else if (model == "svm") {
            KmConfig kc;
            kc.loss = loss_from(cfg);
            kc.lambda = cfg.get_f64("lambda", 0.0);
            kc.lr = cfg.get_f64("lr");
            KmState st(gram, data.train.labels, kc);
            KmTrainOptions opt;
            opt.max_steps = static_cast<std::uint64_t>(cfg.get_i64("steps"));
            opt.record_losses = false;
            km_train(st, opt);
            alpha = std::move(st.alpha);
        } else {
            throw Error("robust: model must be 'svm' or 'krr', got '" + model + "'");
        }

        std::vector<Certificate> certs;
        CertStats stats;
        BatchEval closure = [&](const double* pts, std::size_t count, double* out) {
            km_eval_batch(alpha, data.train, pts, count, out);
        };
        for (std::size_t j = 0; j < cert_n; ++j) {
            Certificate cert;
            try {
                cert = certify_km(alpha, data.train, data.test.row(j), delta_max, tol);
            } catch (const Error&) {
                ++stats.skipped;
                continue;
            }
            if (budget > 0 && cert.delta > 0.0 &&
                attack_falsify(closure, data.test.row(j), cert.delta, budget, j))
                ++stats.attack_flips;
            stats.radii.push_back(cert.delta);
            certs.push_back(std::move(cert));
        }
        const KernelMatrix cross =
            cross_gram(KernelDescriptor::analytic(depth), data.train, data.test.inputs,
                       data.test.n);
        const double acc = cross_accuracy(alpha, cross, data.test.labels);

        fs::create_directories(args.out_dir);
        auto m = meta;
        m.push_back("accuracy = " + CsvWriter::format_f64(acc));
        write_cert_csv(args.out_dir / "certs.csv", m, certs, data.test.labels, stats);
        std::cout << "certified " << stats.radii.size() << "/" << cert_n
                  << " points: mean radius " << mean_of(stats.radii) << ", accuracy " << acc
                  << ", attack flips " << stats.attack_flips << "\n";
        return 0;
    }

    if (method == "ibp") {
        if (cfg.get_i64("hidden_layers", 1) != 1)
            throw Error("robust: method=ibp needs a two-layer net (hidden_layers = 1)");
        const auto seeds = seed_list(cfg, args.seed_offset);
        const auto widths = width_list(cfg);
        if (widths.size() != 1) throw Error("robust: ibp takes a single width per run");
        TrainConfig tc = train_config_from(cfg);
        fs::create_directories(args.out_dir);

        struct SeedRow {
            std::uint64_t seed = 0;
            double accuracy = 0.0, mean = 0.0, stdev = 0.0;
            std::size_t skipped = 0;
        };
        std::vector<SeedRow> summary(seeds.size());
        parallel_for(args.jobs, seeds.size(), [&](std::size_t si) {
            MlpNetF net(net_shape(data.train.d, widths[0], 1), seeds[si]);
            nn_train(net, data.train.inputs.data(), data.train.labels.data(), data.train.n,
                     tc);
            std::vector<Certificate> certs;
            CertStats stats;
            for (std::size_t j = 0; j < cert_n; ++j) {
                try {
                    Certificate cert = ibp_radius(net, data.test.row(j), delta_max, tol);
                    stats.radii.push_back(cert.delta);
                    certs.push_back(std::move(cert));
                } catch (const Error&) {
                    ++stats.skipped;
                }
            }
            std::size_t hits = 0;
            for (std::size_t j = 0; j < data.test.n; ++j) {
                const double f = net.forward_centered(data.test.row(j));
                if ((f > 0.0 ? 1.0 : -1.0) == data.test.labels[j]) ++hits;
            }
            auto m = meta;
            m.push_back("seed = " + std::to_string(seeds[si]));
            const double acc = static_cast<double>(hits) / static_cast<double>(data.test.n);
            m.push_back("accuracy = " + CsvWriter::format_f64(acc));
            write_cert_csv(args.out_dir / ("certs_s" + std::to_string(seeds[si]) + ".csv"), m,
                           certs, data.test.labels, stats);
            summary[si] = {seeds[si], acc, mean_of(stats.radii), std_of(stats.radii),
                           stats.skipped};
        });

        CsvWriter csv(args.out_dir / "summary.csv");
        for (const auto& line : meta) csv.meta(line);
        csv.header({"seed", "accuracy", "mean_radius", "std_radius", "skipped"});
        for (const auto& r : summary)
            csv.row({static_cast<double>(r.seed), r.accuracy, r.mean, r.stdev,
                     static_cast<double>(r.skipped)});
        std::cout << "wrote " << seeds.size() << " ibp certificate files under "
                  << args.out_dir.string() << "\n";
        return 0;
    }

    throw Error("robust: method must be 'ntk' or 'ibp', got '" + method + "'");
}

// --- krr ---------------------------------------------------------------------

int cmd_krr(const Config& cfg, const CliArgs& args) {
    const Splits data = load_splits(cfg, args);
    const std::vector<double> lambdas = cfg.get_f64_list("lambdas");
    if (lambdas.empty()) throw Error("krr: lambda list is empty");
    for (double l : lambdas)
        if (!(l >= 0.0)) throw Error("krr: lambdas must be >= 0");
    const auto cert_n =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.get_i64("cert_n", 100)), data.test.n);
    const double delta_max = cfg.get_f64("delta_max", 1.0);
    const double tol = cfg.get_f64("tol", 1e-7);

    const KernelMatrix gram =
        gram_cached(KernelDescriptor::analytic(2), data.train, args.cache_dir.string());
    const KernelMatrix cross =
        cross_gram(KernelDescriptor::analytic(2), data.train, data.test.inputs, data.test.n);

    struct Row {
        double lambda = 0.0;
        bool pseudo = false;
        double accuracy = 0.0, mean = 0.0, stdev = 0.0;
        std::size_t skipped = 0;
    };
    std::vector<Row> rows(lambdas.size());
    parallel_for(args.jobs, lambdas.size(), [&](std::size_t li) {
        Row r;
        r.lambda = lambdas[li];
        std::vector<double> alpha =
            krr_closed_form(gram, data.train.labels, r.lambda, &r.pseudo);
        r.accuracy = cross_accuracy(alpha, cross, data.test.labels);
        std::vector<double> radii;
        for (std::size_t j = 0; j < cert_n; ++j) {
            try {
                radii.push_back(
                    certify_km(alpha, data.train, data.test.row(j), delta_max, tol).delta);
            } catch (const Error&) {
                ++r.skipped;
            }
        }
        r.mean = mean_of(radii);
        r.stdev = std_of(radii);
        rows[li] = r;
    });

    fs::create_directories(args.out_dir);
    CsvWriter csv(args.out_dir / "krr_table.csv");
    for (const auto& line : artifact_meta(args, cfg, data)) csv.meta(line);
    csv.header({"lambda", "pseudo_inverse", "accuracy", "mean_radius", "std_radius",
                "skipped"});
    for (const auto& r : rows)
        csv.row({r.lambda, r.pseudo ? 1.0 : 0.0, r.accuracy, r.mean, r.stdev,
                 static_cast<double>(r.skipped)});
    std::cout << "wrote " << (args.out_dir / "krr_table.csv").string() << " ("
              << lambdas.size() << " lambdas)\n";
    return 0;
}

// --- reconstruct ---------------------------------------------------------------

int cmd_reconstruct(const Config& cfg, const CliArgs& args) {
    const Splits data = load_splits(cfg, args);
    const auto seeds = seed_list(cfg, args.seed_offset);
    const auto widths = width_list(cfg);
    if (widths.size() != 1) throw Error("reconstruct: takes a single width per run");
    const auto hidden = static_cast<std::size_t>(cfg.get_i64("hidden_layers", 1));
    const auto probe_n =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.get_i64("probe_n", 10)), data.test.n);
    if (probe_n == 0) throw Error("reconstruct: probe_n must be >= 1");
    const bool want_train = cfg.get_bool("train_kernel", false);
    const bool f64 = cfg.get_str("precision", "f64") == "f64";

    TrainConfig tc = train_config_from(cfg);
    tc.probe = data.test.inputs.data();
    tc.n_probe = probe_n;

    const auto meta = artifact_meta(args, cfg, data);
    fs::create_directories(args.out_dir);

    struct Row {
        std::uint64_t seed = 0;
        std::size_t window = 0;
        bool full = false, valid = false;
        double asymmetry = 0.0, max_gap = 0.0, nn_scale = 0.0;
    };
    std::vector<Row> rows(seeds.size());
    parallel_for(args.jobs, seeds.size(), [&](std::size_t si) {
        const auto shape = net_shape(data.train.d, widths[0], hidden);
        ReconstructionResult res = [&] {
            if (f64) {
                MlpNetD net(shape, seeds[si]);
                return reconstruct_km(net, data.train.inputs.data(), data.train.labels.data(),
                                      data.train.n, tc, want_train);
            }
            MlpNetF net(shape, seeds[si]);
            return reconstruct_km(net, data.train.inputs.data(), data.train.labels.data(),
                                  data.train.n, tc, want_train);
        }();

        auto m = meta;
        m.push_back("seed = " + std::to_string(seeds[si]));
        m.push_back("window_steps = " + std::to_string(res.km.window_steps));
        m.push_back("full_window = " + std::string(res.km.full_window ? "true" : "false"));
        m.push_back("derivative_constant = " + std::string(res.km.valid ? "true" : "false"));
        CsvWriter csv(args.out_dir / ("reconstruct_s" + std::to_string(seeds[si]) + ".csv"));
        for (const auto& line : m) csv.meta(line);
        std::vector<std::string> cols = {"step"};
        for (std::size_t j = 0; j < probe_n; ++j) cols.push_back("nn_probe_" + std::to_string(j));
        for (std::size_t j = 0; j < probe_n; ++j) cols.push_back("km_probe_" + std::to_string(j));
        cols.push_back("gap");
        csv.header(cols);

        Row r;
        r.seed = seeds[si];
        r.window = res.km.window_steps;
        r.full = res.km.full_window;
        r.valid = res.km.valid;
        r.asymmetry = res.km.asymmetry;
        std::vector<double> vals(cols.size());
        for (std::size_t t = 0; t <= res.km.window_steps; ++t) {
            std::size_t c = 0;
            vals[c++] = static_cast<double>(t);
            double gap = 0.0;
            for (std::size_t j = 0; j < probe_n; ++j) {
                const double nn = res.nn.probe_at(t, j);
                vals[c++] = nn;
                r.nn_scale = std::max(r.nn_scale, std::fabs(nn));
            }
            for (std::size_t j = 0; j < probe_n; ++j) {
                const double km = res.km_probe_at(t, j);
                vals[c++] = km;
                gap = std::max(gap, std::fabs(km - res.nn.probe_at(t, j)));
            }
            vals[c] = gap;
            r.max_gap = std::max(r.max_gap, gap);
            csv.row(vals);
        }
        rows[si] = r;
    });

    CsvWriter csv(args.out_dir / "summary.csv");
    for (const auto& line : meta) csv.meta(line);
    csv.header({"seed", "window_steps", "full_window", "derivative_constant", "asymmetry",
                "max_gap", "nn_scale", "relative_gap"});
    for (const auto& r : rows)
        csv.row({static_cast<double>(r.seed), static_cast<double>(r.window),
                 r.full ? 1.0 : 0.0, r.valid ? 1.0 : 0.0, r.asymmetry, r.max_gap, r.nn_scale,
                 r.nn_scale > 0.0 ? r.max_gap / r.nn_scale : 0.0});
    std::cout << "wrote " << seeds.size() << " reconstruction runs under "
              << args.out_dir.string() << "\n";
    return 0;
}

// --- genbound ------------------------------------------------------------------

int cmd_genbound(const Config& cfg, const CliArgs& args) {
    const Splits data = load_splits(cfg, args);
    const auto seeds = seed_list(cfg, args.seed_offset);
    const auto widths = width_list(cfg);
    if (widths.size() != 1) throw Error("genbound: takes a single width per run");
    const auto hidden = static_cast<std::size_t>(cfg.get_i64("hidden_layers", 1));
    const double confidence = cfg.get_f64("confidence", 0.99);
    if (!(confidence > 0.0 && confidence < 1.0))
        throw Error("genbound: confidence must lie in (0, 1)");
    const auto log_every = static_cast<std::uint64_t>(cfg.get_i64("log_every", 1));
    const bool f64 = cfg.get_str("precision", "f64") == "f64";
    const TrainConfig tc = train_config_from(cfg);

    const auto meta = artifact_meta(args, cfg, data);
    fs::create_directories(args.out_dir);

    struct Row {
        std::uint64_t seed = 0;
        std::size_t window = 0;
        bool full = false;
        double final_bound = 0.0, final_test_loss = 0.0, cap = 0.0;
        std::size_t violations = 0;  // logged rows with bound below held-out loss
    };
    std::vector<Row> rows(seeds.size());
    parallel_for(args.jobs, seeds.size(), [&](std::size_t si) {
        const auto shape = net_shape(data.train.d, widths[0], hidden);
        BoundTrajectory traj = [&] {
            if (f64) {
                MlpNetD net(shape, seeds[si]);
                return bound_trajectory(net, data.train.inputs.data(),
                                        data.train.labels.data(), data.train.n,
                                        data.test.inputs.data(), data.test.labels.data(),
                                        data.test.n, tc, 1.0 - confidence, log_every);
            }
            MlpNetF net(shape, seeds[si]);
            return bound_trajectory(net, data.train.inputs.data(), data.train.labels.data(),
                                    data.train.n, data.test.inputs.data(),
                                    data.test.labels.data(), data.test.n, tc,
                                    1.0 - confidence, log_every);
        }();
        auto m = meta;
        m.push_back("seed = " + std::to_string(seeds[si]));
        traj.write_csv(args.out_dir / ("bound_s" + std::to_string(seeds[si]) + ".csv"), m);

        Row r;
        r.seed = seeds[si];
        r.window = traj.window_steps;
        r.full = traj.full_window;
        r.final_bound = traj.report.final_bound;
        r.final_test_loss = traj.rows.back().test_loss;
        r.cap = traj.report.loss_cap;
        for (const auto& row : traj.rows)
            if (row.final_bound < row.test_loss) ++r.violations;
        rows[si] = r;
    });

    CsvWriter csv(args.out_dir / "summary.csv");
    for (const auto& line : meta) csv.meta(line);
    csv.header({"seed", "window_steps", "full_window", "final_bound", "final_test_loss",
                "loss_cap", "violations"});
    for (const auto& r : rows)
        csv.row({static_cast<double>(r.seed), static_cast<double>(r.window),
                 r.full ? 1.0 : 0.0, r.final_bound, r.final_test_loss, r.cap,
                 static_cast<double>(r.violations)});
    std::cout << "wrote " << seeds.size() << " bound trajectories under "
              << args.out_dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    ntkeq::blasx::ensure_fast_blas(argc, argv);
    try {
        const CliArgs args = parse_args(argc, argv);
        const Config cfg = Config::parse_file(args.config_path);
        if (args.subcommand == "equiv") return cmd_equiv(cfg, args);
        if (args.subcommand == "robust") return cmd_robust(cfg, args);
        if (args.subcommand == "genbound") return cmd_genbound(cfg, args);
        if (args.subcommand == "krr") return cmd_krr(cfg, args);
        return cmd_reconstruct(cfg, args);
    } catch (const std::exception& e) {
        std::cerr << "ntkeq: " << e.what() << "\n";
        return 1;
    }
}
