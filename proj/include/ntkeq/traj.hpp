#pragma once
// Training trajectory shared by the net trainer and the kernel-machine
// solver: per-step loss decomposition plus probe-point outputs, so paired
// runs can be compared column-for-column. Index t = 0 is the state before
// the first update; t = steps is the final state.

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "ntkeq/util.hpp"

namespace ntkeq {

struct Trajectory {
    std::size_t n = 0;        // training samples
    std::size_t n_probe = 0;  // probe points logged each step
    std::size_t steps = 0;    // update steps actually taken

    // All sized steps+1 (or (steps+1) * n_probe for probe outputs).
    std::vector<double> data_term;
    std::vector<double> reg_term;
    std::vector<double> total;
    std::vector<double> model_norm2;  // |W^(L+1)|^2 for nets, alpha'K alpha for KMs
    std::vector<double> probe;        // row-major, row t = outputs at step t

    std::vector<double> final_train_outputs;  // n, state after the last step

    // Smallest eigenvalue of the tangent-kernel Gram at init, when the
    // trainer was asked to compute it (NaN otherwise).
    double lambda_min_tk0 = std::numeric_limits<double>::quiet_NaN();

    double probe_at(std::size_t t, std::size_t j) const { return probe[t * n_probe + j]; }

    void reserve(std::size_t max_steps) {
        data_term.reserve(max_steps + 1);
        reg_term.reserve(max_steps + 1);
        total.reserve(max_steps + 1);
        model_norm2.reserve(max_steps + 1);
        probe.reserve((max_steps + 1) * n_probe);
    }

    void push(double data, double reg, double norm2, const double* probe_vals) {
        data_term.push_back(data);
        reg_term.push_back(reg);
        total.push_back(data + reg);
        model_norm2.push_back(norm2);
        if (n_probe) probe.insert(probe.end(), probe_vals, probe_vals + n_probe);
        steps = data_term.size() - 1;
    }

    // Columns: step, data_term, regularizer, total, probe_0..; meta lines are
    // embedded verbatim above the header.
    void write_csv(const std::filesystem::path& p,
                   const std::vector<std::string>& meta_lines) const;
};

}  // namespace ntkeq
