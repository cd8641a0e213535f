#include "ntkeq/traj.hpp"

namespace ntkeq {

void Trajectory::write_csv(const std::filesystem::path& p,
                           const std::vector<std::string>& meta_lines) const {
    CsvWriter csv(p);
    for (const auto& line : meta_lines) csv.meta(line);
    std::vector<std::string> cols = {"step", "data_term", "regularizer", "total", "model_norm2"};
    for (std::size_t j = 0; j < n_probe; ++j) cols.push_back("probe_" + std::to_string(j));
    csv.header(cols);
    std::vector<double> row(cols.size());
    for (std::size_t t = 0; t <= steps; ++t) {
        row[0] = static_cast<double>(t);
        row[1] = data_term[t];
        row[2] = reg_term[t];
        row[3] = total[t];
        row[4] = model_norm2[t];
        for (std::size_t j = 0; j < n_probe; ++j) row[5 + j] = probe_at(t, j);
        csv.row(row);
    }
}

}  // namespace ntkeq
