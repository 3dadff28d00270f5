#ifndef MMCL_ANALYSIS_METRICS_HPP
#define MMCL_ANALYSIS_METRICS_HPP

#include <stdexcept>
#include <utility>
#include <vector>

namespace mmcl::analysis {

// Lower-triangular accuracy matrix: row t holds scores on tasks 0..t after
// training stage t. Multitask runs leave every row but the last empty.
using ScoreMatrix = std::vector<std::vector<double>>;

// Macro-average over the final row.
inline double final_accuracy(const ScoreMatrix& m) {
    if (m.empty()) throw std::invalid_argument("final accuracy: empty matrix");
    const auto& last = m.back();
    if (last.size() != m.size())
        throw std::invalid_argument("final accuracy: final row is incomplete");
    double s = 0.0;
    for (double v : last) s += v;
    return s / static_cast<double>(last.size());
}

struct BackwardTransfer {
    double sbwt = 0.0;
    double bwt = 0.0;
};

// Average end-of-training drop per past task: (1/(T-1)) sum_i (row_T[i] -
// row_i[i]), on the credit-weighted matrix (sbwt) and the plain one (bwt).
inline BackwardTransfer sbwt(const ScoreMatrix& weighted, const ScoreMatrix& accuracy) {
    const std::size_t T = accuracy.size();
    if (T < 2) throw std::invalid_argument("backward transfer: need at least two tasks");
    if (weighted.size() != T) throw std::invalid_argument("backward transfer: matrix size mismatch");
    auto entry = [](const ScoreMatrix& m, std::size_t row, std::size_t col) {
        if (row >= m.size() || col >= m[row].size())
            throw std::invalid_argument("backward transfer: matrix entry missing");
        return m[row][col];
    };
    BackwardTransfer out;
    for (std::size_t i = 0; i + 1 < T; ++i) {
        out.sbwt += entry(weighted, T - 1, i) - entry(weighted, i, i);
        out.bwt += entry(accuracy, T - 1, i) - entry(accuracy, i, i);
    }
    out.sbwt /= static_cast<double>(T - 1);
    out.bwt /= static_cast<double>(T - 1);
    return out;
}

}  // namespace mmcl::analysis

#endif
