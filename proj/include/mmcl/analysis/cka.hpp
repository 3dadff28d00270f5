#ifndef MMCL_ANALYSIS_CKA_HPP
#define MMCL_ANALYSIS_CKA_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmcl/num/tensor.hpp"

namespace mmcl::analysis {

namespace detail {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline EMat centered(const num::Tensor& t, const char* what) {
    if (t.ndim() != 2) throw std::invalid_argument(std::string(what) + " must be a matrix");
    const std::int64_t n = t.shape[0], p = t.shape[1];
    if (n < 2) throw std::invalid_argument(std::string(what) + " needs at least two rows");
    Eigen::Map<const EMat> m(t.data.data(), n, p);
    EMat c = m;
    c.rowwise() -= m.colwise().mean();
    return c;
}

}  // namespace detail

// Feature-space linear CKA between two representation matrices with one row
// per sample/position: ||Yc' Xc||_F^2 / (||Xc' Xc||_F ||Yc' Yc||_F) after
// column centering. Invariant to orthogonal right-multiplication and nonzero
// isotropic scaling.
inline double linear_cka(const num::Tensor& x, const num::Tensor& y) {
    if (x.shape[0] != y.shape[0] || x.ndim() != 2 || y.ndim() != 2)
        throw std::invalid_argument("cka: inputs must be matrices with equal row counts");
    const auto xc = detail::centered(x, "cka: x");
    const auto yc = detail::centered(y, "cka: y");
    const double cross = (yc.transpose() * xc).squaredNorm();
    const double nx = (xc.transpose() * xc).norm();
    const double ny = (yc.transpose() * yc).norm();
    if (nx == 0.0 || ny == 0.0) throw std::invalid_argument("cka: zero-variance input");
    return cross / (nx * ny);
}

// Per-stage, per-layer probe representations: one (text, vision) matrix pair
// per layer, rows = token positions over the fixed probe set.
struct RepresentationDump {
    std::vector<std::vector<std::pair<num::Tensor, num::Tensor>>> stages;

    std::size_t num_stages() const { return stages.size(); }
    std::size_t num_layers() const { return stages.empty() ? 0 : stages[0].size(); }
};

// R[t][d] = CKA(Q_1, Q_t) / CKA(V_1, V_t) per layer d, for stages t = 2..T.
// Row 0 of the result corresponds to stage 2.
inline std::vector<std::vector<double>> cka_ratio(const RepresentationDump& dump) {
    if (dump.stages.size() < 2) throw std::invalid_argument("cka ratio: need at least two stages");
    const std::size_t layers = dump.num_layers();
    for (const auto& stage : dump.stages)
        if (stage.size() != layers) throw std::invalid_argument("cka ratio: layer count drift");
    std::vector<std::vector<double>> out;
    for (std::size_t t = 1; t < dump.stages.size(); ++t) {
        std::vector<double> row;
        for (std::size_t d = 0; d < layers; ++d) {
            const double cq = linear_cka(dump.stages[0][d].first, dump.stages[t][d].first);
            const double cv = linear_cka(dump.stages[0][d].second, dump.stages[t][d].second);
            if (cv < 1e-9)
                throw std::invalid_argument("cka ratio: vision similarity vanished at stage " +
                                            std::to_string(t + 1) + " layer " + std::to_string(d));
            row.push_back(cq / cv);
        }
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace mmcl::analysis

#endif
