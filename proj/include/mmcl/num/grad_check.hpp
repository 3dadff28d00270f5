#ifndef MMCL_NUM_GRAD_CHECK_HPP
#define MMCL_NUM_GRAD_CHECK_HPP

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "mmcl/num/tensor.hpp"

namespace mmcl::num {

// Central differences of a scalar-valued function, one coordinate at a time.
// Slow by design; this is the reference gradients are judged against.
inline std::map<std::string, Tensor> finite_diff_grad(
    const std::function<double(const std::map<std::string, Tensor>&)>& f,
    const std::map<std::string, Tensor>& point, double eps = 1e-5) {
    std::map<std::string, Tensor> out;
    std::map<std::string, Tensor> x = point;
    for (auto& [name, t] : x) {
        Tensor g = Tensor::zeros(t.shape);
        for (std::size_t k = 0; k < t.data.size(); ++k) {
            const double orig = t.data[k];
            t.data[k] = orig + eps;
            const double fp = f(x);
            t.data[k] = orig - eps;
            const double fm = f(x);
            t.data[k] = orig;
            g.data[k] = (fp - fm) / (2.0 * eps);
        }
        out[name] = std::move(g);
    }
    return out;
}

// Single-tensor variant for probing one input of a larger computation.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& point,
                               double eps = 1e-5) {
    Tensor x = point;
    Tensor g = Tensor::zeros(x.shape);
    for (std::size_t k = 0; k < x.data.size(); ++k) {
        const double orig = x.data[k];
        x.data[k] = orig + eps;
        const double fp = f(x);
        x.data[k] = orig - eps;
        const double fm = f(x);
        x.data[k] = orig;
        g.data[k] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

// max over coordinates of |a-b| / max(1, |a|, |b|)
inline double max_rel_err(const std::map<std::string, Tensor>& a,
                          const std::map<std::string, Tensor>& b) {
    double worst = 0.0;
    for (const auto& [name, ta] : a) {
        const Tensor& tb = b.at(name);
        for (std::size_t k = 0; k < ta.data.size(); ++k) {
            const double denom = std::max({1.0, std::fabs(ta.data[k]), std::fabs(tb.data[k])});
            worst = std::max(worst, std::fabs(ta.data[k] - tb.data[k]) / denom);
        }
    }
    return worst;
}

inline double max_rel_err(const Tensor& a, const Tensor& b) {
    return max_rel_err({{"x", a}}, {{"x", b}});
}

}  // namespace mmcl::num

#endif
