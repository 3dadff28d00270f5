#ifndef MMCL_NUM_TENSOR_HPP
#define MMCL_NUM_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmcl::num {

// Dense row-major fp64 array. Shape [] denotes a scalar (one element).
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    bool requires_grad = false;

    Tensor() = default;

    Tensor(std::vector<std::int64_t> s, std::vector<double> d, bool rg = false)
        : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
        if (numel(shape) != static_cast<std::int64_t>(data.size()))
            throw std::invalid_argument("Tensor: shape/data size mismatch");
    }

    static std::int64_t numel(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (auto d : s) {
            if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dim");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<std::int64_t> s) {
        std::int64_t n = numel(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    }

    static Tensor full(std::vector<std::int64_t> s, double v) {
        std::int64_t n = numel(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), v));
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    bool is_scalar() const { return data.size() == 1; }
    double scalar_value() const {
        if (!is_scalar()) throw std::logic_error("Tensor: not a scalar");
        return data[0];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double& at(std::initializer_list<std::int64_t> idx) {
        return data[static_cast<std::size_t>(offset(idx))];
    }
    double at(std::initializer_list<std::int64_t> idx) const {
        return data[static_cast<std::size_t>(offset(idx))];
    }

private:
    std::int64_t offset(std::initializer_list<std::int64_t> idx) const {
        if (idx.size() != shape.size()) throw std::invalid_argument("Tensor::at: rank mismatch");
        std::int64_t off = 0;
        std::size_t k = 0;
        for (auto i : idx) {
            off = off * shape[k] + i;
            ++k;
        }
        return off;
    }
};

// Sum of squared entries (Frobenius norm squared for matrices).
inline double frobenius_norm_sq(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.data) acc += v * v;
    return acc;
}

inline std::string shape_str(const std::vector<std::int64_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace mmcl::num

#endif
