#ifndef MMCL_TRAIN_ADAM_HPP
#define MMCL_TRAIN_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "mmcl/num/tensor.hpp"

namespace mmcl::train {

// Adam with bias correction over a named parameter map. Moment buffers are
// keyed like the parameters and created on first sight, so a fresh instance
// per task gives the usual per-task optimizer reset.
class Adam {
public:
    Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw std::invalid_argument("adam: betas must be in [0, 1)");
        if (!(eps > 0.0)) throw std::invalid_argument("adam: eps must be > 0");
    }

    void step(std::map<std::string, num::Tensor>& params,
              const std::map<std::string, num::Tensor>& grads, double lr) {
        if (lr < 0.0) throw std::invalid_argument("adam: negative learning rate");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (const auto& [name, g] : grads) {
            auto pit = params.find(name);
            if (pit == params.end()) throw std::invalid_argument("adam: gradient for unknown parameter " + name);
            num::Tensor& p = pit->second;
            if (p.shape != g.shape) throw std::invalid_argument("adam: gradient shape mismatch for " + name);
            num::Tensor& m = buffer(m_, name, g);
            num::Tensor& v = buffer(v_, name, g);
            for (std::size_t k = 0; k < p.data.size(); ++k) {
                m.data[k] = beta1_ * m.data[k] + (1.0 - beta1_) * g.data[k];
                v.data[k] = beta2_ * v.data[k] + (1.0 - beta2_) * g.data[k] * g.data[k];
                p.data[k] -= lr * (m.data[k] / c1) / (std::sqrt(v.data[k] / c2) + eps_);
            }
        }
    }

    std::int64_t steps_taken() const { return t_; }

private:
    static num::Tensor& buffer(std::map<std::string, num::Tensor>& store, const std::string& name,
                               const num::Tensor& like) {
        auto it = store.find(name);
        if (it == store.end()) it = store.emplace(name, num::Tensor::zeros(like.shape)).first;
        return it->second;
    }

    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::map<std::string, num::Tensor> m_, v_;
};

}  // namespace mmcl::train

#endif
