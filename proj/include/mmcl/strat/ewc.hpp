#ifndef MMCL_STRAT_EWC_HPP
#define MMCL_STRAT_EWC_HPP

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/model/checkpoint.hpp"
#include "mmcl/model/transformer.hpp"
#include "mmcl/num/tape.hpp"
#include "mmcl/train/batching.hpp"

namespace mmcl::strat {

struct EwcState {
    model::ParamStore anchor;
    model::ParamStore fisher;  // same keys/shapes as anchor, entries >= 0
    double lambda = 0.0;

    void check() const {
        if (lambda < 0) throw std::invalid_argument("ewc: lambda must be >= 0");
        if (anchor.size() != fisher.size()) throw std::invalid_argument("ewc: anchor/fisher mismatch");
        for (const auto& [name, f] : fisher) {
            auto it = anchor.find(name);
            if (it == anchor.end() || it->second.shape != f.shape)
                throw std::invalid_argument("ewc: anchor/fisher mismatch for " + name);
            for (double v : f.data)
                if (v < 0) throw std::invalid_argument("ewc: negative fisher entry in " + name);
        }
    }
};

// lambda * sum_j fisher_j * (param_j - anchor_j)^2, over parameters the state
// knows about. Parameters grown after anchoring (new head rows) are handled by
// expand_ewc_rows, which gives them zero curvature.
inline double ewc_penalty(const model::ParamStore& params, const EwcState& ewc) {
    ewc.check();
    double acc = 0.0;
    for (const auto& [name, f] : ewc.fisher) {
        const auto pit = params.find(name);
        if (pit == params.end()) throw std::invalid_argument("ewc: missing parameter " + name);
        const num::Tensor& p = pit->second;
        const num::Tensor& a = ewc.anchor.at(name);
        if (p.shape != a.shape) throw std::invalid_argument("ewc: shape drift for " + name);
        for (std::size_t k = 0; k < p.data.size(); ++k) {
            const double d = p.data[k] - a.data[k];
            acc += f.data[k] * d * d;
        }
    }
    return ewc.lambda * acc;
}

// Tape term equal to ewc_penalty, differentiable in the parameter leaves.
inline num::Tape::Ref ewc_penalty_term(num::Tape& t, const std::map<std::string, num::Tape::Ref>& param_refs,
                                       const EwcState& ewc) {
    ewc.check();
    num::Tape::Ref acc = t.constant_scalar(0.0);
    for (const auto& [name, f] : ewc.fisher) {
        auto it = param_refs.find(name);
        if (it == param_refs.end()) throw std::invalid_argument("ewc: no tape leaf for " + name);
        auto diff = t.sub(it->second, t.constant(ewc.anchor.at(name)));
        acc = t.add(acc, t.sum(t.mul(t.constant(f), t.mul(diff, diff))));
    }
    return t.scale(acc, ewc.lambda);
}

// After the head grows, anchored head tensors gain zero-fisher rows so new
// labels are unconstrained.
inline void expand_ewc_rows(EwcState& ewc, const std::string& name, const num::Tensor& grown) {
    auto ait = ewc.anchor.find(name);
    if (ait == ewc.anchor.end()) return;
    num::Tensor& a = ait->second;
    num::Tensor& f = ewc.fisher.at(name);
    if (a.shape == grown.shape) return;
    num::Tensor na = num::Tensor::zeros(grown.shape);
    num::Tensor nf = num::Tensor::zeros(grown.shape);
    if (a.size() > na.size()) throw std::invalid_argument("ewc: parameter shrank: " + name);
    std::copy(a.data.begin(), a.data.end(), na.data.begin());
    std::copy(f.data.begin(), f.data.end(), nf.data.begin());
    a = std::move(na);
    f = std::move(nf);
}

// Empirical diagonal Fisher: mean over samples of the squared gradient of the
// per-sample classification loss at the ground-truth label. One pass per
// sample, since squaring happens before averaging.
inline model::ParamStore compute_fisher_generic(
    const std::function<std::map<std::string, num::Tensor>(std::size_t)>& per_sample_grad,
    std::size_t n) {
    if (n == 0) throw std::invalid_argument("fisher: no data");
    model::ParamStore fisher;
    for (std::size_t i = 0; i < n; ++i) {
        auto g = per_sample_grad(i);
        for (auto& [name, grad] : g) {
            auto it = fisher.find(name);
            if (it == fisher.end()) {
                num::Tensor sq = num::Tensor::zeros(grad.shape);
                for (std::size_t k = 0; k < grad.data.size(); ++k) sq.data[k] = grad.data[k] * grad.data[k];
                fisher[name] = std::move(sq);
            } else {
                for (std::size_t k = 0; k < grad.data.size(); ++k)
                    it->second.data[k] += grad.data[k] * grad.data[k];
            }
        }
    }
    for (auto& [name, f] : fisher)
        for (double& v : f.data) v /= static_cast<double>(n);
    return fisher;
}

inline model::ParamStore compute_fisher(const model::ModelConfig& cfg, const model::ParamStore& params,
                                        const model::ClassifierHead& head,
                                        const std::vector<tasks::Sample>& data,
                                        std::size_t max_samples = 1000) {
    if (data.empty()) throw std::invalid_argument("fisher: no data");
    const std::size_t n = std::min(data.size(), max_samples);
    auto bindings = model::forward_bindings(params, head);
    return compute_fisher_generic(
        [&](std::size_t i) {
            num::Tape t;
            auto batch = train::assemble_batch({&data[i]}, cfg, head);
            auto refs = model::build_forward(t, cfg, batch, head.num_labels());
            auto loss = t.cross_entropy_sum(
                refs.logits, t.constant(num::Tensor({1}, {static_cast<double>(batch.labels[0])})));
            t.evaluate(bindings);
            return t.backward(loss);
        },
        n);
}

}  // namespace mmcl::strat

#endif
