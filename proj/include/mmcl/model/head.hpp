#ifndef MMCL_MODEL_HEAD_HPP
#define MMCL_MODEL_HEAD_HPP

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/core/rng.hpp"
#include "mmcl/core/text.hpp"
#include "mmcl/num/tensor.hpp"

namespace mmcl::model {

// Linear classifier over answer labels. Grows as new answers appear; rows for
// labels that already exist are never touched.
struct ClassifierHead {
    std::vector<std::string> label_table;
    num::Tensor weight;  // [num_labels, hidden_dim]
    num::Tensor bias;    // [num_labels]

    int num_labels() const { return static_cast<int>(label_table.size()); }

    int label_id(const std::string& label) const {
        for (std::size_t i = 0; i < label_table.size(); ++i)
            if (label_table[i] == label) return static_cast<int>(i);
        return -1;
    }

    void check() const {
        std::set<std::string> seen(label_table.begin(), label_table.end());
        if (seen.size() != label_table.size())
            throw std::logic_error("classifier head: duplicate labels");
        if (!label_table.empty()) {
            if (weight.ndim() != 2 || weight.shape[0] != num_labels())
                throw std::logic_error("classifier head: weight shape mismatch");
            if (bias.ndim() != 1 || bias.shape[0] != num_labels())
                throw std::logic_error("classifier head: bias shape mismatch");
        }
    }
};

// Appends rows for labels not yet present, in the order given. Existing rows
// are preserved bitwise. New weights draw Gaussian(0, 0.02) from a stream
// keyed by (seed, label), new biases are zero.
inline ClassifierHead expand_head(const ClassifierHead& head, const std::vector<std::string>& new_labels,
                                  std::int64_t hidden_dim, std::uint64_t seed) {
    std::vector<std::string> added;
    std::set<std::string> known(head.label_table.begin(), head.label_table.end());
    for (const auto& l : new_labels)
        if (known.insert(l).second) added.push_back(l);
    if (added.empty()) return head;

    const std::int64_t old_n = head.num_labels();
    const std::int64_t new_n = old_n + static_cast<std::int64_t>(added.size());
    ClassifierHead out;
    out.label_table = head.label_table;
    out.label_table.insert(out.label_table.end(), added.begin(), added.end());
    out.weight = num::Tensor::zeros({new_n, hidden_dim});
    out.bias = num::Tensor::zeros({new_n});
    if (old_n > 0) {
        std::copy(head.weight.data.begin(), head.weight.data.end(), out.weight.data.begin());
        std::copy(head.bias.data.begin(), head.bias.data.end(), out.bias.data.begin());
    }
    for (std::size_t k = 0; k < added.size(); ++k) {
        core::Rng rng(core::mix64(seed, core::fnv1a64(added[k])));
        double* row = out.weight.data.data() + (old_n + static_cast<std::int64_t>(k)) * hidden_dim;
        for (std::int64_t h = 0; h < hidden_dim; ++h) row[h] = rng.normal(0.0, 0.02);
    }
    return out;
}

}  // namespace mmcl::model

#endif
