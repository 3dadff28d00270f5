#ifndef MMCL_TRAIN_EVAL_HPP
#define MMCL_TRAIN_EVAL_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/model/head.hpp"
#include "mmcl/model/transformer.hpp"
#include "mmcl/num/tape.hpp"
#include "mmcl/tasks/scene.hpp"
#include "mmcl/train/batching.hpp"

namespace mmcl::train {

// credit(predicted label, gold answer) in [0, 1]
using CreditFn = std::function<double(const std::string&, const std::string&)>;

inline double exact_match_credit(const std::string& pred, const std::string& gold) {
    return pred == gold ? 1.0 : 0.0;
}

// Greedy decoding: argmax over head labels, ties to the lowest index.
inline std::vector<int> predict_labels(const model::ModelConfig& cfg,
                                       const std::map<std::string, num::Tensor>& bindings,
                                       const model::ClassifierHead& head,
                                       const std::vector<const tasks::Sample*>& samples,
                                       int batch_size = 128) {
    if (samples.empty()) throw std::invalid_argument("predict: no samples");
    if (batch_size < 1) throw std::invalid_argument("predict: batch size must be >= 1");
    std::vector<int> out;
    out.reserve(samples.size());
    const std::int64_t C = head.num_labels();
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const tasks::Sample*> part(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                               samples.begin() + static_cast<std::ptrdiff_t>(stop));
        num::Tape t;
        const auto batch = assemble_batch(part, cfg, head);
        const auto refs = model::build_forward(t, cfg, batch, C);
        t.evaluate(bindings);
        const num::Tensor& logits = t.value(refs.logits);
        for (std::size_t i = 0; i < part.size(); ++i) {
            const double* row = logits.data.data() + static_cast<std::int64_t>(i) * C;
            int best = 0;
            for (std::int64_t c = 1; c < C; ++c)
                if (row[c] > row[best]) best = static_cast<int>(c);
            out.push_back(best);
        }
    }
    return out;
}

struct EvalResult {
    double accuracy = 0.0;  // exact-match rate
    double weighted = 0.0;  // mean credit under the supplied scheme
};

inline EvalResult evaluate_split(const model::ModelConfig& cfg,
                                 const std::map<std::string, num::Tensor>& bindings,
                                 const model::ClassifierHead& head,
                                 const std::vector<const tasks::Sample*>& samples,
                                 const CreditFn& credit, int batch_size = 128) {
    if (!credit) throw std::invalid_argument("evaluate: no credit function");
    const auto preds = predict_labels(cfg, bindings, head, samples, batch_size);
    double hits = 0.0, score = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string& pred = head.label_table[static_cast<std::size_t>(preds[i])];
        const std::string& gold = samples[i]->answer;
        hits += pred == gold;
        score += pred == gold ? 1.0 : credit(pred, gold);
    }
    EvalResult r;
    r.accuracy = hits / static_cast<double>(samples.size());
    r.weighted = score / static_cast<double>(samples.size());
    return r;
}

}  // namespace mmcl::train

#endif
