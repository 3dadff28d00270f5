#ifndef MMCL_TRAIN_BATCHING_HPP
#define MMCL_TRAIN_BATCHING_HPP

#include <stdexcept>
#include <vector>

#include "mmcl/model/batch.hpp"
#include "mmcl/model/config.hpp"
#include "mmcl/model/head.hpp"
#include "mmcl/tasks/scene.hpp"

namespace mmcl::train {

// Lays task samples out on the model's fixed sequence grid. Answer strings
// must already be known to the head.
inline model::MultimodalBatch assemble_batch(const std::vector<const tasks::Sample*>& samples,
                                             const model::ModelConfig& cfg,
                                             const model::ClassifierHead& head) {
    if (samples.empty()) throw std::invalid_argument("assemble_batch: empty");
    const std::int64_t B = static_cast<std::int64_t>(samples.size());
    model::MultimodalBatch b;
    b.question_tokens = num::Tensor::zeros({B, cfg.max_text_len});
    b.visual = num::Tensor::zeros({B, cfg.max_visual_len, cfg.visual_feature_dim});
    for (std::int64_t i = 0; i < B; ++i) {
        const tasks::Sample& s = *samples[static_cast<std::size_t>(i)];
        const int n = static_cast<int>(s.question_tokens.size());
        if (n < 1 || n > cfg.max_text_len)
            throw std::invalid_argument("assemble_batch: question length out of range");
        for (int k = 0; k < n; ++k)
            b.question_tokens.data[static_cast<std::size_t>(i * cfg.max_text_len + k)] =
                static_cast<double>(s.question_tokens[static_cast<std::size_t>(k)]);
        b.text_len.push_back(n);
        if (s.visual.shape != std::vector<std::int64_t>{cfg.max_visual_len, cfg.visual_feature_dim})
            throw std::invalid_argument("assemble_batch: visual shape mismatch");
        std::copy(s.visual.data.begin(), s.visual.data.end(),
                  b.visual.data.begin() + i * cfg.max_visual_len * cfg.visual_feature_dim);
        const int label = head.label_id(s.answer);
        if (label < 0) throw std::invalid_argument("assemble_batch: unknown answer label: " + s.answer);
        b.labels.push_back(label);
    }
    return b;
}

inline std::vector<const tasks::Sample*> sample_ptrs(const std::vector<tasks::Sample>& v) {
    std::vector<const tasks::Sample*> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(&s);
    return out;
}

}  // namespace mmcl::train

#endif
