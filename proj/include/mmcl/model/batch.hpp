#ifndef MMCL_MODEL_BATCH_HPP
#define MMCL_MODEL_BATCH_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mmcl/model/config.hpp"
#include "mmcl/num/tensor.hpp"

namespace mmcl::model {

enum class Modality : std::uint8_t { CLS, TEXT, VISION, PAD };

// A batch laid out on the fixed sequence grid
// [CLS | text slots 0..Q-1 | vision slots 0..V-1].
struct MultimodalBatch {
    num::Tensor question_tokens;  // [B, Q], integer ids stored as doubles
    std::vector<int> text_len;    // valid tokens per sample, rest is PAD
    num::Tensor visual;           // [B, V, visual_feature_dim]
    std::vector<std::int64_t> labels;

    std::int64_t batch_size() const { return question_tokens.shape.empty() ? 0 : question_tokens.shape[0]; }

    void check(const ModelConfig& c) const {
        const std::int64_t B = batch_size();
        if (B < 1) throw std::invalid_argument("batch: empty");
        if (question_tokens.ndim() != 2) throw std::invalid_argument("batch: question_tokens must be [B, Q]");
        if (question_tokens.shape[1] > c.max_text_len)
            throw std::invalid_argument("batch: text length exceeds configured maximum");
        if (visual.ndim() != 3 || visual.shape[0] != B)
            throw std::invalid_argument("batch: visual must be [B, V, feature_dim]");
        if (visual.shape[1] != c.max_visual_len)
            throw std::invalid_argument("batch: visual token count exceeds configured maximum");
        if (visual.shape[2] != c.visual_feature_dim)
            throw std::invalid_argument("batch: visual feature dim mismatch");
        if (static_cast<std::int64_t>(text_len.size()) != B || static_cast<std::int64_t>(labels.size()) != B)
            throw std::invalid_argument("batch: per-sample field length mismatch");
        for (int l : text_len)
            if (l < 1 || l > question_tokens.shape[1])
                throw std::invalid_argument("batch: text_len out of range");
    }

    // per-sample tags over the full sequence
    std::vector<std::vector<Modality>> modality_mask(const ModelConfig& c) const {
        const std::int64_t B = batch_size();
        const std::int64_t Q = question_tokens.shape[1];
        std::vector<std::vector<Modality>> out(static_cast<std::size_t>(B));
        for (std::int64_t b = 0; b < B; ++b) {
            auto& row = out[static_cast<std::size_t>(b)];
            row.assign(static_cast<std::size_t>(1 + Q + c.max_visual_len), Modality::PAD);
            row[0] = Modality::CLS;
            for (int i = 0; i < text_len[static_cast<std::size_t>(b)]; ++i)
                row[static_cast<std::size_t>(1 + i)] = Modality::TEXT;
            for (int v = 0; v < c.max_visual_len; ++v)
                row[static_cast<std::size_t>(1 + Q + v)] = Modality::VISION;
        }
        return out;
    }
};

struct ModalitySplit {
    num::Tensor q;  // [total text tokens, hidden]
    num::Tensor v;  // [total vision tokens, hidden]
    std::vector<std::int64_t> q_counts, v_counts;  // per sample
};

// Collects TEXT rows and VISION rows of a [B, S, H] state tensor, in batch
// then sequence order. CLS and PAD rows belong to neither partition.
inline ModalitySplit split_states_by_modality(const num::Tensor& states,
                                              const std::vector<std::vector<Modality>>& mask) {
    if (states.ndim() != 3) throw std::invalid_argument("split: states must be [B, S, H]");
    const std::int64_t B = states.shape[0], S = states.shape[1], H = states.shape[2];
    if (static_cast<std::int64_t>(mask.size()) != B)
        throw std::invalid_argument("split: mask batch mismatch");
    std::int64_t nq = 0, nv = 0;
    for (const auto& row : mask) {
        if (static_cast<std::int64_t>(row.size()) != S)
            throw std::invalid_argument("split: mask length != sequence length");
        for (Modality m : row) {
            nq += m == Modality::TEXT;
            nv += m == Modality::VISION;
        }
    }
    ModalitySplit out;
    // an absent modality stays a default (empty) tensor; consumers must check
    if (nq > 0) out.q = num::Tensor::zeros({nq, H});
    if (nv > 0) out.v = num::Tensor::zeros({nv, H});
    std::int64_t iq = 0, iv = 0;
    for (std::int64_t b = 0; b < B; ++b) {
        std::int64_t cq = 0, cv = 0;
        for (std::int64_t s = 0; s < S; ++s) {
            const Modality m = mask[static_cast<std::size_t>(b)][static_cast<std::size_t>(s)];
            const double* src = states.data.data() + (b * S + s) * H;
            if (m == Modality::TEXT) {
                std::copy_n(src, H, out.q.data.data() + iq++ * H);
                ++cq;
            } else if (m == Modality::VISION) {
                std::copy_n(src, H, out.v.data.data() + iv++ * H);
                ++cv;
            }
        }
        out.q_counts.push_back(cq);
        out.v_counts.push_back(cv);
    }
    return out;
}

}  // namespace mmcl::model

#endif
