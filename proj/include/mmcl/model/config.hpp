#ifndef MMCL_MODEL_CONFIG_HPP
#define MMCL_MODEL_CONFIG_HPP

#include <stdexcept>
#include <string>

namespace mmcl::model {

struct ModelConfig {
    int num_layers = 6;
    int hidden_dim = 64;
    int num_heads = 4;
    int text_vocab_size = 0;
    int visual_feature_dim = 0;
    int max_text_len = 12;
    int max_visual_len = 16;
    int mlp_ratio = 2;

    int head_dim() const { return hidden_dim / num_heads; }
    int seq_len() const { return 1 + max_text_len + max_visual_len; }

    void validate() const {
        if (num_layers < 2) throw std::invalid_argument("num_layers must be >= 2");
        if (num_heads < 1 || hidden_dim < 1 || hidden_dim % num_heads != 0)
            throw std::invalid_argument("hidden_dim must be a positive multiple of num_heads");
        if (text_vocab_size < 1) throw std::invalid_argument("text_vocab_size must be positive");
        if (visual_feature_dim < 1) throw std::invalid_argument("visual_feature_dim must be positive");
        if (max_text_len < 1 || max_visual_len < 1)
            throw std::invalid_argument("sequence capacities must be positive");
        if (mlp_ratio < 1) throw std::invalid_argument("mlp_ratio must be positive");
    }

    bool operator==(const ModelConfig&) const = default;
};

}  // namespace mmcl::model

#endif
