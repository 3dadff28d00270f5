#ifndef MMCL_MODEL_PARAMS_HPP
#define MMCL_MODEL_PARAMS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmcl/core/rng.hpp"
#include "mmcl/core/text.hpp"
#include "mmcl/model/config.hpp"
#include "mmcl/num/tensor.hpp"

namespace mmcl::model {

// Named trainable tensors. Ordered map so every iteration (init, optimizer
// state, serialization) is reproducible.
using ParamStore = std::map<std::string, num::Tensor>;

inline std::map<std::string, std::vector<std::int64_t>> trunk_param_shapes(const ModelConfig& c) {
    std::map<std::string, std::vector<std::int64_t>> s;
    const std::int64_t H = c.hidden_dim;
    s["tok_embed"] = {c.text_vocab_size, H};
    s["cls_embed"] = {1, H};
    s["seg_embed"] = {2, H};
    s["pos_text"] = {c.max_text_len, H};
    s["pos_vis"] = {c.max_visual_len, H};
    s["vis_proj_w"] = {c.visual_feature_dim, H};
    s["vis_proj_b"] = {H};
    for (int l = 0; l < c.num_layers; ++l) {
        const std::string p = "blk" + std::to_string(l) + ".";
        s[p + "ln1_g"] = {H};
        s[p + "ln1_b"] = {H};
        s[p + "ln2_g"] = {H};
        s[p + "ln2_b"] = {H};
        for (const char* w : {"wq", "wk", "wv", "wo"}) s[p + w] = {H, H};
        for (const char* b : {"bq", "bk", "bv", "bo"}) s[p + b] = {H};
        s[p + "mlp_w1"] = {H, H * c.mlp_ratio};
        s[p + "mlp_b1"] = {H * c.mlp_ratio};
        s[p + "mlp_w2"] = {H * c.mlp_ratio, H};
        s[p + "mlp_b2"] = {H};
    }
    s["ln_f_g"] = {H};
    s["ln_f_b"] = {H};
    return s;
}

// Gaussian(0, 0.02) weights, zero biases, unit norm gains. Each tensor draws
// from its own name-keyed stream, so values do not depend on map order.
inline ParamStore init_trunk_params(const ModelConfig& c, std::uint64_t seed) {
    ParamStore out;
    for (const auto& [name, shape] : trunk_param_shapes(c)) {
        num::Tensor t = num::Tensor::zeros(shape);
        const bool is_gain = name.ends_with("_g");
        const bool is_bias = name.ends_with("_b") || name.ends_with("b1") || name.ends_with("b2") ||
                             name.ends_with("bq") || name.ends_with("bk") || name.ends_with("bv") ||
                             name.ends_with("bo");
        if (is_gain) {
            for (double& v : t.data) v = 1.0;
        } else if (!is_bias) {
            core::Rng rng(core::mix64(seed, core::fnv1a64(name)));
            for (double& v : t.data) v = rng.normal(0.0, 0.02);
        }
        out[name] = std::move(t);
    }
    return out;
}

}  // namespace mmcl::model

#endif
