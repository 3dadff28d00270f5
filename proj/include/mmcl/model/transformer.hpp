#ifndef MMCL_MODEL_TRANSFORMER_HPP
#define MMCL_MODEL_TRANSFORMER_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mmcl/model/batch.hpp"
#include "mmcl/model/config.hpp"
#include "mmcl/model/head.hpp"
#include "mmcl/model/params.hpp"
#include "mmcl/num/tape.hpp"

namespace mmcl::model {

// Node handles into a recorded forward pass.
struct ForwardRefs {
    num::Tape::Ref logits = -1;                 // [B, num_labels]
    std::vector<num::Tape::Ref> states;         // per block, [B, S, H]
    num::Tape::Ref cls_final = -1;              // [B, H] after final norm
    std::int64_t batch = 0;
    std::int64_t seq = 0;
};

namespace detail {

inline num::Tensor placement_matrix(std::int64_t S, std::int64_t offset, std::int64_t count) {
    num::Tensor p = num::Tensor::zeros({S, count});
    for (std::int64_t i = 0; i < count; ++i) p.data[static_cast<std::size_t>((offset + i) * count + i)] = 1.0;
    return p;
}

inline num::Tensor head_selector(std::int64_t H, std::int64_t dh, std::int64_t h) {
    num::Tensor e = num::Tensor::zeros({H, dh});
    for (std::int64_t k = 0; k < dh; ++k) e.data[static_cast<std::size_t>((h * dh + k) * dh + k)] = 1.0;
    return e;
}

}  // namespace detail

// Records the whole encoder forward pass for one batch: embedding assembly,
// pre-norm attention/MLP blocks, final norm, CLS classification. Trainable
// tensors enter as named leaves (trunk names from trunk_param_shapes plus
// "head_w"/"head_b"), so the same tape re-evaluates under updated parameters.
inline ForwardRefs build_forward(num::Tape& t, const ModelConfig& c, const MultimodalBatch& batch,
                                 std::int64_t num_labels) {
    using Ref = num::Tape::Ref;
    c.validate();
    batch.check(c);
    if (num_labels < 1) throw std::invalid_argument("forward: classifier head is empty");

    const std::int64_t B = batch.batch_size();
    const std::int64_t Q = batch.question_tokens.shape[1];
    const std::int64_t V = c.max_visual_len;
    const std::int64_t S = 1 + Q + V;
    const std::int64_t H = c.hidden_dim;
    const std::int64_t dh = c.head_dim();

    std::map<std::string, Ref> p;
    for (const auto& [name, shape] : trunk_param_shapes(c)) p[name] = t.leaf(name, shape, true);
    Ref head_w = t.leaf("head_w", {num_labels, H}, true);
    Ref head_b = t.leaf("head_b", {num_labels}, true);

    auto seg_row = [&](std::int64_t which) {
        Ref e = t.embed(p.at("seg_embed"), t.constant(num::Tensor({1}, {static_cast<double>(which)})));
        return t.reshape(e, {H});
    };

    // text: token + positional + segment embeddings, PAD slots included
    // (attention masking keeps them out of every real position's view)
    Ref text = t.embed(p.at("tok_embed"), t.constant(batch.question_tokens));  // [B,Q,H]
    {
        num::Tensor sel = num::Tensor::zeros({c.max_text_len, Q});
        for (std::int64_t i = 0; i < Q; ++i) sel.data[static_cast<std::size_t>(i * Q + i)] = 1.0;
        Ref pos_q = t.matmul(t.constant(sel), p.at("pos_text"), true, false);  // [Q,H] leading rows
        text = t.add(text, pos_q);
        text = t.add(text, seg_row(0));
    }

    // vision: linear feature projection + positional + segment
    Ref vis = t.matmul(t.constant(batch.visual), p.at("vis_proj_w"));  // [B,V,H]
    vis = t.add(vis, p.at("vis_proj_b"));
    vis = t.add(vis, p.at("pos_vis"));
    vis = t.add(vis, seg_row(1));

    // CLS row replicated across the batch
    Ref cls = t.matmul(t.constant(num::Tensor::full({B, 1}, 1.0)), p.at("cls_embed"));  // [B,H]
    cls = t.reshape(cls, {B, 1, H});

    // scatter the three spans onto the sequence grid
    Ref x = t.add(t.add(t.matmul(t.constant(detail::placement_matrix(S, 0, 1)), cls),
                        t.matmul(t.constant(detail::placement_matrix(S, 1, Q)), text)),
                  t.matmul(t.constant(detail::placement_matrix(S, 1 + Q, V)), vis));  // [B,S,H]

    // additive key mask: PAD columns get a large negative score
    const auto mask = batch.modality_mask(c);
    num::Tensor attn_mask = num::Tensor::zeros({B, S, S});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t k = 0; k < S; ++k)
            if (mask[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)] == Modality::PAD)
                for (std::int64_t q = 0; q < S; ++q)
                    attn_mask.data[static_cast<std::size_t>((b * S + q) * S + k)] = -1e30;
    Ref mask_ref = t.constant(std::move(attn_mask));

    std::vector<Ref> selectors;
    for (std::int64_t h = 0; h < c.num_heads; ++h)
        selectors.push_back(t.constant(detail::head_selector(H, dh, h)));

    auto layer_norm_affine = [&](Ref in, const std::string& g, const std::string& b) {
        return t.add(t.mul(t.layer_norm(in), p.at(g)), p.at(b));
    };

    ForwardRefs out;
    out.batch = B;
    out.seq = S;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int l = 0; l < c.num_layers; ++l) {
        const std::string bp = "blk" + std::to_string(l) + ".";
        Ref ln1 = layer_norm_affine(x, bp + "ln1_g", bp + "ln1_b");
        Ref q = t.add(t.matmul(ln1, p.at(bp + "wq")), p.at(bp + "bq"));
        Ref k = t.add(t.matmul(ln1, p.at(bp + "wk")), p.at(bp + "bk"));
        Ref v = t.add(t.matmul(ln1, p.at(bp + "wv")), p.at(bp + "bv"));
        Ref mixed = -1;
        for (std::int64_t h = 0; h < c.num_heads; ++h) {
            Ref qh = t.matmul(q, selectors[static_cast<std::size_t>(h)]);  // [B,S,dh]
            Ref kh = t.matmul(k, selectors[static_cast<std::size_t>(h)]);
            Ref vh = t.matmul(v, selectors[static_cast<std::size_t>(h)]);
            Ref scores = t.scale(t.matmul(qh, kh, false, true), scale);   // [B,S,S]
            Ref probs = t.softmax(t.add(scores, mask_ref));
            Ref ctx = t.matmul(probs, vh);                                // [B,S,dh]
            Ref placed = t.matmul(ctx, selectors[static_cast<std::size_t>(h)], false, true);
            mixed = mixed < 0 ? placed : t.add(mixed, placed);
        }
        Ref attn = t.add(t.matmul(mixed, p.at(bp + "wo")), p.at(bp + "bo"));
        x = t.add(x, attn);
        Ref ln2 = layer_norm_affine(x, bp + "ln2_g", bp + "ln2_b");
        Ref hid = t.gelu(t.add(t.matmul(ln2, p.at(bp + "mlp_w1")), p.at(bp + "mlp_b1")));
        Ref mlp = t.add(t.matmul(hid, p.at(bp + "mlp_w2")), p.at(bp + "mlp_b2"));
        x = t.add(x, mlp);
        t.set_name(x, "state" + std::to_string(l));
        out.states.push_back(x);
    }

    Ref xn = layer_norm_affine(x, "ln_f_g", "ln_f_b");
    Ref cls_rows = t.matmul(t.constant(detail::placement_matrix(S, 0, 1)), xn, true, false);  // [B,1,H]
    out.cls_final = t.reshape(cls_rows, {B, H});
    out.logits = t.add(t.matmul(out.cls_final, head_w, false, true), head_b);
    t.set_name(out.logits, "logits");
    return out;
}

// leaf bindings for evaluate(): trunk parameters plus the classifier head
inline std::map<std::string, num::Tensor> forward_bindings(const ParamStore& params,
                                                           const ClassifierHead& head) {
    std::map<std::string, num::Tensor> b(params.begin(), params.end());
    b["head_w"] = head.weight;
    b["head_b"] = head.bias;
    return b;
}

}  // namespace mmcl::model

#endif
