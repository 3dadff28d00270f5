#ifndef MMCL_STRAT_DISTILL_HPP
#define MMCL_STRAT_DISTILL_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmcl/model/batch.hpp"
#include "mmcl/model/checkpoint.hpp"
#include "mmcl/model/transformer.hpp"
#include "mmcl/num/tape.hpp"
#include "mmcl/tasks/scene.hpp"
#include "mmcl/train/batching.hpp"

namespace mmcl::strat {

enum class Strategy { Ft, Ewc, Er, Fd, MafedB, MafedA, Multitask };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Ft: return "ft";
        case Strategy::Ewc: return "ewc";
        case Strategy::Er: return "er";
        case Strategy::Fd: return "fd";
        case Strategy::MafedB: return "mafed_b";
        case Strategy::MafedA: return "mafed_a";
        case Strategy::Multitask: return "multitask";
    }
    throw std::logic_error("strategy_name");
}

inline Strategy parse_strategy(const std::string& s) {
    for (Strategy k : {Strategy::Ft, Strategy::Ewc, Strategy::Er, Strategy::Fd, Strategy::MafedB,
                       Strategy::MafedA, Strategy::Multitask})
        if (s == strategy_name(k)) return k;
    throw std::invalid_argument("unknown strategy: " + s);
}

inline bool strategy_uses_replay(Strategy s) {
    return s == Strategy::Er || s == Strategy::Fd || s == Strategy::MafedB || s == Strategy::MafedA;
}
inline bool strategy_uses_fd(Strategy s) {
    return s == Strategy::Fd || s == Strategy::MafedB || s == Strategy::MafedA;
}

enum class AlphaMode { TokenProportional, Balanced, Adaptive };

inline AlphaMode alpha_mode_for(Strategy s) {
    switch (s) {
        case Strategy::Fd: return AlphaMode::TokenProportional;
        case Strategy::MafedB: return AlphaMode::Balanced;
        case Strategy::MafedA: return AlphaMode::Adaptive;
        default: throw std::invalid_argument("strategy has no distillation blend");
    }
}

// w_d = gamma^d / sum_k gamma^k for d = 0..num_distilled-1, where d counts
// distance from the classifier: d=0 is the deepest distilled layer. gamma=1
// weighs all layers equally; smaller gamma shifts weight toward depth.
inline std::vector<double> layer_discount_weights(double gamma, int num_distilled) {
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("gamma must lie in (0, 1]");
    if (num_distilled < 1) throw std::invalid_argument("need at least one distilled layer");
    std::vector<double> w(static_cast<std::size_t>(num_distilled));
    double pow_d = 1.0, total = 0.0;
    for (int d = 0; d < num_distilled; ++d) {
        w[static_cast<std::size_t>(d)] = pow_d;
        total += pow_d;
        pow_d *= gamma;
    }
    for (double& x : w) x /= total;
    return w;
}

// Distance-indexed weights rearranged to block order (block 0 first). Block j
// of D+1 distilled blocks sits at distance D-j from the classifier.
inline std::vector<double> weights_by_block(const std::vector<double>& by_distance) {
    return {by_distance.rbegin(), by_distance.rend()};
}

struct DistillState {
    model::Checkpoint teacher;  // frozen previous-task model
    double gamma = 1.0;
    std::vector<double> layer_weights;  // by distance, d=0 deepest
    AlphaMode mode = AlphaMode::Balanced;
    double alpha = 0.5;
    double importance_q = 0.0, importance_v = 0.0;
    double fd_scale = 1.0;

    void check() const {
        if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("gamma must lie in (0, 1]");
        if (fd_scale < 0.0) throw std::invalid_argument("fd_scale must be >= 0");
        if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must lie in [0, 1]");
        if (mode == AlphaMode::Balanced && alpha != 0.5)
            throw std::invalid_argument("balanced mode pins alpha to 0.5");
        double s = 0.0;
        for (double w : layer_weights) {
            if (w < 0.0) throw std::invalid_argument("layer weights must be >= 0");
            s += w;
        }
        if (!layer_weights.empty() && std::abs(s - 1.0) > 1e-12)
            throw std::invalid_argument("layer weights must sum to 1");
    }
};

// Per-layer distillation losses: mean over TEXT tokens of the squared
// euclidean gap between student and teacher states, and likewise over VISION
// tokens. CLS and PAD rows never contribute.
inline std::vector<std::pair<double, double>> fd_modality_losses(
    const std::vector<num::Tensor>& student_states, const std::vector<num::Tensor>& teacher_states,
    const std::vector<std::vector<model::Modality>>& mask) {
    if (student_states.size() != teacher_states.size())
        throw std::invalid_argument("fd: student/teacher layer count mismatch");
    if (student_states.empty()) throw std::invalid_argument("fd: no layers");
    std::vector<std::pair<double, double>> out;
    out.reserve(student_states.size());
    for (std::size_t l = 0; l < student_states.size(); ++l) {
        const num::Tensor& s = student_states[l];
        const num::Tensor& t = teacher_states[l];
        if (s.shape != t.shape) throw std::invalid_argument("fd: state shape mismatch");
        if (s.ndim() != 3) throw std::invalid_argument("fd: states must be [B, S, H]");
        const std::int64_t B = s.shape[0], S = s.shape[1], H = s.shape[2];
        if (static_cast<std::int64_t>(mask.size()) != B ||
            (B > 0 && static_cast<std::int64_t>(mask[0].size()) != S))
            throw std::invalid_argument("fd: modality mask mismatch");
        double q_sum = 0.0, v_sum = 0.0;
        std::int64_t nq = 0, nv = 0;
        for (std::int64_t b = 0; b < B; ++b) {
            for (std::int64_t i = 0; i < S; ++i) {
                const model::Modality m = mask[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)];
                if (m != model::Modality::TEXT && m != model::Modality::VISION) continue;
                double acc = 0.0;
                const std::size_t base = static_cast<std::size_t>((b * S + i) * H);
                for (std::int64_t h = 0; h < H; ++h) {
                    const double d = s.data[base + static_cast<std::size_t>(h)] -
                                     t.data[base + static_cast<std::size_t>(h)];
                    acc += d * d;
                }
                if (m == model::Modality::TEXT) {
                    q_sum += acc;
                    ++nq;
                } else {
                    v_sum += acc;
                    ++nv;
                }
            }
        }
        if (nq == 0 || nv == 0) throw std::invalid_argument("fd: a modality partition is empty");
        out.emplace_back(q_sum / static_cast<double>(nq), v_sum / static_cast<double>(nv));
    }
    return out;
}

inline double compute_alpha(AlphaMode mode, double importance_q, double importance_v,
                            std::int64_t q_count, std::int64_t v_count) {
    switch (mode) {
        case AlphaMode::Balanced:
            return 0.5;
        case AlphaMode::TokenProportional: {
            if (q_count < 0 || v_count < 0 || q_count + v_count <= 0)
                throw std::invalid_argument("alpha: need a positive token count");
            return static_cast<double>(q_count) / static_cast<double>(q_count + v_count);
        }
        case AlphaMode::Adaptive: {
            if (importance_q < 0.0 || importance_v < 0.0)
                throw std::invalid_argument("alpha: importances must be >= 0");
            if (importance_q + importance_v <= 0.0)
                throw std::invalid_argument("alpha: both modality importances vanished");
            return importance_q / (importance_q + importance_v);
        }
    }
    throw std::logic_error("compute_alpha");
}

// cls + fd_scale * sum_l w_l * (alpha * L_Q,l + (1-alpha) * L_V,l) + ewc.
// Weights must arrive in the same layer order as the losses.
inline double total_loss(double cls_loss, const std::vector<std::pair<double, double>>& fd_layers,
                         double alpha, const std::vector<double>& layer_weights, double fd_scale,
                         double ewc_term) {
    if (fd_layers.size() != layer_weights.size())
        throw std::invalid_argument("total_loss: layer weight count mismatch");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("total_loss: alpha out of range");
    double fd = 0.0;
    for (std::size_t l = 0; l < fd_layers.size(); ++l)
        fd += layer_weights[l] * (alpha * fd_layers[l].first + (1.0 - alpha) * fd_layers[l].second);
    return cls_loss + fd_scale * fd + ewc_term;
}

namespace detail {

// 0/1 masks [B,S,H] marking TEXT and VISION rows, plus token counts.
struct ModalityMasks {
    num::Tensor text, vision;
    std::int64_t text_tokens = 0, vision_tokens = 0;
};

inline ModalityMasks modality_masks(const std::vector<std::vector<model::Modality>>& mask,
                                    std::int64_t hidden_dim) {
    const std::int64_t B = static_cast<std::int64_t>(mask.size());
    if (B == 0) throw std::invalid_argument("modality mask is empty");
    const std::int64_t S = static_cast<std::int64_t>(mask[0].size());
    ModalityMasks out;
    out.text = num::Tensor::zeros({B, S, hidden_dim});
    out.vision = num::Tensor::zeros({B, S, hidden_dim});
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t i = 0; i < S; ++i) {
            const model::Modality m = mask[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)];
            num::Tensor* dst = nullptr;
            if (m == model::Modality::TEXT) {
                dst = &out.text;
                ++out.text_tokens;
            } else if (m == model::Modality::VISION) {
                dst = &out.vision;
                ++out.vision_tokens;
            }
            if (!dst) continue;
            const std::size_t base = static_cast<std::size_t>((b * S + i) * hidden_dim);
            std::fill(dst->data.begin() + static_cast<std::ptrdiff_t>(base),
                      dst->data.begin() + static_cast<std::ptrdiff_t>(base + hidden_dim), 1.0);
        }
    }
    return out;
}

}  // namespace detail

// Tape-side distillation term over the given student state nodes against fixed
// teacher values: fd_scale * sum_l w_l * (alpha*L_Q,l + (1-alpha)*L_V,l), with
// weights in the same layer order as the states. Gradients flow only into the
// student.
inline num::Tape::Ref fd_loss_term(num::Tape& t, const std::vector<num::Tape::Ref>& student_states,
                                   const std::vector<num::Tensor>& teacher_states,
                                   const std::vector<std::vector<model::Modality>>& mask,
                                   std::int64_t hidden_dim, double alpha,
                                   const std::vector<double>& weights_in_layer_order,
                                   double fd_scale) {
    if (student_states.size() != teacher_states.size() ||
        student_states.size() != weights_in_layer_order.size())
        throw std::invalid_argument("fd term: layer count mismatch");
    if (student_states.empty()) throw std::invalid_argument("fd term: no layers");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("fd term: alpha out of range");
    const auto masks = detail::modality_masks(mask, hidden_dim);
    if (masks.text_tokens == 0 || masks.vision_tokens == 0)
        throw std::invalid_argument("fd term: a modality partition is empty");
    const num::Tape::Ref mask_q = t.constant(masks.text);
    const num::Tape::Ref mask_v = t.constant(masks.vision);
    num::Tape::Ref acc = t.constant_scalar(0.0);
    for (std::size_t l = 0; l < student_states.size(); ++l) {
        const auto diff = t.sub(student_states[l], t.constant(teacher_states[l]));
        const auto lq = t.scale(t.squared_l2(t.mul(diff, mask_q)),
                                1.0 / static_cast<double>(masks.text_tokens));
        const auto lv = t.scale(t.squared_l2(t.mul(diff, mask_v)),
                                1.0 / static_cast<double>(masks.vision_tokens));
        const auto blended = t.add(t.scale(lq, alpha), t.scale(lv, 1.0 - alpha));
        acc = t.add(acc, t.scale(blended, weights_in_layer_order[l]));
    }
    return t.scale(acc, fd_scale);
}

// Per-sample squared gradient mass on TEXT and VISION rows of a [B,S,H]
// gradient tensor.
inline std::vector<std::pair<double, double>> masked_grad_sq_per_sample(
    const num::Tensor& grad_states, const std::vector<std::vector<model::Modality>>& mask) {
    if (grad_states.ndim() != 3) throw std::invalid_argument("importance: gradient must be [B, S, H]");
    const std::int64_t B = grad_states.shape[0], S = grad_states.shape[1], H = grad_states.shape[2];
    if (static_cast<std::int64_t>(mask.size()) != B ||
        (B > 0 && static_cast<std::int64_t>(mask[0].size()) != S))
        throw std::invalid_argument("importance: modality mask mismatch");
    std::vector<std::pair<double, double>> out(static_cast<std::size_t>(B), {0.0, 0.0});
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t i = 0; i < S; ++i) {
            const model::Modality m = mask[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)];
            if (m != model::Modality::TEXT && m != model::Modality::VISION) continue;
            double acc = 0.0;
            const std::size_t base = static_cast<std::size_t>((b * S + i) * H);
            for (std::int64_t h = 0; h < H; ++h) {
                const double g = grad_states.data[base + static_cast<std::size_t>(h)];
                acc += g * g;
            }
            if (m == model::Modality::TEXT)
                out[static_cast<std::size_t>(b)].first += acc;
            else
                out[static_cast<std::size_t>(b)].second += acc;
        }
    }
    return out;
}

inline int default_importance_layer(int num_layers) { return (num_layers - 1) / 2; }

struct ImportancePair {
    double q = 0.0, v = 0.0;
};

// Modality importance from memory data: mean over samples of the squared
// Frobenius norm of the classification-loss gradient at the designated
// layer's states, restricted to each modality's rows. Labels are the stored
// ground-truth answers. Each sample's state rows feed only its own logits, so
// one batched backward pass yields every per-sample gradient exactly.
inline ImportancePair modality_importance(const model::ModelConfig& cfg,
                                          const model::ParamStore& params,
                                          const model::ClassifierHead& head,
                                          const std::vector<const tasks::Sample*>& memory_data,
                                          int layer_index, std::size_t chunk_size = 256) {
    if (memory_data.empty()) throw std::invalid_argument("importance: no memory data");
    if (layer_index < 0 || layer_index >= cfg.num_layers)
        throw std::invalid_argument("importance: layer index out of range");
    if (chunk_size == 0) throw std::invalid_argument("importance: chunk size must be positive");
    const auto bindings = model::forward_bindings(params, head);
    double q_total = 0.0, v_total = 0.0;
    for (std::size_t start = 0; start < memory_data.size(); start += chunk_size) {
        const std::size_t stop = std::min(memory_data.size(), start + chunk_size);
        std::vector<const tasks::Sample*> part(memory_data.begin() + static_cast<std::ptrdiff_t>(start),
                                               memory_data.begin() + static_cast<std::ptrdiff_t>(stop));
        num::Tape t;
        const auto batch = train::assemble_batch(part, cfg, head);
        const auto refs = model::build_forward(t, cfg, batch, head.num_labels());
        num::Tensor labels({static_cast<std::int64_t>(batch.labels.size())},
                           std::vector<double>(batch.labels.size()));
        for (std::size_t i = 0; i < batch.labels.size(); ++i)
            labels.data[i] = static_cast<double>(batch.labels[i]);
        const auto loss = t.cross_entropy_sum(refs.logits, t.constant(std::move(labels)));
        t.evaluate(bindings);
        t.backward(loss);
        const auto per_sample = masked_grad_sq_per_sample(
            t.grad(refs.states[static_cast<std::size_t>(layer_index)]), batch.modality_mask(cfg));
        for (const auto& [q_sq, v_sq] : per_sample) {
            q_total += q_sq;
            v_total += v_sq;
        }
    }
    const double n = static_cast<double>(memory_data.size());
    return {q_total / n, v_total / n};
}

}  // namespace mmcl::strat

#endif
