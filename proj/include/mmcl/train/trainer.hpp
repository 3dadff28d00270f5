#ifndef MMCL_TRAIN_TRAINER_HPP
#define MMCL_TRAIN_TRAINER_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/core/rng.hpp"
#include "mmcl/model/checkpoint.hpp"
#include "mmcl/model/transformer.hpp"
#include "mmcl/num/tape.hpp"
#include "mmcl/strat/distill.hpp"
#include "mmcl/strat/ewc.hpp"
#include "mmcl/strat/replay.hpp"
#include "mmcl/tasks/scene.hpp"
#include "mmcl/train/adam.hpp"
#include "mmcl/train/batching.hpp"
#include "mmcl/train/eval.hpp"
#include "mmcl/train/schedule.hpp"

namespace mmcl::train {

// Loss terms a strategy attaches to one task's training. Pointers reference
// caller-owned state and may be null when the piece is inactive.
struct TaskContext {
    strat::Strategy strategy = strat::Strategy::Ft;
    const strat::ReplayMemory* memory = nullptr;   // drawn from when the strategy replays
    const model::Checkpoint* teacher = nullptr;    // frozen previous-task model when distilling
    const strat::EwcState* ewc = nullptr;          // quadratic anchor when strategy is ewc
    double alpha = 0.5;                            // text share of the distillation loss
    std::vector<double> weights_by_block;          // distillation weight per block, sums to 1
    double fd_scale = 1.0;
};

struct EpochLog {
    int epoch = 0;          // 1-based
    double cls = 0.0;       // mean per-step classification loss
    double fd_text = 0.0;   // mean per-step distillation loss, text share (scaled)
    double fd_vision = 0.0; // vision share
    double ewc = 0.0;       // mean per-step anchor penalty
    double alpha = 0.5;
    double val_accuracy = 0.0;
};

struct TaskLogs {
    std::vector<double> step_lrs;  // one entry per optimizer step, schedule order
    std::int64_t total_steps = 0;  // schedule horizon (max_epochs worth of steps)
    std::vector<EpochLog> epochs;
    int best_epoch = 0;            // 1-based epoch of the kept checkpoint
    double best_val_accuracy = 0.0;
};

namespace detail {

inline void write_back(const std::map<std::string, num::Tensor>& bindings, model::ParamStore& params,
                       model::ClassifierHead& head) {
    for (const auto& [name, t] : bindings) {
        if (name == "head_w")
            head.weight = t;
        else if (name == "head_b")
            head.bias = t;
        else
            params[name] = t;
    }
}

inline num::Tensor label_tensor(const std::vector<std::int64_t>& labels) {
    num::Tensor t({static_cast<std::int64_t>(labels.size())},
                  std::vector<double>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) t.data[i] = static_cast<double>(labels[i]);
    return t;
}

}  // namespace detail

// Trains one task with Adam under the ramp/decay schedule, early-stopping on
// current-task validation accuracy and restoring the best checkpoint into
// params/head. Each step draws a replay batch of equal size when the strategy
// replays and memory is non-empty, and adds the distillation and anchor terms
// the context carries.
inline TaskLogs train_task(const model::ModelConfig& cfg, model::ParamStore& params,
                           model::ClassifierHead& head, const std::vector<tasks::Sample>& train_data,
                           const std::vector<tasks::Sample>& val_data, const TaskContext& ctx,
                           const TrainConfig& tc) {
    cfg.validate();
    tc.validate();
    if (train_data.empty()) throw std::invalid_argument("train: empty train set");
    if (val_data.empty()) throw std::invalid_argument("train: empty validation set");
    if (head.num_labels() < 1) throw std::invalid_argument("train: head has no labels");

    const bool replay_on = ctx.memory != nullptr && strat::strategy_uses_replay(ctx.strategy) &&
                           ctx.memory->total() > 0;
    const bool distill_on = ctx.teacher != nullptr && strat::strategy_uses_fd(ctx.strategy);
    const bool ewc_on = ctx.ewc != nullptr && ctx.strategy == strat::Strategy::Ewc &&
                        !ctx.ewc->fisher.empty();
    if (distill_on && ctx.weights_by_block.size() + 1 != static_cast<std::size_t>(cfg.num_layers))
        throw std::invalid_argument("train: distillation weights must cover every block but the last");

    std::map<std::string, num::Tensor> working = model::forward_bindings(params, head);
    std::map<std::string, num::Tensor> teacher_bindings;
    if (distill_on) teacher_bindings = model::forward_bindings(ctx.teacher->params, ctx.teacher->head);

    const std::int64_t n = static_cast<std::int64_t>(train_data.size());
    const std::int64_t bs = tc.batch_size;
    const std::int64_t steps_per_epoch = (n + bs - 1) / bs;
    TaskLogs logs;
    logs.total_steps = steps_per_epoch * tc.max_epochs;

    Adam opt(tc.beta1, tc.beta2, tc.adam_eps);
    core::Rng shuffle_rng(core::mix64(tc.seed, 0x73687566666c65ULL));
    core::Rng replay_rng(core::mix64(tc.seed, 0x7265706c6179ULL));
    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const auto val_ptrs = sample_ptrs(val_data);
    std::map<std::string, num::Tensor> best = working;
    double best_val = -1.0;
    int stale = 0;
    std::int64_t global_step = 0;

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double cls_sum = 0.0, fdq_sum = 0.0, fdv_sum = 0.0, ewc_sum = 0.0;

        for (std::int64_t start = 0; start < n; start += bs) {
            const std::int64_t stop = std::min(n, start + bs);
            std::vector<const tasks::Sample*> ptrs;
            ptrs.reserve(static_cast<std::size_t>(2 * (stop - start)));
            for (std::int64_t i = start; i < stop; ++i)
                ptrs.push_back(&train_data[order[static_cast<std::size_t>(i)]]);
            std::vector<tasks::Sample> replayed;  // must outlive the tape evaluation
            if (replay_on) {
                replayed = strat::draw_replay(*ctx.memory, static_cast<std::size_t>(stop - start),
                                              replay_rng);
                for (const auto& s : replayed) ptrs.push_back(&s);
            }

            num::Tape t;
            const auto batch = assemble_batch(ptrs, cfg, head);
            const auto refs = model::build_forward(t, cfg, batch, head.num_labels());
            const auto cls = t.scale(t.cross_entropy_sum(refs.logits, t.constant(detail::label_tensor(batch.labels))),
                                     1.0 / static_cast<double>(batch.batch_size()));
            auto total = cls;

            std::vector<num::Tensor> teacher_states;
            std::vector<num::Tape::Ref> student_states;
            const auto mask = batch.modality_mask(cfg);
            if (distill_on) {
                num::Tape tt;
                const auto trefs = model::build_forward(tt, cfg, batch, ctx.teacher->head.num_labels());
                tt.evaluate(teacher_bindings);
                for (int l = 0; l + 1 < cfg.num_layers; ++l) {
                    teacher_states.push_back(tt.value(trefs.states[static_cast<std::size_t>(l)]));
                    student_states.push_back(refs.states[static_cast<std::size_t>(l)]);
                }
                const auto fd = strat::fd_loss_term(t, student_states, teacher_states, mask,
                                                    cfg.hidden_dim, ctx.alpha, ctx.weights_by_block,
                                                    ctx.fd_scale);
                total = t.add(total, fd);
            }
            num::Tape::Ref ewc_ref = -1;
            if (ewc_on) {
                std::map<std::string, num::Tape::Ref> param_refs;
                for (const auto& [name, f] : ctx.ewc->fisher) param_refs[name] = t.ref_of(name);
                ewc_ref = strat::ewc_penalty_term(t, param_refs, *ctx.ewc);
                total = t.add(total, ewc_ref);
            }

            t.evaluate(working);
            const auto grads = t.backward(total);
            const double lr = lr_at_step(global_step, logs.total_steps, tc.max_lr, tc.warmup_fraction);
            opt.step(working, grads, lr);
            logs.step_lrs.push_back(lr);
            ++global_step;

            cls_sum += t.value(cls).data[0];
            if (distill_on) {
                std::vector<num::Tensor> student_vals;
                student_vals.reserve(student_states.size());
                for (auto r : student_states) student_vals.push_back(t.value(r));
                const auto per_layer = strat::fd_modality_losses(student_vals, teacher_states, mask);
                double q = 0.0, v = 0.0;
                for (std::size_t l = 0; l < per_layer.size(); ++l) {
                    q += ctx.weights_by_block[l] * per_layer[l].first;
                    v += ctx.weights_by_block[l] * per_layer[l].second;
                }
                fdq_sum += ctx.fd_scale * ctx.alpha * q;
                fdv_sum += ctx.fd_scale * (1.0 - ctx.alpha) * v;
            }
            if (ewc_on) ewc_sum += t.value(ewc_ref).data[0];
        }

        EpochLog e;
        e.epoch = epoch;
        const double steps = static_cast<double>(steps_per_epoch);
        e.cls = cls_sum / steps;
        e.fd_text = fdq_sum / steps;
        e.fd_vision = fdv_sum / steps;
        e.ewc = ewc_sum / steps;
        e.alpha = ctx.alpha;
        e.val_accuracy =
            evaluate_split(cfg, working, head, val_ptrs, exact_match_credit, tc.eval_batch_size).accuracy;
        logs.epochs.push_back(e);

        if (e.val_accuracy > best_val) {
            best_val = e.val_accuracy;
            logs.best_epoch = epoch;
            best = working;
            stale = 0;
        } else if (++stale >= tc.patience) {
            break;
        }
    }

    logs.best_val_accuracy = best_val;
    detail::write_back(best, params, head);
    return logs;
}

}  // namespace mmcl::train

#endif
