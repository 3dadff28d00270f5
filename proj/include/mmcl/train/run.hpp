#ifndef MMCL_TRAIN_RUN_HPP
#define MMCL_TRAIN_RUN_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmcl/analysis/cka.hpp"
#include "mmcl/analysis/metrics.hpp"
#include "mmcl/core/rng.hpp"
#include "mmcl/model/checkpoint.hpp"
#include "mmcl/model/transformer.hpp"
#include "mmcl/strat/distill.hpp"
#include "mmcl/strat/ewc.hpp"
#include "mmcl/strat/replay.hpp"
#include "mmcl/tasks/generate.hpp"
#include "mmcl/train/trainer.hpp"

namespace mmcl::train {

// Strategy knobs for a run. memory_per_task = 0 disables replay even for
// strategies that would use it (distillation then runs without rehearsal).
struct StrategyConfig {
    strat::Strategy strategy = strat::Strategy::Ft;
    double gamma = 1.0;          // layer discount base
    double lambda_ewc = 100.0;
    double fd_scale = 1.0;
    int memory_per_task = 1000;
    int importance_layer = -1;   // -1: middle block
    int fisher_samples = 1000;

    void validate() const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("strategy: gamma must be in (0, 1]");
        if (lambda_ewc < 0.0) throw std::invalid_argument("strategy: lambda_ewc must be >= 0");
        if (fd_scale < 0.0) throw std::invalid_argument("strategy: fd_scale must be >= 0");
        if (memory_per_task < 0) throw std::invalid_argument("strategy: memory_per_task must be >= 0");
        if (fisher_samples < 1) throw std::invalid_argument("strategy: fisher_samples must be >= 1");
        if (strategy == strat::Strategy::MafedA && memory_per_task < 1)
            throw std::invalid_argument("strategy: adaptive weighting needs replay memory");
    }

    bool operator==(const StrategyConfig&) const = default;
};

// Everything one run produces. Matrices are lower-triangular over presentation
// stages: row t holds scores on tasks 1..t+1 after stage t+1. The probe
// representations of stage 1 are retained so later stages (and external
// tooling) can form similarity ratios without holding every stage's states.
struct RunResult {
    analysis::ScoreMatrix accuracy_matrix;
    analysis::ScoreMatrix weighted_matrix;
    std::vector<std::pair<num::Tensor, num::Tensor>> probe_reference;  // stage-1, per block (text, vision)
    std::vector<std::vector<double>> cka_ratios;  // per stage >= 2, per block
    std::vector<double> alpha_log;                // per distilled stage (2..T)
    std::vector<model::Checkpoint> checkpoints;   // per stage; multitask keeps one
    std::vector<TaskLogs> task_logs;
};

// Per-block (text states, vision states) matrices over a fixed probe set,
// rows in sample-major token order so they are comparable across stages.
inline std::vector<std::pair<num::Tensor, num::Tensor>> probe_states(
    const model::ModelConfig& cfg, const std::map<std::string, num::Tensor>& bindings,
    const model::ClassifierHead& head, const std::vector<const tasks::Sample*>& probe,
    int batch_size = 128) {
    if (probe.empty()) throw std::invalid_argument("probe: no samples");
    if (batch_size < 1) throw std::invalid_argument("probe: batch size must be >= 1");
    std::vector<std::vector<num::Tensor>> q_parts(static_cast<std::size_t>(cfg.num_layers));
    std::vector<std::vector<num::Tensor>> v_parts(static_cast<std::size_t>(cfg.num_layers));
    for (std::size_t start = 0; start < probe.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(probe.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const tasks::Sample*> part(probe.begin() + static_cast<std::ptrdiff_t>(start),
                                               probe.begin() + static_cast<std::ptrdiff_t>(stop));
        num::Tape t;
        const auto batch = assemble_batch(part, cfg, head);
        const auto refs = model::build_forward(t, cfg, batch, head.num_labels());
        t.evaluate(bindings);
        const auto mask = batch.modality_mask(cfg);
        for (int l = 0; l < cfg.num_layers; ++l) {
            auto split = model::split_states_by_modality(t.value(refs.states[static_cast<std::size_t>(l)]), mask);
            q_parts[static_cast<std::size_t>(l)].push_back(std::move(split.q));
            v_parts[static_cast<std::size_t>(l)].push_back(std::move(split.v));
        }
    }
    auto stack = [](const std::vector<num::Tensor>& parts) {
        std::int64_t rows = 0;
        for (const auto& p : parts) rows += p.shape.empty() ? 0 : p.shape[0];
        if (rows == 0) throw std::invalid_argument("probe: a modality partition is empty");
        const std::int64_t H = parts.front().shape[1];
        num::Tensor out = num::Tensor::zeros({rows, H});
        std::int64_t at = 0;
        for (const auto& p : parts) {
            if (p.shape.empty()) continue;
            std::copy(p.data.begin(), p.data.end(), out.data.begin() + at * H);
            at += p.shape[0];
        }
        return out;
    };
    std::vector<std::pair<num::Tensor, num::Tensor>> out;
    out.reserve(static_cast<std::size_t>(cfg.num_layers));
    for (int l = 0; l < cfg.num_layers; ++l)
        out.emplace_back(stack(q_parts[static_cast<std::size_t>(l)]),
                         stack(v_parts[static_cast<std::size_t>(l)]));
    return out;
}

namespace detail {

inline void check_order(const std::vector<int>& order, std::size_t num_tasks) {
    if (order.size() != num_tasks) throw std::invalid_argument("run: order length mismatch");
    std::set<int> seen(order.begin(), order.end());
    if (seen.size() != num_tasks || *seen.begin() != 0 ||
        *seen.rbegin() != static_cast<int>(num_tasks) - 1)
        throw std::invalid_argument("run: order is not a permutation of the tasks");
}

inline std::uint64_t head_seed(std::uint64_t run_seed, int stage) {
    return core::mix64(run_seed, 0x68656164ULL, static_cast<std::uint64_t>(stage));
}

}  // namespace detail

// Runs the full task sequence under one strategy: per stage, snapshot the
// previous model when distilling, grow the head, refresh adaptive importances
// from memory, train, refresh the anchor or memory, score every task seen so
// far, and dump probe representations. Multitask instead trains once on the
// union of all tasks and fills only the final row.
inline RunResult run_sequence(const model::ModelConfig& cfg, const tasks::TaskSequence& seq,
                              const std::vector<int>& order, const StrategyConfig& sc,
                              const TrainConfig& tc, const CreditFn& credit,
                              std::size_t probe_size = 512) {
    cfg.validate();
    sc.validate();
    tc.validate();
    detail::check_order(order, seq.tasks.size());
    const int T = static_cast<int>(seq.tasks.size());
    const std::int64_t H = cfg.hidden_dim;

    std::vector<const tasks::TaskData*> presented;
    for (int i : order) presented.push_back(&seq.tasks[static_cast<std::size_t>(i)]);

    const auto first_test = sample_ptrs(presented[0]->test);
    if (first_test.size() < 2) throw std::invalid_argument("run: probe set needs at least two samples");
    std::vector<const tasks::Sample*> probe(first_test.begin(),
                                            first_test.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                probe_size, first_test.size())));

    model::ParamStore params = model::init_trunk_params(cfg, tc.seed);
    model::ClassifierHead head;
    RunResult out;

    if (sc.strategy == strat::Strategy::Multitask) {
        std::vector<tasks::Sample> union_train, union_val;
        for (int t = 0; t < T; ++t) {
            head = model::expand_head(head, presented[static_cast<std::size_t>(t)]->labels, H,
                                      detail::head_seed(tc.seed, t));
            union_train.insert(union_train.end(), presented[static_cast<std::size_t>(t)]->train.begin(),
                               presented[static_cast<std::size_t>(t)]->train.end());
            union_val.insert(union_val.end(), presented[static_cast<std::size_t>(t)]->val.begin(),
                             presented[static_cast<std::size_t>(t)]->val.end());
        }
        TaskContext ctx;
        ctx.strategy = sc.strategy;
        out.task_logs.push_back(train_task(cfg, params, head, union_train, union_val, ctx, tc));
        const auto bindings = model::forward_bindings(params, head);
        std::vector<double> acc_row, wgt_row;
        for (int i = 0; i < T; ++i) {
            const auto r = evaluate_split(cfg, bindings, head,
                                          sample_ptrs(presented[static_cast<std::size_t>(i)]->test),
                                          credit, tc.eval_batch_size);
            acc_row.push_back(r.accuracy);
            wgt_row.push_back(r.weighted);
        }
        out.accuracy_matrix.assign(static_cast<std::size_t>(T), {});
        out.weighted_matrix.assign(static_cast<std::size_t>(T), {});
        out.accuracy_matrix.back() = acc_row;
        out.weighted_matrix.back() = wgt_row;
        out.checkpoints.push_back({cfg, params, head});
        return out;
    }

    const bool distills = strat::strategy_uses_fd(sc.strategy);
    const bool replays = strat::strategy_uses_replay(sc.strategy) && sc.memory_per_task > 0;
    if (distills && cfg.num_layers < 2)
        throw std::invalid_argument("run: distillation needs at least two blocks");
    std::vector<double> weights_by_block;
    if (distills)
        weights_by_block =
            strat::weights_by_block(strat::layer_discount_weights(sc.gamma, cfg.num_layers - 1));
    const int imp_layer = sc.importance_layer < 0 ? strat::default_importance_layer(cfg.num_layers)
                                                  : sc.importance_layer;
    if (imp_layer >= cfg.num_layers)
        throw std::invalid_argument("run: importance layer out of range");

    strat::ReplayMemory memory;
    if (replays) memory.capacity_per_task = sc.memory_per_task;
    strat::EwcState ewc_state;
    bool have_anchor = false;

    for (int t = 0; t < T; ++t) {
        const tasks::TaskData& task = *presented[static_cast<std::size_t>(t)];
        model::Checkpoint teacher;
        const bool distill_now = distills && t >= 1;
        if (distill_now) teacher = {cfg, params, head};

        head = model::expand_head(head, task.labels, H, detail::head_seed(tc.seed, t));
        if (have_anchor) {
            strat::expand_ewc_rows(ewc_state, "head_w", head.weight);
            strat::expand_ewc_rows(ewc_state, "head_b", head.bias);
        }

        TaskContext ctx;
        ctx.strategy = sc.strategy;
        ctx.fd_scale = sc.fd_scale;
        if (replays) ctx.memory = &memory;
        if (distill_now) {
            ctx.teacher = &teacher;
            ctx.weights_by_block = weights_by_block;
            const strat::AlphaMode mode = strat::alpha_mode_for(sc.strategy);
            if (mode == strat::AlphaMode::Adaptive) {
                if (memory.total() == 0)
                    throw std::runtime_error("run: adaptive weighting found an empty memory");
                std::vector<const tasks::Sample*> mem_ptrs;
                for (const auto& [id, v] : memory.per_task)
                    for (const auto& s : v) mem_ptrs.push_back(&s);
                const auto imp = strat::modality_importance(cfg, params, head, mem_ptrs, imp_layer);
                ctx.alpha = strat::compute_alpha(mode, imp.q, imp.v, 0, 0);
            } else if (mode == strat::AlphaMode::TokenProportional) {
                std::int64_t q_count = 0;
                for (const auto& s : task.train)
                    q_count += static_cast<std::int64_t>(s.question_tokens.size());
                const std::int64_t v_count =
                    static_cast<std::int64_t>(task.train.size()) * cfg.max_visual_len;
                ctx.alpha = strat::compute_alpha(mode, 0.0, 0.0, q_count, v_count);
            } else {
                ctx.alpha = strat::compute_alpha(mode, 0.0, 0.0, 0, 0);
            }
            out.alpha_log.push_back(ctx.alpha);
        }
        if (sc.strategy == strat::Strategy::Ewc && have_anchor) ctx.ewc = &ewc_state;

        out.task_logs.push_back(train_task(cfg, params, head, task.train, task.val, ctx, tc));

        if (sc.strategy == strat::Strategy::Ewc) {
            ewc_state.anchor = model::forward_bindings(params, head);
            ewc_state.fisher = strat::compute_fisher(cfg, params, head, task.train,
                                                     static_cast<std::size_t>(sc.fisher_samples));
            ewc_state.lambda = sc.lambda_ewc;
            have_anchor = true;
        }
        if (replays) {
            core::Rng mrng(core::mix64(tc.seed, 0x6d656d6f7279ULL, static_cast<std::uint64_t>(t)));
            strat::update_memory(memory, t, task.train, mrng);
        }

        const auto bindings = model::forward_bindings(params, head);
        std::vector<double> acc_row, wgt_row;
        for (int i = 0; i <= t; ++i) {
            const auto r = evaluate_split(cfg, bindings, head,
                                          sample_ptrs(presented[static_cast<std::size_t>(i)]->test),
                                          credit, tc.eval_batch_size);
            acc_row.push_back(r.accuracy);
            wgt_row.push_back(r.weighted);
        }
        out.accuracy_matrix.push_back(std::move(acc_row));
        out.weighted_matrix.push_back(std::move(wgt_row));

        auto states = probe_states(cfg, bindings, head, probe, tc.eval_batch_size);
        if (t == 0) {
            out.probe_reference = std::move(states);
        } else {
            analysis::RepresentationDump dump;
            dump.stages = {out.probe_reference, std::move(states)};
            out.cka_ratios.push_back(analysis::cka_ratio(dump)[0]);
        }
        out.checkpoints.push_back({cfg, params, head});
    }
    return out;
}

}  // namespace mmcl::train

#endif
