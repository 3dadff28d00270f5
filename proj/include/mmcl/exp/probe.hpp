#ifndef MMCL_EXP_PROBE_HPP
#define MMCL_EXP_PROBE_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/analysis/cka.hpp"
#include "mmcl/model/checkpoint.hpp"
#include "mmcl/model/transformer.hpp"
#include "mmcl/tasks/generate.hpp"
#include "mmcl/train/run.hpp"

namespace mmcl::exp {

struct ProbeOptions {
    tasks::SettingKind setting = tasks::SettingKind::QuestionTypes;
    std::uint64_t seed = 1;
    int samples = 512;
    int order_index = 0;
    tasks::SplitSizes sizes{};  // must match the sizes the checkpoints were trained from
};

// Drift of checkpoint b relative to checkpoint a, measured per block on the
// test set of the first task under the chosen order. The reference checkpoint
// plays the role the stage-1 model plays inside a run.
inline std::vector<double> probe_checkpoints(const model::Checkpoint& a, const model::Checkpoint& b,
                                             const ProbeOptions& opt = {}) {
    if (!(a.config == b.config))
        throw std::invalid_argument("probe: checkpoints disagree on the encoder shape");
    if (opt.samples < 2) throw std::invalid_argument("probe: need at least two samples");

    const auto seq = tasks::generate_sequence(opt.seed, opt.setting, opt.sizes);
    const auto order = tasks::task_order_for(opt.order_index);
    const auto& first = seq.tasks.at(static_cast<std::size_t>(order.at(0)));
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(opt.samples), first.test.size());
    std::vector<const tasks::Sample*> probe;
    probe.reserve(n);
    for (std::size_t i = 0; i < n; ++i) probe.push_back(&first.test[i]);

    const auto ref = train::probe_states(a.config, model::forward_bindings(a.params, a.head), a.head, probe);
    auto cur = train::probe_states(b.config, model::forward_bindings(b.params, b.head), b.head, probe);
    analysis::RepresentationDump dump;
    dump.stages = {ref, std::move(cur)};
    const auto rows = analysis::cka_ratio(dump);
    return rows.at(0);
}

}  // namespace mmcl::exp

#endif
