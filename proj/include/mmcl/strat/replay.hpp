#ifndef MMCL_STRAT_REPLAY_HPP
#define MMCL_STRAT_REPLAY_HPP

#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

#include "mmcl/core/rng.hpp"
#include "mmcl/tasks/scene.hpp"

namespace mmcl::strat {

// Per-task episodic memory with a fixed per-task budget.
struct ReplayMemory {
    std::map<int, std::vector<tasks::Sample>> per_task;
    int capacity_per_task = 1000;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [id, v] : per_task) n += v.size();
        return n;
    }
};

// Stores min(M, |samples|) items picked uniformly without replacement,
// keeping dataset order. Other tasks' slots are untouched.
inline void update_memory(ReplayMemory& mem, int task_id, const std::vector<tasks::Sample>& samples,
                          core::Rng& rng) {
    if (mem.capacity_per_task < 1) throw std::invalid_argument("replay: capacity must be >= 1");
    const std::size_t keep = std::min<std::size_t>(samples.size(),
                                                   static_cast<std::size_t>(mem.capacity_per_task));
    auto idx = rng.sample_without_replacement(samples.size(), keep);
    std::sort(idx.begin(), idx.end());
    std::vector<tasks::Sample> stored;
    stored.reserve(keep);
    for (auto i : idx) stored.push_back(samples[i]);
    mem.per_task[task_id] = std::move(stored);
}

// Uniform draw over the union of every stored task's samples; switches to
// with-replacement only when the request exceeds the pool.
inline std::vector<tasks::Sample> draw_replay(const ReplayMemory& mem, std::size_t n, core::Rng& rng) {
    std::vector<const tasks::Sample*> pool;
    for (const auto& [id, v] : mem.per_task)
        for (const auto& s : v) pool.push_back(&s);
    if (pool.empty()) throw std::logic_error("replay: memory is empty");
    std::vector<tasks::Sample> out;
    out.reserve(n);
    if (n <= pool.size()) {
        for (auto i : rng.sample_without_replacement(pool.size(), n)) out.push_back(*pool[i]);
    } else {
        for (std::size_t k = 0; k < n; ++k) out.push_back(*pool[rng.below(pool.size())]);
    }
    return out;
}

}  // namespace mmcl::strat

#endif
