#ifndef MMCL_TASKS_GENERATE_HPP
#define MMCL_TASKS_GENERATE_HPP

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmcl/core/rng.hpp"
#include "mmcl/tasks/scene.hpp"
#include "mmcl/tasks/universe.hpp"

namespace mmcl::tasks {

enum class SettingKind : int { DiverseContent = 0, TaxonomyContent = 1, QuestionTypes = 2 };
inline constexpr int kNumTasks = 5;

inline const char* setting_name(SettingKind k) {
    switch (k) {
        case SettingKind::DiverseContent: return "diverse_content";
        case SettingKind::TaxonomyContent: return "taxonomy_content";
        case SettingKind::QuestionTypes: return "question_types";
    }
    return "?";
}

inline SettingKind setting_from_name(const std::string& s) {
    if (s == "diverse_content") return SettingKind::DiverseContent;
    if (s == "taxonomy_content") return SettingKind::TaxonomyContent;
    if (s == "question_types") return SettingKind::QuestionTypes;
    throw std::invalid_argument("unknown setting: " + s);
}

struct SplitSizes {
    int train = 2000;
    int val = 500;
    int test = 1000;

    bool operator==(const SplitSizes&) const = default;
};

struct TaskData {
    std::vector<int> concept_ids;
    std::vector<QType> qtypes;
    std::vector<Sample> train, val, test;
    std::vector<std::string> labels;  // sorted unique answers over all splits
};

struct TaskSequence {
    SettingKind kind = SettingKind::DiverseContent;
    std::vector<TaskData> tasks;           // length 5, canonical order
    std::vector<int> task_order;           // identity here; runs permute it
};

namespace detail {

// Draws a (scene, question) pair that the oracle can answer. Targets lean on
// shapes present in the scene so positives dominate without excluding
// zero-count and "no" answers.
inline std::pair<Scene, Question> draw_pair(core::Rng& rng, const std::vector<int>& concept_pool,
                                            const std::vector<QType>& qtypes) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Scene s = random_scene(rng, concept_pool);
        const QType q = qtypes[rng.below(qtypes.size())];
        std::vector<int> present;
        for (const auto& o : s.objects) present.push_back(concept_by_id(o.concept_id).shape_class);
        std::sort(present.begin(), present.end());
        present.erase(std::unique(present.begin(), present.end()), present.end());

        Question question;
        question.qtype = q;
        question.template_idx = static_cast<int>(rng.below(question_templates(q).size()));
        switch (q) {
            case QType::Count:
            case QType::Existence: {
                // half the draws target an arbitrary shape so 0 / "no" occur
                if (!present.empty() && rng.below(2) == 0)
                    question.target_shape = present[rng.below(present.size())];
                else
                    question.target_shape = static_cast<int>(rng.below(kNumShapes));
                break;
            }
            case QType::Color:
            case QType::Position: {
                std::vector<int> unique_shapes;
                for (int sh : present)
                    if (count_shape(s, sh) == 1) unique_shapes.push_back(sh);
                if (unique_shapes.empty()) continue;
                question.target_shape = unique_shapes[rng.below(unique_shapes.size())];
                break;
            }
            case QType::Shape: {
                std::vector<int> unique_colors;
                for (int c = 0; c < kNumColors; ++c)
                    if (count_color(s, c) == 1) unique_colors.push_back(c);
                if (unique_colors.empty()) continue;
                question.target_color = unique_colors[rng.below(unique_colors.size())];
                break;
            }
        }
        question.tokens = surface_tokens(question);
        return {std::move(s), std::move(question)};
    }
    throw std::logic_error("generate: could not draw an answerable question");
}

inline std::vector<Sample> draw_split(core::Rng& rng, const std::vector<int>& concept_pool,
                                      const std::vector<QType>& qtypes, int n, int task_id) {
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto [scene, question] = draw_pair(rng, concept_pool, qtypes);
        out.push_back(render_sample(scene, question, rng.next_u64(), task_id));
    }
    return out;
}

}  // namespace detail

inline TaskSequence generate_sequence(std::uint64_t seed, SettingKind kind,
                                      const SplitSizes& sizes = {}) {
    if (sizes.train < 1 || sizes.val < 1 || sizes.test < 1)
        throw std::invalid_argument("generate: split sizes must be positive");
    if (kNumConcepts < 50 || kNumSupercats < 5)
        throw std::logic_error("generate: universe too small");

    const std::vector<QType> all_qtypes{QType::Count, QType::Color, QType::Existence,
                                        QType::Position, QType::Shape};
    static_assert(kNumConcepts >= kNumTasks * 10);

    TaskSequence seq;
    seq.kind = kind;
    std::vector<std::vector<int>> concept_sets(kNumTasks);
    std::vector<std::vector<QType>> qtype_sets(kNumTasks, all_qtypes);
    if (kind == SettingKind::DiverseContent) {
        std::vector<std::size_t> ids(kNumConcepts);
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        core::Rng shuffle_rng(core::mix64(seed, 1));
        shuffle_rng.shuffle(ids);
        for (int t = 0; t < kNumTasks; ++t)
            for (int k = 0; k < 10; ++k)
                concept_sets[static_cast<std::size_t>(t)].push_back(static_cast<int>(ids[static_cast<std::size_t>(t * 10 + k)]));
    } else if (kind == SettingKind::TaxonomyContent) {
        for (int t = 0; t < kNumTasks; ++t)
            for (int c = 0; c < kNumConcepts; ++c)
                if (concept_by_id(c).supercategory == t) concept_sets[static_cast<std::size_t>(t)].push_back(c);
    } else {
        for (int t = 0; t < kNumTasks; ++t) {
            for (int c = 0; c < kNumConcepts; ++c) concept_sets[static_cast<std::size_t>(t)].push_back(c);
            qtype_sets[static_cast<std::size_t>(t)] = {all_qtypes[static_cast<std::size_t>(t)]};
        }
    }

    for (int t = 0; t < kNumTasks; ++t) {
        TaskData task;
        task.concept_ids = concept_sets[static_cast<std::size_t>(t)];
        task.qtypes = qtype_sets[static_cast<std::size_t>(t)];
        core::Rng train_rng(core::mix64(seed, static_cast<std::uint64_t>(t), 1));
        core::Rng val_rng(core::mix64(seed, static_cast<std::uint64_t>(t), 2));
        core::Rng test_rng(core::mix64(seed, static_cast<std::uint64_t>(t), 3));
        task.train = detail::draw_split(train_rng, task.concept_ids, task.qtypes, sizes.train, t);
        task.val = detail::draw_split(val_rng, task.concept_ids, task.qtypes, sizes.val, t);
        task.test = detail::draw_split(test_rng, task.concept_ids, task.qtypes, sizes.test, t);

        std::set<std::string> labels;
        for (const auto* split : {&task.train, &task.val, &task.test})
            for (const auto& s : *split) labels.insert(s.answer);
        task.labels.assign(labels.begin(), labels.end());
        seq.tasks.push_back(std::move(task));
    }
    for (int t = 0; t < kNumTasks; ++t) seq.task_order.push_back(t);
    return seq;
}

// order permutation for a run: order 0 is the canonical order, higher indices
// derive a deterministic shuffle independent of everything else
inline std::vector<int> task_order_for(int order_index) {
    std::vector<int> order(kNumTasks);
    for (int i = 0; i < kNumTasks; ++i) order[static_cast<std::size_t>(i)] = i;
    if (order_index > 0) {
        std::vector<std::size_t> idx(kNumTasks);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        core::Rng rng(core::mix64(0x7a5c0fdeULL, static_cast<std::uint64_t>(order_index)));
        rng.shuffle(idx);
        for (int i = 0; i < kNumTasks; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(idx[static_cast<std::size_t>(i)]);
    }
    return order;
}

}  // namespace mmcl::tasks

#endif
