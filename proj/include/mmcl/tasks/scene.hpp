#ifndef MMCL_TASKS_SCENE_HPP
#define MMCL_TASKS_SCENE_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/core/rng.hpp"
#include "mmcl/num/tensor.hpp"
#include "mmcl/tasks/universe.hpp"

namespace mmcl::tasks {

struct SceneObject {
    int concept_id = 0;
    int color = 0;  // instance color
    int cell = 0;   // 0..15 on the 4x4 grid
};

struct Scene {
    std::vector<SceneObject> objects;  // 1..6, distinct cells
    std::uint64_t seed = 0;
};

struct Question {
    QType qtype = QType::Count;
    int target_shape = -1;  // shape-targeted qtypes
    int target_color = -1;  // the shape qtype
    int template_idx = 0;
    std::vector<int> tokens;
};

inline Scene random_scene(core::Rng& rng, const std::vector<int>& concept_pool) {
    if (concept_pool.empty()) throw std::invalid_argument("scene: empty concept pool");
    Scene s;
    s.seed = rng.next_u64();
    core::Rng local(s.seed);
    const int n = 1 + static_cast<int>(local.below(kMaxObjects));
    auto cells = local.sample_without_replacement(kGridCells, static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        SceneObject o;
        o.concept_id = concept_pool[local.below(concept_pool.size())];
        o.color = static_cast<int>(local.below(kNumColors));
        o.cell = static_cast<int>(cells[static_cast<std::size_t>(i)]);
        s.objects.push_back(o);
    }
    return s;
}

inline int count_shape(const Scene& s, int shape) {
    int n = 0;
    for (const auto& o : s.objects) n += concept_by_id(o.concept_id).shape_class == shape;
    return n;
}

inline int count_color(const Scene& s, int color) {
    int n = 0;
    for (const auto& o : s.objects) n += o.color == color;
    return n;
}

// Ground truth. Pure; throws when the question has no unique answer, which
// generation must never allow to escape.
inline std::string oracle_answer(const Scene& s, const Question& q) {
    switch (q.qtype) {
        case QType::Count:
            return std::to_string(count_shape(s, q.target_shape));
        case QType::Existence:
            return count_shape(s, q.target_shape) > 0 ? "yes" : "no";
        case QType::Color: {
            if (count_shape(s, q.target_shape) != 1)
                throw std::logic_error("oracle: color question without a unique target");
            for (const auto& o : s.objects)
                if (concept_by_id(o.concept_id).shape_class == q.target_shape)
                    return color_names()[static_cast<std::size_t>(o.color)];
            throw std::logic_error("oracle: unreachable");
        }
        case QType::Position: {
            if (count_shape(s, q.target_shape) != 1)
                throw std::logic_error("oracle: position question without a unique target");
            for (const auto& o : s.objects)
                if (concept_by_id(o.concept_id).shape_class == q.target_shape)
                    return quadrant_names()[static_cast<std::size_t>(quadrant_of_cell(o.cell))];
            throw std::logic_error("oracle: unreachable");
        }
        case QType::Shape: {
            if (count_color(s, q.target_color) != 1)
                throw std::logic_error("oracle: shape question without a unique target");
            for (const auto& o : s.objects)
                if (o.color == q.target_color)
                    return shape_names()[static_cast<std::size_t>(concept_by_id(o.concept_id).shape_class)];
            throw std::logic_error("oracle: unreachable");
        }
    }
    throw std::logic_error("oracle: unknown question type");
}

inline std::vector<int> surface_tokens(const Question& q) {
    std::vector<int> out;
    for (const auto& w : question_templates(q.qtype)[static_cast<std::size_t>(q.template_idx)]) {
        if (w == "<S>") out.push_back(vocab_id(shape_names()[static_cast<std::size_t>(q.target_shape)]));
        else if (w == "<C>") out.push_back(vocab_id(color_names()[static_cast<std::size_t>(q.target_color)]));
        else out.push_back(vocab_id(w));
    }
    return out;
}

// one sample as consumed by the model: surface tokens, rendered grid, answer
struct Sample {
    std::vector<int> question_tokens;
    num::Tensor visual;  // [grid cells, feature dim]
    std::string answer;
    int task_id = 0;
};

// Per-cell feature rendering: occupancy one-hots plus position encoding plus
// Gaussian noise on every component.
inline num::Tensor render_scene(const Scene& s, std::uint64_t noise_seed, double noise_std = 0.02) {
    num::Tensor vis = num::Tensor::zeros({kGridCells, kVisualFeatureDim});
    core::Rng noise(noise_seed);
    for (int cell = 0; cell < kGridCells; ++cell) {
        double* f = vis.data.data() + static_cast<std::size_t>(cell) * kVisualFeatureDim;
        for (const auto& o : s.objects) {
            if (o.cell != cell) continue;
            const Concept c = concept_by_id(o.concept_id);
            f[c.shape_class] = 1.0;
            f[kNumShapes + c.supercategory] = 1.0;
            f[kNumShapes + kNumSupercats + o.color] = 1.0;
        }
        f[kNumShapes + kNumSupercats + kNumColors + cell / kGridSide] = 1.0;
        f[kNumShapes + kNumSupercats + kNumColors + kGridSide + cell % kGridSide] = 1.0;
        for (int k = 0; k < kVisualFeatureDim; ++k) f[k] += noise.normal(0.0, noise_std);
    }
    return vis;
}

inline Sample render_sample(const Scene& s, const Question& q, std::uint64_t noise_seed, int task_id,
                            double noise_std = 0.02) {
    Sample out;
    out.question_tokens = q.tokens;
    out.visual = render_scene(s, noise_seed, noise_std);
    out.answer = oracle_answer(s, q);
    out.task_id = task_id;
    return out;
}

}  // namespace mmcl::tasks

#endif
