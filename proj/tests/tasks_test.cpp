#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmcl/core/rng.hpp"
#include "mmcl/num/tape.hpp"
#include "mmcl/tasks/dump.hpp"
#include "mmcl/tasks/generate.hpp"
#include "mmcl/tasks/scene.hpp"
#include "mmcl/tasks/universe.hpp"

using namespace mmcl;
using namespace mmcl::tasks;

namespace {

std::string sample_line(const Sample& s) {
    std::ostringstream os;
    write_sample(os, s);
    return os.str();
}

struct DecodedObject {
    int shape = -1, supercat = -1, color = -1, cell = -1;
};

// reads the noisy one-hot blocks back out of a rendered grid
std::vector<DecodedObject> decode_grid(const num::Tensor& vis) {
    std::vector<DecodedObject> out;
    for (int cell = 0; cell < kGridCells; ++cell) {
        const double* f = vis.data.data() + static_cast<std::size_t>(cell) * kVisualFeatureDim;
        int best_shape = 0;
        for (int s = 1; s < kNumShapes; ++s)
            if (f[s] > f[best_shape]) best_shape = s;
        if (f[best_shape] < 0.5) continue;
        DecodedObject o;
        o.shape = best_shape;
        o.cell = cell;
        int base = kNumShapes;
        o.supercat = 0;
        for (int s = 1; s < kNumSupercats; ++s)
            if (f[base + s] > f[base + o.supercat]) o.supercat = s;
        base += kNumSupercats;
        o.color = 0;
        for (int c = 1; c < kNumColors; ++c)
            if (f[base + c] > f[base + o.color]) o.color = c;
        out.push_back(o);
    }
    return out;
}

Scene make_scene(std::initializer_list<SceneObject> objs) {
    Scene s;
    s.objects = objs;
    return s;
}

int shape_id(const std::string& name) {
    for (int i = 0; i < kNumShapes; ++i)
        if (shape_names()[static_cast<std::size_t>(i)] == name) return i;
    throw std::logic_error("bad shape name");
}

int color_id(const std::string& name) {
    for (int i = 0; i < kNumColors; ++i)
        if (color_names()[static_cast<std::size_t>(i)] == name) return i;
    throw std::logic_error("bad color name");
}

int concept_for(int shape, int supercat) { return supercat * kNumShapes + shape; }

}  // namespace

TEST_CASE("oracle answers", "[tasks]") {
    const int circ = shape_id("circle"), sq = shape_id("square"), tri = shape_id("triangle");
    Scene s = make_scene({{concept_for(circ, 0), 1, 0},
                          {concept_for(circ, 2), 3, 5},
                          {concept_for(circ, 1), 2, 9},
                          {concept_for(sq, 0), color_id("red"), 12}});
    Question q;
    q.qtype = QType::Count;
    q.target_shape = circ;
    CHECK(oracle_answer(s, q) == "3");

    q.qtype = QType::Color;
    q.target_shape = sq;
    CHECK(oracle_answer(s, q) == "red");

    q.qtype = QType::Existence;
    q.target_shape = tri;
    CHECK(oracle_answer(s, q) == "no");
    q.target_shape = sq;
    CHECK(oracle_answer(s, q) == "yes");

    q.qtype = QType::Position;
    q.target_shape = sq;
    CHECK(oracle_answer(s, q) == "bottom-left");  // cell 12 = row 3, col 0

    q.qtype = QType::Shape;
    q.target_color = color_id("red");
    CHECK(oracle_answer(s, q) == "square");

    q.qtype = QType::Color;
    q.target_shape = circ;  // three circles, no unique target
    CHECK_THROWS(oracle_answer(s, q));
}

TEST_CASE("rendering: one-hot blocks, position encoding, noise", "[tasks]") {
    const int star = shape_id("star");
    Scene s = make_scene({{concept_for(star, 3), color_id("blue"), 6}});  // row 1, col 2
    num::Tensor a = render_scene(s, 111);
    num::Tensor b = render_scene(s, 222);
    CHECK(a.shape == std::vector<std::int64_t>{kGridCells, kVisualFeatureDim});

    auto decoded = decode_grid(a);
    REQUIRE(decoded.size() == 1);
    CHECK(decoded[0].shape == star);
    CHECK(decoded[0].supercat == 3);
    CHECK(decoded[0].color == color_id("blue"));
    CHECK(decoded[0].cell == 6);

    // empty cell: zero object blocks, its own position bits, nonzero noise
    const double* f0 = a.data.data();  // cell 0 is empty here
    for (int k = 0; k < kNumShapes + kNumSupercats + kNumColors; ++k) CHECK(std::fabs(f0[k]) < 0.2);
    CHECK(std::fabs(f0[kNumShapes + kNumSupercats + kNumColors] - 1.0) < 0.2);       // row 0
    CHECK(std::fabs(f0[kNumShapes + kNumSupercats + kNumColors + kGridSide] - 1.0) < 0.2);  // col 0

    // same structure, different noise
    auto decoded_b = decode_grid(b);
    REQUIRE(decoded_b.size() == 1);
    CHECK(decoded_b[0].shape == star);
    bool any_diff = false;
    for (std::size_t k = 0; k < a.data.size(); ++k) any_diff |= a.data[k] != b.data[k];
    CHECK(any_diff);
}

TEST_CASE("sequence generation invariants", "[tasks]") {
    const SplitSizes sizes{60, 20, 30};

    SECTION("determinism") {
        auto s1 = generate_sequence(7, SettingKind::DiverseContent, sizes);
        auto s2 = generate_sequence(7, SettingKind::DiverseContent, sizes);
        REQUIRE(s1.tasks.size() == 5);
        for (int t = 0; t < 5; ++t) {
            const auto& a = s1.tasks[static_cast<std::size_t>(t)];
            const auto& b = s2.tasks[static_cast<std::size_t>(t)];
            CHECK(a.concept_ids == b.concept_ids);
            REQUIRE(a.train.size() == b.train.size());
            for (std::size_t i = 0; i < a.train.size(); ++i)
                CHECK(sample_line(a.train[i]) == sample_line(b.train[i]));
        }
    }

    SECTION("diverse content: disjoint ten-concept tasks") {
        auto seq = generate_sequence(3, SettingKind::DiverseContent, sizes);
        std::set<int> all;
        for (const auto& t : seq.tasks) {
            CHECK(t.concept_ids.size() == 10);
            for (int c : t.concept_ids) CHECK(all.insert(c).second);
        }
    }

    SECTION("taxonomy: one supercategory per task") {
        auto seq = generate_sequence(7, SettingKind::TaxonomyContent, sizes);
        for (const auto& t : seq.tasks) {
            REQUIRE(!t.concept_ids.empty());
            const int sc = concept_by_id(t.concept_ids[0]).supercategory;
            for (int c : t.concept_ids) CHECK(concept_by_id(c).supercategory == sc);
        }
    }

    SECTION("question types: disjoint type sets, type-consistent labels") {
        auto seq = generate_sequence(5, SettingKind::QuestionTypes, sizes);
        std::set<int> seen;
        for (const auto& t : seq.tasks) {
            REQUIRE(t.qtypes.size() == 1);
            CHECK(seen.insert(static_cast<int>(t.qtypes[0])).second);
        }
        auto label_set = [](const TaskData& t) {
            return std::set<std::string>(t.labels.begin(), t.labels.end());
        };
        for (const auto& t : seq.tasks) {
            switch (t.qtypes[0]) {
                case QType::Count:
                    for (const auto& l : label_set(t)) {
                        CHECK(!l.empty());
                        for (char ch : l) CHECK((ch >= '0' && ch <= '9'));
                    }
                    break;
                case QType::Color:
                    for (const auto& l : label_set(t)) CHECK_NOTHROW(color_id(l));
                    break;
                case QType::Existence:
                    for (const auto& l : label_set(t)) CHECK((l == "yes" || l == "no"));
                    break;
                case QType::Position:
                    for (const auto& l : label_set(t))
                        CHECK(std::find(quadrant_names().begin(), quadrant_names().end(), l) !=
                              quadrant_names().end());
                    break;
                case QType::Shape:
                    for (const auto& l : label_set(t)) CHECK_NOTHROW(shape_id(l));
                    break;
            }
        }
    }

    SECTION("scenes stay within their task's concepts; splits are disjoint") {
        auto seq = generate_sequence(11, SettingKind::DiverseContent, sizes);
        for (const auto& t : seq.tasks) {
            std::set<int> allowed(t.concept_ids.begin(), t.concept_ids.end());
            std::set<std::string> lines;
            std::size_t count = 0;
            for (const auto* split : {&t.train, &t.val, &t.test}) {
                for (const auto& s : *split) {
                    for (const auto& o : decode_grid(s.visual))
                        CHECK(allowed.count(concept_for(o.shape, o.supercat)) == 1);
                    lines.insert(sample_line(s));
                    ++count;
                }
            }
            CHECK(lines.size() == count);
            // labels are sorted unique answers
            for (std::size_t i = 1; i < t.labels.size(); ++i) CHECK(t.labels[i - 1] < t.labels[i]);
        }
    }
}

TEST_CASE("dump round trip is bit exact", "[tasks][io]") {
    auto seq = generate_sequence(13, SettingKind::QuestionTypes, SplitSizes{20, 5, 5});
    const auto& samples = seq.tasks[0].train;
    const std::string p1 = "tasks_dump_1.txt", p2 = "tasks_dump_2.txt";
    dump_samples(p1, samples);
    auto loaded = load_samples(p1);
    REQUIRE(loaded.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].question_tokens == samples[i].question_tokens);
        CHECK(loaded[i].visual.data == samples[i].visual.data);
        CHECK(loaded[i].answer == samples[i].answer);
        CHECK(loaded[i].task_id == samples[i].task_id);
    }
    dump_samples(p2, loaded);
    std::ifstream f1(p1), f2(p2);
    std::stringstream b1, b2;
    b1 << f1.rdbuf();
    b2 << f2.rdbuf();
    CHECK(b1.str() == b2.str());
    std::remove(p1.c_str());
    std::remove(p2.c_str());

    CHECK_THROWS(parse_sample("task 0 q 1 5 vis 2 0.5 0.5 ans x", kGridCells, kVisualFeatureDim));
    CHECK_THROWS(load_samples("missing_dump_file.txt"));
}

// ---- linear probe oracle ----------------------------------------------------

namespace {

// question descriptor recovered from surface tokens alone
std::vector<double> probe_descriptor(const std::vector<int>& tokens) {
    std::set<std::string> words;
    for (int t : tokens) words.insert(vocabulary()[static_cast<std::size_t>(t)]);
    auto has = [&](const char* w) { return words.count(w) > 0; };
    int qtype;
    if (has("many") || has("count") || has("number")) qtype = 0;
    else if (has("there") || has("contain") || has("here")) qtype = 2;
    else if (has("where") || has("quadrant") || has("locate")) qtype = 3;
    else if (has("color")) qtype = 1;
    else qtype = 4;
    int tshape = kNumShapes, tcolor = kNumColors;  // trailing slot = absent
    for (int i = 0; i < kNumShapes; ++i)
        if (words.count(shape_names()[static_cast<std::size_t>(i)])) tshape = i;
    for (int i = 0; i < kNumColors; ++i)
        if (words.count(color_names()[static_cast<std::size_t>(i)])) tcolor = i;
    std::vector<double> d(kNumQTypes + (kNumShapes + 1) + (kNumColors + 1), 0.0);
    d[static_cast<std::size_t>(qtype)] = 1.0;
    d[static_cast<std::size_t>(kNumQTypes + tshape)] = 1.0;
    d[static_cast<std::size_t>(kNumQTypes + kNumShapes + 1 + tcolor)] = 1.0;
    return d;
}

// indicator summary of the decoded scene
std::vector<double> probe_summary(const num::Tensor& vis) {
    const auto objs = decode_grid(vis);
    std::vector<double> u;
    auto push_block = [&](auto&& fill, std::size_t n) {
        const std::size_t base = u.size();
        u.resize(base + n, 0.0);
        fill(base);
    };
    // count_s == k indicators
    push_block(
        [&](std::size_t base) {
            for (int s = 0; s < kNumShapes; ++s) {
                int k = 0;
                for (const auto& o : objs) k += o.shape == s;
                if (k <= kMaxObjects) u[base + static_cast<std::size_t>(s * (kMaxObjects + 1) + k)] = 1.0;
            }
        },
        static_cast<std::size_t>(kNumShapes * (kMaxObjects + 1)));
    // unique shape -> its color / quadrant
    push_block(
        [&](std::size_t base) {
            for (int s = 0; s < kNumShapes; ++s) {
                const DecodedObject* only = nullptr;
                int k = 0;
                for (const auto& o : objs)
                    if (o.shape == s) ++k, only = &o;
                if (k != 1) continue;
                u[base + static_cast<std::size_t>(s * kNumColors + only->color)] = 1.0;
                u[base + static_cast<std::size_t>(kNumShapes * kNumColors + s * 4 +
                                                  quadrant_of_cell(only->cell))] = 1.0;
            }
        },
        static_cast<std::size_t>(kNumShapes * kNumColors + kNumShapes * 4));
    // unique color -> its shape
    push_block(
        [&](std::size_t base) {
            for (int c = 0; c < kNumColors; ++c) {
                const DecodedObject* only = nullptr;
                int k = 0;
                for (const auto& o : objs)
                    if (o.color == c) ++k, only = &o;
                if (k == 1) u[base + static_cast<std::size_t>(c * kNumShapes + only->shape)] = 1.0;
            }
        },
        static_cast<std::size_t>(kNumColors * kNumShapes));
    u.push_back(1.0);
    return u;
}

// softmax regression on descriptor x summary products, trained with Adam
double probe_train_accuracy(const std::vector<Sample>& data, const std::vector<std::string>& labels) {
    const std::int64_t n = static_cast<std::int64_t>(data.size());
    const std::int64_t C = static_cast<std::int64_t>(labels.size());
    const auto d0 = probe_descriptor(data[0].question_tokens);
    const auto u0 = probe_summary(data[0].visual);
    const std::int64_t D = static_cast<std::int64_t>(d0.size() * u0.size());

    num::Tensor X = num::Tensor::zeros({n, D});
    num::Tensor y = num::Tensor::zeros({n});
    for (std::int64_t i = 0; i < n; ++i) {
        const auto d = probe_descriptor(data[static_cast<std::size_t>(i)].question_tokens);
        const auto u = probe_summary(data[static_cast<std::size_t>(i)].visual);
        double* row = X.data.data() + i * D;
        for (std::size_t a = 0; a < d.size(); ++a)
            if (d[a] != 0.0)
                for (std::size_t b = 0; b < u.size(); ++b) row[a * u.size() + b] = d[a] * u[b];
        const auto it = std::find(labels.begin(), labels.end(), data[static_cast<std::size_t>(i)].answer);
        REQUIRE(it != labels.end());
        y.data[static_cast<std::size_t>(i)] = static_cast<double>(it - labels.begin());
    }

    num::Tape t;
    auto W = t.leaf("W", {C, D}, true);
    auto logits_ref = t.matmul(t.constant(X), W, false, true);
    t.set_name(logits_ref, "logits");
    auto loss = t.cross_entropy_sum(logits_ref, t.constant(y));

    std::map<std::string, num::Tensor> point{{"W", num::Tensor::zeros({C, D})}};
    num::Tensor m = num::Tensor::zeros({C, D}), v = num::Tensor::zeros({C, D});
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int step = 1; step <= 80; ++step) {
        t.evaluate(point);
        auto g = t.backward(loss).at("W");
        for (std::size_t k = 0; k < g.data.size(); ++k) {
            m.data[k] = b1 * m.data[k] + (1 - b1) * g.data[k];
            v.data[k] = b2 * v.data[k] + (1 - b2) * g.data[k] * g.data[k];
            const double mh = m.data[k] / (1 - std::pow(b1, step));
            const double vh = v.data[k] / (1 - std::pow(b2, step));
            point.at("W").data[k] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
    auto out = t.evaluate(point);
    const num::Tensor& logits = out.at("logits");
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t best = 0;
        for (std::int64_t c = 1; c < C; ++c)
            if (logits.at({i, c}) > logits.at({i, best})) best = c;
        correct += best == static_cast<std::int64_t>(y.data[static_cast<std::size_t>(i)]);
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("tasks are learnable by a linear probe", "[tasks][property][oracle]") {
    auto seq = generate_sequence(17, SettingKind::DiverseContent, SplitSizes{400, 5, 5});
    const auto& task = seq.tasks[0];
    CHECK(probe_train_accuracy(task.train, task.labels) >= 0.99);

    auto qt = generate_sequence(19, SettingKind::QuestionTypes, SplitSizes{400, 5, 5});
    CHECK(probe_train_accuracy(qt.tasks[0].train, qt.tasks[0].labels) >= 0.99);
}
