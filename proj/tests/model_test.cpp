#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "mmcl/core/rng.hpp"
#include "mmcl/model/batch.hpp"
#include "mmcl/model/checkpoint.hpp"
#include "mmcl/model/config.hpp"
#include "mmcl/model/head.hpp"
#include "mmcl/model/params.hpp"
#include "mmcl/model/transformer.hpp"
#include "mmcl/num/grad_check.hpp"

using namespace mmcl;
using model::ClassifierHead;
using model::Modality;
using model::ModelConfig;
using model::MultimodalBatch;
using num::Tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.num_layers = 2;
    c.hidden_dim = 8;
    c.num_heads = 2;
    c.text_vocab_size = 7;
    c.visual_feature_dim = 5;
    c.max_text_len = 3;
    c.max_visual_len = 2;
    return c;
}

MultimodalBatch make_batch(core::Rng& rng, const ModelConfig& c, std::int64_t B,
                           std::int64_t num_labels) {
    MultimodalBatch b;
    b.question_tokens = Tensor::zeros({B, c.max_text_len});
    for (double& v : b.question_tokens.data)
        v = static_cast<double>(rng.below(static_cast<std::uint64_t>(c.text_vocab_size)));
    b.visual = Tensor::zeros({B, c.max_visual_len, c.visual_feature_dim});
    for (double& v : b.visual.data) v = rng.normal(0.0, 1.0);
    for (std::int64_t i = 0; i < B; ++i) {
        b.text_len.push_back(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(c.max_text_len))));
        b.labels.push_back(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(num_labels))));
    }
    return b;
}

ClassifierHead make_head(const ModelConfig& c, const std::vector<std::string>& labels,
                         std::uint64_t seed) {
    return model::expand_head(ClassifierHead{}, labels, c.hidden_dim, seed);
}

Tensor run_logits(const ModelConfig& c, const MultimodalBatch& b, const model::ParamStore& params,
                  const ClassifierHead& head) {
    num::Tape t;
    auto refs = model::build_forward(t, c, b, head.num_labels());
    auto out = t.evaluate(model::forward_bindings(params, head));
    return out.at("logits");
}

}  // namespace

TEST_CASE("config validation", "[model]") {
    ModelConfig c = tiny_config();
    CHECK_NOTHROW(c.validate());
    c.num_layers = 1;
    CHECK_THROWS(c.validate());
    c = tiny_config();
    c.hidden_dim = 9;
    CHECK_THROWS(c.validate());
}

TEST_CASE("forward shape contract and determinism", "[model]") {
    ModelConfig c = tiny_config();
    core::Rng rng(5);
    auto params = model::init_trunk_params(c, 11);
    auto head = make_head(c, {"yes", "no", "3"}, 12);
    auto b = make_batch(rng, c, 1, head.num_labels());

    num::Tape t;
    auto refs = model::build_forward(t, c, b, head.num_labels());
    auto out = t.evaluate(model::forward_bindings(params, head));
    CHECK(out.at("logits").shape == std::vector<std::int64_t>{1, 3});
    CHECK(refs.states.size() == 2);
    for (auto s : refs.states)
        CHECK(t.value(s).shape == std::vector<std::int64_t>{1, refs.seq, c.hidden_dim});

    // identical samples produce identical rows
    MultimodalBatch twin;
    twin.question_tokens = Tensor::zeros({2, c.max_text_len});
    twin.visual = Tensor::zeros({2, c.max_visual_len, c.visual_feature_dim});
    for (int k = 0; k < c.max_text_len; ++k) {
        twin.question_tokens.data[static_cast<std::size_t>(k)] = b.question_tokens.data[static_cast<std::size_t>(k)];
        twin.question_tokens.data[static_cast<std::size_t>(c.max_text_len + k)] =
            b.question_tokens.data[static_cast<std::size_t>(k)];
    }
    for (std::int64_t k = 0; k < c.max_visual_len * c.visual_feature_dim; ++k) {
        twin.visual.data[static_cast<std::size_t>(k)] = b.visual.data[static_cast<std::size_t>(k)];
        twin.visual.data[static_cast<std::size_t>(c.max_visual_len * c.visual_feature_dim + k)] =
            b.visual.data[static_cast<std::size_t>(k)];
    }
    twin.text_len = {b.text_len[0], b.text_len[0]};
    twin.labels = {b.labels[0], b.labels[0]};
    Tensor lg = run_logits(c, twin, params, head);
    for (int j = 0; j < 3; ++j) CHECK(lg.at({0, j}) == lg.at({1, j}));
}

TEST_CASE("zero head gives zero logits", "[model]") {
    ModelConfig c = tiny_config();
    core::Rng rng(6);
    auto params = model::init_trunk_params(c, 3);
    ClassifierHead head;
    head.label_table = {"a", "b"};
    head.weight = Tensor::zeros({2, c.hidden_dim});
    head.bias = Tensor::zeros({2});
    auto b = make_batch(rng, c, 3, 2);
    Tensor lg = run_logits(c, b, params, head);
    for (double v : lg.data) CHECK(v == 0.0);
}

TEST_CASE("batch permutation permutes logits rows", "[model][property]") {
    ModelConfig c = tiny_config();
    core::Rng rng(7);
    auto params = model::init_trunk_params(c, 21);
    auto head = make_head(c, {"x", "y", "z", "w"}, 22);
    auto b = make_batch(rng, c, 4, 4);
    Tensor lg = run_logits(c, b, params, head);

    const std::vector<std::int64_t> perm{2, 0, 3, 1};
    MultimodalBatch pb;
    pb.question_tokens = Tensor::zeros({4, c.max_text_len});
    pb.visual = Tensor::zeros({4, c.max_visual_len, c.visual_feature_dim});
    const std::int64_t vlen = c.max_visual_len * c.visual_feature_dim;
    for (std::int64_t i = 0; i < 4; ++i) {
        const std::int64_t src = perm[static_cast<std::size_t>(i)];
        for (int k = 0; k < c.max_text_len; ++k)
            pb.question_tokens.data[static_cast<std::size_t>(i * c.max_text_len + k)] =
                b.question_tokens.data[static_cast<std::size_t>(src * c.max_text_len + k)];
        for (std::int64_t k = 0; k < vlen; ++k)
            pb.visual.data[static_cast<std::size_t>(i * vlen + k)] =
                b.visual.data[static_cast<std::size_t>(src * vlen + k)];
        pb.text_len.push_back(b.text_len[static_cast<std::size_t>(src)]);
        pb.labels.push_back(b.labels[static_cast<std::size_t>(src)]);
    }
    Tensor plg = run_logits(c, pb, params, head);
    for (std::int64_t i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(plg.at({i, j}) == lg.at({perm[static_cast<std::size_t>(i)], j}));
}

TEST_CASE("padding content cannot leak into logits", "[model][property]") {
    ModelConfig c = tiny_config();
    core::Rng rng(8);
    auto params = model::init_trunk_params(c, 31);
    auto head = make_head(c, {"a", "b"}, 32);
    auto b = make_batch(rng, c, 2, 2);
    b.text_len = {1, 2};
    Tensor lg1 = run_logits(c, b, params, head);
    // rewrite every padded slot
    for (std::int64_t i = 0; i < 2; ++i)
        for (int k = b.text_len[static_cast<std::size_t>(i)]; k < c.max_text_len; ++k)
            b.question_tokens.data[static_cast<std::size_t>(i * c.max_text_len + k)] =
                static_cast<double>((static_cast<int>(b.question_tokens.data[static_cast<std::size_t>(
                                         i * c.max_text_len + k)]) +
                                     3) %
                                    c.text_vocab_size);
    Tensor lg2 = run_logits(c, b, params, head);
    for (std::size_t k = 0; k < lg1.data.size(); ++k) CHECK(lg1.data[k] == lg2.data[k]);
}

TEST_CASE("forward rejects oversized sequences and empty heads", "[model]") {
    ModelConfig c = tiny_config();
    core::Rng rng(9);
    auto b = make_batch(rng, c, 1, 2);
    num::Tape t;
    CHECK_THROWS(model::build_forward(t, c, b, 0));
    b.question_tokens = Tensor::zeros({1, c.max_text_len + 1});
    b.text_len = {1};
    num::Tape t2;
    CHECK_THROWS(model::build_forward(t2, c, b, 2));
}

TEST_CASE("head expansion preserves old rows and dedupes", "[model]") {
    ModelConfig c = tiny_config();
    auto head = make_head(c, {"yes", "no"}, 77);
    auto grown = model::expand_head(head, {"red"}, c.hidden_dim, 78);
    REQUIRE(grown.label_table == std::vector<std::string>{"yes", "no", "red"});
    for (std::int64_t k = 0; k < 2 * c.hidden_dim; ++k)
        CHECK(grown.weight.data[static_cast<std::size_t>(k)] == head.weight.data[static_cast<std::size_t>(k)]);
    CHECK(grown.bias.data[0] == head.bias.data[0]);
    CHECK(grown.bias.data[2] == 0.0);

    auto same = model::expand_head(head, {"yes"}, c.hidden_dim, 79);
    CHECK(same.label_table == head.label_table);
    CHECK(same.weight.data == head.weight.data);

    auto fresh = model::expand_head(ClassifierHead{}, {"a", "b", "c"}, c.hidden_dim, 80);
    CHECK(fresh.label_table == std::vector<std::string>{"a", "b", "c"});
    CHECK(fresh.weight.shape == std::vector<std::int64_t>{3, c.hidden_dim});
}

TEST_CASE("expansion leaves old-label logits untouched", "[model][property]") {
    ModelConfig c = tiny_config();
    core::Rng rng(10);
    auto params = model::init_trunk_params(c, 41);
    auto head = make_head(c, {"yes", "no"}, 42);
    auto b = make_batch(rng, c, 3, 2);
    Tensor before = run_logits(c, b, params, head);
    auto grown = model::expand_head(head, {"red", "blue"}, c.hidden_dim, 43);
    Tensor after = run_logits(c, b, params, grown);
    for (std::int64_t i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) CHECK(after.at({i, j}) == before.at({i, j}));
}

TEST_CASE("modality split counts and partition", "[model]") {
    using model::split_states_by_modality;
    std::vector<std::vector<Modality>> mask{{Modality::CLS, Modality::TEXT, Modality::TEXT, Modality::VISION}};
    Tensor states = Tensor::zeros({1, 4, 2});
    for (std::size_t k = 0; k < states.data.size(); ++k) states.data[k] = static_cast<double>(k);
    auto split = split_states_by_modality(states, mask);
    REQUIRE(split.q.shape == std::vector<std::int64_t>{2, 2});
    REQUIRE(split.v.shape == std::vector<std::int64_t>{1, 2});
    CHECK(split.q.data == std::vector<double>{2, 3, 4, 5});
    CHECK(split.v.data == std::vector<double>{6, 7});
    CHECK(split.q_counts == std::vector<std::int64_t>{2});
    CHECK(split.v_counts == std::vector<std::int64_t>{1});

    std::vector<std::vector<Modality>> deg{{Modality::CLS, Modality::PAD, Modality::PAD, Modality::PAD}};
    auto empty = split_states_by_modality(states, deg);
    CHECK(empty.q.data.empty());
    CHECK(empty.v.data.empty());

    std::vector<std::vector<Modality>> bad{{Modality::CLS, Modality::TEXT}};
    CHECK_THROWS(split_states_by_modality(states, bad));

    // partition over a realistic mask
    ModelConfig c = tiny_config();
    core::Rng rng(11);
    auto b = make_batch(rng, c, 4, 2);
    auto masks = b.modality_mask(c);
    for (std::int64_t i = 0; i < 4; ++i) {
        int counts[4] = {0, 0, 0, 0};
        for (auto m : masks[static_cast<std::size_t>(i)]) counts[static_cast<int>(m)]++;
        CHECK(counts[0] == 1);
        CHECK(counts[1] == b.text_len[static_cast<std::size_t>(i)]);
        CHECK(counts[2] == c.max_visual_len);
        CHECK(counts[0] + counts[1] + counts[2] + counts[3] ==
              1 + c.max_text_len + c.max_visual_len);
    }
}

TEST_CASE("full forward gradients match central differences", "[model][oracle]") {
    ModelConfig c = tiny_config();
    core::Rng rng(12);
    auto params = model::init_trunk_params(c, 51);
    auto head = make_head(c, {"p", "q", "r"}, 52);
    auto b = make_batch(rng, c, 2, 3);

    num::Tape t;
    auto refs = model::build_forward(t, c, b, 3);
    Tensor labels = Tensor::zeros({2});
    for (int i = 0; i < 2; ++i) labels.data[static_cast<std::size_t>(i)] = static_cast<double>(b.labels[static_cast<std::size_t>(i)]);
    auto loss = t.add(t.cross_entropy_sum(refs.logits, t.constant(labels)),
                      t.mean(refs.states[0]));

    auto point = model::forward_bindings(params, head);
    t.evaluate(point);
    auto analytic = t.backward(loss);
    auto numeric = mmcl::num::finite_diff_grad(
        [&](const std::map<std::string, Tensor>& p) {
            t.evaluate(p);
            return t.value(loss).scalar_value();
        },
        point);
    CHECK(mmcl::num::max_rel_err(analytic, numeric) < 1e-4);
}

TEST_CASE("checkpoint round trip is value exact", "[model][io]") {
    ModelConfig c = tiny_config();
    auto params = model::init_trunk_params(c, 61);
    auto head = make_head(c, {"yes", "no", "0"}, 62);
    model::Checkpoint ck{c, params, head};
    const std::string path = "model_test_ck.bin";
    model::save_checkpoint(path, ck);
    auto back = model::load_checkpoint(path);
    CHECK(back.config == c);
    CHECK(back.head.label_table == head.label_table);
    CHECK(back.head.weight.data == head.weight.data);
    CHECK(back.head.bias.data == head.bias.data);
    REQUIRE(back.params.size() == params.size());
    for (const auto& [name, tensor] : params) {
        REQUIRE(back.params.count(name) == 1);
        CHECK(back.params.at(name).shape == tensor.shape);
        CHECK(back.params.at(name).data == tensor.data);
    }
    std::remove(path.c_str());
    CHECK_THROWS(model::load_checkpoint("no_such_file.bin"));
}
