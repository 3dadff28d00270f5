#ifndef MMCL_EXP_CONFIG_HPP
#define MMCL_EXP_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/core/text.hpp"
#include "mmcl/model/config.hpp"
#include "mmcl/strat/distill.hpp"
#include "mmcl/tasks/generate.hpp"
#include "mmcl/tasks/universe.hpp"
#include "mmcl/train/run.hpp"
#include "mmcl/train/schedule.hpp"

namespace mmcl::exp {

// Encoder dimensions that are free to configure; the data-facing fields
// (vocabulary, feature dim, sequence capacities) are fixed by the task
// universe and never appear in config files.
inline model::ModelConfig default_model() {
    model::ModelConfig m;
    m.text_vocab_size = tasks::vocab_size();
    m.visual_feature_dim = tasks::kVisualFeatureDim;
    m.max_visual_len = tasks::kGridCells;
    return m;
}

// One experiment: a strategy run over every (seed, task order) pair.
struct ExperimentConfig {
    tasks::SettingKind setting = tasks::SettingKind::DiverseContent;
    train::StrategyConfig strategy;
    std::string alpha_mode = "auto";  // informational override; must agree with the strategy
    model::ModelConfig model = default_model();
    tasks::SplitSizes splits;
    int probe = 512;
    std::string similarity;  // path to an answer-similarity table; empty uses the built-in
    train::TrainConfig train;
    std::vector<std::uint64_t> seeds{1};
    int task_orders = 1;
    std::string output = "runs";

    void validate() const {
        model.validate();
        strategy.validate();
        train.validate();
        if (splits.train < 1 || splits.val < 1 || splits.test < 1)
            throw std::invalid_argument("data.train/val/test: split sizes must be >= 1");
        if (probe < 2) throw std::invalid_argument("data.probe: need at least two probe samples");
        if (seeds.empty()) throw std::invalid_argument("experiment.seeds: need at least one seed");
        if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
            throw std::invalid_argument("experiment.seeds: duplicate seed");
        if (task_orders < 1) throw std::invalid_argument("experiment.task_orders: must be >= 1");
        if (output.empty()) throw std::invalid_argument("experiment.output: must not be empty");
        if (strategy.importance_layer >= model.num_layers)
            throw std::invalid_argument("strategy.importance_layer: beyond the last block");
        check_alpha_mode();
    }

    bool operator==(const ExperimentConfig&) const = default;

private:
    void check_alpha_mode() const {
        if (alpha_mode == "auto") return;
        if (alpha_mode != "token_proportional" && alpha_mode != "balanced" && alpha_mode != "adaptive")
            throw std::invalid_argument("strategy.alpha_mode: unknown mode " + alpha_mode);
        if (!strat::strategy_uses_fd(strategy.strategy))
            throw std::invalid_argument("strategy.alpha_mode: set for a strategy that never distills");
        const strat::AlphaMode canon = strat::alpha_mode_for(strategy.strategy);
        const std::string canon_name = canon == strat::AlphaMode::TokenProportional ? "token_proportional"
                                       : canon == strat::AlphaMode::Balanced       ? "balanced"
                                                                                    : "adaptive";
        if (alpha_mode != canon_name)
            throw std::invalid_argument("strategy.alpha_mode: " + alpha_mode + " contradicts strategy " +
                                        strat::strategy_name(strategy.strategy));
    }
};

namespace detail {

inline long long int_in(const std::string& v, const std::string& key, long long lo, long long hi) {
    const long long x = core::parse_int(v, key);
    if (x < lo || x > hi) throw std::invalid_argument(key + ": out of range");
    return x;
}

}  // namespace detail

// Line-oriented "key = value" sections. Unknown sections and keys are errors,
// as are duplicate keys; '#' starts a comment line.
inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::string section;
    std::set<std::string> seen;
    bool have_setting = false, have_strategy = false;

    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        const std::string line = core::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument("config: malformed section line: " + line);
            section = line.substr(1, line.size() - 2);
            if (section != "experiment" && section != "strategy" && section != "train" &&
                section != "model" && section != "data")
                throw std::invalid_argument("config: unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: expected key = value: " + line);
        if (section.empty()) throw std::invalid_argument("config: key before any section: " + line);
        const std::string key = core::trim(line.substr(0, eq));
        const std::string value = core::trim(line.substr(eq + 1));
        const std::string full = section + "." + key;
        if (!seen.insert(full).second) throw std::invalid_argument("config: duplicate key " + full);

        if (full == "experiment.setting") {
            cfg.setting = tasks::setting_from_name(value);
            have_setting = true;
        } else if (full == "experiment.strategy") {
            cfg.strategy.strategy = strat::parse_strategy(value);
            have_strategy = true;
        } else if (full == "experiment.seeds") {
            cfg.seeds.clear();
            for (const auto& part : core::split(value, ',')) {
                const std::string s = core::trim(part);
                if (s.empty()) throw std::invalid_argument("experiment.seeds: empty entry");
                cfg.seeds.push_back(static_cast<std::uint64_t>(
                    detail::int_in(s, "experiment.seeds", 0, (1LL << 62))));
            }
        } else if (full == "experiment.task_orders") {
            cfg.task_orders = static_cast<int>(detail::int_in(value, full, 1, 1000));
        } else if (full == "experiment.output") {
            cfg.output = value;
        } else if (full == "strategy.gamma") {
            cfg.strategy.gamma = core::parse_double(value, full);
        } else if (full == "strategy.lambda_ewc") {
            cfg.strategy.lambda_ewc = core::parse_double(value, full);
        } else if (full == "strategy.fd_scale") {
            cfg.strategy.fd_scale = core::parse_double(value, full);
        } else if (full == "strategy.memory_per_task") {
            cfg.strategy.memory_per_task = static_cast<int>(detail::int_in(value, full, 0, 1000000));
        } else if (full == "strategy.importance_layer") {
            cfg.strategy.importance_layer = static_cast<int>(detail::int_in(value, full, -1, 1000));
        } else if (full == "strategy.fisher_samples") {
            cfg.strategy.fisher_samples = static_cast<int>(detail::int_in(value, full, 1, 1000000));
        } else if (full == "strategy.alpha_mode") {
            cfg.alpha_mode = value;
        } else if (full == "train.max_lr") {
            cfg.train.max_lr = core::parse_double(value, full);
        } else if (full == "train.warmup_fraction") {
            cfg.train.warmup_fraction = core::parse_double(value, full);
        } else if (full == "train.batch_size") {
            cfg.train.batch_size = static_cast<int>(detail::int_in(value, full, 1, 100000));
        } else if (full == "train.max_epochs") {
            cfg.train.max_epochs = static_cast<int>(detail::int_in(value, full, 1, 100000));
        } else if (full == "train.patience") {
            cfg.train.patience = static_cast<int>(detail::int_in(value, full, 1, 100000));
        } else if (full == "train.eval_batch_size") {
            cfg.train.eval_batch_size = static_cast<int>(detail::int_in(value, full, 1, 100000));
        } else if (full == "model.num_layers") {
            cfg.model.num_layers = static_cast<int>(detail::int_in(value, full, 2, 64));
        } else if (full == "model.hidden_dim") {
            cfg.model.hidden_dim = static_cast<int>(detail::int_in(value, full, 1, 4096));
        } else if (full == "model.num_heads") {
            cfg.model.num_heads = static_cast<int>(detail::int_in(value, full, 1, 64));
        } else if (full == "model.mlp_ratio") {
            cfg.model.mlp_ratio = static_cast<int>(detail::int_in(value, full, 1, 16));
        } else if (full == "data.train") {
            cfg.splits.train = static_cast<int>(detail::int_in(value, full, 1, 1000000));
        } else if (full == "data.val") {
            cfg.splits.val = static_cast<int>(detail::int_in(value, full, 1, 1000000));
        } else if (full == "data.test") {
            cfg.splits.test = static_cast<int>(detail::int_in(value, full, 1, 1000000));
        } else if (full == "data.probe") {
            cfg.probe = static_cast<int>(detail::int_in(value, full, 2, 1000000));
        } else if (full == "data.similarity") {
            cfg.similarity = value;
        } else {
            throw std::invalid_argument("config: unknown key " + full);
        }
    }
    if (!have_setting) throw std::invalid_argument("config: missing required key experiment.setting");
    if (!have_strategy) throw std::invalid_argument("config: missing required key experiment.strategy");
    cfg.validate();
    return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// Canonical text with every key materialized; parsing it recovers the config.
inline std::string format_config(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "[experiment]\n";
    o << "setting = " << tasks::setting_name(c.setting) << "\n";
    o << "strategy = " << strat::strategy_name(c.strategy.strategy) << "\n";
    o << "seeds = ";
    for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? ", " : "") << c.seeds[i];
    o << "\n";
    o << "task_orders = " << c.task_orders << "\n";
    o << "output = " << c.output << "\n";
    o << "\n[strategy]\n";
    o << "gamma = " << core::fmt_double(c.strategy.gamma) << "\n";
    o << "lambda_ewc = " << core::fmt_double(c.strategy.lambda_ewc) << "\n";
    o << "fd_scale = " << core::fmt_double(c.strategy.fd_scale) << "\n";
    o << "memory_per_task = " << c.strategy.memory_per_task << "\n";
    o << "importance_layer = " << c.strategy.importance_layer << "\n";
    o << "fisher_samples = " << c.strategy.fisher_samples << "\n";
    o << "alpha_mode = " << c.alpha_mode << "\n";
    o << "\n[train]\n";
    o << "max_lr = " << core::fmt_double(c.train.max_lr) << "\n";
    o << "warmup_fraction = " << core::fmt_double(c.train.warmup_fraction) << "\n";
    o << "batch_size = " << c.train.batch_size << "\n";
    o << "max_epochs = " << c.train.max_epochs << "\n";
    o << "patience = " << c.train.patience << "\n";
    o << "eval_batch_size = " << c.train.eval_batch_size << "\n";
    o << "\n[model]\n";
    o << "num_layers = " << c.model.num_layers << "\n";
    o << "hidden_dim = " << c.model.hidden_dim << "\n";
    o << "num_heads = " << c.model.num_heads << "\n";
    o << "mlp_ratio = " << c.model.mlp_ratio << "\n";
    o << "\n[data]\n";
    o << "train = " << c.splits.train << "\n";
    o << "val = " << c.splits.val << "\n";
    o << "test = " << c.splits.test << "\n";
    o << "probe = " << c.probe << "\n";
    if (!c.similarity.empty()) o << "similarity = " << c.similarity << "\n";
    return o.str();
}

// Identity of the experiment irrespective of where it is written: moving the
// output directory must not change what the runs mean.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
    ExperimentConfig canon = c;
    canon.output = "";
    return core::fnv1a64(format_config(canon));
}

}  // namespace mmcl::exp

#endif
