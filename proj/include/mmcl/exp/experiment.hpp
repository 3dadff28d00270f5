#ifndef MMCL_EXP_EXPERIMENT_HPP
#define MMCL_EXP_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mmcl/analysis/similarity.hpp"
#include "mmcl/core/rng.hpp"
#include "mmcl/exp/config.hpp"
#include "mmcl/exp/files.hpp"
#include "mmcl/model/checkpoint.hpp"
#include "mmcl/tasks/generate.hpp"
#include "mmcl/train/run.hpp"

namespace mmcl::exp {

inline std::string run_name(std::uint64_t seed, int order_index) {
    return "run_s" + std::to_string(seed) + "_o" + std::to_string(order_index);
}

inline std::string hash_hex(std::uint64_t h) {
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << h;
    return o.str();
}

// Stable experiment-level index: which runs exist and under which identity.
// Deliberately free of timestamps and host details so reruns are byte-equal.
inline std::string format_manifest(const ExperimentConfig& cfg) {
    std::ostringstream o;
    o << "mmcl experiment manifest\n";
    o << "format = 1\n";
    o << "strategy = " << strat::strategy_name(cfg.strategy.strategy) << "\n";
    o << "setting = " << tasks::setting_name(cfg.setting) << "\n";
    o << "config_hash = " << hash_hex(config_hash(cfg)) << "\n";
    o << "runs = " << cfg.seeds.size() * static_cast<std::size_t>(cfg.task_orders) << "\n";
    for (const auto seed : cfg.seeds)
        for (int k = 0; k < cfg.task_orders; ++k) o << "run = " << run_name(seed, k) << "\n";
    return o.str();
}

// Executes every (seed, task order) run and lays the results out on disk:
//
//   <output>/config.ini            canonical config
//   <output>/manifest.txt          run index + config hash
//   <output>/run_s<seed>_o<k>/     metrics.csv, cka_ratio.csv, alpha.csv,
//                                  train.log, ck_stage<t>.bin
//
// cka_ratio.csv and alpha.csv appear only when the run produced them.
inline void run_experiment(const ExperimentConfig& cfg, std::ostream* progress = nullptr) {
    namespace fs = std::filesystem;
    cfg.validate();
    fs::create_directories(cfg.output);
    {
        const std::string probe_path = cfg.output + "/.writable";
        std::ofstream probe(probe_path, std::ios::binary);
        if (!probe) throw std::runtime_error("output directory not writable: " + cfg.output);
        probe.close();
        fs::remove(probe_path);
    }

    auto sim = cfg.similarity.empty() ? analysis::default_answer_similarity()
                                      : analysis::load_answer_similarity(cfg.similarity);
    sim.validate();
    train::CreditFn credit = [sim](const std::string& p, const std::string& g) {
        return sim.credit(p, g);
    };

    write_text_file(cfg.output + "/config.ini", format_config(cfg));
    write_text_file(cfg.output + "/manifest.txt", format_manifest(cfg));

    for (const auto seed : cfg.seeds) {
        const auto seq = tasks::generate_sequence(seed, cfg.setting, cfg.splits);
        for (int k = 0; k < cfg.task_orders; ++k) {
            const auto order = tasks::task_order_for(k);
            train::TrainConfig tc = cfg.train;
            tc.seed = core::mix64(seed, static_cast<std::uint64_t>(k));
            const auto result =
                train::run_sequence(cfg.model, seq, order, cfg.strategy, tc, credit, cfg.probe);

            const std::string dir = cfg.output + "/" + run_name(seed, k);
            fs::create_directories(dir);
            write_text_file(dir + "/metrics.csv", format_metrics(result));
            if (!result.cka_ratios.empty())
                write_text_file(dir + "/cka_ratio.csv", format_cka(result.cka_ratios));
            if (!result.alpha_log.empty())
                write_text_file(dir + "/alpha.csv", format_alpha(result.alpha_log));
            write_text_file(dir + "/train.log", format_train_log(result.task_logs));
            for (std::size_t t = 0; t < result.checkpoints.size(); ++t)
                model::save_checkpoint(dir + "/ck_stage" + std::to_string(t + 1) + ".bin",
                                       result.checkpoints[t]);

            if (progress) {
                const auto parsed = parse_metrics(format_metrics(result));
                *progress << run_name(seed, k) << ": final_accuracy "
                          << core::fmt_double(parsed.final_accuracy);
                if (parsed.has_transfer) *progress << " sbwt " << core::fmt_double(parsed.sbwt);
                *progress << "\n";
            }
        }
    }
}

}  // namespace mmcl::exp

#endif
