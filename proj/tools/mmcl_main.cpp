// Command-line front end: run experiments, aggregate reports, probe drift
// between two checkpoints. Exit codes: 0 success, 1 bad usage or bad config,
// 2 failure while executing.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "mmcl/core/text.hpp"
#include "mmcl/exp/config.hpp"
#include "mmcl/exp/experiment.hpp"
#include "mmcl/exp/files.hpp"
#include "mmcl/exp/probe.hpp"
#include "mmcl/exp/report.hpp"
#include "mmcl/model/checkpoint.hpp"

namespace {

constexpr const char* kUsage =
    "usage:\n"
    "  mmcl run <config.ini> [--out DIR]\n"
    "  mmcl report <experiment-dir>... [--out DIR]\n"
    "  mmcl probe <reference.bin> <current.bin> [--setting NAME] [--seed N] [--samples N]\n"
    "             [--order N] [--train N] [--val N] [--test N] [--out FILE]\n"
    "\n"
    "run     executes every (seed, task order) pair of an experiment config\n"
    "report  aggregates per-strategy accuracy / transfer tables from run directories\n"
    "probe   recomputes the per-block drift ratio of one checkpoint against another\n";

int usage_error(const std::string& msg) {
    std::cerr << "error: " << msg << "\n" << kUsage;
    return 1;
}

bool take_value(const std::vector<std::string>& args, std::size_t& i, std::string& out) {
    if (i + 1 >= args.size()) return false;
    out = args[++i];
    return true;
}

int cmd_run(const std::vector<std::string>& args) {
    std::string config_path, out_override;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--out") {
            if (!take_value(args, i, out_override)) return usage_error("--out needs a value");
        } else if (config_path.empty()) {
            config_path = args[i];
        } else {
            return usage_error("unexpected argument: " + args[i]);
        }
    }
    if (config_path.empty()) return usage_error("run needs a config file");

    mmcl::exp::ExperimentConfig cfg;
    try {
        cfg = mmcl::exp::parse_config(config_path);
        if (!out_override.empty()) cfg.output = out_override;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    try {
        mmcl::exp::run_experiment(cfg, &std::cout);
        std::cout << "wrote " << cfg.output << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& args) {
    std::vector<std::string> dirs;
    std::string out_dir = "report";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--out") {
            if (!take_value(args, i, out_dir)) return usage_error("--out needs a value");
        } else {
            dirs.push_back(args[i]);
        }
    }
    if (dirs.empty()) return usage_error("report needs at least one experiment directory");
    try {
        for (const auto& path : mmcl::exp::emit_report(dirs, out_dir))
            std::cout << "wrote " << path << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int cmd_probe(const std::vector<std::string>& args) {
    std::vector<std::string> paths;
    std::string out_file;
    mmcl::exp::ProbeOptions opt;
    try {
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string v;
            if (args[i] == "--setting") {
                if (!take_value(args, i, v)) return usage_error("--setting needs a value");
                opt.setting = mmcl::tasks::setting_from_name(v);
            } else if (args[i] == "--seed") {
                if (!take_value(args, i, v)) return usage_error("--seed needs a value");
                opt.seed = static_cast<std::uint64_t>(mmcl::core::parse_int(v, "--seed"));
            } else if (args[i] == "--samples") {
                if (!take_value(args, i, v)) return usage_error("--samples needs a value");
                opt.samples = static_cast<int>(mmcl::core::parse_int(v, "--samples"));
            } else if (args[i] == "--order") {
                if (!take_value(args, i, v)) return usage_error("--order needs a value");
                opt.order_index = static_cast<int>(mmcl::core::parse_int(v, "--order"));
            } else if (args[i] == "--train") {
                if (!take_value(args, i, v)) return usage_error("--train needs a value");
                opt.sizes.train = static_cast<int>(mmcl::core::parse_int(v, "--train"));
            } else if (args[i] == "--val") {
                if (!take_value(args, i, v)) return usage_error("--val needs a value");
                opt.sizes.val = static_cast<int>(mmcl::core::parse_int(v, "--val"));
            } else if (args[i] == "--test") {
                if (!take_value(args, i, v)) return usage_error("--test needs a value");
                opt.sizes.test = static_cast<int>(mmcl::core::parse_int(v, "--test"));
            } else if (args[i] == "--out") {
                if (!take_value(args, i, out_file)) return usage_error("--out needs a value");
            } else if (args[i].rfind("--", 0) == 0) {
                return usage_error("unknown option: " + args[i]);
            } else {
                paths.push_back(args[i]);
            }
        }
    } catch (const std::exception& e) {
        return usage_error(e.what());
    }
    if (paths.size() != 2) return usage_error("probe needs exactly two checkpoint files");

    try {
        const auto ref = mmcl::model::load_checkpoint(paths[0]);
        const auto cur = mmcl::model::load_checkpoint(paths[1]);
        const auto row = mmcl::exp::probe_checkpoints(ref, cur, opt);
        std::string csv = "stage,layer,value\n";
        for (std::size_t d = 0; d < row.size(); ++d)
            csv += "2," + std::to_string(d) + "," + mmcl::core::fmt_double(row[d]) + "\n";
        if (out_file.empty()) {
            std::cout << csv;
        } else {
            mmcl::exp::write_text_file(out_file, csv);
            std::cout << "wrote " << out_file << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << kUsage;
        return 1;
    }
    const std::string cmd = argv[1];
    const std::vector<std::string> args(argv + 2, argv + argc);
    if (cmd == "run") return cmd_run(args);
    if (cmd == "report") return cmd_report(args);
    if (cmd == "probe") return cmd_probe(args);
    if (cmd == "help" || cmd == "--help" || cmd == "-h") {
        std::cout << kUsage;
        return 0;
    }
    return usage_error("unknown command: " + cmd);
}
