#ifndef MMCL_EXP_REPORT_HPP
#define MMCL_EXP_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmcl/core/text.hpp"
#include "mmcl/exp/files.hpp"

namespace mmcl::exp {

namespace detail {

struct StrategyAgg {
    int runs_listed = 0;
    int runs_found = 0;
    std::vector<double> acc;
    std::vector<double> sbwt;
    std::map<int, std::vector<double>> alphas;                   // stage -> values
    std::map<std::pair<int, int>, std::vector<double>> ratios;   // (stage, layer) -> values
};

// Sample statistics; a single observation reports zero spread.
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

inline std::string manifest_value(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        if (core::trim(line.substr(0, eq)) == key) return core::trim(line.substr(eq + 1));
    }
    throw std::invalid_argument("manifest: missing key " + key);
}

inline std::vector<std::string> manifest_runs(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> out;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        if (core::trim(line.substr(0, eq)) == "run") out.push_back(core::trim(line.substr(eq + 1)));
    }
    return out;
}

}  // namespace detail

struct Report {
    std::string summary;  // per-strategy accuracy / sbwt aggregates
    std::string alpha;    // per-strategy, per-stage text-weight aggregates; empty when unused
    std::string ratios;   // per-strategy, per-stage, per-block drift ratios; empty when unused
};

// Aggregates completed experiment directories into CSV tables. Directories
// are deduplicated and processed in sorted order, so the output depends only
// on the set of inputs. Runs listed in a manifest but missing their metrics
// file are counted as absent, never invented.
inline Report build_report(const std::vector<std::string>& dirs) {
    namespace fs = std::filesystem;
    std::map<std::string, detail::StrategyAgg> by_strategy;

    const std::set<std::string> unique(dirs.begin(), dirs.end());
    for (const auto& dir : unique) {
        const std::string manifest = read_text_file(dir + "/manifest.txt");
        auto& agg = by_strategy[detail::manifest_value(manifest, "strategy")];
        for (const auto& run : detail::manifest_runs(manifest)) {
            ++agg.runs_listed;
            const std::string metrics_path = dir + "/" + run + "/metrics.csv";
            if (!fs::exists(metrics_path)) continue;
            const auto m = parse_metrics(read_text_file(metrics_path));
            ++agg.runs_found;
            agg.acc.push_back(m.final_accuracy);
            if (m.has_transfer) agg.sbwt.push_back(m.sbwt);
            const std::string alpha_path = dir + "/" + run + "/alpha.csv";
            if (fs::exists(alpha_path)) {
                const auto alphas = parse_alpha(read_text_file(alpha_path));
                for (std::size_t i = 0; i < alphas.size(); ++i)
                    agg.alphas[static_cast<int>(i) + 2].push_back(alphas[i]);
            }
            const std::string cka_path = dir + "/" + run + "/cka_ratio.csv";
            if (fs::exists(cka_path)) {
                const auto ratios = parse_cka(read_text_file(cka_path));
                for (std::size_t r = 0; r < ratios.size(); ++r)
                    for (std::size_t d = 0; d < ratios[r].size(); ++d)
                        agg.ratios[{static_cast<int>(r) + 2, static_cast<int>(d)}].push_back(
                            ratios[r][d]);
            }
        }
    }

    Report rep;
    {
        std::ostringstream o;
        o << "# std is the sample standard deviation (n-1); absent marks metrics no run produced\n";
        o << "strategy,runs,accuracy_mean,accuracy_std,sbwt_mean,sbwt_std\n";
        for (const auto& [name, agg] : by_strategy) {
            o << name << "," << agg.runs_found << ",";
            if (agg.acc.empty()) {
                o << "absent,absent,";
            } else {
                const auto [m, s] = detail::mean_std(agg.acc);
                o << core::fmt_double(m) << "," << core::fmt_double(s) << ",";
            }
            if (agg.sbwt.empty()) {
                o << "absent,absent\n";
            } else {
                const auto [m, s] = detail::mean_std(agg.sbwt);
                o << core::fmt_double(m) << "," << core::fmt_double(s) << "\n";
            }
        }
        rep.summary = o.str();
    }
    bool any_alpha = false, any_ratio = false;
    for (const auto& [name, agg] : by_strategy) {
        any_alpha = any_alpha || !agg.alphas.empty();
        any_ratio = any_ratio || !agg.ratios.empty();
    }
    if (any_alpha) {
        std::ostringstream o;
        o << "strategy,stage,alpha_mean,alpha_std\n";
        for (const auto& [name, agg] : by_strategy)
            for (const auto& [stage, vals] : agg.alphas) {
                const auto [m, s] = detail::mean_std(vals);
                o << name << "," << stage << "," << core::fmt_double(m) << ","
                  << core::fmt_double(s) << "\n";
            }
        rep.alpha = o.str();
    }
    if (any_ratio) {
        std::ostringstream o;
        o << "strategy,stage,layer,ratio_mean,ratio_std\n";
        for (const auto& [name, agg] : by_strategy)
            for (const auto& [key, vals] : agg.ratios) {
                const auto [m, s] = detail::mean_std(vals);
                o << name << "," << key.first << "," << key.second << ","
                  << core::fmt_double(m) << "," << core::fmt_double(s) << "\n";
            }
        rep.ratios = o.str();
    }
    return rep;
}

// Writes report.csv plus alpha_report.csv / cka_report.csv when populated;
// returns the paths written.
inline std::vector<std::string> emit_report(const std::vector<std::string>& dirs,
                                            const std::string& out_dir) {
    namespace fs = std::filesystem;
    const Report rep = build_report(dirs);
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    write_text_file(out_dir + "/report.csv", rep.summary);
    written.push_back(out_dir + "/report.csv");
    if (!rep.alpha.empty()) {
        write_text_file(out_dir + "/alpha_report.csv", rep.alpha);
        written.push_back(out_dir + "/alpha_report.csv");
    }
    if (!rep.ratios.empty()) {
        write_text_file(out_dir + "/cka_report.csv", rep.ratios);
        written.push_back(out_dir + "/cka_report.csv");
    }
    return written;
}

}  // namespace mmcl::exp

#endif
