#ifndef MMCL_EXP_FILES_HPP
#define MMCL_EXP_FILES_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmcl/analysis/metrics.hpp"
#include "mmcl/core/text.hpp"
#include "mmcl/train/run.hpp"

namespace mmcl::exp {

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace detail {

inline std::vector<std::string> csv_fields(const std::string& line, std::size_t n, const char* what) {
    const auto parts = core::split(line, ',');
    if (parts.size() != n) throw std::invalid_argument(std::string(what) + ": malformed row: " + line);
    std::vector<std::string> out;
    out.reserve(n);
    for (const auto& p : parts) out.push_back(core::trim(p));
    return out;
}

// Transfer metrics need the full lower triangle; multitask runs only fill the
// final row and single-task runs have no earlier stage to forget.
inline bool transfer_defined(const analysis::ScoreMatrix& m) {
    if (m.size() < 2) return false;
    for (std::size_t t = 0; t < m.size(); ++t)
        if (m[t].size() != t + 1) return false;
    return true;
}

}  // namespace detail

// ----- metrics.csv: accuracy / weighted cells plus derived scalars -----

struct RunMetrics {
    analysis::ScoreMatrix accuracy;
    analysis::ScoreMatrix weighted;
    double final_accuracy = std::numeric_limits<double>::quiet_NaN();
    double sbwt = std::numeric_limits<double>::quiet_NaN();
    double bwt = std::numeric_limits<double>::quiet_NaN();
    bool has_transfer = false;
};

inline std::string format_metrics(const train::RunResult& r) {
    std::ostringstream o;
    o << "name,stage,task,value\n";
    auto emit = [&o](const char* name, const analysis::ScoreMatrix& m) {
        for (std::size_t t = 0; t < m.size(); ++t)
            for (std::size_t i = 0; i < m[t].size(); ++i)
                o << name << "," << t + 1 << "," << i + 1 << "," << core::fmt_double(m[t][i]) << "\n";
    };
    emit("accuracy", r.accuracy_matrix);
    emit("weighted", r.weighted_matrix);
    o << "final_accuracy,0,0," << core::fmt_double(analysis::final_accuracy(r.accuracy_matrix)) << "\n";
    if (detail::transfer_defined(r.accuracy_matrix)) {
        const auto tr = analysis::sbwt(r.weighted_matrix, r.accuracy_matrix);
        o << "sbwt,0,0," << core::fmt_double(tr.sbwt) << "\n";
        o << "bwt,0,0," << core::fmt_double(tr.bwt) << "\n";
    }
    return o.str();
}

inline RunMetrics parse_metrics(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || core::trim(line) != "name,stage,task,value")
        throw std::invalid_argument("metrics: missing header");
    RunMetrics m;
    bool has_final = false, has_sbwt = false, has_bwt = false;
    auto cell = [](analysis::ScoreMatrix& mat, long long stage, long long task, double v) {
        if (stage < 1 || task < 1 || task > stage)
            throw std::invalid_argument("metrics: cell outside the lower triangle");
        const auto t = static_cast<std::size_t>(stage - 1);
        const auto i = static_cast<std::size_t>(task - 1);
        if (std::cmp_less(mat.size(), stage)) mat.resize(static_cast<std::size_t>(stage));
        if (std::cmp_less(mat[t].size(), task))
            mat[t].resize(static_cast<std::size_t>(task), std::numeric_limits<double>::quiet_NaN());
        mat[t][i] = v;
    };
    while (std::getline(in, line)) {
        if (core::trim(line).empty()) continue;
        const auto f = detail::csv_fields(line, 4, "metrics");
        const long long stage = core::parse_int(f[1], "metrics stage");
        const long long task = core::parse_int(f[2], "metrics task");
        const double v = core::parse_double(f[3], "metrics value");
        if (f[0] == "accuracy") {
            cell(m.accuracy, stage, task, v);
        } else if (f[0] == "weighted") {
            cell(m.weighted, stage, task, v);
        } else if (f[0] == "final_accuracy") {
            m.final_accuracy = v;
            has_final = true;
        } else if (f[0] == "sbwt") {
            m.sbwt = v;
            has_sbwt = true;
        } else if (f[0] == "bwt") {
            m.bwt = v;
            has_bwt = true;
        } else {
            throw std::invalid_argument("metrics: unknown row name " + f[0]);
        }
    }
    if (!has_final) throw std::invalid_argument("metrics: missing final_accuracy row");
    if (has_sbwt != has_bwt) throw std::invalid_argument("metrics: sbwt and bwt must appear together");
    m.has_transfer = has_sbwt;
    for (const auto& mat : {m.accuracy, m.weighted})
        for (const auto& row : mat)
            for (double v : row)
                if (std::isnan(v)) throw std::invalid_argument("metrics: missing cell in a stage row");
    return m;
}

// ----- cka_ratio.csv: per stage >= 2, per block -----

inline std::string format_cka(const std::vector<std::vector<double>>& ratios) {
    std::ostringstream o;
    o << "stage,layer,value\n";
    for (std::size_t r = 0; r < ratios.size(); ++r)
        for (std::size_t d = 0; d < ratios[r].size(); ++d)
            o << r + 2 << "," << d << "," << core::fmt_double(ratios[r][d]) << "\n";
    return o.str();
}

inline std::vector<std::vector<double>> parse_cka(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || core::trim(line) != "stage,layer,value")
        throw std::invalid_argument("cka_ratio: missing header");
    std::vector<std::vector<double>> out;
    while (std::getline(in, line)) {
        if (core::trim(line).empty()) continue;
        const auto f = detail::csv_fields(line, 3, "cka_ratio");
        const long long stage = core::parse_int(f[0], "cka_ratio stage");
        const long long layer = core::parse_int(f[1], "cka_ratio layer");
        if (stage < 2 || layer < 0) throw std::invalid_argument("cka_ratio: bad indices: " + line);
        const auto r = static_cast<std::size_t>(stage - 2);
        if (out.size() <= r) out.resize(r + 1);
        if (out[r].size() != static_cast<std::size_t>(layer))
            throw std::invalid_argument("cka_ratio: layers out of order: " + line);
        out[r].push_back(core::parse_double(f[2], "cka_ratio value"));
    }
    for (std::size_t r = 1; r < out.size(); ++r)
        if (out[r].size() != out[0].size()) throw std::invalid_argument("cka_ratio: ragged stages");
    return out;
}

// ----- alpha.csv: the text weight chosen for each distilled stage -----

inline std::string format_alpha(const std::vector<double>& alpha_log) {
    std::ostringstream o;
    o << "stage,alpha\n";
    for (std::size_t i = 0; i < alpha_log.size(); ++i)
        o << i + 2 << "," << core::fmt_double(alpha_log[i]) << "\n";
    return o.str();
}

inline std::vector<double> parse_alpha(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || core::trim(line) != "stage,alpha")
        throw std::invalid_argument("alpha: missing header");
    std::vector<double> out;
    while (std::getline(in, line)) {
        if (core::trim(line).empty()) continue;
        const auto f = detail::csv_fields(line, 2, "alpha");
        const long long stage = core::parse_int(f[0], "alpha stage");
        if (stage != static_cast<long long>(out.size()) + 2)
            throw std::invalid_argument("alpha: stages out of order: " + line);
        out.push_back(core::parse_double(f[1], "alpha value"));
    }
    return out;
}

// ----- train.log: one line per epoch, human oriented -----

inline std::string format_train_log(const std::vector<train::TaskLogs>& logs) {
    std::ostringstream o;
    for (std::size_t t = 0; t < logs.size(); ++t) {
        const auto& tl = logs[t];
        const std::size_t spe = tl.epochs.empty() ? 0 : tl.step_lrs.size() / tl.epochs.size();
        for (const auto& e : tl.epochs) {
            const std::size_t last = static_cast<std::size_t>(e.epoch) * spe;
            const double lr = (last >= 1 && last <= tl.step_lrs.size()) ? tl.step_lrs[last - 1] : 0.0;
            o << "task " << t + 1 << " epoch " << e.epoch << " cls " << core::fmt_double(e.cls)
              << " fd_text " << core::fmt_double(e.fd_text) << " fd_vision " << core::fmt_double(e.fd_vision)
              << " ewc " << core::fmt_double(e.ewc) << " alpha " << core::fmt_double(e.alpha)
              << " val_accuracy " << core::fmt_double(e.val_accuracy) << " lr " << core::fmt_double(lr)
              << "\n";
        }
        o << "task " << t + 1 << " best_epoch " << tl.best_epoch << " best_val "
          << core::fmt_double(tl.best_val_accuracy) << " steps " << tl.step_lrs.size() << "\n";
    }
    return o.str();
}

}  // namespace mmcl::exp

#endif
