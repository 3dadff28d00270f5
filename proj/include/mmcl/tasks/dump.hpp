#ifndef MMCL_TASKS_DUMP_HPP
#define MMCL_TASKS_DUMP_HPP

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/core/text.hpp"
#include "mmcl/tasks/scene.hpp"

namespace mmcl::tasks {

// One sample per line:
//   task <id> q <count> <token ids...> vis <count> <features...> ans <label>
// Features are row-major cell-by-feature values, printed so that reading them
// back reproduces the exact doubles.
inline void write_sample(std::ostream& os, const Sample& s) {
    os << "task " << s.task_id << " q " << s.question_tokens.size();
    for (int t : s.question_tokens) os << ' ' << t;
    os << " vis " << s.visual.data.size();
    for (double v : s.visual.data) os << ' ' << core::fmt_double(v);
    os << " ans " << s.answer << '\n';
}

inline void dump_samples(const std::string& path, const std::vector<Sample>& samples) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("dump: cannot open for write: " + path);
    for (const auto& s : samples) write_sample(os, s);
    if (!os) throw std::runtime_error("dump: write failed: " + path);
}

inline Sample parse_sample(const std::string& line, std::int64_t grid_cells, std::int64_t feature_dim) {
    std::istringstream is(line);
    auto expect = [&](const char* kw) {
        std::string w;
        is >> w;
        if (w != kw) throw std::runtime_error(std::string("dump: expected '") + kw + "', got '" + w + "'");
    };
    Sample s;
    expect("task");
    is >> s.task_id;
    expect("q");
    std::size_t nq = 0;
    is >> nq;
    s.question_tokens.resize(nq);
    for (auto& t : s.question_tokens) is >> t;
    expect("vis");
    std::size_t nv = 0;
    is >> nv;
    if (static_cast<std::int64_t>(nv) != grid_cells * feature_dim)
        throw std::runtime_error("dump: feature count mismatch");
    s.visual = num::Tensor::zeros({grid_cells, feature_dim});
    for (auto& v : s.visual.data) {
        std::string tok;
        is >> tok;
        v = core::parse_double(tok, "dump feature");
    }
    expect("ans");
    is >> s.answer;
    if (!is || s.answer.empty()) throw std::runtime_error("dump: truncated record");
    std::string rest;
    if (is >> rest) throw std::runtime_error("dump: trailing content: " + rest);
    return s;
}

inline std::vector<Sample> load_samples(const std::string& path, std::int64_t grid_cells = kGridCells,
                                        std::int64_t feature_dim = kVisualFeatureDim) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("dump: cannot open: " + path);
    std::vector<Sample> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(parse_sample(line, grid_cells, feature_dim));
    }
    return out;
}

}  // namespace mmcl::tasks

#endif
