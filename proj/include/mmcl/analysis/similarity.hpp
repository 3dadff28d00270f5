#ifndef MMCL_ANALYSIS_SIMILARITY_HPP
#define MMCL_ANALYSIS_SIMILARITY_HPP

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/core/text.hpp"
#include "mmcl/num/tensor.hpp"
#include "mmcl/tasks/universe.hpp"

namespace mmcl::analysis {

// Symmetric label-to-label similarity in [0,1] with unit diagonal, used for
// semantic credit: an exact answer earns 1, a related answer earns sim(pred,
// gold), anything else 0.
struct AnswerSimilarity {
    std::vector<std::string> labels;
    num::Tensor matrix;  // [n, n]

    int index(const std::string& label) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return static_cast<int>(i);
        return -1;
    }

    double credit(const std::string& pred, const std::string& gold) const {
        if (pred == gold) return 1.0;
        const int a = index(pred), b = index(gold);
        if (a < 0 || b < 0) return 0.0;
        return matrix.at({static_cast<std::int64_t>(a), static_cast<std::int64_t>(b)});
    }

    void validate() const {
        const auto n = static_cast<std::int64_t>(labels.size());
        if (n == 0) throw std::invalid_argument("similarity: no labels");
        if (matrix.shape != std::vector<std::int64_t>{n, n})
            throw std::invalid_argument("similarity: matrix shape mismatch");
        for (std::int64_t i = 0; i < n; ++i) {
            if (matrix.at({i, i}) != 1.0)
                throw std::invalid_argument("similarity: diagonal must be 1 at " + labels[static_cast<std::size_t>(i)]);
            for (std::int64_t j = 0; j < n; ++j) {
                const double v = matrix.at({i, j});
                if (v < 0.0 || v > 1.0)
                    throw std::invalid_argument("similarity: entries must lie in [0,1]");
                if (v != matrix.at({j, i}))
                    throw std::invalid_argument("similarity: matrix must be symmetric");
            }
        }
    }
};

inline AnswerSimilarity identity_similarity(const std::vector<std::string>& labels) {
    AnswerSimilarity s;
    s.labels = labels;
    const auto n = static_cast<std::int64_t>(labels.size());
    s.matrix = num::Tensor::zeros({n, n});
    for (std::int64_t i = 0; i < n; ++i) s.matrix.at({i, i}) = 1.0;
    return s;
}

// Built-in table for the synthetic answer universe: adjacent counts are half
// credit, colors in the same family quarter credit, everything else distinct.
inline AnswerSimilarity default_answer_similarity() {
    std::vector<std::string> labels;
    for (int c = 0; c <= tasks::kMaxObjects; ++c) labels.push_back(std::to_string(c));
    labels.push_back("yes");
    labels.push_back("no");
    for (const auto& c : tasks::color_names()) labels.push_back(c);
    for (const auto& q : tasks::quadrant_names()) labels.push_back(q);
    for (const auto& s : tasks::shape_names()) labels.push_back(s);

    auto family = [](const std::string& color) -> int {
        if (color == "red" || color == "yellow" || color == "orange") return 0;
        if (color == "blue" || color == "green" || color == "purple") return 1;
        if (color == "black" || color == "white") return 2;
        return -1;
    };
    auto count_of = [](const std::string& s) -> int {
        if (s.size() == 1 && s[0] >= '0' && s[0] <= '6') return s[0] - '0';
        return -1;
    };

    AnswerSimilarity out = identity_similarity(labels);
    const auto n = static_cast<std::int64_t>(labels.size());
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j) {
            const auto &a = labels[static_cast<std::size_t>(i)], &b = labels[static_cast<std::size_t>(j)];
            double sim = 0.0;
            const int ca = count_of(a), cb = count_of(b);
            if (ca >= 0 && cb >= 0 && std::abs(ca - cb) == 1) sim = 0.5;
            const int fa = family(a), fb = family(b);
            if (fa >= 0 && fa == fb) sim = 0.25;
            out.matrix.at({i, j}) = sim;
            out.matrix.at({j, i}) = sim;
        }
    out.validate();
    return out;
}

// Text form: label count, one label per line, then one matrix row per line.
inline std::string format_answer_similarity(const AnswerSimilarity& s) {
    std::ostringstream os;
    os << s.labels.size() << "\n";
    for (const auto& l : s.labels) os << l << "\n";
    const auto n = static_cast<std::int64_t>(s.labels.size());
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            if (j) os << ' ';
            os << core::fmt_double(s.matrix.at({i, j}));
        }
        os << "\n";
    }
    return os.str();
}

inline AnswerSimilarity parse_answer_similarity(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("similarity: empty file");
    const int n = static_cast<int>(core::parse_int(core::trim(line), "label count"));
    if (n < 1) throw std::invalid_argument("similarity: label count must be positive");
    AnswerSimilarity s;
    for (int i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw std::invalid_argument("similarity: missing label line");
        const std::string label = core::trim(line);
        if (label.empty()) throw std::invalid_argument("similarity: blank label");
        s.labels.push_back(label);
    }
    s.matrix = num::Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw std::invalid_argument("similarity: missing matrix row");
        std::vector<std::string> parts;
        for (auto& p : core::split(core::trim(line), ' '))
            if (!p.empty()) parts.push_back(std::move(p));
        if (static_cast<int>(parts.size()) != n)
            throw std::invalid_argument("similarity: row " + std::to_string(i) + " has wrong width");
        for (int j = 0; j < n; ++j)
            s.matrix.at({i, j}) = core::parse_double(parts[static_cast<std::size_t>(j)], "similarity entry");
    }
    while (std::getline(is, line))
        if (!core::trim(line).empty())
            throw std::invalid_argument("similarity: trailing content after matrix");
    s.validate();
    return s;
}

inline AnswerSimilarity load_answer_similarity(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("similarity: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_answer_similarity(buf.str());
}

}  // namespace mmcl::analysis

#endif
