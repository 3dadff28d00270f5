#ifndef MMCL_TASKS_UNIVERSE_HPP
#define MMCL_TASKS_UNIVERSE_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmcl::tasks {

inline constexpr int kNumShapes = 12;
inline constexpr int kNumSupercats = 5;
inline constexpr int kNumConcepts = kNumShapes * kNumSupercats;
inline constexpr int kNumColors = 8;
inline constexpr int kGridSide = 4;
inline constexpr int kGridCells = kGridSide * kGridSide;
inline constexpr int kMaxObjects = 6;
// per grid cell: shape one-hot + supercategory one-hot + color one-hot + row/col one-hot
inline constexpr int kVisualFeatureDim = kNumShapes + kNumSupercats + kNumColors + 2 * kGridSide;

inline const std::array<std::string, kNumShapes>& shape_names() {
    static const std::array<std::string, kNumShapes> v{
        "circle", "square", "triangle", "star", "hexagon", "diamond",
        "cross",  "arrow",  "ring",     "wedge", "spiral",  "crescent"};
    return v;
}

inline const std::array<std::string, kNumSupercats>& supercat_names() {
    static const std::array<std::string, kNumSupercats> v{"fauna", "flora", "craft", "gear", "decor"};
    return v;
}

inline const std::array<std::string, kNumColors>& color_names() {
    static const std::array<std::string, kNumColors> v{"red",    "blue",   "green", "yellow",
                                                       "purple", "orange", "black", "white"};
    return v;
}

struct Concept {
    int id = 0;
    int shape_class = 0;
    int supercategory = 0;
    int color = 0;  // canonical display color; scene instances recolor freely
};

inline Concept concept_by_id(int id) {
    if (id < 0 || id >= kNumConcepts) throw std::invalid_argument("concept id out of range");
    return Concept{id, id % kNumShapes, id / kNumShapes, id % kNumColors};
}

inline std::vector<Concept> universe() {
    std::vector<Concept> out;
    for (int i = 0; i < kNumConcepts; ++i) out.push_back(concept_by_id(i));
    return out;
}

// ---- question vocabulary ----------------------------------------------------

enum class QType : int { Count = 0, Color = 1, Existence = 2, Position = 3, Shape = 4 };
inline constexpr int kNumQTypes = 5;

inline const std::array<std::string, kNumQTypes>& qtype_names() {
    static const std::array<std::string, kNumQTypes> v{"count", "color", "existence", "position",
                                                       "shape"};
    return v;
}

// Fixed synthetic vocabulary. Id 0 is reserved for padding.
inline const std::vector<std::string>& vocabulary() {
    static const std::vector<std::string> v = [] {
        std::vector<std::string> w{"<pad>"};
        for (const char* s :
             {"how", "many", "count", "the", "number", "of", "what", "color", "is", "which",
              "does", "have", "has", "name", "there", "a", "scene", "contain", "any", "here", "where",
              "quadrant", "holds", "locate", "shape", "object"})
            w.push_back(s);
        for (const auto& s : shape_names()) w.push_back(s);
        for (const auto& s : color_names()) w.push_back(s);
        return w;
    }();
    return v;
}

inline int vocab_id(const std::string& word) {
    const auto& v = vocabulary();
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] == word) return static_cast<int>(i);
    throw std::invalid_argument("word not in vocabulary: " + word);
}

inline int vocab_size() { return static_cast<int>(vocabulary().size()); }

// question surface templates; <S> = target shape word, <C> = target color word
inline const std::vector<std::vector<std::string>>& question_templates(QType q) {
    static const std::array<std::vector<std::vector<std::string>>, kNumQTypes> all = [] {
        std::array<std::vector<std::vector<std::string>>, kNumQTypes> t;
        t[0] = {{"how", "many", "<S>"}, {"count", "the", "<S>"}, {"number", "of", "<S>"}};
        t[1] = {{"what", "color", "is", "the", "<S>"},
                {"which", "color", "does", "the", "<S>", "have"},
                {"name", "the", "color", "of", "the", "<S>"}};
        t[2] = {{"is", "there", "a", "<S>"},
                {"does", "the", "scene", "contain", "a", "<S>"},
                {"any", "<S>", "here"}};
        t[3] = {{"where", "is", "the", "<S>"},
                {"which", "quadrant", "holds", "the", "<S>"},
                {"locate", "the", "<S>"}};
        t[4] = {{"what", "shape", "is", "the", "<C>", "object"},
                {"which", "shape", "is", "<C>"},
                {"the", "<C>", "object", "has", "what", "shape"}};
        return t;
    }();
    return all[static_cast<int>(q)];
}

inline const std::array<std::string, 4>& quadrant_names() {
    static const std::array<std::string, 4> v{"top-left", "top-right", "bottom-left", "bottom-right"};
    return v;
}

inline int quadrant_of_cell(int cell) {
    const int row = cell / kGridSide, col = cell % kGridSide;
    return (row >= kGridSide / 2 ? 2 : 0) + (col >= kGridSide / 2 ? 1 : 0);
}

}  // namespace mmcl::tasks

#endif
