#ifndef MMCL_MODEL_CHECKPOINT_HPP
#define MMCL_MODEL_CHECKPOINT_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/model/config.hpp"
#include "mmcl/model/head.hpp"
#include "mmcl/model/params.hpp"
#include "mmcl/num/tensor.hpp"

namespace mmcl::model {

// Full model snapshot: configuration, trunk parameters, classifier head.
struct Checkpoint {
    ModelConfig config;
    ParamStore params;
    ClassifierHead head;
};

namespace ckio {

constexpr char MAGIC[8] = {'M', 'M', 'C', 'L', 'C', 'K', '0', '1'};

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void put_str(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_str(std::istream& is) {
    const std::uint64_t n = get_u64(is);
    if (n > (1u << 20)) throw std::runtime_error("checkpoint: suspicious string length");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return s;
}

inline void put_tensor(std::ostream& os, const num::Tensor& t) {
    put_u64(os, t.shape.size());
    for (auto d : t.shape) put_u64(os, static_cast<std::uint64_t>(d));
    for (double v : t.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(os, bits);
    }
}

inline num::Tensor get_tensor(std::istream& is) {
    const std::uint64_t nd = get_u64(is);
    if (nd > 8) throw std::runtime_error("checkpoint: tensor rank too large");
    std::vector<std::int64_t> shape;
    for (std::uint64_t i = 0; i < nd; ++i) shape.push_back(static_cast<std::int64_t>(get_u64(is)));
    num::Tensor t = shape.empty() ? num::Tensor::scalar(0.0) : num::Tensor::zeros(shape);
    for (double& v : t.data) {
        const std::uint64_t bits = get_u64(is);
        std::memcpy(&v, &bits, 8);
    }
    return t;
}

}  // namespace ckio

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    os.write(ckio::MAGIC, 8);
    const ModelConfig& c = ck.config;
    for (int v : {c.num_layers, c.hidden_dim, c.num_heads, c.text_vocab_size, c.visual_feature_dim,
                  c.max_text_len, c.max_visual_len, c.mlp_ratio})
        ckio::put_u64(os, static_cast<std::uint64_t>(v));
    ckio::put_u64(os, ck.head.label_table.size());
    for (const auto& l : ck.head.label_table) ckio::put_str(os, l);
    if (!ck.head.label_table.empty()) {
        ckio::put_tensor(os, ck.head.weight);
        ckio::put_tensor(os, ck.head.bias);
    }
    ckio::put_u64(os, ck.params.size());
    for (const auto& [name, tensor] : ck.params) {
        ckio::put_str(os, name);
        ckio::put_tensor(os, tensor);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, ckio::MAGIC, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic: " + path);
    Checkpoint ck;
    ModelConfig& c = ck.config;
    for (int* v : {&c.num_layers, &c.hidden_dim, &c.num_heads, &c.text_vocab_size,
                   &c.visual_feature_dim, &c.max_text_len, &c.max_visual_len, &c.mlp_ratio})
        *v = static_cast<int>(ckio::get_u64(is));
    const std::uint64_t nl = ckio::get_u64(is);
    for (std::uint64_t i = 0; i < nl; ++i) ck.head.label_table.push_back(ckio::get_str(is));
    if (nl > 0) {
        ck.head.weight = ckio::get_tensor(is);
        ck.head.bias = ckio::get_tensor(is);
    }
    const std::uint64_t np = ckio::get_u64(is);
    for (std::uint64_t i = 0; i < np; ++i) {
        std::string name = ckio::get_str(is);
        ck.params[name] = ckio::get_tensor(is);
    }
    ck.config.validate();
    ck.head.check();
    return ck;
}

}  // namespace mmcl::model

#endif
