#ifndef MMCL_NUM_TAPE_HPP
#define MMCL_NUM_TAPE_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmcl/num/tensor.hpp"

namespace mmcl::num {

// Raised by evaluate()/backward() with the offending node attached.
struct TapeError : std::runtime_error {
    int node_id;
    TapeError(int id, const std::string& msg)
        : std::runtime_error("node " + std::to_string(id) + ": " + msg), node_id(id) {}
};

enum class Op {
    Leaf,
    Matmul,
    Add,
    Mul,
    Gelu,
    Softmax,
    LayerNorm,
    Embed,
    CeSum,   // cross-entropy-with-softmax fusion, sum over rows
    Sum,
    Mean,
    SqL2,
    Reshape,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Matmul: return "matmul";
        case Op::Add: return "add";
        case Op::Mul: return "mul";
        case Op::Gelu: return "gelu";
        case Op::Softmax: return "softmax";
        case Op::LayerNorm: return "layer_norm";
        case Op::Embed: return "embed";
        case Op::CeSum: return "cross_entropy_sum";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::SqL2: return "squared_l2";
        case Op::Reshape: return "reshape";
    }
    return "?";
}

// Recorded computation graph over whole-tensor primitives.
//
// Build ops first (shapes are inferred immediately), then evaluate() with the
// named leaves bound, then backward() from a scalar node. A tape can be
// re-evaluated with fresh bindings any number of times; results depend only on
// the bindings.
//
// Elementwise add/mul broadcast the smaller operand when its shape is a suffix
// of the larger one's (leading-batch broadcast) or when it is a single element.
class Tape {
public:
    using Ref = std::int32_t;

    Tape() { nodes_.reserve(64); }

    // ---- construction ----------------------------------------------------

    Ref leaf(const std::string& name, std::vector<std::int64_t> shape, bool requires_grad) {
        if (name.empty()) throw std::invalid_argument("leaf: name required");
        Node n;
        n.op = Op::Leaf;
        n.name = name;
        n.shape = std::move(shape);
        n.requires_grad = requires_grad;
        n.needs_grad = requires_grad;
        return push(std::move(n));
    }

    // leaf with a fixed value; not rebindable, never differentiated
    Ref constant(Tensor t) {
        Node n;
        n.op = Op::Leaf;
        n.shape = t.shape;
        n.value = std::move(t);
        n.bound = true;
        return push(std::move(n));
    }

    Ref constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    Ref matmul(Ref a, Ref b, bool trans_a = false, bool trans_b = false) {
        const auto& sa = shape_of(a);
        const auto& sb = shape_of(b);
        if (sa.size() < 2 || sb.size() < 2)
            throw std::invalid_argument("matmul: operands must have rank >= 2");
        std::int64_t m = trans_a ? sa.back() : sa[sa.size() - 2];
        std::int64_t ka = trans_a ? sa[sa.size() - 2] : sa.back();
        std::int64_t kb = trans_b ? sb.back() : sb[sb.size() - 2];
        std::int64_t nn = trans_b ? sb[sb.size() - 2] : sb.back();
        if (ka != kb)
            throw std::invalid_argument("matmul: inner dims differ: " + shape_str(sa) + " x " +
                                        shape_str(sb));
        std::vector<std::int64_t> batch_a(sa.begin(), sa.end() - 2);
        std::vector<std::int64_t> batch_b(sb.begin(), sb.end() - 2);
        if (!batch_a.empty() && !batch_b.empty() && batch_a != batch_b)
            throw std::invalid_argument("matmul: batch dims differ");
        std::vector<std::int64_t> out = batch_a.empty() ? batch_b : batch_a;
        out.push_back(m);
        out.push_back(nn);
        Node n;
        n.op = Op::Matmul;
        n.in = {a, b};
        n.shape = std::move(out);
        n.trans_a = trans_a;
        n.trans_b = trans_b;
        n.needs_grad = needs(a) || needs(b);
        return push(std::move(n));
    }

    Ref add(Ref a, Ref b) { return binary(Op::Add, a, b); }
    Ref mul(Ref a, Ref b) { return binary(Op::Mul, a, b); }

    Ref sub(Ref a, Ref b) { return add(a, scale(b, -1.0)); }
    Ref scale(Ref a, double c) { return mul(a, constant_scalar(c)); }

    Ref gelu(Ref a) { return unary(Op::Gelu, a); }

    Ref softmax(Ref a) {
        if (shape_of(a).empty()) throw std::invalid_argument("softmax: rank >= 1 required");
        return unary(Op::Softmax, a);
    }

    Ref layer_norm(Ref a, double eps = 1e-12) {
        if (shape_of(a).empty()) throw std::invalid_argument("layer_norm: rank >= 1 required");
        Ref r = unary(Op::LayerNorm, a);
        nodes_[static_cast<std::size_t>(r)].eps = eps;
        return r;
    }

    // table [V, H], ids integral-valued; out [ids..., H]
    Ref embed(Ref table, Ref ids) {
        const auto& st = shape_of(table);
        if (st.size() != 2) throw std::invalid_argument("embed: table must be [V, H]");
        if (needs(ids)) throw std::invalid_argument("embed: ids must not require grad");
        std::vector<std::int64_t> out = shape_of(ids);
        out.push_back(st[1]);
        Node n;
        n.op = Op::Embed;
        n.in = {table, ids};
        n.shape = std::move(out);
        n.needs_grad = needs(table);
        return push(std::move(n));
    }

    // logits [N, C], labels [N]; returns scalar sum over rows
    Ref cross_entropy_sum(Ref logits, Ref labels) {
        const auto& sl = shape_of(logits);
        const auto& sy = shape_of(labels);
        if (sl.size() != 2) throw std::invalid_argument("cross_entropy_sum: logits must be [N, C]");
        if (sy.size() != 1 || sy[0] != sl[0])
            throw std::invalid_argument("cross_entropy_sum: labels must be [N]");
        if (needs(labels)) throw std::invalid_argument("cross_entropy_sum: labels must not require grad");
        Node n;
        n.op = Op::CeSum;
        n.in = {logits, labels};
        n.shape = {};
        n.needs_grad = needs(logits);
        return push(std::move(n));
    }

    Ref sum(Ref a) { return reduction(Op::Sum, a); }
    Ref mean(Ref a) { return reduction(Op::Mean, a); }
    Ref squared_l2(Ref a) { return reduction(Op::SqL2, a); }

    Ref reshape(Ref a, std::vector<std::int64_t> shape) {
        if (Tensor::numel(shape) != Tensor::numel(shape_of(a)))
            throw std::invalid_argument("reshape: element count changes " + shape_str(shape_of(a)) +
                                        " -> " + shape_str(shape));
        Node n;
        n.op = Op::Reshape;
        n.in = {a};
        n.shape = std::move(shape);
        n.needs_grad = needs(a);
        return push(std::move(n));
    }

    void set_name(Ref r, const std::string& name) {
        if (name_index_.count(name))
            throw std::invalid_argument("duplicate node name '" + name + "'");
        nodes_[static_cast<std::size_t>(r)].name = name;
        name_index_[name] = r;
    }

    // ---- execution ---------------------------------------------------------

    // Binds named leaves, runs every node in order, returns values of all
    // named nodes. Rejects unbound leaves, shape mismatches, unknown binding
    // names and non-finite results (with the node id).
    std::map<std::string, Tensor> evaluate(const std::map<std::string, Tensor>& leaves) {
        for (const auto& [name, t] : leaves)
            if (!name_index_.count(name))
                throw std::invalid_argument("evaluate: unknown leaf '" + name + "'");
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Node& n = nodes_[i];
            const int id = static_cast<int>(i);
            if (n.op == Op::Leaf) {
                if (!n.name.empty()) {
                    auto it = leaves.find(n.name);
                    if (it != leaves.end()) {
                        if (it->second.shape != n.shape)
                            throw TapeError(id, "leaf '" + n.name + "': bound shape " +
                                                    shape_str(it->second.shape) + " != declared " +
                                                    shape_str(n.shape));
                        n.value = it->second;
                        n.bound = true;
                    }
                }
                if (!n.bound) throw TapeError(id, "leaf '" + n.name + "' not bound");
            } else {
                compute(n, id);
            }
            if (!n.value.all_finite())
                throw TapeError(id, std::string(op_name(n.op)) + ": non-finite value");
        }
        evaluated_upto_ = nodes_.size();
        std::map<std::string, Tensor> out;
        for (const auto& n : nodes_)
            if (!n.name.empty()) out[n.name] = n.value;
        return out;
    }

    // d(output)/d(leaf) for every leaf with requires_grad. Output must be a
    // scalar node of an evaluated tape.
    std::map<std::string, Tensor> backward(Ref output) {
        if (evaluated_upto_ != nodes_.size())
            throw std::logic_error("backward: tape not evaluated");
        Node& out = nodes_[static_cast<std::size_t>(output)];
        if (!out.value.is_scalar())
            throw std::invalid_argument("backward: output is not scalar");
        for (auto& n : nodes_)
            if (n.needs_grad)
                n.grad = Tensor::zeros(n.shape.empty() ? std::vector<std::int64_t>{} : n.shape);
            else
                n.grad = Tensor();
        if (!out.needs_grad) return collect_leaf_grads();
        out.grad.data[0] = 1.0;
        for (std::size_t i = static_cast<std::size_t>(output) + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.needs_grad || n.op == Op::Leaf || n.grad.data.empty()) continue;
            propagate(n, static_cast<int>(i));
        }
        return collect_leaf_grads();
    }

    const Tensor& value(Ref r) const { return nodes_[static_cast<std::size_t>(r)].value; }
    // valid after backward(); zero-sized tensor when the node has no gradient
    const Tensor& grad(Ref r) const { return nodes_[static_cast<std::size_t>(r)].grad; }
    const std::vector<std::int64_t>& shape_of(Ref r) const {
        return nodes_[static_cast<std::size_t>(r)].shape;
    }
    std::size_t size() const { return nodes_.size(); }
    Op op_of(Ref r) const { return nodes_[static_cast<std::size_t>(r)].op; }

    std::vector<std::string> leaf_names() const {
        std::vector<std::string> out;
        for (const auto& n : nodes_)
            if (n.op == Op::Leaf && !n.name.empty()) out.push_back(n.name);
        return out;
    }

    Ref ref_of(const std::string& name) const {
        auto it = name_index_.find(name);
        if (it == name_index_.end()) throw std::invalid_argument("no node named '" + name + "'");
        return it->second;
    }

private:
    struct Node {
        Op op = Op::Leaf;
        std::vector<Ref> in;
        std::vector<std::int64_t> shape;
        Tensor value;
        Tensor grad;
        std::string name;
        bool requires_grad = false;  // leaves only
        bool needs_grad = false;     // any differentiable path below
        bool bound = false;          // leaves: value present
        bool trans_a = false, trans_b = false;
        double eps = 1e-12;
    };

    std::vector<Node> nodes_;
    std::map<std::string, Ref> name_index_;
    std::size_t evaluated_upto_ = 0;

    bool needs(Ref r) const { return nodes_[static_cast<std::size_t>(r)].needs_grad; }

    Ref push(Node&& n) {
        if (!n.name.empty()) {
            if (name_index_.count(n.name))
                throw std::invalid_argument("duplicate node name '" + n.name + "'");
            name_index_[n.name] = static_cast<Ref>(nodes_.size());
        }
        nodes_.push_back(std::move(n));
        return static_cast<Ref>(nodes_.size() - 1);
    }

    Ref unary(Op op, Ref a) {
        Node n;
        n.op = op;
        n.in = {a};
        n.shape = shape_of(a);
        n.needs_grad = needs(a);
        return push(std::move(n));
    }

    Ref reduction(Op op, Ref a) {
        Node n;
        n.op = op;
        n.in = {a};
        n.shape = {};
        n.needs_grad = needs(a);
        return push(std::move(n));
    }

    // suffix-or-scalar broadcast contract
    Ref binary(Op op, Ref a, Ref b) {
        const auto& sa = shape_of(a);
        const auto& sb = shape_of(b);
        const auto& big = Tensor::numel(sa) >= Tensor::numel(sb) ? sa : sb;
        const auto& small = Tensor::numel(sa) >= Tensor::numel(sb) ? sb : sa;
        bool ok = sa == sb || Tensor::numel(small) == 1 ||
                  (small.size() <= big.size() &&
                   std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size())));
        if (!ok)
            throw std::invalid_argument(std::string(op_name(op)) + ": shapes not broadcastable " +
                                        shape_str(sa) + " vs " + shape_str(sb));
        Node n;
        n.op = op;
        n.in = {a, b};
        n.shape = big;
        n.needs_grad = needs(a) || needs(b);
        return push(std::move(n));
    }

    std::map<std::string, Tensor> collect_leaf_grads() {
        std::map<std::string, Tensor> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Node& n = nodes_[i];
            if (n.op != Op::Leaf || !n.requires_grad) continue;
            if (n.grad.data.empty()) n.grad = Tensor::zeros(n.shape);
            if (!n.grad.all_finite())
                throw TapeError(static_cast<int>(i), "non-finite gradient at leaf '" + n.name + "'");
            out[n.name] = n.grad;
        }
        return out;
    }

    // ---- forward kernels ---------------------------------------------------

    using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Map = Eigen::Map<EMat>;
    using CMap = Eigen::Map<const EMat>;

    static void gemm(const double* a, std::int64_t ra, std::int64_t ca, bool ta,
                     const double* b, std::int64_t rb, std::int64_t cb, bool tb, double* c,
                     bool accumulate) {
        CMap A(a, ra, ca), B(b, rb, cb);
        const std::int64_t m = ta ? ca : ra;
        const std::int64_t n = tb ? rb : cb;
        Map C(c, m, n);
        if (!accumulate) {
            if (!ta && !tb) C.noalias() = A * B;
            else if (ta && !tb) C.noalias() = A.transpose() * B;
            else if (!ta && tb) C.noalias() = A * B.transpose();
            else C.noalias() = A.transpose() * B.transpose();
        } else {
            if (!ta && !tb) C.noalias() += A * B;
            else if (ta && !tb) C.noalias() += A.transpose() * B;
            else if (!ta && tb) C.noalias() += A * B.transpose();
            else C.noalias() += A.transpose() * B.transpose();
        }
    }

    void compute(Node& n, int id) {
        switch (n.op) {
            case Op::Leaf: return;
            case Op::Matmul: {
                const Tensor& a = val(n.in[0]);
                const Tensor& b = val(n.in[1]);
                n.value = Tensor::zeros(n.shape);
                const std::int64_t ra = a.shape[a.shape.size() - 2], ca = a.shape.back();
                const std::int64_t rb = b.shape[b.shape.size() - 2], cb = b.shape.back();
                const std::int64_t m = n.shape[n.shape.size() - 2], nn = n.shape.back();
                const std::int64_t batch = n.value.size() / (m * nn);
                const bool ab = a.ndim() > 2, bb = b.ndim() > 2;
                for (std::int64_t i = 0; i < batch; ++i)
                    gemm(a.data.data() + (ab ? i * ra * ca : 0), ra, ca, n.trans_a,
                         b.data.data() + (bb ? i * rb * cb : 0), rb, cb, n.trans_b,
                         n.value.data.data() + i * m * nn, false);
                return;
            }
            case Op::Add:
            case Op::Mul: {
                const Tensor& a = val(n.in[0]);
                const Tensor& b = val(n.in[1]);
                n.value = Tensor::zeros(n.shape);
                const bool mul = n.op == Op::Mul;
                const std::int64_t N = n.value.size(), sa = a.size(), sb = b.size();
                const double* pa = a.data.data();
                const double* pb = b.data.data();
                double* po = n.value.data.data();
                if (sa == N && sb == N) {
                    if (mul)
                        for (std::int64_t k = 0; k < N; ++k) po[k] = pa[k] * pb[k];
                    else
                        for (std::int64_t k = 0; k < N; ++k) po[k] = pa[k] + pb[k];
                } else {
                    const std::int64_t period = std::min(sa, sb);
                    const double* big = sa == N ? pa : pb;
                    const double* small = sa == N ? pb : pa;
                    for (std::int64_t blk = 0; blk < N; blk += period) {
                        const std::int64_t len = std::min(period, N - blk);
                        if (mul)
                            for (std::int64_t k = 0; k < len; ++k)
                                po[blk + k] = big[blk + k] * small[period == 1 ? 0 : k];
                        else
                            for (std::int64_t k = 0; k < len; ++k)
                                po[blk + k] = big[blk + k] + small[period == 1 ? 0 : k];
                    }
                }
                return;
            }
            case Op::Gelu: {
                const Tensor& a = val(n.in[0]);
                n.value = Tensor::zeros(n.shape);
                constexpr double inv_sqrt2 = 0.70710678118654752440;
                for (std::int64_t k = 0; k < a.size(); ++k) {
                    const double x = a.data[static_cast<std::size_t>(k)];
                    n.value.data[static_cast<std::size_t>(k)] =
                        0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
                }
                return;
            }
            case Op::Softmax: {
                const Tensor& a = val(n.in[0]);
                n.value = Tensor::zeros(n.shape);
                const std::int64_t H = a.shape.back();
                const std::int64_t rows = a.size() / H;
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* x = a.data.data() + r * H;
                    double* y = n.value.data.data() + r * H;
                    double mx = x[0];
                    for (std::int64_t h = 1; h < H; ++h) mx = std::max(mx, x[h]);
                    double s = 0.0;
                    for (std::int64_t h = 0; h < H; ++h) {
                        y[h] = std::exp(x[h] - mx);
                        s += y[h];
                    }
                    const double inv = 1.0 / s;
                    for (std::int64_t h = 0; h < H; ++h) y[h] *= inv;
                }
                return;
            }
            case Op::LayerNorm: {
                const Tensor& a = val(n.in[0]);
                n.value = Tensor::zeros(n.shape);
                const std::int64_t H = a.shape.back();
                const std::int64_t rows = a.size() / H;
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* x = a.data.data() + r * H;
                    double* y = n.value.data.data() + r * H;
                    double mu = 0.0;
                    for (std::int64_t h = 0; h < H; ++h) mu += x[h];
                    mu /= static_cast<double>(H);
                    double var = 0.0;
                    for (std::int64_t h = 0; h < H; ++h) var += (x[h] - mu) * (x[h] - mu);
                    var /= static_cast<double>(H);
                    const double inv = 1.0 / std::sqrt(var + n.eps);
                    for (std::int64_t h = 0; h < H; ++h) y[h] = (x[h] - mu) * inv;
                }
                return;
            }
            case Op::Embed: {
                const Tensor& table = val(n.in[0]);
                const Tensor& ids = val(n.in[1]);
                const std::int64_t V = table.shape[0], H = table.shape[1];
                n.value = Tensor::zeros(n.shape);
                for (std::int64_t k = 0; k < ids.size(); ++k) {
                    const double idv = ids.data[static_cast<std::size_t>(k)];
                    const std::int64_t idx = static_cast<std::int64_t>(idv);
                    if (static_cast<double>(idx) != idv || idx < 0 || idx >= V)
                        throw TapeError(id, "embed: id out of range: " + std::to_string(idv));
                    std::copy_n(table.data.data() + idx * H, H, n.value.data.data() + k * H);
                }
                return;
            }
            case Op::CeSum: {
                const Tensor& z = val(n.in[0]);
                const Tensor& y = val(n.in[1]);
                const std::int64_t N = z.shape[0], C = z.shape[1];
                double loss = 0.0;
                for (std::int64_t r = 0; r < N; ++r) {
                    const double* row = z.data.data() + r * C;
                    const double yv = y.data[static_cast<std::size_t>(r)];
                    const std::int64_t label = static_cast<std::int64_t>(yv);
                    if (static_cast<double>(label) != yv || label < 0 || label >= C)
                        throw TapeError(id, "cross_entropy_sum: label out of range: " +
                                                std::to_string(yv));
                    double mx = row[0];
                    for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
                    double s = 0.0;
                    for (std::int64_t c = 0; c < C; ++c) s += std::exp(row[c] - mx);
                    loss += mx + std::log(s) - row[label];
                }
                n.value = Tensor::scalar(loss);
                return;
            }
            case Op::Sum:
            case Op::Mean: {
                const Tensor& a = val(n.in[0]);
                double s = 0.0;
                for (double v : a.data) s += v;
                if (n.op == Op::Mean) s /= static_cast<double>(a.size());
                n.value = Tensor::scalar(s);
                return;
            }
            case Op::SqL2: {
                n.value = Tensor::scalar(frobenius_norm_sq(val(n.in[0])));
                return;
            }
            case Op::Reshape: {
                n.value = Tensor(n.shape, val(n.in[0]).data);
                return;
            }
        }
    }

    // ---- backward kernels ----------------------------------------------------

    const Tensor& val(Ref r) const { return nodes_[static_cast<std::size_t>(r)].value; }
    Tensor* gradp(Ref r) {
        Node& n = nodes_[static_cast<std::size_t>(r)];
        return n.needs_grad ? &n.grad : nullptr;
    }

    void propagate(Node& n, int id) {
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::Leaf: return;
            case Op::Matmul: {
                const Tensor& a = val(n.in[0]);
                const Tensor& b = val(n.in[1]);
                Tensor* ga = gradp(n.in[0]);
                Tensor* gb = gradp(n.in[1]);
                const std::int64_t ra = a.shape[a.shape.size() - 2], ca = a.shape.back();
                const std::int64_t rb = b.shape[b.shape.size() - 2], cb = b.shape.back();
                const std::int64_t m = n.shape[n.shape.size() - 2], nn = n.shape.back();
                const std::int64_t batch = g.size() / (m * nn);
                const bool ab = a.ndim() > 2, bb = b.ndim() > 2;
                for (std::int64_t i = 0; i < batch; ++i) {
                    const double* pa = a.data.data() + (ab ? i * ra * ca : 0);
                    const double* pb = b.data.data() + (bb ? i * rb * cb : 0);
                    const double* pg = g.data.data() + i * m * nn;
                    // dA_logical = G * B_logical^T ; dB_logical = A_logical^T * G
                    if (ga) {
                        double* pga = ga->data.data() + (ab ? i * ra * ca : 0);
                        if (!n.trans_a)
                            gemm(pg, m, nn, false, pb, rb, cb, !n.trans_b, pga, true);
                        else  // stored grad is transpose of logical: B_log * G^T
                            gemm(pb, rb, cb, n.trans_b, pg, m, nn, true, pga, true);
                    }
                    if (gb) {
                        double* pgb = gb->data.data() + (bb ? i * rb * cb : 0);
                        if (!n.trans_b)
                            gemm(pa, ra, ca, !n.trans_a, pg, m, nn, false, pgb, true);
                        else  // G^T * A_logical
                            gemm(pg, m, nn, true, pa, ra, ca, n.trans_a, pgb, true);
                    }
                }
                return;
            }
            case Op::Add: {
                accumulate_broadcast(n.in[0], g, nullptr, false);
                accumulate_broadcast(n.in[1], g, nullptr, false);
                return;
            }
            case Op::Mul: {
                accumulate_broadcast(n.in[0], g, &val(n.in[1]), true);
                accumulate_broadcast(n.in[1], g, &val(n.in[0]), true);
                return;
            }
            case Op::Gelu: {
                Tensor* ga = gradp(n.in[0]);
                if (!ga) return;
                const Tensor& a = val(n.in[0]);
                constexpr double inv_sqrt2 = 0.70710678118654752440;
                constexpr double inv_sqrt2pi = 0.39894228040143267794;
                for (std::int64_t k = 0; k < a.size(); ++k) {
                    const double x = a.data[static_cast<std::size_t>(k)];
                    const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                    const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                    ga->data[static_cast<std::size_t>(k)] +=
                        g.data[static_cast<std::size_t>(k)] * (cdf + x * pdf);
                }
                return;
            }
            case Op::Softmax: {
                Tensor* ga = gradp(n.in[0]);
                if (!ga) return;
                const Tensor& y = n.value;
                const std::int64_t H = y.shape.back();
                const std::int64_t rows = y.size() / H;
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* py = y.data.data() + r * H;
                    const double* pg = g.data.data() + r * H;
                    double* po = ga->data.data() + r * H;
                    double dot = 0.0;
                    for (std::int64_t h = 0; h < H; ++h) dot += pg[h] * py[h];
                    for (std::int64_t h = 0; h < H; ++h) po[h] += py[h] * (pg[h] - dot);
                }
                return;
            }
            case Op::LayerNorm: {
                Tensor* ga = gradp(n.in[0]);
                if (!ga) return;
                const Tensor& a = val(n.in[0]);
                const Tensor& y = n.value;
                const std::int64_t H = a.shape.back();
                const std::int64_t rows = a.size() / H;
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* px = a.data.data() + r * H;
                    const double* py = y.data.data() + r * H;
                    const double* pg = g.data.data() + r * H;
                    double* po = ga->data.data() + r * H;
                    double mu = 0.0;
                    for (std::int64_t h = 0; h < H; ++h) mu += px[h];
                    mu /= static_cast<double>(H);
                    double var = 0.0;
                    for (std::int64_t h = 0; h < H; ++h) var += (px[h] - mu) * (px[h] - mu);
                    var /= static_cast<double>(H);
                    const double inv = 1.0 / std::sqrt(var + n.eps);
                    double gmean = 0.0, gydot = 0.0;
                    for (std::int64_t h = 0; h < H; ++h) {
                        gmean += pg[h];
                        gydot += pg[h] * py[h];
                    }
                    gmean /= static_cast<double>(H);
                    gydot /= static_cast<double>(H);
                    for (std::int64_t h = 0; h < H; ++h)
                        po[h] += inv * (pg[h] - gmean - py[h] * gydot);
                }
                return;
            }
            case Op::Embed: {
                Tensor* gt = gradp(n.in[0]);
                if (!gt) return;
                const Tensor& ids = val(n.in[1]);
                const std::int64_t H = val(n.in[0]).shape[1];
                for (std::int64_t k = 0; k < ids.size(); ++k) {
                    const std::int64_t idx =
                        static_cast<std::int64_t>(ids.data[static_cast<std::size_t>(k)]);
                    const double* pg = g.data.data() + k * H;
                    double* pt = gt->data.data() + idx * H;
                    for (std::int64_t h = 0; h < H; ++h) pt[h] += pg[h];
                }
                return;
            }
            case Op::CeSum: {
                Tensor* gz = gradp(n.in[0]);
                if (!gz) return;
                const Tensor& z = val(n.in[0]);
                const Tensor& y = val(n.in[1]);
                const double gs = g.data[0];
                const std::int64_t N = z.shape[0], C = z.shape[1];
                for (std::int64_t r = 0; r < N; ++r) {
                    const double* row = z.data.data() + r * C;
                    double* po = gz->data.data() + r * C;
                    const std::int64_t label =
                        static_cast<std::int64_t>(y.data[static_cast<std::size_t>(r)]);
                    double mx = row[0];
                    for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
                    double s = 0.0;
                    for (std::int64_t c = 0; c < C; ++c) s += std::exp(row[c] - mx);
                    const double inv = 1.0 / s;
                    for (std::int64_t c = 0; c < C; ++c)
                        po[c] += gs * (std::exp(row[c] - mx) * inv - (c == label ? 1.0 : 0.0));
                }
                return;
            }
            case Op::Sum: {
                Tensor* ga = gradp(n.in[0]);
                if (!ga) return;
                const double gs = g.data[0];
                for (double& v : ga->data) v += gs;
                return;
            }
            case Op::Mean: {
                Tensor* ga = gradp(n.in[0]);
                if (!ga) return;
                const double gs = g.data[0] / static_cast<double>(ga->size());
                for (double& v : ga->data) v += gs;
                return;
            }
            case Op::SqL2: {
                Tensor* ga = gradp(n.in[0]);
                if (!ga) return;
                const Tensor& a = val(n.in[0]);
                const double gs = 2.0 * g.data[0];
                for (std::int64_t k = 0; k < a.size(); ++k)
                    ga->data[static_cast<std::size_t>(k)] += gs * a.data[static_cast<std::size_t>(k)];
                return;
            }
            case Op::Reshape: {
                Tensor* ga = gradp(n.in[0]);
                if (!ga) return;
                for (std::int64_t k = 0; k < g.size(); ++k)
                    ga->data[static_cast<std::size_t>(k)] += g.data[static_cast<std::size_t>(k)];
                return;
            }
        }
    }

    // upstream g (full shape), optionally times `other` (the multiply partner),
    // reduced onto input's shape when it was broadcast
    void accumulate_broadcast(Ref input, const Tensor& g, const Tensor* other, bool is_mul) {
        Tensor* gi = gradp(input);
        if (!gi) return;
        const std::int64_t N = g.size();
        const std::int64_t si = gi->size();
        const std::int64_t so = other ? other->size() : N;
        const double* pg = g.data.data();
        const double* po = other ? other->data.data() : nullptr;
        double* pi = gi->data.data();
        if (si == N) {
            if (!is_mul)
                for (std::int64_t k = 0; k < N; ++k) pi[k] += pg[k];
            else if (so == N)
                for (std::int64_t k = 0; k < N; ++k) pi[k] += pg[k] * po[k];
            else if (so == 1)
                for (std::int64_t k = 0; k < N; ++k) pi[k] += pg[k] * po[0];
            else
                for (std::int64_t blk = 0; blk < N; blk += so)
                    for (std::int64_t k = 0; k < std::min(so, N - blk); ++k)
                        pi[blk + k] += pg[blk + k] * po[k];
        } else {
            // input was broadcast: reduce over leading dims
            if (!is_mul)
                for (std::int64_t blk = 0; blk < N; blk += si)
                    for (std::int64_t k = 0; k < std::min(si, N - blk); ++k)
                        pi[si == 1 ? 0 : k] += pg[blk + k];
            else
                for (std::int64_t blk = 0; blk < N; blk += si)
                    for (std::int64_t k = 0; k < std::min(si, N - blk); ++k)
                        pi[si == 1 ? 0 : k] += pg[blk + k] * po[blk + k];
        }
    }
};

}  // namespace mmcl::num

#endif
