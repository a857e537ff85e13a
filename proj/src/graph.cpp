#include "combi/graph.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace combi {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

bool is_scalar(const std::vector<int>& s) { return Tensor::numel_of(s) == 1; }

// NumPy-style broadcast restricted to: identical shapes, a scalar operand,
// or same-rank shapes where each dim matches or is 1.
std::vector<int> broadcast_shape(OpTag op, const std::vector<int>& a, const std::vector<int>& b) {
    if (a == b) return a;
    if (is_scalar(a)) return b;
    if (is_scalar(b)) return a;
    if (a.size() != b.size())
        fail(std::string(op_name(op)) + ": incompatible shapes " + shape_str(a) + " vs " + shape_str(b));
    std::vector<int> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i] || b[i] == 1)
            out[i] = a[i];
        else if (a[i] == 1)
            out[i] = b[i];
        else
            fail(std::string(op_name(op)) + ": incompatible shapes " + shape_str(a) + " vs " +
                 shape_str(b));
    }
    return out;
}

std::vector<std::int64_t> row_major_strides(const std::vector<int>& shape) {
    std::vector<std::int64_t> st(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
        st[static_cast<std::size_t>(i)] =
            st[static_cast<std::size_t>(i) + 1] * shape[static_cast<std::size_t>(i) + 1];
    return st;
}

// Strides for reading `in` at positions of the broadcast shape `out`
// (stride 0 on broadcast dims; scalars read index 0 everywhere).
std::vector<std::int64_t> broadcast_strides(const std::vector<int>& in, const std::vector<int>& out) {
    std::vector<std::int64_t> st(out.size(), 0);
    if (is_scalar(in)) return st;
    auto own = row_major_strides(in);
    for (std::size_t i = 0; i < out.size(); ++i)
        st[i] = (in[i] == out[i]) ? own[i] : 0;
    return st;
}

template <typename F>
void for_each_broadcast(const std::vector<int>& out_shape, const std::vector<int>& sa,
                        const std::vector<int>& sb, F&& body) {
    const std::int64_t n = Tensor::numel_of(out_shape);
    auto sta = broadcast_strides(sa, out_shape);
    auto stb = broadcast_strides(sb, out_shape);
    auto sto = row_major_strides(out_shape);
    std::vector<int> idx(out_shape.size(), 0);
    for (std::int64_t flat = 0; flat < n; ++flat) {
        std::int64_t ia = 0, ib = 0;
        std::int64_t rem = flat;
        for (std::size_t d = 0; d < out_shape.size(); ++d) {
            std::int64_t k = sto[d] ? rem / sto[d] : 0;
            rem -= k * sto[d];
            ia += k * sta[d];
            ib += k * stb[d];
        }
        body(flat, ia, ib);
    }
}

double stable_softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
    if (x >= 0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

const char* op_name(OpTag t) {
    switch (t) {
        case OpTag::Const: return "const";
        case OpTag::Param: return "param";
        case OpTag::Add: return "add";
        case OpTag::Sub: return "sub";
        case OpTag::Mul: return "mul";
        case OpTag::Div: return "div";
        case OpTag::MatmulNN: return "matmul";
        case OpTag::MatmulNT: return "matmul_nt";
        case OpTag::Exp: return "exp";
        case OpTag::Log: return "log";
        case OpTag::Softplus: return "softplus";
        case OpTag::Sigmoid: return "sigmoid";
        case OpTag::Relu: return "relu";
        case OpTag::Square: return "square";
        case OpTag::Abs: return "abs";
        case OpTag::MinConst: return "min_const";
        case OpTag::MaxConst: return "max_const";
        case OpTag::Sum: return "sum";
        case OpTag::Mean: return "mean";
        case OpTag::Cumsum: return "cumsum";
        case OpTag::Concat: return "concat";
        case OpTag::Slice: return "slice";
        case OpTag::Select: return "select";
        case OpTag::Reshape: return "reshape";
        case OpTag::GatherRows: return "gather_rows";
    }
    return "?";
}

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Tensor t) { return push({OpTag::Const, {}, std::move(t), {}, {}, -1}); }

NodeId Graph::param(int param_key, Tensor t) {
    return push({OpTag::Param, {}, std::move(t), {}, {}, param_key});
}

NodeId Graph::unary(OpTag op, NodeId a) {
    const Tensor& av = value(a);
    Tensor out(av.shape);
    for (std::int64_t i = 0; i < av.numel(); ++i) {
        double x = av[i];
        switch (op) {
            case OpTag::Exp: out[i] = std::exp(x); break;
            case OpTag::Log:
                if (x <= 0.0) fail("log: nonpositive input");
                out[i] = std::log(x);
                break;
            case OpTag::Softplus: out[i] = stable_softplus(x); break;
            case OpTag::Sigmoid: out[i] = stable_sigmoid(x); break;
            case OpTag::Relu: out[i] = x > 0 ? x : 0.0; break;
            case OpTag::Square: out[i] = x * x; break;
            case OpTag::Abs: out[i] = std::abs(x); break;
            default: fail("unary: bad op");
        }
    }
    return push({op, {a}, std::move(out), {}, {}, -1});
}

NodeId Graph::binary(OpTag op, NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    auto shape = broadcast_shape(op, av.shape, bv.shape);
    Tensor out(shape);
    for_each_broadcast(shape, av.shape, bv.shape, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
        double x = av[ia], y = bv[ib];
        switch (op) {
            case OpTag::Add: out[o] = x + y; break;
            case OpTag::Sub: out[o] = x - y; break;
            case OpTag::Mul: out[o] = x * y; break;
            case OpTag::Div: out[o] = x / y; break;
            default: fail("binary: bad op");
        }
    });
    return push({op, {a, b}, std::move(out), {}, {}, -1});
}

NodeId Graph::matmul(NodeId a, NodeId b, bool transpose_b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2)
        fail("matmul: operands must be 2-D, got " + shape_str(av.shape) + " and " + shape_str(bv.shape));
    int m = av.dim(0), k = av.dim(1);
    int bk = transpose_b ? bv.dim(1) : bv.dim(0);
    int n = transpose_b ? bv.dim(0) : bv.dim(1);
    if (k != bk)
        fail("matmul: inner dimension mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    Tensor out({m, n});
    MapCM A(av.data.data(), m, k);
    MapM O(out.data.data(), m, n);
    if (transpose_b) {
        MapCM B(bv.data.data(), n, k);
        O.noalias() = A * B.transpose();
    } else {
        MapCM B(bv.data.data(), k, n);
        O.noalias() = A * B;
    }
    return push({transpose_b ? OpTag::MatmulNT : OpTag::MatmulNN, {a, b}, std::move(out), {}, {}, -1});
}

NodeId Graph::min_const(NodeId a, double c) {
    const Tensor& av = value(a);
    Tensor out(av.shape);
    for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = std::min(av[i], c);
    return push({OpTag::MinConst, {a}, std::move(out), {}, {c}, -1});
}

NodeId Graph::max_const(NodeId a, double c) {
    const Tensor& av = value(a);
    Tensor out(av.shape);
    for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = std::max(av[i], c);
    return push({OpTag::MaxConst, {a}, std::move(out), {}, {c}, -1});
}

NodeId Graph::sum(NodeId a, int axis) {
    const Tensor& av = value(a);
    if (axis < 0) {
        Tensor out({1});
        for (double v : av.data) out[0] += v;
        return push({OpTag::Sum, {a}, std::move(out), {-1}, {}, -1});
    }
    if (av.rank() != 2 || axis > 1) fail("sum: axis reduction requires a 2-D tensor");
    int r = av.dim(0), c = av.dim(1);
    Tensor out(axis == 0 ? std::vector<int>{1, c} : std::vector<int>{r, 1});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[axis == 0 ? j : i] += av.at(i, j);
    return push({OpTag::Sum, {a}, std::move(out), {axis}, {}, -1});
}

NodeId Graph::mean(NodeId a, int axis) {
    std::int64_t n = axis < 0 ? value(a).numel() : value(a).dim(axis);
    NodeId s = sum(a, axis);
    Node& nd = nodes_.back();
    nd.op = OpTag::Mean;
    for (double& v : nd.value.data) v /= static_cast<double>(n);
    return s;
}

NodeId Graph::cumsum(NodeId a, int axis) {
    const Tensor& av = value(a);
    Tensor out(av.shape);
    if (av.rank() == 1) {
        if (axis != 0) fail("cumsum: bad axis for 1-D tensor");
        double acc = 0;
        for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = (acc += av[i]);
    } else if (av.rank() == 2) {
        int r = av.dim(0), c = av.dim(1);
        if (axis == 1) {
            for (int i = 0; i < r; ++i) {
                double acc = 0;
                for (int j = 0; j < c; ++j) out.at(i, j) = (acc += av.at(i, j));
            }
        } else if (axis == 0) {
            for (int j = 0; j < c; ++j) {
                double acc = 0;
                for (int i = 0; i < r; ++i) out.at(i, j) = (acc += av.at(i, j));
            }
        } else {
            fail("cumsum: bad axis");
        }
    } else {
        fail("cumsum: rank > 2 unsupported");
    }
    return push({OpTag::Cumsum, {a}, std::move(out), {axis}, {}, -1});
}

NodeId Graph::concat(NodeId a, NodeId b, int axis) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || axis < 0 || axis > 1)
        fail("concat: 2-D tensors and axis 0/1 only");
    if (av.dim(1 - axis) != bv.dim(1 - axis))
        fail("concat: shapes " + shape_str(av.shape) + " and " + shape_str(bv.shape) +
             " disagree off-axis");
    Tensor out(axis == 1 ? std::vector<int>{av.dim(0), av.dim(1) + bv.dim(1)}
                         : std::vector<int>{av.dim(0) + bv.dim(0), av.dim(1)});
    if (axis == 1) {
        for (int i = 0; i < av.dim(0); ++i) {
            for (int j = 0; j < av.dim(1); ++j) out.at(i, j) = av.at(i, j);
            for (int j = 0; j < bv.dim(1); ++j) out.at(i, av.dim(1) + j) = bv.at(i, j);
        }
    } else {
        std::copy(av.data.begin(), av.data.end(), out.data.begin());
        std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.numel());
    }
    return push({OpTag::Concat, {a, b}, std::move(out), {axis}, {}, -1});
}

NodeId Graph::slice(NodeId a, int axis, int start, int len) {
    const Tensor& av = value(a);
    if (av.rank() != 2 || axis < 0 || axis > 1) fail("slice: 2-D tensors and axis 0/1 only");
    if (start < 0 || len < 0 || start + len > av.dim(axis)) fail("slice: range out of bounds");
    Tensor out(axis == 1 ? std::vector<int>{av.dim(0), len} : std::vector<int>{len, av.dim(1)});
    if (axis == 1) {
        for (int i = 0; i < av.dim(0); ++i)
            for (int j = 0; j < len; ++j) out.at(i, j) = av.at(i, start + j);
    } else {
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < av.dim(1); ++j) out.at(i, j) = av.at(start + i, j);
    }
    return push({OpTag::Slice, {a}, std::move(out), {axis, start, len}, {}, -1});
}

NodeId Graph::select(NodeId mask, NodeId a, NodeId b) {
    const Tensor& mv = value(mask);
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!mv.same_shape(av) || !av.same_shape(bv)) fail("select: shape mismatch");
    Tensor out(av.shape);
    for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = mv[i] != 0.0 ? av[i] : bv[i];
    return push({OpTag::Select, {mask, a, b}, std::move(out), {}, {}, -1});
}

NodeId Graph::reshape(NodeId a, std::vector<int> shape) {
    const Tensor& av = value(a);
    if (Tensor::numel_of(shape) != av.numel())
        fail("reshape: element count mismatch " + shape_str(av.shape) + " -> " + shape_str(shape));
    Tensor out(std::move(shape), av.data);
    return push({OpTag::Reshape, {a}, std::move(out), {}, {}, -1});
}

NodeId Graph::gather_rows(NodeId table, const std::vector<int>& indices,
                          const std::vector<double>& weights, int out_rows) {
    const Tensor& tv = value(table);
    if (tv.rank() != 2) fail("gather_rows: table must be 2-D");
    if (indices.size() != weights.size() || indices.size() % static_cast<std::size_t>(out_rows) != 0)
        fail("gather_rows: indices/weights size mismatch");
    int k = static_cast<int>(indices.size()) / out_rows;
    int f = tv.dim(1);
    Tensor out({out_rows, f});
    for (int p = 0; p < out_rows; ++p) {
        for (int t = 0; t < k; ++t) {
            int row = indices[static_cast<std::size_t>(p) * k + t];
            if (row < 0 || row >= tv.dim(0)) fail("gather_rows: row index out of range");
            double w = weights[static_cast<std::size_t>(p) * k + t];
            for (int j = 0; j < f; ++j) out.at(p, j) += w * tv.at(row, j);
        }
    }
    Node n{OpTag::GatherRows, {table}, std::move(out), indices, weights, -1};
    n.iattrs.push_back(k);
    return push(std::move(n));
}

std::unordered_map<int, Tensor> Graph::backward(NodeId loss) {
    const Tensor& lv = value(loss);
    if (lv.numel() != 1) fail("backward: loss must be scalar, got " + shape_str(lv.shape));

    std::vector<Tensor> grads(nodes_.size());
    auto ensure = [&](NodeId id) -> Tensor& {
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.data.empty() && value(id).numel() > 0) g = Tensor(value(id).shape);
        return g;
    };
    ensure(loss)[0] = 1.0;

    // Accumulate `g` (laid out at the broadcast output shape `out_shape`)
    // into the gradient of an input with shape `in_shape`.
    auto accum_bcast = [&](NodeId in, const std::vector<int>& out_shape, const Tensor& g,
                           auto&& factor) {
        Tensor& gi = ensure(in);
        const std::vector<int>& in_shape = value(in).shape;
        for_each_broadcast(out_shape, in_shape, out_shape,
                           [&](std::int64_t o, std::int64_t ii, std::int64_t) {
                               gi[ii] += g[o] * factor(o);
                           });
    };

    for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
        const Node& n = node(id);
        const Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.data.empty()) continue;
        switch (n.op) {
            case OpTag::Const:
            case OpTag::Param:
                break;
            case OpTag::Add:
                accum_bcast(n.inputs[0], n.value.shape, g, [](std::int64_t) { return 1.0; });
                accum_bcast(n.inputs[1], n.value.shape, g, [](std::int64_t) { return 1.0; });
                break;
            case OpTag::Sub:
                accum_bcast(n.inputs[0], n.value.shape, g, [](std::int64_t) { return 1.0; });
                accum_bcast(n.inputs[1], n.value.shape, g, [](std::int64_t) { return -1.0; });
                break;
            case OpTag::Mul:
            case OpTag::Div: {
                const Tensor& av = value(n.inputs[0]);
                const Tensor& bv = value(n.inputs[1]);
                auto sta = broadcast_strides(av.shape, n.value.shape);
                auto stb = broadcast_strides(bv.shape, n.value.shape);
                auto sto = row_major_strides(n.value.shape);
                Tensor& ga = ensure(n.inputs[0]);
                Tensor& gb = ensure(n.inputs[1]);
                for (std::int64_t flat = 0; flat < n.value.numel(); ++flat) {
                    std::int64_t ia = 0, ib = 0, rem = flat;
                    for (std::size_t d = 0; d < sto.size(); ++d) {
                        std::int64_t k = sto[d] ? rem / sto[d] : 0;
                        rem -= k * sto[d];
                        ia += k * sta[d];
                        ib += k * stb[d];
                    }
                    if (n.op == OpTag::Mul) {
                        ga[ia] += g[flat] * bv[ib];
                        gb[ib] += g[flat] * av[ia];
                    } else {
                        ga[ia] += g[flat] / bv[ib];
                        gb[ib] -= g[flat] * av[ia] / (bv[ib] * bv[ib]);
                    }
                }
                break;
            }
            case OpTag::MatmulNN:
            case OpTag::MatmulNT: {
                const Tensor& av = value(n.inputs[0]);
                const Tensor& bv = value(n.inputs[1]);
                Tensor& ga = ensure(n.inputs[0]);
                Tensor& gb = ensure(n.inputs[1]);
                int m = av.dim(0), k = av.dim(1), nn = n.value.dim(1);
                MapCM A(av.data.data(), m, k), G(g.data.data(), m, nn);
                MapM GA(ga.data.data(), m, k);
                if (n.op == OpTag::MatmulNN) {
                    MapCM B(bv.data.data(), k, nn);
                    MapM GB(gb.data.data(), k, nn);
                    GA.noalias() += G * B.transpose();
                    GB.noalias() += A.transpose() * G;
                } else {
                    MapCM B(bv.data.data(), nn, k);
                    MapM GB(gb.data.data(), nn, k);
                    GA.noalias() += G * B;
                    GB.noalias() += G.transpose() * A;
                }
                break;
            }
            case OpTag::Exp: {
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.value[i];
                break;
            }
            case OpTag::Log: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / av[i];
                break;
            }
            case OpTag::Softplus: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * stable_sigmoid(av[i]);
                break;
            }
            case OpTag::Sigmoid: {
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i)
                    ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
                break;
            }
            case OpTag::Relu: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i)
                    if (av[i] > 0) ga[i] += g[i];
                break;
            }
            case OpTag::Square: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += 2.0 * g[i] * av[i];
                break;
            }
            case OpTag::Abs: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i)
                    ga[i] += g[i] * (av[i] > 0 ? 1.0 : (av[i] < 0 ? -1.0 : 0.0));
                break;
            }
            case OpTag::MinConst: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i)
                    if (av[i] <= n.dattrs[0]) ga[i] += g[i];
                break;
            }
            case OpTag::MaxConst: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i)
                    if (av[i] >= n.dattrs[0]) ga[i] += g[i];
                break;
            }
            case OpTag::Sum:
            case OpTag::Mean: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                int axis = n.iattrs[0];
                double f = 1.0;
                if (n.op == OpTag::Mean)
                    f = 1.0 / static_cast<double>(axis < 0 ? av.numel() : av.dim(axis));
                if (axis < 0) {
                    for (std::int64_t i = 0; i < av.numel(); ++i) ga[i] += g[0] * f;
                } else {
                    int r = av.dim(0), c = av.dim(1);
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < c; ++j) ga.at(i, j) += g[axis == 0 ? j : i] * f;
                }
                break;
            }
            case OpTag::Cumsum: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                int axis = n.iattrs[0];
                if (av.rank() == 1) {
                    double acc = 0;
                    for (std::int64_t i = av.numel() - 1; i >= 0; --i) ga[i] += (acc += g[i]);
                } else {
                    int r = av.dim(0), c = av.dim(1);
                    if (axis == 1) {
                        for (int i = 0; i < r; ++i) {
                            double acc = 0;
                            for (int j = c - 1; j >= 0; --j) ga.at(i, j) += (acc += g.at(i, j));
                        }
                    } else {
                        for (int j = 0; j < c; ++j) {
                            double acc = 0;
                            for (int i = r - 1; i >= 0; --i) ga.at(i, j) += (acc += g.at(i, j));
                        }
                    }
                }
                break;
            }
            case OpTag::Concat: {
                const Tensor& av = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[0]);
                Tensor& gb = ensure(n.inputs[1]);
                int axis = n.iattrs[0];
                if (axis == 1) {
                    for (int i = 0; i < av.dim(0); ++i) {
                        for (int j = 0; j < av.dim(1); ++j) ga.at(i, j) += g.at(i, j);
                        for (int j = av.dim(1); j < n.value.dim(1); ++j)
                            gb.at(i, j - av.dim(1)) += g.at(i, j);
                    }
                } else {
                    for (std::int64_t i = 0; i < av.numel(); ++i) ga[i] += g[i];
                    for (std::int64_t i = 0; i < gb.numel(); ++i) gb[i] += g[av.numel() + i];
                }
                break;
            }
            case OpTag::Slice: {
                Tensor& ga = ensure(n.inputs[0]);
                int axis = n.iattrs[0], start = n.iattrs[1], len = n.iattrs[2];
                if (axis == 1) {
                    for (int i = 0; i < n.value.dim(0); ++i)
                        for (int j = 0; j < len; ++j) ga.at(i, start + j) += g.at(i, j);
                } else {
                    for (int i = 0; i < len; ++i)
                        for (int j = 0; j < n.value.dim(1); ++j) ga.at(start + i, j) += g.at(i, j);
                }
                break;
            }
            case OpTag::Select: {
                const Tensor& mv = value(n.inputs[0]);
                Tensor& ga = ensure(n.inputs[1]);
                Tensor& gb = ensure(n.inputs[2]);
                for (std::int64_t i = 0; i < g.numel(); ++i)
                    (mv[i] != 0.0 ? ga[i] : gb[i]) += g[i];
                break;
            }
            case OpTag::Reshape: {
                Tensor& ga = ensure(n.inputs[0]);
                for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                break;
            }
            case OpTag::GatherRows: {
                Tensor& gt = ensure(n.inputs[0]);
                int k = n.iattrs.back();
                int f = n.value.dim(1);
                for (int p = 0; p < n.value.dim(0); ++p) {
                    for (int t = 0; t < k; ++t) {
                        int row = n.iattrs[static_cast<std::size_t>(p) * k + t];
                        double w = n.dattrs[static_cast<std::size_t>(p) * k + t];
                        for (int j = 0; j < f; ++j) gt.at(row, j) += w * g.at(p, j);
                    }
                }
                break;
            }
        }
    }

    std::unordered_map<int, Tensor> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.op != OpTag::Param) continue;
        Tensor g = grads[i].data.empty() ? Tensor(n.value.shape) : std::move(grads[i]);
        auto it = out.find(n.param_key);
        if (it == out.end()) {
            out.emplace(n.param_key, std::move(g));
        } else {
            for (std::int64_t j = 0; j < g.numel(); ++j) it->second[j] += g[j];
        }
    }
    return out;
}

}  // namespace combi
