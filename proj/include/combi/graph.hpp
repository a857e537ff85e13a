#pragma once

#include <unordered_map>
#include <vector>

#include "combi/tensor.hpp"

namespace combi {

using NodeId = int;

enum class OpTag {
    Const,
    Param,
    Add,
    Sub,
    Mul,
    Div,
    MatmulNN,   // a [m,k] * b [k,n]
    MatmulNT,   // a [m,k] * b^T, b stored [n,k]
    Exp,
    Log,
    Softplus,
    Sigmoid,
    Relu,
    Square,
    Abs,
    MinConst,
    MaxConst,
    Sum,        // over one axis (keepdim) or all (-1) -> [1]
    Mean,
    Cumsum,     // inclusive, along an axis of a 1-D/2-D tensor
    Concat,     // 2-D, along axis
    Slice,      // 2-D, [axis, start, len]
    Select,     // mask ? a : b, mask treated as non-differentiable
    Reshape,
    GatherRows, // weighted gather of table rows, differentiable w.r.t. the table
};

const char* op_name(OpTag t);

// Append-only tape. Nodes are recorded in topological order by
// construction; backward walks them once in reverse. A Graph is confined
// to a single thread; independent graphs may run concurrently.
class Graph {
public:
    NodeId constant(Tensor t);
    // param_key identifies the parameter across graph rebuilds (index into
    // the caller's parameter store). Gradients are reported under this key.
    NodeId param(int param_key, Tensor t);

    NodeId add(NodeId a, NodeId b) { return binary(OpTag::Add, a, b); }
    NodeId sub(NodeId a, NodeId b) { return binary(OpTag::Sub, a, b); }
    NodeId mul(NodeId a, NodeId b) { return binary(OpTag::Mul, a, b); }
    NodeId div(NodeId a, NodeId b) { return binary(OpTag::Div, a, b); }
    NodeId matmul(NodeId a, NodeId b, bool transpose_b = false);
    NodeId exp(NodeId a) { return unary(OpTag::Exp, a); }
    NodeId log(NodeId a) { return unary(OpTag::Log, a); }
    NodeId softplus(NodeId a) { return unary(OpTag::Softplus, a); }
    NodeId sigmoid(NodeId a) { return unary(OpTag::Sigmoid, a); }
    NodeId relu(NodeId a) { return unary(OpTag::Relu, a); }
    NodeId square(NodeId a) { return unary(OpTag::Square, a); }
    NodeId abs(NodeId a) { return unary(OpTag::Abs, a); }
    NodeId min_const(NodeId a, double c);
    NodeId max_const(NodeId a, double c);
    NodeId sum(NodeId a, int axis = -1);
    NodeId mean(NodeId a, int axis = -1);
    NodeId cumsum(NodeId a, int axis);
    NodeId concat(NodeId a, NodeId b, int axis);
    NodeId slice(NodeId a, int axis, int start, int len);
    NodeId select(NodeId mask, NodeId a, NodeId b);
    NodeId reshape(NodeId a, std::vector<int> shape);
    NodeId gather_rows(NodeId table, const std::vector<int>& indices,
                       const std::vector<double>& weights, int out_rows);

    // Convenience shorthands built from the primitives above.
    NodeId scalar(double v) { return constant(Tensor::scalar(v)); }
    NodeId scale(NodeId a, double c) { return mul(a, scalar(c)); }
    NodeId neg(NodeId a) { return scale(a, -1.0); }

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    std::size_t size() const { return nodes_.size(); }

    // Gradients of a scalar loss w.r.t. every param node, keyed by param_key.
    // Gradients for repeated keys accumulate.
    std::unordered_map<int, Tensor> backward(NodeId loss);

private:
    struct Node {
        OpTag op;
        std::vector<NodeId> inputs;
        Tensor value;
        std::vector<int> iattrs;
        std::vector<double> dattrs;
        int param_key = -1;
    };

    NodeId push(Node n);
    NodeId unary(OpTag op, NodeId a);
    NodeId binary(OpTag op, NodeId a, NodeId b);
    const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
};

}  // namespace combi
