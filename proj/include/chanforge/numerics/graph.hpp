// SPDX-License-Identifier: Apache-2.0
//
// chanforge - position-conditioned MIMO channel synthesis and augmentation
// Copyright (C) 2026 The chanforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CHANFORGE_NUMERICS_GRAPH_HPP
#define CHANFORGE_NUMERICS_GRAPH_HPP

#include "chanforge/numerics/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace chanforge::nn
{

// Named, ordered collection of trainable tensors. The index returned by add()
// is the parameter id used by Graph::parameter() and in gradient maps.
class ParameterSet
{
public:
    std::size_t add(std::string name, Tensor value);

    std::size_t size() const { return tensors_.size(); }
    Tensor &operator[](std::size_t id) { return tensors_[id]; }
    const Tensor &operator[](std::size_t id) const { return tensors_[id]; }
    const std::string &name(std::size_t id) const { return names_[id]; }
    std::vector<Tensor> &tensors() { return tensors_; }
    const std::vector<Tensor> &tensors() const { return tensors_; }
    std::size_t scalar_count() const;

    // Zero tensors with the same shapes, one per parameter.
    std::vector<Tensor> zeros() const;

    bool operator==(const ParameterSet &other) const = default;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

using NodeId = std::size_t;
using Gradients = std::map<std::size_t, Tensor>;

enum class OpKind : std::uint8_t
{
    constant,
    parameter,
    add,
    sub,
    mul,
    div,
    add_row,
    mul_row,
    mul_col,
    div_col,
    matmul,
    reshape,
    concat,
    slice,
    sum,
    mean,
    sum_cols,
    tanh,
    relu,
    sigmoid,
    sin,
    cos,
    sqrt,
    scale,
    add_scalar,
    row_kron,
    khatri_rao,
};

const char *op_name(OpKind kind);

// Tape of operations recorded during a forward pass. Nodes are appended in
// evaluation order, so the tape is topologically sorted by construction.
//
// 2-D conventions: row vectors are [1, n] or [n]; column vectors are [m, 1].
// Parameter nodes reference the caller's tensor, which must outlive the graph.
class Graph
{
public:
    Graph() = default;
    Graph(const Graph &) = delete;
    Graph &operator=(const Graph &) = delete;
    Graph(Graph &&) = default;
    Graph &operator=(Graph &&) = default;

    NodeId constant(Tensor value);
    NodeId parameter(std::size_t param_id, const Tensor &value);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId add_row(NodeId a, NodeId row); // a[m,n] + row[n]
    NodeId mul_row(NodeId a, NodeId row); // a[m,n] * row[n]
    NodeId mul_col(NodeId a, NodeId col); // a[m,n] * col[m,1]
    NodeId div_col(NodeId a, NodeId col); // a[m,n] / col[m,1]
    NodeId matmul(NodeId a, NodeId b);
    NodeId reshape(NodeId a, Shape shape);
    NodeId concat(NodeId a, NodeId b);                                // along axis 1
    NodeId slice(NodeId a, std::size_t col_begin, std::size_t col_end); // columns of a 2-D node
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);
    NodeId sum_cols(NodeId a); // [m,n] -> [m,1]
    NodeId tanh(NodeId a);
    NodeId relu(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId sin(NodeId a);
    NodeId cos(NodeId a);
    NodeId sqrt(NodeId a);
    NodeId scale(NodeId a, double factor);
    NodeId add_scalar(NodeId a, double offset);
    NodeId row_kron(NodeId a, NodeId b);   // [m,p],[m,q] -> [m,p*q]
    NodeId khatri_rao(NodeId a, NodeId b); // [p,k],[q,k] -> [p*q,k]

    // Affine layer x W + b, with W [in,out] and b [out].
    NodeId affine(NodeId x, NodeId weight, NodeId bias) { return add_row(matmul(x, weight), bias); }
    NodeId square(NodeId a) { return mul(a, a); }

    const Tensor &value(NodeId id) const;
    OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse-mode sweep from a scalar node. Returns d(loss)/d(param) for every
    // parameter node on the tape; parameters not reachable from the loss get
    // zero tensors. Throws std::invalid_argument for a non-scalar loss.
    Gradients backprop(NodeId loss);

    // Same sweep, accumulating into a dense vector indexed by parameter id.
    // grads must already hold correctly shaped tensors for every id used.
    void backprop_into(NodeId loss, std::vector<Tensor> &grads);

private:
    static constexpr NodeId none = std::numeric_limits<NodeId>::max();

    struct Node
    {
        OpKind kind = OpKind::constant;
        NodeId a = none;
        NodeId b = none;
        std::size_t aux0 = 0;
        std::size_t aux1 = 0;
        double scalar = 0.0;
        Tensor value;
        const Tensor *ref = nullptr;
        Tensor grad;
    };

    static Node make_node(OpKind kind, NodeId a, NodeId b = none)
    {
        Node n;
        n.kind = kind;
        n.a = a;
        n.b = b;
        return n;
    }
    NodeId push(Node node);
    const Tensor &val(NodeId id) const;
    void sweep(NodeId loss);
    void accumulate(NodeId id, const Tensor &g);
    Tensor &grad_slot(NodeId id);

    std::vector<Node> nodes_;
};

Gradients backprop(Graph &graph, NodeId loss);

} // namespace chanforge::nn

#endif
