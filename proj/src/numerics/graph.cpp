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

#include "chanforge/numerics/graph.hpp"

#include "chanforge/numerics/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace chanforge::nn
{

std::size_t ParameterSet::add(std::string name, Tensor value)
{
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(value));
    return tensors_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const
{
    std::size_t n = 0;
    for (const auto &t : tensors_)
        n += t.size();
    return n;
}

std::vector<Tensor> ParameterSet::zeros() const
{
    std::vector<Tensor> out;
    out.reserve(tensors_.size());
    for (const auto &t : tensors_)
        out.emplace_back(t.shape());
    return out;
}

const char *op_name(OpKind kind)
{
    switch (kind)
    {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::add_row: return "add_row";
    case OpKind::mul_row: return "mul_row";
    case OpKind::mul_col: return "mul_col";
    case OpKind::div_col: return "div_col";
    case OpKind::matmul: return "matmul";
    case OpKind::reshape: return "reshape";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::sum_cols: return "sum_cols";
    case OpKind::tanh: return "tanh";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::sin: return "sin";
    case OpKind::cos: return "cos";
    case OpKind::sqrt: return "sqrt";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::row_kron: return "row_kron";
    case OpKind::khatri_rao: return "khatri_rao";
    }
    return "unknown";
}

namespace
{

void require(bool ok, const char *op, const std::string &what)
{
    if (!ok)
        throw std::invalid_argument(std::string("Graph::") + op + ": " + what);
}

void require_matrix(const Tensor &t, const char *op)
{
    require(t.rank() == 2, op, "expected a 2-D tensor, got " + shape_string(t.shape()));
}

template <typename F>
Tensor map_unary(const Tensor &a, F f)
{
    Tensor out(a.shape());
    const auto src = a.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = f(src[i]);
    return out;
}

template <typename F>
Tensor map_binary(const Tensor &a, const Tensor &b, F f)
{
    Tensor out(a.shape());
    const auto x = a.data();
    const auto y = b.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < x.size(); ++i)
        dst[i] = f(x[i], y[i]);
    return out;
}

} // namespace

NodeId Graph::push(Node node)
{
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

const Tensor &Graph::val(NodeId id) const
{
    const Node &n = nodes_[id];
    return n.ref ? *n.ref : n.value;
}

const Tensor &Graph::value(NodeId id) const
{
    if (id >= nodes_.size())
        throw std::out_of_range("Graph::value: unknown node");
    return val(id);
}

NodeId Graph::constant(Tensor value)
{
    Node n;
    n.kind = OpKind::constant;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Graph::parameter(std::size_t param_id, const Tensor &value)
{
    Node n;
    n.kind = OpKind::parameter;
    n.aux0 = param_id;
    n.ref = &value;
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b)
{
    require(val(a).shape() == val(b).shape(), "add", "shape mismatch");
    Node n = make_node(OpKind::add, a, b);
    n.value = map_binary(val(a), val(b), [](double x, double y) { return x + y; });
    return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b)
{
    require(val(a).shape() == val(b).shape(), "sub", "shape mismatch");
    Node n = make_node(OpKind::sub, a, b);
    n.value = map_binary(val(a), val(b), [](double x, double y) { return x - y; });
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b)
{
    require(val(a).shape() == val(b).shape(), "mul", "shape mismatch");
    Node n = make_node(OpKind::mul, a, b);
    n.value = map_binary(val(a), val(b), [](double x, double y) { return x * y; });
    return push(std::move(n));
}

NodeId Graph::div(NodeId a, NodeId b)
{
    require(val(a).shape() == val(b).shape(), "div", "shape mismatch");
    Node n = make_node(OpKind::div, a, b);
    n.value = map_binary(val(a), val(b), [](double x, double y) { return x / y; });
    return push(std::move(n));
}

NodeId Graph::add_row(NodeId a, NodeId row)
{
    const Tensor &x = val(a);
    const Tensor &r = val(row);
    require_matrix(x, "add_row");
    require(r.size() == x.dim(1), "add_row", "row length mismatch");
    Node n = make_node(OpKind::add_row, a, row);
    n.value = x;
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            n.value[i * cols + j] += r[j];
    return push(std::move(n));
}

NodeId Graph::mul_row(NodeId a, NodeId row)
{
    const Tensor &x = val(a);
    const Tensor &r = val(row);
    require_matrix(x, "mul_row");
    require(r.size() == x.dim(1), "mul_row", "row length mismatch");
    Node n = make_node(OpKind::mul_row, a, row);
    n.value = x;
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            n.value[i * cols + j] *= r[j];
    return push(std::move(n));
}

NodeId Graph::mul_col(NodeId a, NodeId col)
{
    const Tensor &x = val(a);
    const Tensor &c = val(col);
    require_matrix(x, "mul_col");
    require(c.size() == x.dim(0), "mul_col", "column length mismatch");
    Node n = make_node(OpKind::mul_col, a, col);
    n.value = x;
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            n.value[i * cols + j] *= c[i];
    return push(std::move(n));
}

NodeId Graph::div_col(NodeId a, NodeId col)
{
    const Tensor &x = val(a);
    const Tensor &c = val(col);
    require_matrix(x, "div_col");
    require(c.size() == x.dim(0), "div_col", "column length mismatch");
    Node n = make_node(OpKind::div_col, a, col);
    n.value = x;
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            n.value[i * cols + j] /= c[i];
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b)
{
    const Tensor &x = val(a);
    const Tensor &y = val(b);
    require_matrix(x, "matmul");
    require_matrix(y, "matmul");
    require(x.dim(1) == y.dim(0), "matmul",
            "inner dimensions differ: " + shape_string(x.shape()) + " x " + shape_string(y.shape()));
    Node n = make_node(OpKind::matmul, a, b);
    n.value = Tensor(Shape{x.dim(0), y.dim(1)});
    kernels::gemm_nn(x.dim(0), y.dim(1), x.dim(1), x.data(), y.data(), n.value.data());
    return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape shape)
{
    Node n = make_node(OpKind::reshape, a);
    n.value = val(a).reshaped(std::move(shape));
    return push(std::move(n));
}

NodeId Graph::concat(NodeId a, NodeId b)
{
    const Tensor &x = val(a);
    const Tensor &y = val(b);
    require_matrix(x, "concat");
    require_matrix(y, "concat");
    require(x.dim(0) == y.dim(0), "concat", "row counts differ");
    const std::size_t rows = x.dim(0), ca = x.dim(1), cb = y.dim(1);
    Node n = make_node(OpKind::concat, a, b);
    n.value = Tensor(Shape{rows, ca + cb});
    for (std::size_t i = 0; i < rows; ++i)
    {
        std::copy_n(x.data().data() + i * ca, ca, n.value.data().data() + i * (ca + cb));
        std::copy_n(y.data().data() + i * cb, cb, n.value.data().data() + i * (ca + cb) + ca);
    }
    return push(std::move(n));
}

NodeId Graph::slice(NodeId a, std::size_t col_begin, std::size_t col_end)
{
    const Tensor &x = val(a);
    require_matrix(x, "slice");
    require(col_begin < col_end && col_end <= x.dim(1), "slice", "column range out of bounds");
    const std::size_t rows = x.dim(0), cols = x.dim(1), w = col_end - col_begin;
    Node n = make_node(OpKind::slice, a);
    n.aux0 = col_begin;
    n.aux1 = col_end;
    n.value = Tensor(Shape{rows, w});
    for (std::size_t i = 0; i < rows; ++i)
        std::copy_n(x.data().data() + i * cols + col_begin, w, n.value.data().data() + i * w);
    return push(std::move(n));
}

NodeId Graph::sum(NodeId a)
{
    Node n = make_node(OpKind::sum, a);
    n.value = Tensor::scalar(val(a).sum());
    return push(std::move(n));
}

NodeId Graph::mean(NodeId a)
{
    const Tensor &x = val(a);
    require(x.size() > 0, "mean", "empty tensor");
    Node n = make_node(OpKind::mean, a);
    n.value = Tensor::scalar(x.sum() / double(x.size()));
    return push(std::move(n));
}

NodeId Graph::sum_cols(NodeId a)
{
    const Tensor &x = val(a);
    require_matrix(x, "sum_cols");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    Node n = make_node(OpKind::sum_cols, a);
    n.value = Tensor(Shape{rows, 1});
    for (std::size_t i = 0; i < rows; ++i)
    {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j)
            s += x[i * cols + j];
        n.value[i] = s;
    }
    return push(std::move(n));
}

NodeId Graph::tanh(NodeId a)
{
    Node n = make_node(OpKind::tanh, a);
    n.value = map_unary(val(a), [](double x) { return std::tanh(x); });
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a)
{
    Node n = make_node(OpKind::relu, a);
    n.value = map_unary(val(a), [](double x) { return x > 0.0 ? x : 0.0; });
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a)
{
    Node n = make_node(OpKind::sigmoid, a);
    n.value = map_unary(val(a), [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return push(std::move(n));
}

NodeId Graph::sin(NodeId a)
{
    Node n = make_node(OpKind::sin, a);
    n.value = map_unary(val(a), [](double x) { return std::sin(x); });
    return push(std::move(n));
}

NodeId Graph::cos(NodeId a)
{
    Node n = make_node(OpKind::cos, a);
    n.value = map_unary(val(a), [](double x) { return std::cos(x); });
    return push(std::move(n));
}

NodeId Graph::sqrt(NodeId a)
{
    Node n = make_node(OpKind::sqrt, a);
    n.value = map_unary(val(a), [](double x) { return std::sqrt(x); });
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double factor)
{
    Node n = make_node(OpKind::scale, a);
    n.scalar = factor;
    n.value = map_unary(val(a), [factor](double x) { return x * factor; });
    return push(std::move(n));
}

NodeId Graph::add_scalar(NodeId a, double offset)
{
    Node n = make_node(OpKind::add_scalar, a);
    n.scalar = offset;
    n.value = map_unary(val(a), [offset](double x) { return x + offset; });
    return push(std::move(n));
}

NodeId Graph::row_kron(NodeId a, NodeId b)
{
    const Tensor &x = val(a);
    const Tensor &y = val(b);
    require_matrix(x, "row_kron");
    require_matrix(y, "row_kron");
    require(x.dim(0) == y.dim(0), "row_kron", "row counts differ");
    const std::size_t rows = x.dim(0), p = x.dim(1), q = y.dim(1);
    Node n = make_node(OpKind::row_kron, a, b);
    n.value = Tensor(Shape{rows, p * q});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t u = 0; u < p; ++u)
            for (std::size_t v = 0; v < q; ++v)
                n.value[i * p * q + u * q + v] = x[i * p + u] * y[i * q + v];
    return push(std::move(n));
}

NodeId Graph::khatri_rao(NodeId a, NodeId b)
{
    const Tensor &x = val(a);
    const Tensor &y = val(b);
    require_matrix(x, "khatri_rao");
    require_matrix(y, "khatri_rao");
    require(x.dim(1) == y.dim(1), "khatri_rao", "column counts differ");
    const std::size_t p = x.dim(0), q = y.dim(0), k = x.dim(1);
    Node n = make_node(OpKind::khatri_rao, a, b);
    n.value = Tensor(Shape{p * q, k});
    for (std::size_t u = 0; u < p; ++u)
        for (std::size_t v = 0; v < q; ++v)
            for (std::size_t c = 0; c < k; ++c)
                n.value[(u * q + v) * k + c] = x[u * k + c] * y[v * k + c];
    return push(std::move(n));
}

Tensor &Graph::grad_slot(NodeId id)
{
    Node &n = nodes_[id];
    if (n.grad.empty())
        n.grad = Tensor(val(id).shape());
    return n.grad;
}

void Graph::accumulate(NodeId id, const Tensor &g)
{
    Tensor &slot = grad_slot(id);
    auto dst = slot.data();
    const auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += src[i];
}

void Graph::sweep(NodeId loss)
{
    if (loss >= nodes_.size())
        throw std::out_of_range("Graph::backprop: unknown loss node");
    if (val(loss).size() != 1)
        throw std::invalid_argument("Graph::backprop: loss must be scalar, got shape " +
                                    shape_string(val(loss).shape()));

    // Forward reachability from parameters; gradients are only propagated
    // into nodes that depend on at least one parameter.
    std::vector<char> live(nodes_.size(), 0);
    for (NodeId i = 0; i < nodes_.size(); ++i)
    {
        const Node &n = nodes_[i];
        if (n.kind == OpKind::parameter)
            live[i] = 1;
        else if (n.kind != OpKind::constant)
            live[i] = (n.a != none && live[n.a]) || (n.b != none && live[n.b]);
    }
    for (auto &n : nodes_)
        n.grad = Tensor();
    if (!live[loss])
        return;
    grad_slot(loss)[0] = 1.0;

    for (NodeId id = loss + 1; id-- > 0;)
    {
        Node &n = nodes_[id];
        if (n.grad.empty() || !live[id])
            continue;
        const Tensor &g = n.grad;
        const Tensor &y = val(id);
        const bool la = n.a != none && live[n.a];
        const bool lb = n.b != none && live[n.b];

        switch (n.kind)
        {
        case OpKind::constant:
        case OpKind::parameter:
            break;
        case OpKind::add:
            if (la)
                accumulate(n.a, g);
            if (lb)
                accumulate(n.b, g);
            break;
        case OpKind::sub:
            if (la)
                accumulate(n.a, g);
            if (lb)
            {
                auto dst = grad_slot(n.b).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] -= g[i];
            }
            break;
        case OpKind::mul:
        {
            const Tensor &a = val(n.a);
            const Tensor &b = val(n.b);
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i] * b[i];
            }
            if (lb)
            {
                auto dst = grad_slot(n.b).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i] * a[i];
            }
            break;
        }
        case OpKind::div:
        {
            const Tensor &a = val(n.a);
            const Tensor &b = val(n.b);
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i] / b[i];
            }
            if (lb)
            {
                auto dst = grad_slot(n.b).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] -= g[i] * a[i] / (b[i] * b[i]);
            }
            break;
        }
        case OpKind::add_row:
        {
            const std::size_t rows = g.dim(0), cols = g.dim(1);
            if (la)
                accumulate(n.a, g);
            if (lb)
            {
                auto dst = grad_slot(n.b).data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                        dst[j] += g[i * cols + j];
            }
            break;
        }
        case OpKind::mul_row:
        {
            const Tensor &a = val(n.a);
            const Tensor &r = val(n.b);
            const std::size_t rows = g.dim(0), cols = g.dim(1);
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                        dst[i * cols + j] += g[i * cols + j] * r[j];
            }
            if (lb)
            {
                auto dst = grad_slot(n.b).data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                        dst[j] += g[i * cols + j] * a[i * cols + j];
            }
            break;
        }
        case OpKind::mul_col:
        case OpKind::div_col:
        {
            const Tensor &a = val(n.a);
            const Tensor &c = val(n.b);
            const bool divide = n.kind == OpKind::div_col;
            const std::size_t rows = g.dim(0), cols = g.dim(1);
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < rows; ++i)
                {
                    const double f = divide ? 1.0 / c[i] : c[i];
                    for (std::size_t j = 0; j < cols; ++j)
                        dst[i * cols + j] += g[i * cols + j] * f;
                }
            }
            if (lb)
            {
                auto dst = grad_slot(n.b).data();
                for (std::size_t i = 0; i < rows; ++i)
                {
                    double s = 0.0;
                    for (std::size_t j = 0; j < cols; ++j)
                        s += g[i * cols + j] * a[i * cols + j];
                    dst[i] += divide ? -s / (c[i] * c[i]) : s;
                }
            }
            break;
        }
        case OpKind::matmul:
        {
            const Tensor &a = val(n.a);
            const Tensor &b = val(n.b);
            const std::size_t m = a.dim(0), k = a.dim(1), cols = b.dim(1);
            if (la)
                kernels::gemm_nt(m, k, cols, g.data(), b.data(), grad_slot(n.a).data(), true);
            if (lb)
                kernels::gemm_tn(k, cols, m, a.data(), g.data(), grad_slot(n.b).data(), true);
            break;
        }
        case OpKind::reshape:
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i];
            }
            break;
        case OpKind::concat:
        {
            const std::size_t rows = g.dim(0), ca = val(n.a).dim(1), cb = val(n.b).dim(1);
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < ca; ++j)
                        dst[i * ca + j] += g[i * (ca + cb) + j];
            }
            if (lb)
            {
                auto dst = grad_slot(n.b).data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cb; ++j)
                        dst[i * cb + j] += g[i * (ca + cb) + ca + j];
            }
            break;
        }
        case OpKind::slice:
            if (la)
            {
                const std::size_t rows = g.dim(0), w = g.dim(1), cols = val(n.a).dim(1);
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        dst[i * cols + n.aux0 + j] += g[i * w + j];
            }
            break;
        case OpKind::sum:
        case OpKind::mean:
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                const double s = n.kind == OpKind::sum ? g[0] : g[0] / double(dst.size());
                for (auto &d : dst)
                    d += s;
            }
            break;
        case OpKind::sum_cols:
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                const std::size_t rows = val(n.a).dim(0), cols = val(n.a).dim(1);
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                        dst[i * cols + j] += g[i];
            }
            break;
        case OpKind::tanh:
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i] * (1.0 - y[i] * y[i]);
            }
            break;
        case OpKind::relu:
            if (la)
            {
                const Tensor &x = val(n.a);
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += x[i] > 0.0 ? g[i] : 0.0;
            }
            break;
        case OpKind::sigmoid:
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i] * y[i] * (1.0 - y[i]);
            }
            break;
        case OpKind::sin:
            if (la)
            {
                const Tensor &x = val(n.a);
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i] * std::cos(x[i]);
            }
            break;
        case OpKind::cos:
            if (la)
            {
                const Tensor &x = val(n.a);
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] -= g[i] * std::sin(x[i]);
            }
            break;
        case OpKind::sqrt:
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i] / (2.0 * y[i]);
            }
            break;
        case OpKind::scale:
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i] * n.scalar;
            }
            break;
        case OpKind::add_scalar:
            if (la)
                accumulate(n.a, g);
            break;
        case OpKind::row_kron:
        {
            const Tensor &a = val(n.a);
            const Tensor &b = val(n.b);
            const std::size_t rows = a.dim(0), p = a.dim(1), q = b.dim(1);
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t u = 0; u < p; ++u)
                    {
                        double s = 0.0;
                        for (std::size_t v = 0; v < q; ++v)
                            s += g[i * p * q + u * q + v] * b[i * q + v];
                        dst[i * p + u] += s;
                    }
            }
            if (lb)
            {
                auto dst = grad_slot(n.b).data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t u = 0; u < p; ++u)
                        for (std::size_t v = 0; v < q; ++v)
                            dst[i * q + v] += g[i * p * q + u * q + v] * a[i * p + u];
            }
            break;
        }
        case OpKind::khatri_rao:
        {
            const Tensor &a = val(n.a);
            const Tensor &b = val(n.b);
            const std::size_t p = a.dim(0), q = b.dim(0), k = a.dim(1);
            if (la)
            {
                auto dst = grad_slot(n.a).data();
                for (std::size_t u = 0; u < p; ++u)
                    for (std::size_t v = 0; v < q; ++v)
                        for (std::size_t c = 0; c < k; ++c)
                            dst[u * k + c] += g[(u * q + v) * k + c] * b[v * k + c];
            }
            if (lb)
            {
                auto dst = grad_slot(n.b).data();
                for (std::size_t u = 0; u < p; ++u)
                    for (std::size_t v = 0; v < q; ++v)
                        for (std::size_t c = 0; c < k; ++c)
                            dst[v * k + c] += g[(u * q + v) * k + c] * a[u * k + c];
            }
            break;
        }
        }
        if (n.kind != OpKind::parameter && id != loss)
            n.grad = Tensor();
    }
}

Gradients Graph::backprop(NodeId loss)
{
    sweep(loss);
    Gradients out;
    for (NodeId i = 0; i < nodes_.size(); ++i)
    {
        const Node &n = nodes_[i];
        if (n.kind != OpKind::parameter)
            continue;
        auto [it, inserted] = out.try_emplace(n.aux0, val(i).shape());
        if (!n.grad.empty())
        {
            auto dst = it->second.data();
            for (std::size_t j = 0; j < dst.size(); ++j)
                dst[j] += n.grad[j];
        }
    }
    return out;
}

void Graph::backprop_into(NodeId loss, std::vector<Tensor> &grads)
{
    sweep(loss);
    for (const Node &n : nodes_)
    {
        if (n.kind != OpKind::parameter || n.grad.empty())
            continue;
        if (n.aux0 >= grads.size() || grads[n.aux0].size() != n.grad.size())
            throw std::invalid_argument("Graph::backprop_into: gradient buffer does not match parameter " +
                                        std::to_string(n.aux0));
        auto dst = grads[n.aux0].data();
        for (std::size_t j = 0; j < dst.size(); ++j)
            dst[j] += n.grad[j];
    }
}

Gradients backprop(Graph &graph, NodeId loss)
{
    return graph.backprop(loss);
}

} // namespace chanforge::nn
