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

#include "chanforge/numerics/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace chanforge::nn
{

std::size_t shape_size(const Shape &shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape &shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill)
{
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
    if (data_.size() != shape_size(shape_))
        throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_string(shape_));
}

Tensor Tensor::scalar(double value)
{
    return Tensor(Shape{1}, std::vector<double>{value});
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_size(shape) != data_.size())
        throw std::invalid_argument("Tensor::reshaped: cannot view " + shape_string(shape_) + " as " +
                                    shape_string(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value)
{
    std::fill(data_.begin(), data_.end(), value);
}

bool Tensor::all_finite() const
{
    for (double v : data_)
        if (!std::isfinite(v))
            return false;
    return true;
}

double Tensor::sum() const
{
    return std::accumulate(data_.begin(), data_.end(), 0.0);
}

double Tensor::squared_norm() const
{
    double s = 0.0;
    for (double v : data_)
        s += v * v;
    return s;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64 &rng)
{
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor t(Shape{fan_in, fan_out});
    for (auto &v : t.storage())
        v = dist(rng);
    return t;
}

Tensor random_normal(Shape shape, std::mt19937_64 &rng, double stddev)
{
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (auto &v : t.storage())
        v = dist(rng);
    return t;
}

} // namespace chanforge::nn
