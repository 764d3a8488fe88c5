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

#ifndef CHANFORGE_NUMERICS_TENSOR_HPP
#define CHANFORGE_NUMERICS_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace chanforge::nn
{

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape &shape);
std::string shape_string(const Shape &shape);

// Dense row-major tensor of 64-bit reals.
// Complex arrays use a leading size-2 axis (real, imaginary) or paired tensors.
class Tensor
{
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor zeros_like(const Tensor &other) { return Tensor(other.shape_); }

    const Shape &shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double> &storage() { return data_; }
    const std::vector<double> &storage() const { return data_; }

    double &operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2-D access; no bounds checks.
    double &at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }
    double at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }

    // Returns a copy with a new shape of equal element count.
    Tensor reshaped(Shape shape) const;
    void fill(double value);

    bool all_finite() const;
    double sum() const;
    double squared_norm() const;

    bool operator==(const Tensor &other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64 &rng);
Tensor random_normal(Shape shape, std::mt19937_64 &rng, double stddev = 1.0);

} // namespace chanforge::nn

#endif
