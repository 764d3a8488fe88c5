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

#ifndef CHANFORGE_NUMERICS_OPTIM_HPP
#define CHANFORGE_NUMERICS_OPTIM_HPP

#include "chanforge/numerics/graph.hpp"
#include "chanforge/numerics/tensor.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace chanforge::nn
{

struct AdamState
{
    std::uint64_t step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;

    bool operator==(const AdamState &other) const = default;
};

AdamState make_adam(const ParameterSet &params, double learning_rate);

// One bias-corrected Adam update. Throws std::invalid_argument when the
// gradient or moment shapes do not match the parameters.
void adam_step(AdamState &state, std::vector<Tensor> &params, const std::vector<Tensor> &grads);

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate.
Tensor finite_diff_grad(const std::function<double(const Tensor &)> &f, const Tensor &p, double h);

// Central difference for one coordinate; `p` is restored before returning.
double finite_diff_coordinate(const std::function<double()> &f, Tensor &p, std::size_t index, double h);

} // namespace chanforge::nn

#endif
