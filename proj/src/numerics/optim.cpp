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

#include "chanforge/numerics/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace chanforge::nn
{

AdamState make_adam(const ParameterSet &params, double learning_rate)
{
    AdamState s;
    s.learning_rate = learning_rate;
    s.first_moment = params.zeros();
    s.second_moment = params.zeros();
    return s;
}

void adam_step(AdamState &state, std::vector<Tensor> &params, const std::vector<Tensor> &grads)
{
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size())
        throw std::invalid_argument("adam_step: parameter, gradient and moment counts differ");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (grads[i].shape() != params[i].shape() || state.first_moment[i].shape() != params[i].shape() ||
            state.second_moment[i].shape() != params[i].shape())
            throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(i));

    ++state.step;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, double(state.step));
    const double c2 = 1.0 - std::pow(b2, double(state.step));
    const double lr = state.learning_rate;

    for (std::size_t i = 0; i < params.size(); ++i)
    {
        auto p = params[i].data();
        const auto g = grads[i].data();
        auto m = state.first_moment[i].data();
        auto v = state.second_moment[i].data();
        for (std::size_t j = 0; j < p.size(); ++j)
        {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

Tensor finite_diff_grad(const std::function<double(const Tensor &)> &f, const Tensor &p, double h)
{
    if (!(h > 0.0))
        throw std::invalid_argument("finite_diff_grad: step must be positive");
    Tensor probe = p;
    Tensor out(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i)
    {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

double finite_diff_coordinate(const std::function<double()> &f, Tensor &p, std::size_t index, double h)
{
    if (!(h > 0.0))
        throw std::invalid_argument("finite_diff_coordinate: step must be positive");
    const double orig = p[index];
    p[index] = orig + h;
    const double up = f();
    p[index] = orig - h;
    const double down = f();
    p[index] = orig;
    return (up - down) / (2.0 * h);
}

} // namespace chanforge::nn
