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

// Serial reference vs OpenMP kernels on the shapes the denoiser trunk uses.

#include "chanforge/numerics/kernels.hpp"
#include "chanforge/numerics/tensor.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace
{

using namespace chanforge::nn;

struct Operands
{
    std::size_t m, n, k;
    Tensor a, b, c;

    Operands(std::size_t m_, std::size_t n_, std::size_t k_) : m(m_), n(n_), k(k_)
    {
        std::mt19937_64 rng(1);
        a = random_normal(Shape{m, k}, rng);
        b = random_normal(Shape{k, n}, rng);
        c = Tensor(Shape{m, n});
    }
};

template <auto Kernel>
void gemm(benchmark::State &state)
{
    Operands op(std::size_t(state.range(0)), std::size_t(state.range(1)), std::size_t(state.range(2)));
    for (auto _ : state)
    {
        Kernel(op.m, op.n, op.k, op.a.data(), op.b.data(), op.c.data(), false);
        benchmark::DoNotOptimize(op.c.data().data());
    }
    state.counters["GFLOP/s"] =
        benchmark::Counter(2.0 * double(op.m * op.n * op.k), benchmark::Counter::kIsIterationInvariantRate,
                           benchmark::Counter::kIs1000);
}

void shapes(benchmark::internal::Benchmark *b)
{
    b->Args({32, 512, 256})->Args({32, 512, 512})->Args({128, 512, 512})->Args({64, 256, 640});
}

} // namespace

BENCHMARK(gemm<kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Apply(shapes);
BENCHMARK(gemm<kernels::parallel::gemm_nn>)->Name("gemm_nn/omp")->Apply(shapes);
BENCHMARK(gemm<kernels::serial::gemm_nt>)->Name("gemm_nt/serial")->Apply(shapes);
BENCHMARK(gemm<kernels::parallel::gemm_nt>)->Name("gemm_nt/omp")->Apply(shapes);
BENCHMARK(gemm<kernels::serial::gemm_tn>)->Name("gemm_tn/serial")->Apply(shapes);
BENCHMARK(gemm<kernels::parallel::gemm_tn>)->Name("gemm_tn/omp")->Apply(shapes);

BENCHMARK_MAIN();
