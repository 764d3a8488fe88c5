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

#ifndef CHANFORGE_NUMERICS_KERNELS_HPP
#define CHANFORGE_NUMERICS_KERNELS_HPP

#include <cstddef>
#include <span>

// Dense matrix products used by the autodiff engine.
//
// Every kernel exists twice: a serial reference in `serial` and an OpenMP
// version in `parallel` that splits the outer output-row loop across threads.
// Both call the same per-row routine, so each output element is accumulated
// in the same order and the two are bitwise identical for any thread count.
// The unqualified functions dispatch to `parallel` above a work threshold.
//
// Shapes (row-major): A is m x k, B is k x n, C is m x n for gemm_nn;
// gemm_nt uses B stored n x k; gemm_tn uses A stored k x m.
// When `accumulate` is false C is overwritten, otherwise C += product.

namespace chanforge::nn::kernels
{

namespace serial
{
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate = false);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate = false);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate = false);
} // namespace serial

namespace parallel
{
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate = false);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate = false);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate = false);
} // namespace parallel

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate = false);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate = false);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate = false);

int max_threads();

} // namespace chanforge::nn::kernels

#endif
