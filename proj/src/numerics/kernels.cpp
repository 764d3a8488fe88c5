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

#include "chanforge/numerics/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chanforge::nn::kernels
{

namespace
{

// Row i of C = A B, A m x k, B k x n. Four rank-1 updates per pass.
inline void row_nn(std::size_t i, std::size_t n, std::size_t k, const double *a, const double *b, double *c,
                   bool accumulate)
{
    double *crow = c + i * n;
    const double *arow = a + i * k;
    if (!accumulate)
        std::fill(crow, crow + n, 0.0);
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4)
    {
        const double a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
        const double *b0 = b + p * n;
        const double *b1 = b0 + n;
        const double *b2 = b1 + n;
        const double *b3 = b2 + n;
        for (std::size_t j = 0; j < n; ++j)
            crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
    for (; p < k; ++p)
    {
        const double av = arow[p];
        const double *brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j)
            crow[j] += av * brow[j];
    }
}

// B (n x k) -> B^T (k x n). A B^T then runs through row_nn, which
// vectorizes over output columns instead of reducing along k.
std::vector<double> transpose(std::size_t n, std::size_t k, const double *b)
{
    std::vector<double> bt(n * k);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p)
            bt[p * n + j] = b[j * k + p];
    return bt;
}

// Row i of C = A^T B, A k x m, B k x n.
inline void row_tn(std::size_t i, std::size_t m, std::size_t n, std::size_t k, const double *a, const double *b,
                   double *c, bool accumulate)
{
    double *crow = c + i * n;
    if (!accumulate)
        std::fill(crow, crow + n, 0.0);
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4)
    {
        const double a0 = a[p * m + i], a1 = a[(p + 1) * m + i], a2 = a[(p + 2) * m + i],
                     a3 = a[(p + 3) * m + i];
        const double *b0 = b + p * n;
        const double *b1 = b0 + n;
        const double *b2 = b1 + n;
        const double *b3 = b2 + n;
        for (std::size_t j = 0; j < n; ++j)
            crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
    for (; p < k; ++p)
    {
        const double av = a[p * m + i];
        const double *brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j)
            crow[j] += av * brow[j];
    }
}

constexpr std::size_t parallel_threshold = 1u << 15;

} // namespace

namespace serial
{

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate)
{
    for (std::size_t i = 0; i < m; ++i)
        row_nn(i, n, k, a.data(), b.data(), c.data(), accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate)
{
    const auto bt = transpose(n, k, b.data());
    for (std::size_t i = 0; i < m; ++i)
        row_nn(i, n, k, a.data(), bt.data(), c.data(), accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate)
{
    for (std::size_t i = 0; i < m; ++i)
        row_tn(i, m, n, k, a.data(), b.data(), c.data(), accumulate);
}

} // namespace serial

namespace parallel
{

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate)
{
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
        row_nn(std::size_t(i), n, k, a.data(), b.data(), c.data(), accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate)
{
    const auto bt = transpose(n, k, b.data());
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
        row_nn(std::size_t(i), n, k, a.data(), bt.data(), c.data(), accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate)
{
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
        row_tn(std::size_t(i), m, n, k, a.data(), b.data(), c.data(), accumulate);
}

} // namespace parallel

int max_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate)
{
    if (m > 1 && m * n * k >= parallel_threshold && max_threads() > 1)
        parallel::gemm_nn(m, n, k, a, b, c, accumulate);
    else
        serial::gemm_nn(m, n, k, a, b, c, accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate)
{
    if (m > 1 && m * n * k >= parallel_threshold && max_threads() > 1)
        parallel::gemm_nt(m, n, k, a, b, c, accumulate);
    else
        serial::gemm_nt(m, n, k, a, b, c, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate)
{
    if (m > 1 && m * n * k >= parallel_threshold && max_threads() > 1)
        parallel::gemm_tn(m, n, k, a, b, c, accumulate);
    else
        serial::gemm_tn(m, n, k, a, b, c, accumulate);
}

} // namespace chanforge::nn::kernels
