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

#ifndef CHANFORGE_EVALUATION_HPP
#define CHANFORGE_EVALUATION_HPP

#include "chanforge/augment.hpp"
#include "chanforge/channelsim.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace chanforge::evaluation
{

// Column holding the largest-magnitude entry; ties go to the lowest column.
// Throws std::invalid_argument for an all-zero matrix.
std::size_t peak_bs_index(const channel::CMatrix &hv);

// |peak_bs_index(a) - peak_bs_index(b)|. Throws on shape mismatch.
std::size_t peak_diff(const channel::CMatrix &a, const channel::CMatrix &b);

struct PeakCdf
{
    std::vector<std::size_t> d_values; // 0..D_max
    std::vector<double> cdf;           // P(D <= d)
    std::size_t n_samples = 0;

    double at(std::size_t d) const { return cdf.at(d); }
};

// Empirical CDF of the per-record peak difference. Records must be aligned:
// same count and identical positions in the same order.
PeakCdf peak_cdf(const augment::ChannelDataset &aug, const augment::ChannelDataset &ref, std::size_t d_max);

// ||est - ref||_F^2 / ||ref||_F^2. Throws for shape mismatch or zero reference.
double nmse(const channel::CMatrix &est, const channel::CMatrix &ref);
double to_db(double linear);
double nmse_db(const channel::CMatrix &est, const channel::CMatrix &ref);

// One row of the metrics CSV: method, metric, x, value, n_samples, seed.
struct MetricRow
{
    std::string method;
    std::string metric;
    double x = 0.0;
    double value = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;

    bool operator==(const MetricRow &) const = default;
};

using CsvRow = std::vector<std::string>;

// Plain CSV with `# ` prefixed preamble lines, a header row and one line per
// row. Fields may not contain commas, quotes or line breaks.
void write_csv(const std::filesystem::path &path, const CsvRow &header, const std::vector<CsvRow> &rows,
               const std::vector<std::string> &preamble = {});

struct CsvTable
{
    CsvRow header;
    std::vector<CsvRow> rows;
};

// Skips preamble lines; throws std::runtime_error on ragged rows.
CsvTable read_csv(const std::filesystem::path &path);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

extern const CsvRow metric_columns;

void export_metrics(const std::vector<MetricRow> &rows, const std::filesystem::path &path,
                    const std::vector<std::string> &preamble = {});
std::vector<MetricRow> parse_metrics(const std::filesystem::path &path);

} // namespace chanforge::evaluation

#endif
