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

#include "chanforge/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace chanforge::evaluation
{

namespace
{

double parse_double(const std::string &s)
{
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size())
        throw std::runtime_error("malformed number '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string &s)
{
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::runtime_error("malformed integer '" + s + "'");
    return v;
}

void check_field(const std::string &f)
{
    if (f.find_first_of(",\"\n\r") != std::string::npos)
        throw std::invalid_argument("CSV field may not contain separators or quotes: '" + f + "'");
}

} // namespace

const CsvRow metric_columns{"method", "metric", "x", "value", "n_samples", "seed"};

std::size_t peak_bs_index(const channel::CMatrix &hv)
{
    double best = 0.0;
    std::size_t col = 0;
    bool found = false;
    for (Eigen::Index c = 0; c < hv.cols(); ++c)
        for (Eigen::Index r = 0; r < hv.rows(); ++r)
        {
            const double m = std::norm(hv(r, c));
            if (m > best)
            {
                best = m;
                col = std::size_t(c);
                found = true;
            }
        }
    if (!found)
        throw std::invalid_argument("peak_bs_index: zero matrix");
    return col;
}

std::size_t peak_diff(const channel::CMatrix &a, const channel::CMatrix &b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("peak_diff: shape mismatch");
    const std::size_t ia = peak_bs_index(a), ib = peak_bs_index(b);
    return ia > ib ? ia - ib : ib - ia;
}

PeakCdf peak_cdf(const augment::ChannelDataset &aug, const augment::ChannelDataset &ref, std::size_t d_max)
{
    if (aug.size() != ref.size() || aug.size() == 0)
        throw std::invalid_argument("peak_cdf: datasets differ in size or are empty");
    std::vector<std::size_t> counts(d_max + 1, 0);
    for (std::size_t i = 0; i < aug.size(); ++i)
    {
        if (!(aug.records[i].position == ref.records[i].position))
            throw std::invalid_argument("peak_cdf: datasets are not aligned by position");
        const std::size_t d = peak_diff(aug.records[i].channel.hv, ref.records[i].channel.hv);
        if (d <= d_max)
            ++counts[d];
    }
    PeakCdf out;
    out.n_samples = aug.size();
    std::size_t running = 0;
    for (std::size_t d = 0; d <= d_max; ++d)
    {
        running += counts[d];
        out.d_values.push_back(d);
        out.cdf.push_back(double(running) / double(aug.size()));
    }
    return out;
}

double nmse(const channel::CMatrix &est, const channel::CMatrix &ref)
{
    if (est.rows() != ref.rows() || est.cols() != ref.cols())
        throw std::invalid_argument("nmse: shape mismatch");
    const double denom = ref.squaredNorm();
    if (!(denom > 0.0))
        throw std::invalid_argument("nmse: zero reference");
    return (est - ref).squaredNorm() / denom;
}

double to_db(double linear)
{
    return 10.0 * std::log10(linear);
}

double nmse_db(const channel::CMatrix &est, const channel::CMatrix &ref)
{
    return to_db(nmse(est, ref));
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_csv(const std::filesystem::path &path, const CsvRow &header, const std::vector<CsvRow> &rows,
               const std::vector<std::string> &preamble)
{
    for (const auto &f : header)
        check_field(f);
    for (const auto &row : rows)
    {
        if (row.size() != header.size())
            throw std::invalid_argument("write_csv: row width differs from header");
        for (const auto &f : row)
            check_field(f);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    for (const auto &line : preamble)
        out << "# " << line << '\n';
    auto emit = [&](const CsvRow &row) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << row[i];
        out << '\n';
    };
    emit(header);
    for (const auto &row : rows)
        emit(row);
    if (!out)
        throw std::runtime_error("write failed for '" + path.string() + "'");
}

CsvTable read_csv(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path.string() + "'");
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line))
    {
        if (line.empty() || line[0] == '#')
            continue;
        CsvRow row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ','))
            row.push_back(field);
        if (!line.empty() && line.back() == ',')
            row.emplace_back();
        if (!have_header)
        {
            table.header = std::move(row);
            have_header = true;
            continue;
        }
        if (row.size() != table.header.size())
            throw std::runtime_error(path.string() + ": row width differs from header");
        table.rows.push_back(std::move(row));
    }
    if (!have_header)
        throw std::runtime_error(path.string() + ": missing header row");
    return table;
}

void export_metrics(const std::vector<MetricRow> &rows, const std::filesystem::path &path,
                    const std::vector<std::string> &preamble)
{
    std::vector<CsvRow> out;
    out.reserve(rows.size());
    for (const auto &r : rows)
        out.push_back({r.method, r.metric, format_double(r.x), format_double(r.value), std::to_string(r.n_samples),
                       std::to_string(r.seed)});
    write_csv(path, metric_columns, out, preamble);
}

std::vector<MetricRow> parse_metrics(const std::filesystem::path &path)
{
    const CsvTable t = read_csv(path);
    if (t.header != metric_columns)
        throw std::runtime_error(path.string() + ": unexpected metric columns");
    std::vector<MetricRow> rows;
    for (const auto &r : t.rows)
        rows.push_back({r[0], r[1], parse_double(r[2]), parse_double(r[3]), std::size_t(parse_u64(r[4])),
                        parse_u64(r[5])});
    return rows;
}

} // namespace chanforge::evaluation
