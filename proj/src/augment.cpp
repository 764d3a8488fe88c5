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

#include "chanforge/augment.hpp"

#include "chanforge/io.hpp"
#include "chanforge/rng.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <tuple>

namespace chanforge::augment
{

namespace
{

constexpr io::Magic dataset_magic{'C', 'H', 'D', 'S'};
constexpr std::uint32_t dataset_version = 1;

channel::CMatrix add_noise(const channel::CMatrix &h, double snr_db, Rng &rng)
{
    if (std::isinf(snr_db) && snr_db > 0.0)
        return h;
    const double power = h.squaredNorm() * std::pow(10.0, -snr_db / 10.0);
    const double stddev = std::sqrt(power / (2.0 * double(h.size())));
    std::normal_distribution<double> normal(0.0, stddev);
    channel::CMatrix out = h;
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        for (Eigen::Index r = 0; r < out.rows(); ++r)
        {
            const double re = normal(rng);
            const double im = normal(rng);
            out(r, c) += channel::Complex(re, im);
        }
    return out;
}

void check_snr(double snr_db)
{
    if (std::isnan(snr_db) || (std::isinf(snr_db) && snr_db < 0.0))
        throw std::invalid_argument("snr_db must be finite or +inf");
}

auto position_key(const channel::Position &p)
{
    return std::tuple(p.x1, p.x2, p.x3);
}

} // namespace

std::string to_string(Provenance p)
{
    switch (p)
    {
    case Provenance::reference: return "reference";
    case Provenance::cddim: return "cddim";
    case Provenance::gaussian: return "gaussian";
    case Provenance::nearest: return "nearest";
    case Provenance::mixed: return "mixed";
    }
    return "unknown";
}

Provenance parse_provenance(const std::string &text)
{
    for (auto p : {Provenance::reference, Provenance::cddim, Provenance::gaussian, Provenance::nearest,
                   Provenance::mixed})
        if (to_string(p) == text)
            return p;
    throw std::invalid_argument("unknown provenance '" + text + "'");
}

std::vector<channel::Position> ChannelDataset::positions() const
{
    std::vector<channel::Position> out;
    out.reserve(records.size());
    for (const auto &r : records)
        out.push_back(r.position);
    return out;
}

void ChannelDataset::validate() const
{
    if (records.empty())
        throw std::invalid_argument("dataset has no records");
    const std::size_t nr = n_r(), nt = n_t();
    if (nr == 0 || nt == 0)
        throw std::invalid_argument("dataset channels are empty");
    for (const auto &r : records)
    {
        if (r.channel.n_r() != nr || r.channel.n_t() != nt)
            throw std::invalid_argument("dataset channels differ in shape");
        if (!r.channel.hv.allFinite() || !std::isfinite(r.position.x1) || !std::isfinite(r.position.x2) ||
            !std::isfinite(r.position.x3))
            throw std::invalid_argument("dataset contains non-finite values");
        if (r.provenance > Provenance::nearest)
            throw std::invalid_argument("record provenance must name a single source");
    }
}

void write_dataset(const ChannelDataset &ds, const std::filesystem::path &path)
{
    ds.validate();
    io::ByteWriter w;
    w.u32(static_cast<std::uint32_t>(ds.n_r()));
    w.u32(static_cast<std::uint32_t>(ds.n_t()));
    w.u64(ds.size());
    w.u8(static_cast<std::uint8_t>(ds.meta.normalization));
    w.u8(static_cast<std::uint8_t>(ds.meta.provenance));
    w.u8(0);
    w.u8(0);
    w.u64(ds.meta.scene_hash);
    w.u64(ds.meta.seed);
    for (const auto &r : ds.records)
        w.u8(static_cast<std::uint8_t>(r.provenance));
    for (const auto &r : ds.records)
    {
        w.f64(r.position.x1);
        w.f64(r.position.x2);
        w.f64(r.position.x3);
    }
    for (const auto &r : ds.records)
        w.doubles(channel::to_real(r.channel.hv));
    io::write_container(path, dataset_magic, dataset_version, w.bytes());
}

ChannelDataset read_dataset(const std::filesystem::path &path)
{
    const auto payload = io::read_container(path, dataset_magic, dataset_version);
    io::ByteReader r(payload);
    const std::size_t nr = r.u32(), nt = r.u32();
    const std::size_t count = r.u64();
    ChannelDataset ds;
    const auto norm = r.u8();
    const auto prov = r.u8();
    if (norm > static_cast<std::uint8_t>(channel::Normalization::peak) ||
        prov > static_cast<std::uint8_t>(Provenance::mixed))
        throw io::FormatError(path.string() + ": invalid header tag");
    ds.meta.normalization = static_cast<channel::Normalization>(norm);
    ds.meta.provenance = static_cast<Provenance>(prov);
    r.u8();
    r.u8();
    ds.meta.scene_hash = r.u64();
    ds.meta.seed = r.u64();

    const std::size_t per_record = 1 + 3 * sizeof(double) + 2 * nr * nt * sizeof(double);
    if (nr == 0 || nt == 0 || count == 0 || count > r.remaining() / per_record || count * per_record != r.remaining())
        throw io::FormatError(path.string() + ": record block does not match the header");
    ds.records.resize(count);
    for (auto &rec : ds.records)
    {
        const auto p = r.u8();
        if (p > static_cast<std::uint8_t>(Provenance::nearest))
            throw io::FormatError(path.string() + ": invalid record provenance");
        rec.provenance = static_cast<Provenance>(p);
    }
    for (auto &rec : ds.records)
    {
        rec.position.x1 = r.f64();
        rec.position.x2 = r.f64();
        rec.position.x3 = r.f64();
    }
    std::vector<double> buf(2 * nr * nt);
    for (auto &rec : ds.records)
    {
        r.doubles(buf);
        rec.channel.hv = channel::from_real(buf, nr, nt);
    }
    r.expect_end();
    return ds;
}

ChannelDataset simulate_dataset(std::span<const channel::Position> positions, const channel::SceneConfig &scene,
                                channel::Normalization mode, std::uint64_t seed)
{
    ChannelDataset ds;
    ds.meta = {scene.hash(), mode, seed, Provenance::reference};
    ds.records.reserve(positions.size());
    for (const auto &p : positions)
        ds.records.push_back({p, channel::simulate_beamspace(p, scene, mode), Provenance::reference});
    return ds;
}

diffusion::TrainingSet to_training_set(const ChannelDataset &ds)
{
    ds.validate();
    const std::size_t dim = 2 * ds.n_r() * ds.n_t();
    diffusion::TrainingSet s;
    s.channels = nn::Tensor({ds.size(), dim});
    const auto positions = ds.positions();
    s.positions = diffusion::position_tensor(positions);
    for (std::size_t i = 0; i < ds.size(); ++i)
    {
        const auto v = channel::to_real(ds.records[i].channel.hv);
        std::copy(v.begin(), v.end(), s.channels.data().begin() + std::ptrdiff_t(i * dim));
    }
    return s;
}

ChannelDataset augment_cddim(const diffusion::Denoiser &model, const diffusion::NoiseSchedule &sched,
                             std::span<const channel::Position> positions, const ChannelDataset &train,
                             std::uint64_t seed, std::size_t num_steps)
{
    if (positions.empty())
        throw std::invalid_argument("augment_cddim: no positions");
    const auto &cfg = model.config();
    if (!train.records.empty() && (train.n_r() != cfg.n_r || train.n_t() != cfg.n_t))
        throw std::invalid_argument("augment_cddim: model and training set shapes differ");
    std::set<std::tuple<double, double, double>> seen;
    for (const auto &r : train.records)
        seen.insert(position_key(r.position));
    for (const auto &p : positions)
    {
        if (!(p.x3 > 0.0) || !(p.planar_range() <= cfg.radius))
            throw std::invalid_argument("augment_cddim: position outside the scene");
        if (seen.count(position_key(p)))
            throw std::invalid_argument("augment_cddim: position coincides with a training position");
    }

    const nn::Tensor samples = diffusion::sample(model, sched, positions, seed, num_steps);
    const std::size_t dim = cfg.input_size();
    ChannelDataset ds;
    ds.meta = train.meta;
    ds.meta.seed = seed;
    ds.meta.provenance = Provenance::cddim;
    ds.records.reserve(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
    {
        const auto row = samples.data().subspan(i * dim, dim);
        channel::BeamspaceChannel hv{channel::from_real(row, cfg.n_r, cfg.n_t)};
        if (ds.meta.normalization != channel::Normalization::none && hv.hv.squaredNorm() > 0.0)
            hv = channel::normalize(hv, ds.meta.normalization);
        ds.records.push_back({positions[i], std::move(hv), Provenance::cddim});
    }
    return ds;
}

ChannelDataset augment_gaussian(const ChannelDataset &ds, double snr_db, std::size_t factor, std::uint64_t seed)
{
    check_snr(snr_db);
    if (factor < 1)
        throw std::invalid_argument("augment_gaussian: factor must be at least 1");
    ds.validate();
    ChannelDataset out;
    out.meta = ds.meta;
    out.meta.seed = seed;
    out.meta.provenance = Provenance::gaussian;
    out.records.reserve(ds.size() * factor);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t k = 0; k < factor; ++k)
        {
            Rng rng = make_rng(seed, "gaussian", i * factor + k);
            const auto &src = ds.records[i];
            out.records.push_back({src.position, {add_noise(src.channel.hv, snr_db, rng)}, Provenance::gaussian});
        }
    return out;
}

ChannelDataset gaussian_at_positions(const ChannelDataset &train, std::span<const channel::Position> positions,
                                     double snr_db, std::uint64_t seed)
{
    check_snr(snr_db);
    train.validate();
    if (positions.empty())
        throw std::invalid_argument("gaussian_at_positions: no positions");
    ChannelDataset out;
    out.meta = train.meta;
    out.meta.seed = seed;
    out.meta.provenance = Provenance::gaussian;
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
    for (std::size_t i = 0; i < positions.size(); ++i)
    {
        Rng rng = make_rng(seed, "gaussian-at", i);
        const auto &src = train.records[pick(rng)];
        out.records.push_back({positions[i], {add_noise(src.channel.hv, snr_db, rng)}, Provenance::gaussian});
    }
    return out;
}

ChannelDataset augment_nearest(const ChannelDataset &train, std::span<const channel::Position> positions)
{
    train.validate();
    ChannelDataset out;
    out.meta = train.meta;
    out.meta.provenance = Provenance::nearest;
    out.records.reserve(positions.size());
    for (const auto &q : positions)
    {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < train.size(); ++j)
        {
            const double d = channel::distance(q, train.records[j].position);
            if (d < best_d)
            {
                best_d = d;
                best = j;
            }
        }
        out.records.push_back({q, train.records[best].channel, Provenance::nearest});
    }
    return out;
}

ChannelDataset merge(const ChannelDataset &a, const ChannelDataset &b)
{
    a.validate();
    b.validate();
    if (a.n_r() != b.n_r() || a.n_t() != b.n_t())
        throw std::invalid_argument("merge: channel shapes differ");
    if (a.meta.scene_hash != b.meta.scene_hash || a.meta.normalization != b.meta.normalization)
        throw std::invalid_argument("merge: datasets come from different scenes or normalizations");
    ChannelDataset out;
    out.meta = a.meta;
    if (a.meta.provenance != b.meta.provenance)
        out.meta.provenance = Provenance::mixed;
    out.records = a.records;
    out.records.insert(out.records.end(), b.records.begin(), b.records.end());
    return out;
}

} // namespace chanforge::augment
