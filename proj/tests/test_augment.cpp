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

#include "doctest.h"

#include "chanforge/augment.hpp"
#include "chanforge/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>

using namespace chanforge;
using namespace chanforge::augment;
using channel::Position;

namespace
{

channel::SceneConfig small_scene()
{
    channel::SceneConfig s;
    s.tx = channel::ArrayConfig::ula(4);
    s.rx = channel::ArrayConfig::ula(2);
    return s;
}

std::vector<Position> positions(const channel::SceneConfig &s, std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    return channel::sample_positions(s, n, rng);
}

ChannelDataset reference(std::size_t n, std::uint64_t seed = 3)
{
    const auto s = small_scene();
    return simulate_dataset(positions(s, n, seed), s, channel::Normalization::frobenius, seed);
}

std::filesystem::path temp_file(const std::string &name)
{
    return std::filesystem::temp_directory_path() / ("chanforge_test_" + name);
}

std::vector<char> file_bytes(const std::filesystem::path &p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path &p, const std::vector<char> &bytes)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

diffusion::DenoiserConfig small_model_config()
{
    diffusion::DenoiserConfig c;
    c.n_r = 2;
    c.n_t = 4;
    c.width = 16;
    c.steps = 8;
    return c;
}

} // namespace

TEST_SUITE("augment")
{

TEST_CASE("provenance names round-trip")
{
    for (auto p : {Provenance::reference, Provenance::cddim, Provenance::gaussian, Provenance::nearest,
                   Provenance::mixed})
        CHECK(parse_provenance(to_string(p)) == p);
    CHECK_THROWS_AS(parse_provenance("gan"), std::invalid_argument);
}

TEST_CASE("simulated dataset carries its metadata")
{
    const auto s = small_scene();
    const auto pos = positions(s, 10, 4);
    const auto ds = simulate_dataset(pos, s, channel::Normalization::frobenius, 4);
    REQUIRE(ds.size() == 10);
    CHECK(ds.n_r() == 2);
    CHECK(ds.n_t() == 4);
    CHECK(ds.meta.scene_hash == s.hash());
    CHECK(ds.meta.seed == 4);
    CHECK(ds.meta.provenance == Provenance::reference);
    CHECK(ds.positions() == pos);
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(ds.records[i].channel == channel::simulate_beamspace(pos[i], s, channel::Normalization::frobenius));
    CHECK_NOTHROW(ds.validate());
}

TEST_CASE("dataset validation")
{
    ChannelDataset empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

    auto ragged = reference(3);
    ragged.records[1].channel.hv = channel::CMatrix::Ones(3, 4);
    CHECK_THROWS_AS(ragged.validate(), std::invalid_argument);

    auto bad = reference(3);
    bad.records[2].channel.hv(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    auto mixed_record = reference(2);
    mixed_record.records[0].provenance = Provenance::mixed;
    CHECK_THROWS_AS(mixed_record.validate(), std::invalid_argument);
}

TEST_CASE("dataset files round-trip byte-exactly")
{
    auto ds = reference(25);
    ds.records[3].provenance = Provenance::cddim;
    ds.meta.provenance = Provenance::mixed;
    const auto a = temp_file("ds_a.chds"), b = temp_file("ds_b.chds");
    write_dataset(ds, a);
    const auto back = read_dataset(a);
    CHECK(back == ds);
    write_dataset(back, b);
    CHECK(file_bytes(a) == file_bytes(b));
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}

TEST_CASE("corrupted dataset files are rejected")
{
    const auto ds = reference(5);
    const auto p = temp_file("ds_bad.chds");
    write_dataset(ds, p);
    const auto good = file_bytes(p);

    auto magic = good;
    magic[0] = 'X';
    write_bytes(p, magic);
    CHECK_THROWS_AS(read_dataset(p), io::FormatError);

    auto flipped = good;
    flipped[flipped.size() - 3] ^= 0x10;
    write_bytes(p, flipped);
    CHECK_THROWS_AS(read_dataset(p), io::FormatError);

    auto version = good;
    version[4] = 9;
    write_bytes(p, version);
    CHECK_THROWS_AS(read_dataset(p), io::FormatError);

    write_bytes(p, std::vector<char>(good.begin(), good.end() - 8));
    CHECK_THROWS_AS(read_dataset(p), io::FormatError);

    std::filesystem::remove(p);
    CHECK_THROWS(read_dataset(p));
}

TEST_CASE("empty datasets are rejected at write")
{
    const auto p = temp_file("ds_empty.chds");
    std::filesystem::remove(p);
    CHECK_THROWS_AS(write_dataset(ChannelDataset{}, p), std::invalid_argument);
    CHECK_FALSE(std::filesystem::exists(p));
}

TEST_CASE("gaussian augmentation at infinite snr copies exactly")
{
    const auto ds = reference(7);
    const auto out = augment_gaussian(ds, std::numeric_limits<double>::infinity(), 2, 1);
    REQUIRE(out.size() == 14);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        CHECK(out.records[i].channel == ds.records[i / 2].channel);
        CHECK(out.records[i].position == ds.records[i / 2].position);
        CHECK(out.records[i].provenance == Provenance::gaussian);
    }
    CHECK(out.meta.provenance == Provenance::gaussian);
}

TEST_CASE("gaussian augmentation replicates and keeps positions")
{
    const auto ds = reference(100);
    const auto out = augment_gaussian(ds, 10.0, 3, 5);
    REQUIRE(out.size() == 300);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        CHECK(out.records[i].position == ds.records[i / 3].position);
        CHECK_FALSE(out.records[i].channel == ds.records[i / 3].channel);
    }
    CHECK_NOTHROW(out.validate());
    CHECK(augment_gaussian(ds, 10.0, 3, 5) == out);
    CHECK_FALSE(augment_gaussian(ds, 10.0, 3, 6) == out);
}

TEST_CASE("gaussian noise power sits 10 dB below the channel")
{
    const auto ds = reference(1);
    const auto out = augment_gaussian(ds, 10.0, 1000, 8);
    const auto &h = ds.records[0].channel.hv;
    double ratio = 0.0;
    for (const auto &r : out.records)
        ratio += (r.channel.hv - h).squaredNorm() / h.squaredNorm();
    ratio /= double(out.size());
    CHECK(ratio == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("gaussian augmentation argument checks")
{
    const auto ds = reference(2);
    CHECK_THROWS_AS(augment_gaussian(ds, std::numeric_limits<double>::quiet_NaN(), 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(augment_gaussian(ds, -std::numeric_limits<double>::infinity(), 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(augment_gaussian(ds, 10.0, 0, 1), std::invalid_argument);
}

TEST_CASE("gaussian baseline at query positions")
{
    const auto train = reference(6);
    const auto s = small_scene();
    const auto query = positions(s, 20, 77);
    const auto copies = gaussian_at_positions(train, query, std::numeric_limits<double>::infinity(), 2);
    REQUIRE(copies.size() == 20);
    for (std::size_t i = 0; i < copies.size(); ++i)
    {
        CHECK(copies.records[i].position == query[i]);
        bool found = false;
        for (const auto &r : train.records)
            found = found || r.channel == copies.records[i].channel;
        CHECK(found);
    }
    CHECK(gaussian_at_positions(train, query, 10.0, 2) == gaussian_at_positions(train, query, 10.0, 2));
    CHECK_THROWS_AS(gaussian_at_positions(train, {}, 10.0, 2), std::invalid_argument);
}

TEST_CASE("nearest lookup returns training channels")
{
    const auto train = reference(10);
    const auto pos = train.positions();
    const auto out = augment_nearest(train, pos);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        CHECK(out.records[i].channel == train.records[i].channel);
        CHECK(out.records[i].provenance == Provenance::nearest);
    }

    ChannelDataset single = reference(1);
    const auto s = small_scene();
    for (const auto &r : augment_nearest(single, positions(s, 5, 9)).records)
        CHECK(r.channel == single.records[0].channel);
}

TEST_CASE("nearest lookup flips at the midpoint and breaks ties low")
{
    auto train = reference(2);
    train.records[0].position = {10.0, 0.0, 1.5};
    train.records[1].position = {20.0, 0.0, 1.5};
    for (double eps : {1e-6, -1e-6})
    {
        const std::vector<Position> q{{15.0 + eps, 3.0, 1.5}};
        const auto out = augment_nearest(train, q);
        CHECK(out.records[0].channel == train.records[eps > 0 ? 1 : 0].channel);
    }
    const std::vector<Position> mid{{15.0, 3.0, 1.5}};
    CHECK(augment_nearest(train, mid).records[0].channel == train.records[0].channel);
}

TEST_CASE("cddim augmentation checks its positions")
{
    const auto c = small_model_config();
    const diffusion::Denoiser model(c, 1);
    const auto sched = diffusion::build_schedule(c.steps, 1e-3, 0.2);
    const auto train = reference(5);
    CHECK_THROWS_AS(augment_cddim(model, sched, {}, train, 1), std::invalid_argument);
    const std::vector<Position> outside{{150.0, 0.0, 1.5}};
    CHECK_THROWS_AS(augment_cddim(model, sched, outside, train, 1), std::invalid_argument);
    const std::vector<Position> reused{train.records[2].position};
    CHECK_THROWS_AS(augment_cddim(model, sched, reused, train, 1), std::invalid_argument);
}

TEST_CASE("cddim augmentation is deterministic, tagged and normalized")
{
    const auto c = small_model_config();
    const diffusion::Denoiser model(c, 1);
    const auto sched = diffusion::build_schedule(c.steps, 1e-3, 0.2);
    const auto train = reference(5);
    const auto query = positions(small_scene(), 12, 31);
    const auto aug = augment_cddim(model, sched, query, train, 4);
    REQUIRE(aug.size() == 12);
    CHECK(aug == augment_cddim(model, sched, query, train, 4));
    CHECK_FALSE(aug == augment_cddim(model, sched, query, train, 5));
    CHECK(aug.meta.provenance == Provenance::cddim);
    CHECK(aug.positions() == query);
    CHECK_NOTHROW(aug.validate());
    for (const auto &r : aug.records)
    {
        CHECK(r.provenance == Provenance::cddim);
        CHECK(r.channel.hv.norm() == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
    }

    const auto merged = merge(train, aug);
    CHECK(merged.size() == train.size() + aug.size());
    CHECK(merged.meta.provenance == Provenance::mixed);
    for (std::size_t i = 0; i < merged.size(); ++i)
        CHECK(merged.records[i].provenance == (i < train.size() ? Provenance::reference : Provenance::cddim));
}

TEST_CASE("merge checks compatibility")
{
    const auto a = reference(3), b = reference(4, 9);
    const auto same = merge(a, b);
    CHECK(same.size() == 7);
    CHECK(same.meta.provenance == Provenance::reference);

    auto other_norm = b;
    other_norm.meta.normalization = channel::Normalization::peak;
    CHECK_THROWS_AS(merge(a, other_norm), std::invalid_argument);
    auto other_scene = b;
    other_scene.meta.scene_hash ^= 1;
    CHECK_THROWS_AS(merge(a, other_scene), std::invalid_argument);

    auto s = small_scene();
    s.tx = channel::ArrayConfig::ula(8);
    auto wide = simulate_dataset(positions(s, 2, 1), s, channel::Normalization::frobenius, 1);
    wide.meta.scene_hash = a.meta.scene_hash;
    CHECK_THROWS_AS(merge(a, wide), std::invalid_argument);
}

}
