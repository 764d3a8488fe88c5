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

#ifndef CHANFORGE_AUGMENT_HPP
#define CHANFORGE_AUGMENT_HPP

#include "chanforge/channelsim.hpp"
#include "chanforge/diffusion.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

// Position/channel datasets, their file format, and the augmentation methods.
namespace chanforge::augment
{

enum class Provenance : std::uint8_t
{
    reference,
    cddim,
    gaussian,
    nearest,
    mixed, // dataset-level tag of a merge with differing sources
};

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string &text);

struct Record
{
    channel::Position position;
    channel::BeamspaceChannel channel;
    Provenance provenance = Provenance::reference;

    bool operator==(const Record &) const = default;
};

struct DatasetMeta
{
    std::uint64_t scene_hash = 0;
    channel::Normalization normalization = channel::Normalization::frobenius;
    std::uint64_t seed = 0;
    Provenance provenance = Provenance::reference;

    bool operator==(const DatasetMeta &) const = default;
};

struct ChannelDataset
{
    DatasetMeta meta;
    std::vector<Record> records;

    std::size_t size() const { return records.size(); }
    std::size_t n_r() const { return records.empty() ? 0 : records.front().channel.n_r(); }
    std::size_t n_t() const { return records.empty() ? 0 : records.front().channel.n_t(); }
    std::vector<channel::Position> positions() const;

    // Throws std::invalid_argument when empty, when shapes differ, or when an
    // entry is non-finite.
    void validate() const;
    bool operator==(const ChannelDataset &) const = default;
};

// Little-endian "CHDS" container: header (version, N_r, N_t, count,
// normalization, provenance, scene hash, seed), CRC32, then per-record
// provenance bytes, positions and [2, N_r, N_t] channels as 64-bit reals.
void write_dataset(const ChannelDataset &ds, const std::filesystem::path &path);
ChannelDataset read_dataset(const std::filesystem::path &path);

// Ground-truth channels from the scene simulator.
ChannelDataset simulate_dataset(std::span<const channel::Position> positions, const channel::SceneConfig &scene,
                                channel::Normalization mode, std::uint64_t seed);

diffusion::TrainingSet to_training_set(const ChannelDataset &ds);

// One deterministic cDDIM sample per position, rescaled to the training set's
// normalization. Positions must lie in the model's scene radius and must not
// coincide with any training position.
ChannelDataset augment_cddim(const diffusion::Denoiser &model, const diffusion::NoiseSchedule &sched,
                             std::span<const channel::Position> positions, const ChannelDataset &train,
                             std::uint64_t seed, std::size_t num_steps = 0);

// Each record replicated `factor` times (record-major) with complex Gaussian
// noise of total power ||H_v||_F^2 10^(-snr_db / 10). snr_db = +inf yields
// exact copies.
ChannelDataset augment_gaussian(const ChannelDataset &ds, double snr_db, std::size_t factor, std::uint64_t seed);

// Gaussian augmentation carries no position information, so a query
// position is paired with a noisy copy of a uniformly drawn training record.
ChannelDataset gaussian_at_positions(const ChannelDataset &train, std::span<const channel::Position> positions,
                                     double snr_db, std::uint64_t seed);

// Channel of the Euclidean-nearest training position; ties go to the lowest index.
ChannelDataset augment_nearest(const ChannelDataset &train, std::span<const channel::Position> positions);

// Concatenation; per-record provenance is kept. Throws on shape or metadata mismatch.
ChannelDataset merge(const ChannelDataset &a, const ChannelDataset &b);

} // namespace chanforge::augment

#endif
