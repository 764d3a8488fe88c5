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

#ifndef CHANFORGE_DOWNSTREAM_COMPRESS_HPP
#define CHANFORGE_DOWNSTREAM_COMPRESS_HPP

#include "chanforge/augment.hpp"
#include "chanforge/numerics/graph.hpp"
#include "chanforge/numerics/optim.hpp"
#include "chanforge/numerics/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

// Channel compression: a dual-path encoder to a latent vector and a residual
// decoder back to the beamspace channel.
namespace chanforge::compress
{

struct CompressorConfig
{
    std::size_t n_r = 4;
    std::size_t n_t = 32;
    std::size_t rate = 4;           // latent = 2 N_r N_t / rate
    std::size_t wide_width = 256;   // encoder wide path
    std::size_t narrow_width = 32;  // encoder narrow path
    std::size_t decoder_width = 128;
    std::size_t residual_blocks = 2;

    std::size_t input_size() const { return 2 * n_r * n_t; }
    std::size_t latent_size() const { return input_size() / rate; }
    void validate() const;
    bool operator==(const CompressorConfig &) const = default;
};

class Compressor
{
public:
    Compressor() = default;
    Compressor(const CompressorConfig &cfg, std::uint64_t seed);

    const CompressorConfig &config() const { return cfg_; }
    nn::ParameterSet &params() { return params_; }
    const nn::ParameterSet &params() const { return params_; }

    // Graph versions over a batch [B, 2 N_r N_t] -> [B, latent] -> [B, 2 N_r N_t].
    nn::NodeId encode(nn::Graph &g, nn::NodeId x) const;
    nn::NodeId decode(nn::Graph &g, nn::NodeId z) const;

    nn::Tensor compress(const nn::Tensor &x) const;
    nn::Tensor decompress(const nn::Tensor &z) const;
    channel::CMatrix reconstruct(const channel::CMatrix &hv) const;

    bool operator==(const Compressor &) const = default;

private:
    CompressorConfig cfg_;
    nn::ParameterSet params_;
    std::size_t wide_w_ = 0, wide_b_ = 0, narrow_w_ = 0, narrow_b_ = 0, latent_w_ = 0, latent_b_ = 0;
    std::size_t in_w_ = 0, in_b_ = 0, out_w_ = 0, out_b_ = 0;
    std::vector<std::size_t> block_params_; // (w1, b1, w2, b2) per block
};

struct CompressTrainConfig
{
    std::size_t epochs = 500;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t restarts = 1; // best-of-k on validation NMSE
    std::uint64_t seed = 1;
    double divergence_factor = 1e3;
};

struct CompressTrainResult
{
    Compressor model;
    std::vector<double> losses;       // per-epoch training NMSE of the selected run
    std::vector<double> restart_nmse; // validation NMSE of every restart
    std::size_t selected = 0;
};

using CompressEpochCallback = std::function<void(std::size_t restart, std::size_t epoch, double loss)>;

// Trains `restarts` independently seeded models on the loss mean ||H - D(E(H))||^2 / ||H||^2
// and returns the one with the lowest validation NMSE. Throws
// diffusion::DivergenceError on a non-finite or exploding loss.
CompressTrainResult train_compressor(const augment::ChannelDataset &train, const augment::ChannelDataset &validation,
                                     const CompressorConfig &model_cfg, const CompressTrainConfig &cfg,
                                     const CompressEpochCallback &on_epoch = {});

struct NmseResult
{
    double linear = 0.0;
    double db = 0.0;
};

// Mean per-record NMSE over the test set.
NmseResult eval_compressor(const Compressor &model, const augment::ChannelDataset &test);

void save_compressor(const std::filesystem::path &path, const Compressor &model);
Compressor load_compressor(const std::filesystem::path &path);

} // namespace chanforge::compress

#endif
