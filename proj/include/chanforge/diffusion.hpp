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

#ifndef CHANFORGE_DIFFUSION_HPP
#define CHANFORGE_DIFFUSION_HPP

#include "chanforge/channelsim.hpp"
#include "chanforge/numerics/graph.hpp"
#include "chanforge/numerics/optim.hpp"
#include "chanforge/numerics/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

// Conditional DDIM: noise schedule, position/time conditioned noise estimator,
// denoising and consistency training, deterministic sampling.
namespace chanforge::diffusion
{

// Arrays are indexed by step t = 0..T; entry 0 is the clean state
// (beta 0, alpha 1, alpha_bar 1, sigma 0).
struct NoiseSchedule
{
    std::size_t steps = 0;
    double beta_min = 0.0;
    double beta_max = 0.0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> sigma; // sqrt(1 - alpha_bar)

    bool operator==(const NoiseSchedule &) const = default;
};

// Linear beta from beta_min (t = 1) to beta_max (t = T).
// Throws std::invalid_argument unless 0 < beta_min <= beta_max < 1 and T >= 1.
NoiseSchedule build_schedule(std::size_t steps, double beta_min, double beta_max);

struct DenoiserConfig
{
    std::size_t n_r = 4;
    std::size_t n_t = 32;
    std::size_t width = 0; // 0 selects 4 * n_r * n_t
    std::size_t depth = 3;
    std::size_t time_features = 16;
    std::size_t position_octaves = 0; // sin/cos of 2^k pi x/R for k < octaves, in addition to x/R
    std::size_t position_depth = 0;   // tanh layers in the position embedding network
    std::size_t position_hidden = 128;
    std::size_t steps = 64; // T, for the timestep embedding
    double radius = 100.0;  // positions are divided by this before embedding

    std::size_t input_size() const { return 2 * n_r * n_t; }
    std::size_t hidden_width() const { return width == 0 ? 4 * n_r * n_t : width; }
    std::size_t position_features() const { return 3 * (1 + 2 * position_octaves); }
    std::size_t embedding_width() const { return position_depth == 0 ? position_features() : position_hidden; }
    void validate() const;
    bool operator==(const DenoiserConfig &) const = default;
};

// Noise estimator S(H_t | x, t). Each hidden layer computes
//   h <- tanh((h W + b) * (psi(x/R) P + c) + (phi(t) Q + d))
// where psi is x/R optionally extended with sinusoidal features and passed
// through `position_depth` tanh layers, and the output layer reads the last hidden layer concatenated with the input.
class Denoiser
{
public:
    Denoiser() = default;
    Denoiser(const DenoiserConfig &cfg, std::uint64_t seed);

    const DenoiserConfig &config() const { return cfg_; }
    nn::ParameterSet &params() { return params_; }
    const nn::ParameterSet &params() const { return params_; }

    // Records the forward pass. h_t is a [B, 2 N_r N_t] node, positions is
    // [B, 3] in meters, steps holds B values in [1, T].
    nn::NodeId forward(nn::Graph &g, nn::NodeId h_t, const nn::Tensor &positions,
                       std::span<const std::size_t> steps) const;

    nn::Tensor predict(const nn::Tensor &h_t, const nn::Tensor &positions, std::span<const std::size_t> steps) const;

    bool operator==(const Denoiser &) const = default;

private:
    struct Layer
    {
        std::size_t w, b, p, c, q, d;
        bool operator==(const Layer &) const = default;
    };

    DenoiserConfig cfg_;
    nn::ParameterSet params_;
    std::vector<Layer> layers_;
    std::vector<std::size_t> embed_ids_; // (w, b) per position embedding layer
    std::size_t out_w_ = 0;
    std::size_t out_b_ = 0;
};

// Sinusoidal features of t / T, [B, n_features].
nn::Tensor time_features(std::span<const std::size_t> steps, std::size_t total, std::size_t n_features);

// psi(x/R): [B, 3 (1 + 2 octaves)].
nn::Tensor position_features(const nn::Tensor &positions, double radius, std::size_t octaves);

// [B, 3] tensor of raw coordinates.
nn::Tensor position_tensor(std::span<const channel::Position> positions);

// H_t = sqrt(alpha_bar[t]) H_0 + sqrt(1 - alpha_bar[t]) N. Throws for t > T or shape mismatch.
nn::Tensor forward_noise(const nn::Tensor &h0, std::size_t t, const nn::Tensor &noise, const NoiseSchedule &sched);

// Deterministic DDIM update from step t to step s < t given a noise estimate:
//   H_s = sqrt(1 - ab[s]) S + sqrt(ab[s]) (H_t - sqrt(1 - ab[t]) S) / sqrt(ab[t]).
// Throws std::invalid_argument for t = 0, t > T or s >= t.
nn::Tensor ddim_update(const nn::Tensor &h_t, const nn::Tensor &estimate, std::size_t t, std::size_t s,
                       const NoiseSchedule &sched);

// One model-driven step t -> s (default t - 1) for a batch of rows.
nn::Tensor ddim_step(const nn::Tensor &h_t, std::size_t t, const nn::Tensor &positions, const Denoiser &model,
                     const NoiseSchedule &sched, std::size_t s);
nn::Tensor ddim_step(const nn::Tensor &h_t, std::size_t t, const nn::Tensor &positions, const Denoiser &model,
                     const NoiseSchedule &sched);

// Visited steps for a sampler with `count` updates: T = t_count > ... > t_0 = 0.
std::vector<std::size_t> sampling_steps(std::size_t total, std::size_t count);

// Deterministic sampling for each position. Row i starts from standard normal
// noise drawn from (seed, i), so results do not depend on batching.
// num_steps = 0 uses all T steps. Returns [B, 2 N_r N_t].
nn::Tensor sample(const Denoiser &model, const NoiseSchedule &sched, std::span<const channel::Position> positions,
                  std::uint64_t seed, std::size_t num_steps = 0, std::size_t batch_size = 128);

// Training examples: channels [N, 2 N_r N_t] (frobenius-normalized beamspace,
// real view) and positions [N, 3].
struct TrainingSet
{
    nn::Tensor channels;
    nn::Tensor positions;

    std::size_t size() const { return channels.empty() ? 0 : channels.dim(0); }
};

struct TrainConfig
{
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    double ema_rate = 0.999;          // consistency target decay
    double divergence_factor = 1e3;   // abort when the loss exceeds this multiple of the first epoch
};

enum class ModelKind : std::uint8_t
{
    cddim,
    consistency,
};

// Resumable training state. For consistency training `target` holds the
// exponential moving average parameters.
struct TrainState
{
    ModelKind kind = ModelKind::cddim;
    NoiseSchedule schedule;
    Denoiser model;
    Denoiser target;
    nn::AdamState adam;
    std::size_t epoch = 0;
    std::vector<double> losses; // mean per-entry squared error, one per epoch

    bool operator==(const TrainState &) const = default;
};

class DivergenceError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

TrainState init_training(ModelKind kind, const DenoiserConfig &model_cfg, const NoiseSchedule &sched,
                         const TrainConfig &cfg);

// Consistency training initialized from a trained noise estimator.
TrainState warm_start_consistency(const TrainState &source, const TrainConfig &cfg);

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// Runs epochs until state.epoch == cfg.epochs. Each epoch draws its shuffle,
// steps and noise from (cfg.seed, epoch), so a resumed run matches an
// uninterrupted one. Throws std::invalid_argument for an empty or mis-shaped
// set and DivergenceError on a non-finite or exploding loss.
void train(TrainState &state, const TrainingSet &data, const TrainConfig &cfg, const EpochCallback &on_epoch = {});

void save_checkpoint(const std::filesystem::path &path, const TrainState &state);
TrainState load_checkpoint(const std::filesystem::path &path);

} // namespace chanforge::diffusion

#endif
