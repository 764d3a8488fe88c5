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

#ifndef CHANFORGE_TOOLS_APP_HPP
#define CHANFORGE_TOOLS_APP_HPP

#include "chanforge/channelsim.hpp"
#include "chanforge/diffusion.hpp"
#include "chanforge/downstream_beam.hpp"
#include "chanforge/downstream_compress.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace chanforge::app
{

enum ExitCode : int
{
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_missing_input = 3,
    exit_divergence = 4,
};

class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class MissingInput : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct DataSection
{
    std::size_t n_train = 1000;
    std::size_t n_test = 500;
    channel::Normalization normalization = channel::Normalization::frobenius;
    std::uint64_t train_position_seed = 0; // 0 derives the stream from the run seed
    std::uint64_t test_position_seed = 0;
};

struct TrainSection
{
    std::string data = "train.chds";
    std::size_t epochs = 800;
    std::size_t consistency_epochs = 150;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double consistency_learning_rate = 1e-4;
    double ema_rate = 0.999;
    double divergence_factor = 1e3;
};

struct AugmentSection
{
    std::string data = "train.chds";
    std::string checkpoint = "cddim.ckpt";
    std::size_t n_aug = 4000;
    double snr_db = 10.0;
    std::size_t num_steps = 0; // 0 runs every step of the schedule
};

struct PeaksSection
{
    std::string train = "train.chds";
    std::string test = "test.chds";
    std::string cddim_checkpoint = "cddim.ckpt";
    std::string consistency_checkpoint = "consistency.ckpt";
    std::vector<std::string> methods{"reference", "cddim", "consistency", "gaussian", "nearest"};
    std::size_t d_max = 0;             // resolved to N_t - 1 when absent
    std::size_t consistency_steps = 0; // resolved to T / 8 when absent
};

struct CompressSection
{
    std::vector<std::string> datasets; // name:path; absent selects the training set and existing aug_* files
    std::string test = "test.chds";
    std::string validation;            // empty validates on each training set
    compress::CompressorConfig model;
    std::size_t epochs = 500;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t restarts = 1;
};

struct BeamSection
{
    std::string train = "train.chds";
    std::string test = "test.chds";
    std::vector<std::size_t> n_probe{16};
    std::vector<std::string> methods{"bae", "bae_random", "mrt_mrc", "dft_egc", "genie_dft", "exhaustive"};
    std::size_t hidden = 128;
    std::size_t depth = 2;
    std::size_t epochs = 400;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double tx_dbm = 35.0;
    double noise_dbm = -81.0;
    bool noisy_training = false;
    std::size_t oversampling = 2;
};

struct RunConfig
{
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";
    channel::SceneConfig scene;
    DataSection data;
    std::size_t steps = 64;
    double beta_min = 1e-4;
    double beta_max = 0.08;
    diffusion::DenoiserConfig model;
    TrainSection train;
    AugmentSection augment;
    PeaksSection peaks;
    CompressSection compress;
    BeamSection beam;

    std::vector<std::string> echo; // effective "section.key=value" lines

    std::filesystem::path resolve(const std::string &path) const;
    diffusion::NoiseSchedule schedule() const;
    diffusion::TrainConfig train_config(std::size_t epochs) const;
};

// Reads a sectioned key=value file. Unknown keys, malformed values and
// violated invariants raise ConfigError. CHANFORGE_SEED, when set, replaces
// run.seed.
RunConfig load_config(const std::filesystem::path &path);
RunConfig parse_config(std::istream &in);

enum class TrainMode
{
    cddim,
    consistency,
};

struct TrainOptions
{
    TrainMode mode = TrainMode::cddim;
    std::string init;   // cDDIM checkpoint for the consistency warm start
    bool resume = false;
};

void cmd_gen_data(const RunConfig &cfg, std::ostream &log);
void cmd_train(const RunConfig &cfg, const TrainOptions &opts, std::ostream &log);
void cmd_augment(const RunConfig &cfg, const std::string &method, std::ostream &log);
void cmd_eval(const RunConfig &cfg, const std::string &task, std::ostream &log);

} // namespace chanforge::app

#endif
