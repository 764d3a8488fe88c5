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

#ifndef CHANFORGE_DOWNSTREAM_BEAM_HPP
#define CHANFORGE_DOWNSTREAM_BEAM_HPP

#include "chanforge/augment.hpp"
#include "chanforge/channelsim.hpp"
#include "chanforge/numerics/graph.hpp"
#include "chanforge/numerics/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

// Beam alignment: probing measurements, a learned probing/synthesis engine
// (BAE), classical codebook baselines and the average-SNR metric.
namespace chanforge::beam
{

using channel::CMatrix;
using channel::CVector;

struct BeamPair
{
    CVector v_r; // UE combiner
    CVector v_t; // BS precoder
};

// Columns are unit-norm beams.
struct Codebook
{
    CMatrix beams;

    std::size_t size() const { return std::size_t(beams.cols()); }
};

// Factor-times oversampled DFT grid: sin-angle grid (k - n f / 2) * 2 / (n f)
// per axis; a UPA uses the Kronecker product of its two axes, matching the
// element order of channel::steering_vector.
Codebook dft_codebook(const channel::ArrayConfig &array, std::size_t oversampling = 2);

double dbm_to_watt(double dbm);
double to_db(double linear);

struct ProbingConfig
{
    std::size_t n_probe = 16;
    double tx_power_w = dbm_to_watt(35.0);
    double noise_power_w = dbm_to_watt(-81.0);
    std::uint64_t seed = 1;

    void validate() const;
};

// z_k = |sqrt(P_t) w_k^H H f_k + w_k^H n_k|^2 with n_k ~ CN(0, sigma^2 I),
// one noise draw per probe slot from (seed, k).
std::vector<double> probe_measurements(const CMatrix &h, const CMatrix &w, const CMatrix &f, double tx_power_w,
                                       double noise_power_w, std::uint64_t seed);

// |v_r^H H v_t|^2
double beam_gain(const CMatrix &h, const BeamPair &beams);

struct BaeConfig
{
    std::size_t n_r = 4;
    std::size_t n_t = 16;
    std::size_t n_probe = 16;
    std::size_t hidden = 128;
    std::size_t depth = 2;
    bool learn_probing = true; // false freezes W and F at their random initialization

    void validate() const;
    bool operator==(const BaeConfig &) const = default;
};

// Learned sensing matrix W (N_r x N_probe), probing matrix F (N_t x N_probe),
// and a synthesizer mapping normalized measurements to (v_r, v_t).
// All beams are element-normalized: every entry has modulus 1 / sqrt(n).
class BaeModel
{
public:
    BaeModel() = default;
    BaeModel(const BaeConfig &cfg, std::uint64_t seed);

    const BaeConfig &config() const { return cfg_; }
    nn::ParameterSet &params() { return params_; }
    const nn::ParameterSet &params() const { return params_; }
    const std::vector<std::size_t> &probing_ids() const { return probing_ids_; }

    CMatrix sensing_matrix() const; // W
    CMatrix probing_matrix() const; // F

    // Re-projects W and F onto the element-normalized set.
    void renormalize_probing();

    // Records the noiseless (or noisy, when `noise` is non-empty) forward pass
    // for a batch of channels given as real and imaginary planes [B, N_r N_t].
    // Returns the mean beam gain node. `noise` holds [B, 2 N_probe] samples of
    // w^H n / sqrt(P_t).
    nn::NodeId mean_gain(nn::Graph &g, const nn::Tensor &h_re, const nn::Tensor &h_im,
                         const nn::Tensor &noise = {}) const;

    BeamPair synthesize(std::span<const double> z) const;

    bool operator==(const BaeModel &) const = default;

private:
    struct ComplexNode
    {
        nn::NodeId re, im;
    };
    ComplexNode element_normalized(nn::Graph &g, nn::NodeId re, nn::NodeId im, std::size_t n) const;
    ComplexNode synthesizer(nn::Graph &g, nn::NodeId z, std::size_t head_w, std::size_t head_b,
                            std::size_t n) const;

    BaeConfig cfg_;
    nn::ParameterSet params_;
    std::vector<std::size_t> probing_ids_; // W re, W im, F re, F im
    std::vector<std::size_t> hidden_ids_;  // (w, b) per layer
    std::size_t rx_w_ = 0, rx_b_ = 0, tx_w_ = 0, tx_b_ = 0;
};

struct BaeTrainConfig
{
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    bool noisy_measurements = false;
    std::uint64_t seed = 1;
    double divergence_factor = 1e3;
};

struct BaeTrainResult
{
    BaeModel model;
    std::vector<double> objective; // mean beam gain per epoch
};

// Maximizes the mean gain |v_r^H H v_t|^2 over the training channels (the loss
// is its negative). Channels are converted to the spatial domain.
BaeTrainResult train_bae(const augment::ChannelDataset &train, const ProbingConfig &probing, const BaeConfig &model_cfg,
                         const BaeTrainConfig &cfg,
                         const std::function<void(std::size_t epoch, double gain)> &on_epoch = {});

using BeamSelector = std::function<BeamPair(const CMatrix &h, std::size_t index)>;

// 10 log10 of the mean of P_t |v_r^H H_i v_t|^2 / sigma^2. Throws for an empty set.
double avg_snr_db(const BeamSelector &selector, std::span<const CMatrix> channels, double tx_power_w,
                  double noise_power_w);

// BAE selector: probes H with the model's W and F (noise seeded by (seed, index))
// and synthesizes beams from the measurements.
BeamSelector bae_selector(const BaeModel &model, const ProbingConfig &probing);

BeamPair baseline_mrt_mrc(const CMatrix &h);
BeamPair baseline_exhaustive(const CMatrix &h, const Codebook &bs, const Codebook &ue, double tx_power_w,
                             double noise_power_w, std::uint64_t seed);
BeamPair baseline_genie_dft(const CMatrix &h, const Codebook &bs, const Codebook &ue);
BeamPair baseline_dft_egc(const CMatrix &h, const Codebook &bs);

// Spatial-domain channels of a beamspace dataset.
std::vector<CMatrix> spatial_channels(const augment::ChannelDataset &ds);

void save_bae(const std::filesystem::path &path, const BaeModel &model);
BaeModel load_bae(const std::filesystem::path &path);

} // namespace chanforge::beam

#endif
