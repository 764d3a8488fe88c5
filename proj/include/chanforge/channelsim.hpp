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

#ifndef CHANFORGE_CHANNELSIM_HPP
#define CHANFORGE_CHANNELSIM_HPP

#include "chanforge/numerics/tensor.hpp"
#include "chanforge/rng.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

// Synthetic geometric scene: base station at the origin, a fixed ring of
// virtual scatterers, and a deterministic map from user position to the
// multipath parameters of its narrowband MIMO channel.
namespace chanforge::channel
{

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct Position
{
    double x1 = 0.0; // m, planar
    double x2 = 0.0; // m, planar
    double x3 = 1.5; // m, height

    double planar_range() const;
    double bearing() const; // atan2(x2, x1)
    bool operator==(const Position &) const = default;
};

double distance(const Position &a, const Position &b);

struct Path
{
    Complex gain{1.0, 0.0};
    double aoa_az = 0.0; // radians, all angles wrapped to [-pi, pi)
    double aoa_el = 0.0;
    double aod_az = 0.0;
    double aod_el = 0.0;
};

struct PathSet
{
    std::vector<Path> paths;
    std::size_t los_index = 0;

    std::size_t size() const { return paths.size(); }
    const Path &los() const { return paths.at(los_index); }
    bool operator==(const PathSet &other) const;
};

enum class ArrayGeometry : std::uint8_t
{
    ula,
    upa,
};

// ULA: `horizontal` elements, vertical == 1. UPA: horizontal x vertical grid,
// element index = h * vertical + v.
struct ArrayConfig
{
    ArrayGeometry geometry = ArrayGeometry::ula;
    std::size_t horizontal = 1;
    std::size_t vertical = 1;

    std::size_t size() const { return horizontal * vertical; }
    static ArrayConfig ula(std::size_t n) { return {ArrayGeometry::ula, n, 1}; }
    static ArrayConfig upa(std::size_t h, std::size_t v) { return {ArrayGeometry::upa, h, v}; }
    bool operator==(const ArrayConfig &) const = default;
};

std::string to_string(const ArrayConfig &array);

struct SceneConfig
{
    ArrayConfig tx = ArrayConfig::ula(32); // base station, N_t elements
    ArrayConfig rx = ArrayConfig::ula(4);  // user, N_r elements
    double radius = 100.0;                 // m
    double min_range = 10.0;               // m, keeps users out of the near field
    double sector_half_width = std::numbers::pi / 3.0; // users sampled in |bearing| <= this
    double bs_height = 10.0;               // m
    double ue_height_min = 1.0;            // m
    double ue_height_max = 2.0;            // m
    std::size_t l_max = 6;
    std::size_t num_scatterers = 16;
    double carrier_hz = 28e9;
    double k_rician = 3.0; // LOS amplitude is at least this multiple of every NLOS amplitude
    std::uint64_t scene_seed = 1;

    std::size_t n_t() const { return tx.size(); }
    std::size_t n_r() const { return rx.size(); }
    double wavelength() const;

    // Throws std::invalid_argument when an invariant is violated.
    void validate() const;
    // Stable 64-bit fingerprint of every field.
    std::uint64_t hash() const;
    bool operator==(const SceneConfig &) const = default;
};

// Ground-truth spatial channel H (N_r x N_t).
struct ChannelMatrix
{
    CMatrix h;
};

// Beamspace image H_v = A_r^H H A_t (N_r x N_t).
struct BeamspaceChannel
{
    CMatrix hv;

    std::size_t n_r() const { return std::size_t(hv.rows()); }
    std::size_t n_t() const { return std::size_t(hv.cols()); }
    bool operator==(const BeamspaceChannel &other) const;
};

enum class Normalization : std::uint8_t
{
    none,
    frobenius, // ||H_v||_F = sqrt(N_t N_r)
    peak,      // max |entry| = 1
};

std::string to_string(Normalization mode);
Normalization parse_normalization(const std::string &text);

// Virtual scatterer positions for a scene; a pure function of the config.
std::vector<Position> scatterers(const SceneConfig &cfg);

// Deterministic multipath parameters for a user position. The LOS path comes
// from BS/UE geometry; NLOS paths bounce off the scatterers with the shortest
// total length. Throws std::invalid_argument outside the scene radius.
PathSet sample_paths(const Position &pos, const SceneConfig &cfg);

// Unit-norm array response. ULA element k has phase pi k sin(az) (half-wave
// spacing); a UPA is the Kronecker product of an azimuth and an elevation ULA.
CVector steering_vector(double az, double el, const ArrayConfig &array);

// H = sum_i gain_i a_r(aoa_i) a_t(aod_i)^H.
ChannelMatrix assemble_channel(const PathSet &paths, const SceneConfig &cfg);

// Unitary DFT on an n-point grid, columns ordered by spatial frequency
// (k - n/2) / n so that broadside sits at column n/2 and the column index
// grows monotonically with sin(angle).
CMatrix dft_matrix(std::size_t n);

// Column of dft_matrix(n) best aligned with an n-element ULA steering vector at az.
std::size_t dft_grid_index(double az, std::size_t n);

BeamspaceChannel to_beamspace(const ChannelMatrix &h);
ChannelMatrix from_beamspace(const BeamspaceChannel &hv);

// Throws std::invalid_argument for an all-zero channel.
BeamspaceChannel normalize(const BeamspaceChannel &hv, Normalization mode);

// Convenience: paths -> channel -> beamspace -> normalization.
BeamspaceChannel simulate_beamspace(const Position &pos, const SceneConfig &cfg, Normalization mode);

// Uniform over the annular sector [min_range, radius] x [-sector, sector] with
// heights uniform in [ue_height_min, ue_height_max].
std::vector<Position> sample_positions(const SceneConfig &cfg, std::size_t count, Rng &rng);

// Real view used by the networks: [2, N_r, N_t] flattened (real plane, then imaginary).
std::vector<double> to_real(const CMatrix &m);
CMatrix from_real(std::span<const double> data, std::size_t n_r, std::size_t n_t);

} // namespace chanforge::channel

#endif
