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

#include "chanforge/channelsim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace chanforge::channel
{

namespace
{

constexpr double pi = std::numbers::pi;
constexpr double speed_of_light = 299792458.0;

double wrap_angle(double a)
{
    const double w = a - 2.0 * pi * std::floor((a + pi) / (2.0 * pi));
    return w >= pi ? w - 2.0 * pi : w;
}

bool is_power_of_two(std::size_t n)
{
    return n != 0 && (n & (n - 1)) == 0;
}

std::uint64_t position_key(const Position &p, std::uint64_t seed)
{
    std::uint64_t h = mix64(seed ^ 0x706f736974696f6eULL);
    for (double v : {p.x1, p.x2, p.x3})
        h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    return h;
}

double unit_from_bits(std::uint64_t bits)
{
    return double(bits >> 11) * 0x1.0p-53;
}

CVector ula_response(double phase_step, std::size_t n)
{
    CVector a(static_cast<Eigen::Index>(n));
    const double norm = 1.0 / std::sqrt(double(n));
    for (std::size_t k = 0; k < n; ++k)
        a(Eigen::Index(k)) = std::polar(norm, double(k) * phase_step);
    return a;
}

} // namespace

double Position::planar_range() const
{
    return std::hypot(x1, x2);
}

double Position::bearing() const
{
    return std::atan2(x2, x1);
}

double distance(const Position &a, const Position &b)
{
    const double dx = a.x1 - b.x1, dy = a.x2 - b.x2, dz = a.x3 - b.x3;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool PathSet::operator==(const PathSet &other) const
{
    if (los_index != other.los_index || paths.size() != other.paths.size())
        return false;
    for (std::size_t i = 0; i < paths.size(); ++i)
    {
        const Path &a = paths[i], &b = other.paths[i];
        if (a.gain != b.gain || a.aoa_az != b.aoa_az || a.aoa_el != b.aoa_el || a.aod_az != b.aod_az ||
            a.aod_el != b.aod_el)
            return false;
    }
    return true;
}

bool BeamspaceChannel::operator==(const BeamspaceChannel &other) const
{
    return hv.rows() == other.hv.rows() && hv.cols() == other.hv.cols() && hv == other.hv;
}

std::string to_string(const ArrayConfig &array)
{
    if (array.geometry == ArrayGeometry::ula)
        return "ula" + std::to_string(array.horizontal);
    return "upa" + std::to_string(array.horizontal) + "x" + std::to_string(array.vertical);
}

std::string to_string(Normalization mode)
{
    switch (mode)
    {
    case Normalization::none: return "none";
    case Normalization::frobenius: return "frobenius";
    case Normalization::peak: return "peak";
    }
    return "unknown";
}

Normalization parse_normalization(const std::string &text)
{
    if (text == "none")
        return Normalization::none;
    if (text == "frobenius")
        return Normalization::frobenius;
    if (text == "peak")
        return Normalization::peak;
    throw std::invalid_argument("unknown normalization mode '" + text + "'");
}

double SceneConfig::wavelength() const
{
    return speed_of_light / carrier_hz;
}

void SceneConfig::validate() const
{
    auto check_array = [](const ArrayConfig &a, const char *which) {
        if (!is_power_of_two(a.horizontal) || !is_power_of_two(a.vertical))
            throw std::invalid_argument(std::string("SceneConfig: ") + which +
                                        " array dimensions must be powers of two");
        if (a.geometry == ArrayGeometry::ula && a.vertical != 1)
            throw std::invalid_argument(std::string("SceneConfig: ") + which + " ULA must have vertical == 1");
    };
    check_array(tx, "tx");
    check_array(rx, "rx");
    if (!(radius > 0.0) || !(min_range >= 0.0) || !(min_range < radius))
        throw std::invalid_argument("SceneConfig: need 0 <= min_range < radius");
    if (!(sector_half_width > 0.0) || sector_half_width > pi)
        throw std::invalid_argument("SceneConfig: sector half-width must be in (0, pi]");
    if (!(ue_height_min > 0.0) || ue_height_max < ue_height_min)
        throw std::invalid_argument("SceneConfig: UE heights must satisfy 0 < min <= max");
    if (l_max < 1 || num_scatterers + 1 < l_max)
        throw std::invalid_argument("SceneConfig: need 1 <= l_max <= num_scatterers + 1");
    if (!(carrier_hz > 0.0))
        throw std::invalid_argument("SceneConfig: carrier frequency must be positive");
    if (!(k_rician > 1.0))
        throw std::invalid_argument("SceneConfig: k_rician must exceed 1");
}

std::uint64_t SceneConfig::hash() const
{
    std::ostringstream os;
    os << std::hexfloat << to_string(tx) << '|' << to_string(rx) << '|' << radius << '|' << min_range << '|'
       << sector_half_width << '|' << bs_height << '|' << ue_height_min << '|' << ue_height_max << '|' << l_max
       << '|' << num_scatterers << '|' << carrier_hz << '|' << k_rician << '|' << scene_seed;
    return mix64(hash_string(os.str()));
}

std::vector<Position> scatterers(const SceneConfig &cfg)
{
    Rng rng = make_rng(cfg.scene_seed, "scatterers");
    std::uniform_real_distribution<double> bearing(-pi / 2.0, pi / 2.0);
    std::uniform_real_distribution<double> range(0.3 * cfg.radius, 1.3 * cfg.radius);
    std::uniform_real_distribution<double> height(2.0, 25.0);
    std::vector<Position> out;
    out.reserve(cfg.num_scatterers);
    for (std::size_t s = 0; s < cfg.num_scatterers; ++s)
    {
        const double b = bearing(rng);
        const double r = range(rng);
        out.push_back({r * std::cos(b), r * std::sin(b), height(rng)});
    }
    return out;
}

PathSet sample_paths(const Position &pos, const SceneConfig &cfg)
{
    cfg.validate();
    if (!(pos.x3 > 0.0) || !(pos.planar_range() <= cfg.radius) || !std::isfinite(pos.x1) || !std::isfinite(pos.x2))
        throw std::invalid_argument("sample_paths: position outside the scene");

    const double lambda = cfg.wavelength();
    const Position bs{0.0, 0.0, cfg.bs_height};
    const std::uint64_t key = position_key(pos, cfg.scene_seed);
    const std::size_t l_min = std::min<std::size_t>(3, cfg.l_max);
    const std::size_t n_paths = l_min + std::size_t(mix64(key) % (cfg.l_max - l_min + 1));
    const double orientation = -pi + 2.0 * pi * unit_from_bits(mix64(key + 1));

    auto departure = [&](const Position &to, double &az, double &el) {
        az = wrap_angle(std::atan2(to.x2 - bs.x2, to.x1 - bs.x1));
        el = std::atan2(to.x3 - bs.x3, std::hypot(to.x1 - bs.x1, to.x2 - bs.x2));
    };
    auto arrival = [&](const Position &from, double &az, double &el) {
        az = wrap_angle(std::atan2(from.x2 - pos.x2, from.x1 - pos.x1) - orientation);
        el = std::atan2(from.x3 - pos.x3, std::hypot(from.x1 - pos.x1, from.x2 - pos.x2));
    };

    PathSet set;
    set.los_index = 0;
    Path los;
    const double d_los = distance(bs, pos);
    los.gain = std::polar(lambda / (4.0 * pi * d_los), wrap_angle(-2.0 * pi * d_los / lambda));
    departure(pos, los.aod_az, los.aod_el);
    arrival(bs, los.aoa_az, los.aoa_el);
    set.paths.push_back(los);

    const auto scat = scatterers(cfg);
    std::vector<std::size_t> order(scat.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> length(scat.size());
    for (std::size_t s = 0; s < scat.size(); ++s)
        length[s] = distance(bs, scat[s]) + distance(scat[s], pos);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return length[a] < length[b]; });

    Rng props = make_rng(cfg.scene_seed, "scatterer-properties");
    std::uniform_real_distribution<double> reflect(0.3, 0.9);
    std::uniform_real_distribution<double> phase(-pi, pi);
    std::vector<double> reflection(scat.size()), offset(scat.size());
    for (std::size_t s = 0; s < scat.size(); ++s)
    {
        reflection[s] = reflect(props);
        offset[s] = phase(props);
    }

    const double cap = std::abs(los.gain) / cfg.k_rician;
    for (std::size_t i = 0; i + 1 < n_paths; ++i)
    {
        const std::size_t s = order[i];
        Path p;
        const double amp = std::min(cap, reflection[s] * lambda / (4.0 * pi * length[s]));
        p.gain = std::polar(amp, wrap_angle(offset[s] - 2.0 * pi * length[s] / lambda));
        departure(scat[s], p.aod_az, p.aod_el);
        arrival(scat[s], p.aoa_az, p.aoa_el);
        set.paths.push_back(p);
    }
    return set;
}

CVector steering_vector(double az, double el, const ArrayConfig &array)
{
    if (array.size() == 0)
        throw std::invalid_argument("steering_vector: empty array");
    const CVector h = ula_response(pi * std::sin(az), array.horizontal);
    if (array.geometry == ArrayGeometry::ula)
        return h;
    const CVector v = ula_response(pi * std::sin(el), array.vertical);
    CVector out(static_cast<Eigen::Index>(array.size()));
    for (Eigen::Index i = 0; i < h.size(); ++i)
        for (Eigen::Index j = 0; j < v.size(); ++j)
            out(i * v.size() + j) = h(i) * v(j);
    return out;
}

ChannelMatrix assemble_channel(const PathSet &paths, const SceneConfig &cfg)
{
    ChannelMatrix out{CMatrix::Zero(Eigen::Index(cfg.n_r()), Eigen::Index(cfg.n_t()))};
    for (const Path &p : paths.paths)
    {
        const CVector ar = steering_vector(p.aoa_az, p.aoa_el, cfg.rx);
        const CVector at = steering_vector(p.aod_az, p.aod_el, cfg.tx);
        out.h.noalias() += p.gain * ar * at.adjoint();
    }
    return out;
}

CMatrix dft_matrix(std::size_t n)
{
    CMatrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const double norm = 1.0 / std::sqrt(double(n));
    const auto half = static_cast<long long>(n / 2);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < n; ++k)
        {
            // Reduce the phase index exactly before converting to radians.
            const long long idx = (static_cast<long long>(m) * (static_cast<long long>(k) - half)) %
                                  static_cast<long long>(n);
            a(Eigen::Index(m), Eigen::Index(k)) = std::polar(norm, 2.0 * pi * double(idx) / double(n));
        }
    return a;
}

std::size_t dft_grid_index(double az, std::size_t n)
{
    const auto nn = static_cast<long long>(n);
    const long long offset = std::llround(double(n) * std::sin(az) / 2.0);
    return std::size_t(((offset + nn / 2) % nn + nn) % nn);
}

BeamspaceChannel to_beamspace(const ChannelMatrix &h)
{
    const CMatrix ar = dft_matrix(std::size_t(h.h.rows()));
    const CMatrix at = dft_matrix(std::size_t(h.h.cols()));
    return {ar.adjoint() * h.h * at};
}

ChannelMatrix from_beamspace(const BeamspaceChannel &hv)
{
    const CMatrix ar = dft_matrix(hv.n_r());
    const CMatrix at = dft_matrix(hv.n_t());
    return {ar * hv.hv * at.adjoint()};
}

BeamspaceChannel normalize(const BeamspaceChannel &hv, Normalization mode)
{
    if (mode == Normalization::none)
        return hv;
    const double fro = hv.hv.norm();
    if (!(fro > 0.0))
        throw std::invalid_argument("normalize: zero channel");
    if (mode == Normalization::frobenius)
        return {hv.hv * (std::sqrt(double(hv.hv.size())) / fro)};
    const double peak = hv.hv.cwiseAbs().maxCoeff();
    BeamspaceChannel out{hv.hv / peak};
    return out;
}

BeamspaceChannel simulate_beamspace(const Position &pos, const SceneConfig &cfg, Normalization mode)
{
    return normalize(to_beamspace(assemble_channel(sample_paths(pos, cfg), cfg)), mode);
}

std::vector<Position> sample_positions(const SceneConfig &cfg, std::size_t count, Rng &rng)
{
    cfg.validate();
    std::uniform_real_distribution<double> r2(cfg.min_range * cfg.min_range, cfg.radius * cfg.radius);
    std::uniform_real_distribution<double> az(-cfg.sector_half_width, cfg.sector_half_width);
    std::uniform_real_distribution<double> height(cfg.ue_height_min, cfg.ue_height_max);
    std::vector<Position> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
    {
        const double r = std::min(std::sqrt(r2(rng)), cfg.radius);
        const double b = az(rng);
        out.push_back({r * std::cos(b), r * std::sin(b), height(rng)});
    }
    return out;
}

std::vector<double> to_real(const CMatrix &m)
{
    const std::size_t rows = std::size_t(m.rows()), cols = std::size_t(m.cols()), plane = rows * cols;
    std::vector<double> out(2 * plane);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
        {
            const Complex v = m(Eigen::Index(r), Eigen::Index(c));
            out[r * cols + c] = v.real();
            out[plane + r * cols + c] = v.imag();
        }
    return out;
}

CMatrix from_real(std::span<const double> data, std::size_t n_r, std::size_t n_t)
{
    const std::size_t plane = n_r * n_t;
    if (data.size() != 2 * plane)
        throw std::invalid_argument("from_real: expected 2 x N_r x N_t values");
    CMatrix m(static_cast<Eigen::Index>(n_r), static_cast<Eigen::Index>(n_t));
    for (std::size_t r = 0; r < n_r; ++r)
        for (std::size_t c = 0; c < n_t; ++c)
            m(Eigen::Index(r), Eigen::Index(c)) = Complex(data[r * n_t + c], data[plane + r * n_t + c]);
    return m;
}

} // namespace chanforge::channel
