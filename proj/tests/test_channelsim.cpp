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

#include "chanforge/channelsim.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <random>

using namespace chanforge;
using namespace chanforge::channel;

namespace
{

constexpr double pi = std::numbers::pi;

CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, std::mt19937_64 &rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    CMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = Complex(n(rng), n(rng));
    return m;
}

std::size_t argmax_column(const CMatrix &m)
{
    Eigen::Index r = 0, c = 0;
    m.cwiseAbs().maxCoeff(&r, &c);
    return std::size_t(c);
}

} // namespace

TEST_SUITE("channelsim")
{

TEST_CASE("steering vector at broadside is uniform")
{
    const CVector a = steering_vector(0.0, 0.0, ArrayConfig::ula(4));
    REQUIRE(a.size() == 4);
    for (Eigen::Index k = 0; k < 4; ++k)
        CHECK(std::abs(a(k) - Complex(0.5, 0.0)) < 1e-15);
}

TEST_CASE("steering vectors have unit norm")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(-pi, pi);
    for (int i = 0; i < 200; ++i)
    {
        CHECK(std::abs(steering_vector(ang(rng), ang(rng), ArrayConfig::ula(8)).norm() - 1.0) < 1e-12);
        CHECK(std::abs(steering_vector(ang(rng), ang(rng), ArrayConfig::upa(4, 2)).norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("upa response is the kronecker product of two ula responses")
{
    const double az = 0.4, el = -0.2;
    const CVector a = steering_vector(az, el, ArrayConfig::upa(4, 2));
    const CVector h = steering_vector(az, 0.0, ArrayConfig::ula(4));
    const CVector v = steering_vector(el, 0.0, ArrayConfig::ula(2));
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 2; ++j)
            CHECK(std::abs(a(i * 2 + j) - h(i) * v(j)) < 1e-15);
}

TEST_CASE("steering vector aligns best with the nearest dft column")
{
    const std::size_t n = 8;
    const CMatrix dft = dft_matrix(n);
    const CVector a = steering_vector(pi / 6.0, 0.0, ArrayConfig::ula(n));
    const CVector corr = dft.adjoint() * a;
    Eigen::Index best = 0;
    corr.cwiseAbs().maxCoeff(&best);
    CHECK(std::size_t(best) == dft_grid_index(pi / 6.0, n));
    CHECK(dft_grid_index(pi / 6.0, n) == 2 + n / 2);
    CHECK(dft_grid_index(0.0, n) == n / 2);
}

TEST_CASE("dft matrix is unitary")
{
    for (std::size_t n : {1u, 2u, 4u, 32u})
    {
        const CMatrix a = dft_matrix(n);
        CHECK((a.adjoint() * a - CMatrix::Identity(Eigen::Index(n), Eigen::Index(n))).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("single unit path gives a rank-one channel of unit norm")
{
    SceneConfig cfg;
    PathSet ps;
    Path p;
    p.aoa_az = 0.3;
    p.aod_az = -0.7;
    ps.paths.push_back(p);
    const ChannelMatrix h = assemble_channel(ps, cfg);
    CHECK(std::abs(h.h.norm() - 1.0) < 1e-12);
    Eigen::JacobiSVD<CMatrix> svd(h.h);
    CHECK(svd.singularValues()(1) < 1e-12);
}

TEST_CASE("orthogonal paths add in power")
{
    SceneConfig cfg;
    const std::size_t nt = cfg.n_t(), nr = cfg.n_r();
    PathSet ps;
    Path a, b;
    a.gain = Complex(0.6, -0.2);
    b.gain = Complex(-0.1, 1.3);
    // On-grid angles two bins apart on both arrays.
    a.aod_az = std::asin(2.0 * 1.0 / double(nt));
    b.aod_az = std::asin(2.0 * 3.0 / double(nt));
    a.aoa_az = 0.0;
    b.aoa_az = std::asin(2.0 * 1.0 / double(nr));
    const CVector ta = steering_vector(a.aod_az, 0.0, cfg.tx), tb = steering_vector(b.aod_az, 0.0, cfg.tx);
    REQUIRE(std::abs(ta.dot(tb)) < 1e-12);
    ps.paths = {a, b};
    const double expected = std::norm(a.gain) + std::norm(b.gain);
    CHECK(std::abs(assemble_channel(ps, cfg).h.squaredNorm() - expected) < 1e-12);
}

TEST_CASE("channel rank is bounded by path count")
{
    SceneConfig cfg;
    cfg.rx = ArrayConfig::ula(8);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ang(-pi / 2, pi / 2);
    for (std::size_t l = 1; l <= 5; ++l)
    {
        PathSet ps;
        for (std::size_t i = 0; i < l; ++i)
        {
            Path p;
            p.gain = Complex(ang(rng), ang(rng));
            p.aoa_az = ang(rng);
            p.aod_az = ang(rng);
            ps.paths.push_back(p);
        }
        Eigen::JacobiSVD<CMatrix> svd(assemble_channel(ps, cfg).h);
        svd.setThreshold(1e-10);
        CHECK(std::size_t(svd.rank()) <= l);
    }
}

TEST_CASE("beamspace transform is unitary and invertible")
{
    std::mt19937_64 rng(17);
    CHECK(to_beamspace({CMatrix::Zero(4, 32)}).hv.cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 20; ++i)
    {
        const ChannelMatrix h{random_complex(4, 32, rng)};
        const BeamspaceChannel hv = to_beamspace(h);
        CHECK(std::abs(hv.hv.norm() - h.h.norm()) < 1e-10);
        CHECK((from_beamspace(hv).h - h.h).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("on-grid los path peaks in its dft column")
{
    SceneConfig cfg;
    const std::size_t nt = cfg.n_t();
    for (int m : {-5, -1, 0, 3, 7})
    {
        PathSet ps;
        Path p;
        p.aod_az = std::asin(2.0 * m / double(nt));
        p.aoa_az = 0.25;
        ps.paths.push_back(p);
        const BeamspaceChannel hv = to_beamspace(assemble_channel(ps, cfg));
        const std::size_t col = std::size_t(m + int(nt / 2));
        CHECK(argmax_column(hv.hv) == col);
        CHECK(hv.hv.col(Eigen::Index(col)).squaredNorm() > 0.999);
    }
}

TEST_CASE("normalization modes")
{
    std::mt19937_64 rng(23);
    const BeamspaceChannel hv{random_complex(4, 32, rng)};
    const BeamspaceChannel f = normalize(hv, Normalization::frobenius);
    CHECK(std::abs(f.hv.norm() - std::sqrt(128.0)) < 1e-12);
    const BeamspaceChannel p = normalize(hv, Normalization::peak);
    CHECK(p.hv.cwiseAbs().maxCoeff() == 1.0);
    CHECK(argmax_column(f.hv) == argmax_column(hv.hv));
    CHECK(argmax_column(p.hv) == argmax_column(hv.hv));
    CHECK(normalize(hv, Normalization::none) == hv);
    CHECK_THROWS_AS(normalize({CMatrix::Zero(4, 32)}, Normalization::peak), std::invalid_argument);
    CHECK(parse_normalization(to_string(Normalization::frobenius)) == Normalization::frobenius);
    CHECK_THROWS_AS(parse_normalization("max"), std::invalid_argument);
}

TEST_CASE("paths are a deterministic function of position")
{
    SceneConfig cfg;
    const Position pos{40.0, -12.0, 1.7};
    const PathSet a = sample_paths(pos, cfg);
    const PathSet b = sample_paths(pos, cfg);
    CHECK(a == b);
    CHECK(simulate_beamspace(pos, cfg, Normalization::frobenius) ==
          simulate_beamspace(pos, cfg, Normalization::frobenius));

    SceneConfig other = cfg;
    other.scene_seed = 2;
    CHECK_FALSE(sample_paths(pos, other) == a);
    CHECK(other.hash() != cfg.hash());
}

TEST_CASE("path sets satisfy structural invariants")
{
    SceneConfig cfg;
    Rng rng(5);
    for (const Position &pos : sample_positions(cfg, 500, rng))
    {
        const PathSet ps = sample_paths(pos, cfg);
        REQUIRE(ps.size() >= 3);
        REQUIRE(ps.size() <= cfg.l_max);
        REQUIRE(ps.los_index < ps.size());
        const double los = std::abs(ps.los().gain);
        for (std::size_t i = 0; i < ps.size(); ++i)
        {
            const Path &p = ps.paths[i];
            CHECK(std::abs(p.gain) > 0.0);
            for (double a : {p.aoa_az, p.aoa_el, p.aod_az, p.aod_el})
            {
                CHECK(a >= -pi);
                CHECK(a < pi);
            }
            if (i != ps.los_index)
                CHECK(los >= cfg.k_rician * std::abs(p.gain) * (1.0 - 1e-12));
        }
    }
}

TEST_CASE("broadside user has zero los departure azimuth")
{
    SceneConfig cfg;
    CHECK(sample_paths({50.0, 0.0, 1.5}, cfg).los().aod_az == 0.0);
}

TEST_CASE("positions outside the scene are rejected")
{
    SceneConfig cfg;
    CHECK_THROWS_AS(sample_paths({cfg.radius + 1.0, 0.0, 1.5}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(sample_paths({10.0, 0.0, 0.0}, cfg), std::invalid_argument);
    CHECK_NOTHROW(sample_paths({cfg.radius, 0.0, 1.5}, cfg));
}

TEST_CASE("invalid scene configurations are rejected")
{
    SceneConfig cfg;
    cfg.tx = ArrayConfig::ula(12);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SceneConfig{};
    cfg.k_rician = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_NOTHROW(SceneConfig{}.validate());
}

TEST_CASE("los peak index is monotone in bearing")
{
    SceneConfig cfg;
    const std::size_t nt = cfg.n_t();
    std::size_t previous = 0;
    for (int i = 0; i < 1000; ++i)
    {
        const double bearing = -cfg.sector_half_width + 2.0 * cfg.sector_half_width * double(i) / 999.0;
        const Position pos{60.0 * std::cos(bearing), 60.0 * std::sin(bearing), 1.5};
        PathSet ps = sample_paths(pos, cfg);
        PathSet los_only;
        los_only.paths = {ps.los()};
        const BeamspaceChannel hv = to_beamspace(assemble_channel(los_only, cfg));
        const std::size_t col = argmax_column(hv.hv);
        CHECK(col < nt);
        if (i > 0)
            CHECK(col >= previous);
        previous = col;
    }
}

TEST_CASE("beamspace peak follows the los path")
{
    SceneConfig cfg;
    const std::size_t nt = cfg.n_t();
    Rng rng(77);
    const auto positions = sample_positions(cfg, 1000, rng);
    std::size_t hits = 0;
    for (const Position &pos : positions)
    {
        const PathSet ps = sample_paths(pos, cfg);
        const BeamspaceChannel hv = to_beamspace(assemble_channel(ps, cfg));
        const auto peak = long(argmax_column(hv.hv));
        const auto grid = long(dft_grid_index(ps.los().aod_az, nt));
        const long diff = std::labs(peak - grid);
        if (std::min(diff, long(nt) - diff) <= 1)
            ++hits;
    }
    MESSAGE("los-aligned fraction: " << double(hits) / double(positions.size()));
    CHECK(hits >= 990);
}

TEST_CASE("sampled positions stay in the annular sector")
{
    SceneConfig cfg;
    Rng rng(1);
    for (const Position &p : sample_positions(cfg, 2000, rng))
    {
        CHECK(p.planar_range() >= cfg.min_range - 1e-9);
        CHECK(p.planar_range() <= cfg.radius);
        CHECK(std::abs(p.bearing()) <= cfg.sector_half_width + 1e-12);
        CHECK(p.x3 >= cfg.ue_height_min);
        CHECK(p.x3 <= cfg.ue_height_max);
    }
}

TEST_CASE("real view round trip")
{
    std::mt19937_64 rng(2);
    const CMatrix m = random_complex(4, 32, rng);
    const auto flat = to_real(m);
    REQUIRE(flat.size() == 256);
    CHECK(flat[1] == m(0, 1).real());
    CHECK(flat[128 + 33] == m(1, 1).imag());
    CHECK(from_real(flat, 4, 32) == m);
    CHECK_THROWS_AS(from_real(flat, 4, 16), std::invalid_argument);
}

}
