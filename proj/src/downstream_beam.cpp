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

#include "chanforge/downstream_beam.hpp"

#include "chanforge/diffusion.hpp"
#include "chanforge/io.hpp"
#include "chanforge/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace chanforge::beam
{

using channel::Complex;
using nn::Graph;
using nn::NodeId;
using nn::Tensor;

namespace
{

constexpr io::Magic bae_magic{'C', 'F', 'B', 'A'};
constexpr std::uint32_t bae_version = 1;
constexpr double modulus_floor = 1e-24;

CMatrix axis_grid(std::size_t n, std::size_t oversampling)
{
    const std::size_t count = n * oversampling;
    CMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
    const double norm = 1.0 / std::sqrt(double(n));
    for (std::size_t k = 0; k < count; ++k)
    {
        const double u = 2.0 * (double(k) - double(count) / 2.0) / double(count);
        for (std::size_t m = 0; m < n; ++m)
            out(Eigen::Index(m), Eigen::Index(k)) = std::polar(norm, std::numbers::pi * double(m) * u);
    }
    return out;
}

Tensor gather_rows(const Tensor &src, std::span<const std::size_t> rows)
{
    const std::size_t width = src.dim(1);
    Tensor out({rows.size(), width});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(src.data().begin() + std::ptrdiff_t(rows[i] * width), width,
                    out.data().begin() + std::ptrdiff_t(i * width));
    return out;
}

CVector column_vector(const Tensor &re, const Tensor &im)
{
    CVector v(Eigen::Index(re.size()));
    for (std::size_t i = 0; i < re.size(); ++i)
        v(Eigen::Index(i)) = Complex(re[i], im[i]);
    return v;
}

// Element-normalized copy of a real/imaginary pair: every entry has modulus 1/sqrt(n).
CMatrix element_normalize(const Tensor &re, const Tensor &im, std::size_t rows, std::size_t cols)
{
    CMatrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const double scale = 1.0 / std::sqrt(double(rows));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
        {
            const Complex v(re.at(r, c), im.at(r, c));
            const double m = std::abs(v);
            out(Eigen::Index(r), Eigen::Index(c)) = m > 0.0 ? v / m * scale : Complex(scale, 0.0);
        }
    return out;
}

void check_channel(const CMatrix &h)
{
    if (h.size() == 0)
        throw std::invalid_argument("empty channel");
}

} // namespace

Codebook dft_codebook(const channel::ArrayConfig &array, std::size_t oversampling)
{
    if (array.size() == 0 || oversampling == 0)
        throw std::invalid_argument("dft_codebook: empty array or zero oversampling");
    const CMatrix h = axis_grid(array.horizontal, oversampling);
    if (array.geometry == channel::ArrayGeometry::ula)
        return {h};
    const CMatrix v = axis_grid(array.vertical, oversampling);
    CMatrix out(h.rows() * v.rows(), h.cols() * v.cols());
    for (Eigen::Index a = 0; a < h.cols(); ++a)
        for (Eigen::Index b = 0; b < v.cols(); ++b)
            for (Eigen::Index i = 0; i < h.rows(); ++i)
                for (Eigen::Index j = 0; j < v.rows(); ++j)
                    out(i * v.rows() + j, a * v.cols() + b) = h(i, a) * v(j, b);
    return {out};
}

double dbm_to_watt(double dbm)
{
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

double to_db(double linear)
{
    return 10.0 * std::log10(linear);
}

void ProbingConfig::validate() const
{
    if (n_probe == 0 || !(tx_power_w > 0.0) || !(noise_power_w > 0.0))
        throw std::invalid_argument("ProbingConfig: need n_probe >= 1 and positive powers");
}

std::vector<double> probe_measurements(const CMatrix &h, const CMatrix &w, const CMatrix &f, double tx_power_w,
                                       double noise_power_w, std::uint64_t seed)
{
    if (w.rows() != h.rows() || f.rows() != h.cols() || w.cols() != f.cols())
        throw std::invalid_argument("probe_measurements: dimension mismatch");
    if (!(tx_power_w >= 0.0) || !(noise_power_w >= 0.0))
        throw std::invalid_argument("probe_measurements: negative power");
    const double amp = std::sqrt(tx_power_w);
    const double sd = std::sqrt(noise_power_w / 2.0);
    std::vector<double> z(std::size_t(w.cols()));
    for (Eigen::Index k = 0; k < w.cols(); ++k)
    {
        Complex y = amp * w.col(k).dot(h * f.col(k));
        if (noise_power_w > 0.0)
        {
            Rng rng = make_rng(seed, "probe-noise", std::uint64_t(k));
            std::normal_distribution<double> normal(0.0, sd);
            CVector n(h.rows());
            for (Eigen::Index r = 0; r < n.size(); ++r)
            {
                const double re = normal(rng);
                const double im = normal(rng);
                n(r) = Complex(re, im);
            }
            y += w.col(k).dot(n);
        }
        z[std::size_t(k)] = std::norm(y);
    }
    return z;
}

double beam_gain(const CMatrix &h, const BeamPair &beams)
{
    return std::norm(beams.v_r.dot(h * beams.v_t));
}

void BaeConfig::validate() const
{
    if (n_r == 0 || n_t == 0 || n_probe == 0 || hidden == 0 || depth == 0)
        throw std::invalid_argument("BaeConfig: sizes must be positive");
}

BaeModel::BaeModel(const BaeConfig &cfg, std::uint64_t seed) : cfg_(cfg)
{
    cfg_.validate();
    Rng rng = make_rng(seed, "bae-init");
    std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
    auto random_phases = [&](std::size_t rows, std::size_t cols) {
        Tensor re({rows, cols}), im({rows, cols});
        for (std::size_t i = 0; i < re.size(); ++i)
        {
            const double p = phase(rng);
            re[i] = std::cos(p);
            im[i] = std::sin(p);
        }
        return std::pair{re, im};
    };
    auto [wr, wi] = random_phases(cfg_.n_r, cfg_.n_probe);
    auto [fr, fi] = random_phases(cfg_.n_t, cfg_.n_probe);
    probing_ids_ = {params_.add("probe.w_re", wr), params_.add("probe.w_im", wi), params_.add("probe.f_re", fr),
                    params_.add("probe.f_im", fi)};
    renormalize_probing();

    std::size_t fan_in = cfg_.n_probe;
    for (std::size_t l = 0; l < cfg_.depth; ++l)
    {
        const std::string tag = "synth.layer" + std::to_string(l) + ".";
        hidden_ids_.push_back(params_.add(tag + "w", nn::glorot_uniform(fan_in, cfg_.hidden, rng)));
        hidden_ids_.push_back(params_.add(tag + "b", Tensor({cfg_.hidden})));
        fan_in = cfg_.hidden;
    }
    rx_w_ = params_.add("synth.rx.w", nn::glorot_uniform(cfg_.hidden, 2 * cfg_.n_r, rng));
    rx_b_ = params_.add("synth.rx.b", Tensor({2 * cfg_.n_r}));
    tx_w_ = params_.add("synth.tx.w", nn::glorot_uniform(cfg_.hidden, 2 * cfg_.n_t, rng));
    tx_b_ = params_.add("synth.tx.b", Tensor({2 * cfg_.n_t}));
}

CMatrix BaeModel::sensing_matrix() const
{
    return element_normalize(params_[probing_ids_[0]], params_[probing_ids_[1]], cfg_.n_r, cfg_.n_probe);
}

CMatrix BaeModel::probing_matrix() const
{
    return element_normalize(params_[probing_ids_[2]], params_[probing_ids_[3]], cfg_.n_t, cfg_.n_probe);
}

void BaeModel::renormalize_probing()
{
    auto project = [&](std::size_t re_id, std::size_t im_id, const CMatrix &m) {
        Tensor &re = params_[re_id];
        Tensor &im = params_[im_id];
        for (std::size_t r = 0; r < re.dim(0); ++r)
            for (std::size_t c = 0; c < re.dim(1); ++c)
            {
                re.at(r, c) = m(Eigen::Index(r), Eigen::Index(c)).real();
                im.at(r, c) = m(Eigen::Index(r), Eigen::Index(c)).imag();
            }
    };
    const CMatrix w = sensing_matrix();
    const CMatrix f = probing_matrix();
    project(probing_ids_[0], probing_ids_[1], w);
    project(probing_ids_[2], probing_ids_[3], f);
}

BaeModel::ComplexNode BaeModel::element_normalized(Graph &g, NodeId re, NodeId im, std::size_t n) const
{
    const NodeId mag = g.sqrt(g.add_scalar(g.add(g.square(re), g.square(im)), modulus_floor));
    const NodeId denom = g.scale(mag, std::sqrt(double(n)));
    return {g.div(re, denom), g.div(im, denom)};
}

BaeModel::ComplexNode BaeModel::synthesizer(Graph &g, NodeId z, std::size_t head_w, std::size_t head_b,
                                            std::size_t n) const
{
    auto p = [&](std::size_t id) { return g.parameter(id, params_[id]); };
    NodeId h = z;
    for (std::size_t l = 0; l < cfg_.depth; ++l)
        h = g.tanh(g.affine(h, p(hidden_ids_[2 * l]), p(hidden_ids_[2 * l + 1])));
    const NodeId out = g.affine(h, p(head_w), p(head_b));
    return element_normalized(g, g.slice(out, 0, n), g.slice(out, n, 2 * n), n);
}

NodeId BaeModel::mean_gain(Graph &g, const Tensor &h_re, const Tensor &h_im, const Tensor &noise) const
{
    const std::size_t nrt = cfg_.n_r * cfg_.n_t, np = cfg_.n_probe;
    if (h_re.rank() != 2 || h_re.dim(1) != nrt || h_im.shape() != h_re.shape())
        throw std::invalid_argument("BaeModel: channels must be [B, N_r N_t] real and imaginary planes");
    const std::size_t batch = h_re.dim(0);
    if (!noise.empty() && (noise.rank() != 2 || noise.dim(0) != batch || noise.dim(1) != 2 * np))
        throw std::invalid_argument("BaeModel: noise must be [B, 2 N_probe]");

    auto p = [&](std::size_t id) { return g.parameter(id, params_[id]); };
    const ComplexNode w = element_normalized(g, p(probing_ids_[0]), p(probing_ids_[1]), cfg_.n_r);
    const ComplexNode f = element_normalized(g, p(probing_ids_[2]), p(probing_ids_[3]), cfg_.n_t);
    // Column k of A is conj(w_k) (x) f_k, so y_k = vec(H) . A_k = w_k^H H f_k.
    const NodeId a_re = g.add(g.khatri_rao(w.re, f.re), g.khatri_rao(w.im, f.im));
    const NodeId a_im = g.sub(g.khatri_rao(w.re, f.im), g.khatri_rao(w.im, f.re));
    const NodeId hr = g.constant(h_re), hi = g.constant(h_im);
    NodeId y_re = g.sub(g.matmul(hr, a_re), g.matmul(hi, a_im));
    NodeId y_im = g.add(g.matmul(hr, a_im), g.matmul(hi, a_re));
    if (!noise.empty())
    {
        const NodeId nz = g.constant(noise);
        y_re = g.add(y_re, g.slice(nz, 0, np));
        y_im = g.add(y_im, g.slice(nz, np, 2 * np));
    }
    const NodeId z = g.add(g.square(y_re), g.square(y_im));
    const NodeId zn = g.scale(g.div_col(z, g.sum_cols(z)), double(np));

    const ComplexNode vr = synthesizer(g, zn, rx_w_, rx_b_, cfg_.n_r);
    const ComplexNode vt = synthesizer(g, zn, tx_w_, tx_b_, cfg_.n_t);
    // conj(v_r) (x) v_t per row.
    const NodeId k_re = g.add(g.row_kron(vr.re, vt.re), g.row_kron(vr.im, vt.im));
    const NodeId k_im = g.sub(g.row_kron(vr.re, vt.im), g.row_kron(vr.im, vt.re));
    const NodeId s_re = g.sum_cols(g.sub(g.mul(hr, k_re), g.mul(hi, k_im)));
    const NodeId s_im = g.sum_cols(g.add(g.mul(hr, k_im), g.mul(hi, k_re)));
    return g.mean(g.add(g.square(s_re), g.square(s_im)));
}

BeamPair BaeModel::synthesize(std::span<const double> z) const
{
    if (z.size() != cfg_.n_probe)
        throw std::invalid_argument("BaeModel: measurement vector has the wrong length");
    double total = 0.0;
    for (double v : z)
        total += v;
    Tensor zn({1, z.size()});
    for (std::size_t k = 0; k < z.size(); ++k)
        zn[k] = total > 0.0 ? z[k] / total * double(z.size()) : 1.0;
    Graph g;
    const NodeId in = g.constant(zn);
    const ComplexNode vr = synthesizer(g, in, rx_w_, rx_b_, cfg_.n_r);
    const ComplexNode vt = synthesizer(g, in, tx_w_, tx_b_, cfg_.n_t);
    return {column_vector(g.value(vr.re), g.value(vr.im)), column_vector(g.value(vt.re), g.value(vt.im))};
}

std::vector<CMatrix> spatial_channels(const augment::ChannelDataset &ds)
{
    std::vector<CMatrix> out;
    out.reserve(ds.size());
    for (const auto &r : ds.records)
        out.push_back(channel::from_beamspace(r.channel).h);
    return out;
}

BaeTrainResult train_bae(const augment::ChannelDataset &train, const ProbingConfig &probing, const BaeConfig &model_cfg,
                         const BaeTrainConfig &cfg, const std::function<void(std::size_t, double)> &on_epoch)
{
    probing.validate();
    model_cfg.validate();
    train.validate();
    if (train.n_r() != model_cfg.n_r || train.n_t() != model_cfg.n_t || model_cfg.n_probe != probing.n_probe)
        throw std::invalid_argument("train_bae: dataset or probing config does not match the model");
    if (cfg.batch_size == 0 || !(cfg.learning_rate > 0.0))
        throw std::invalid_argument("train_bae: invalid configuration");

    const std::size_t n = train.size(), nrt = model_cfg.n_r * model_cfg.n_t, np = model_cfg.n_probe;
    Tensor h_re({n, nrt}), h_im({n, nrt});
    const auto spatial = spatial_channels(train);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < model_cfg.n_r; ++r)
            for (std::size_t t = 0; t < model_cfg.n_t; ++t)
            {
                const Complex v = spatial[i](Eigen::Index(r), Eigen::Index(t));
                h_re.at(i, r * model_cfg.n_t + t) = v.real();
                h_im.at(i, r * model_cfg.n_t + t) = v.imag();
            }

    BaeTrainResult result{BaeModel(model_cfg, cfg.seed), {}};
    BaeModel &model = result.model;
    nn::AdamState adam = nn::make_adam(model.params(), cfg.learning_rate);
    std::vector<Tensor> grads = model.params().zeros();
    const double noise_sd = std::sqrt(probing.noise_power_w / probing.tx_power_w / 2.0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch)
    {
        Rng rng = make_rng(cfg.seed, "bae-epoch", epoch);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        std::normal_distribution<double> normal(0.0, noise_sd);
        double total = 0.0;
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size)
        {
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const std::span<const std::size_t> rows(order.data() + begin, end - begin);
            Tensor noise;
            if (cfg.noisy_measurements)
            {
                noise = Tensor({rows.size(), 2 * np});
                for (auto &v : noise.storage())
                    v = normal(rng);
            }
            Graph g;
            const NodeId gain = model.mean_gain(g, gather_rows(h_re, rows), gather_rows(h_im, rows), noise);
            const double value = g.value(gain)[0];
            if (!std::isfinite(value))
                throw diffusion::DivergenceError("beam alignment training diverged at epoch " + std::to_string(epoch));
            const NodeId loss = g.scale(gain, -1.0);
            for (auto &gr : grads)
                gr.fill(0.0);
            g.backprop_into(loss, grads);
            if (!model_cfg.learn_probing)
                for (std::size_t id : model.probing_ids())
                    grads[id].fill(0.0);
            nn::adam_step(adam, model.params().tensors(), grads);
            model.renormalize_probing();
            total += value * double(rows.size());
        }
        const double objective = total / double(n);
        if (!std::isfinite(objective))
            throw diffusion::DivergenceError("beam alignment training diverged at epoch " + std::to_string(epoch));
        result.objective.push_back(objective);
        if (on_epoch)
            on_epoch(epoch + 1, objective);
    }
    return result;
}

double avg_snr_db(const BeamSelector &selector, std::span<const CMatrix> channels, double tx_power_w,
                  double noise_power_w)
{
    if (channels.empty())
        throw std::invalid_argument("avg_snr_db: empty test set");
    if (!(noise_power_w > 0.0))
        throw std::invalid_argument("avg_snr_db: noise power must be positive");
    double sum = 0.0;
    for (std::size_t i = 0; i < channels.size(); ++i)
        sum += tx_power_w * beam_gain(channels[i], selector(channels[i], i)) / noise_power_w;
    return to_db(sum / double(channels.size()));
}

BeamSelector bae_selector(const BaeModel &model, const ProbingConfig &probing)
{
    const CMatrix w = model.sensing_matrix();
    const CMatrix f = model.probing_matrix();
    return [&model, w, f, probing](const CMatrix &h, std::size_t index) {
        const auto z = probe_measurements(h, w, f, probing.tx_power_w, probing.noise_power_w,
                                          derive_seed(probing.seed, "bae-probe", index));
        return model.synthesize(z);
    };
}

BeamPair baseline_mrt_mrc(const CMatrix &h)
{
    check_channel(h);
    if (!(h.squaredNorm() > 0.0))
        throw std::invalid_argument("baseline_mrt_mrc: zero channel");
    Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU().col(0), svd.matrixV().col(0)};
}

BeamPair baseline_exhaustive(const CMatrix &h, const Codebook &bs, const Codebook &ue, double tx_power_w,
                             double noise_power_w, std::uint64_t seed)
{
    check_channel(h);
    if (bs.size() == 0 || ue.size() == 0)
        throw std::invalid_argument("baseline_exhaustive: empty codebook");
    const double amp = std::sqrt(tx_power_w), sd = std::sqrt(noise_power_w / 2.0);
    const CMatrix response = ue.beams.adjoint() * h * bs.beams; // [ue, bs]
    double best = -1.0;
    Eigen::Index bi = 0, bj = 0;
    for (Eigen::Index j = 0; j < response.cols(); ++j)
        for (Eigen::Index i = 0; i < response.rows(); ++i)
        {
            Complex y = amp * response(i, j);
            if (noise_power_w > 0.0)
            {
                Rng rng = make_rng(seed, "exhaustive", std::uint64_t(j * response.rows() + i));
                std::normal_distribution<double> normal(0.0, sd);
                const double re = normal(rng);
                const double im = normal(rng);
                y += Complex(re, im);
            }
            const double m = std::norm(y);
            if (m > best)
            {
                best = m;
                bi = i;
                bj = j;
            }
        }
    return {ue.beams.col(bi), bs.beams.col(bj)};
}

BeamPair baseline_genie_dft(const CMatrix &h, const Codebook &bs, const Codebook &ue)
{
    return baseline_exhaustive(h, bs, ue, 1.0, 0.0, 0);
}

BeamPair baseline_dft_egc(const CMatrix &h, const Codebook &bs)
{
    check_channel(h);
    if (bs.size() == 0)
        throw std::invalid_argument("baseline_dft_egc: empty codebook");
    const double scale = 1.0 / std::sqrt(double(h.rows()));
    double best = -1.0;
    BeamPair out;
    for (Eigen::Index j = 0; j < bs.beams.cols(); ++j)
    {
        const CVector g = h * bs.beams.col(j);
        CVector w(g.size());
        for (Eigen::Index r = 0; r < g.size(); ++r)
            w(r) = std::abs(g(r)) > 0.0 ? g(r) / std::abs(g(r)) * scale : Complex(scale, 0.0);
        const double m = std::norm(w.dot(g));
        if (m > best)
        {
            best = m;
            out = {w, bs.beams.col(j)};
        }
    }
    return out;
}

void save_bae(const std::filesystem::path &path, const BaeModel &model)
{
    const auto &c = model.config();
    io::ByteWriter w;
    for (std::size_t v : {c.n_r, c.n_t, c.n_probe, c.hidden, c.depth})
        w.u64(v);
    w.u8(c.learn_probing ? 1 : 0);
    w.parameters(model.params());
    io::write_container(path, bae_magic, bae_version, w.bytes());
}

BaeModel load_bae(const std::filesystem::path &path)
{
    const auto payload = io::read_container(path, bae_magic, bae_version);
    io::ByteReader r(payload);
    BaeConfig c;
    for (std::size_t *v : {&c.n_r, &c.n_t, &c.n_probe, &c.hidden, &c.depth})
        *v = r.u64();
    c.learn_probing = r.u8() != 0;
    BaeModel model;
    try
    {
        model = BaeModel(c, 0);
    }
    catch (const std::invalid_argument &e)
    {
        throw io::FormatError(std::string("beam checkpoint: ") + e.what());
    }
    r.parameters(model.params());
    r.expect_end();
    return model;
}

} // namespace chanforge::beam
