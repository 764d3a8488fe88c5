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

#include "chanforge/downstream_compress.hpp"

#include "chanforge/diffusion.hpp"
#include "chanforge/evaluation.hpp"
#include "chanforge/io.hpp"
#include "chanforge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace chanforge::compress
{

using nn::Graph;
using nn::NodeId;
using nn::Tensor;

namespace
{

constexpr io::Magic compressor_magic{'C', 'F', 'C', 'P'};
constexpr std::uint32_t compressor_version = 1;

Tensor gather_rows(const Tensor &src, std::span<const std::size_t> rows)
{
    const std::size_t width = src.dim(1);
    Tensor out({rows.size(), width});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(src.data().begin() + std::ptrdiff_t(rows[i] * width), width,
                    out.data().begin() + std::ptrdiff_t(i * width));
    return out;
}

// Per-row 1 / ||x_i||^2, [B, 1].
Tensor inverse_energy(const Tensor &x)
{
    Tensor out({x.dim(0), 1});
    for (std::size_t i = 0; i < x.dim(0); ++i)
    {
        double s = 0.0;
        for (std::size_t k = 0; k < x.dim(1); ++k)
            s += x.at(i, k) * x.at(i, k);
        if (!(s > 0.0))
            throw std::invalid_argument("compressor training: zero channel");
        out[i] = 1.0 / s;
    }
    return out;
}

// Mean over rows of ||out_i - x_i||^2 / ||x_i||^2.
NodeId nmse_loss(Graph &g, NodeId out, const Tensor &x)
{
    const NodeId err = g.sum_cols(g.square(g.sub(out, g.constant(x))));
    return g.mean(g.mul(err, g.constant(inverse_energy(x))));
}

double validation_nmse(const Compressor &model, const Tensor &x)
{
    Graph g;
    const NodeId out = model.decode(g, model.encode(g, g.constant(x)));
    return g.value(nmse_loss(g, out, x))[0];
}

} // namespace

void CompressorConfig::validate() const
{
    if (n_r == 0 || n_t == 0 || rate == 0 || input_size() % rate != 0)
        throw std::invalid_argument("CompressorConfig: rate must divide 2 N_r N_t");
    if (wide_width == 0 || narrow_width == 0 || decoder_width == 0)
        throw std::invalid_argument("CompressorConfig: widths must be positive");
}

Compressor::Compressor(const CompressorConfig &cfg, std::uint64_t seed) : cfg_(cfg)
{
    cfg_.validate();
    Rng rng = make_rng(seed, "compressor-init");
    const std::size_t in = cfg_.input_size(), lat = cfg_.latent_size(), hid = cfg_.decoder_width;
    wide_w_ = params_.add("enc.wide.w", nn::glorot_uniform(in, cfg_.wide_width, rng));
    wide_b_ = params_.add("enc.wide.b", Tensor({cfg_.wide_width}));
    narrow_w_ = params_.add("enc.narrow.w", nn::glorot_uniform(in, cfg_.narrow_width, rng));
    narrow_b_ = params_.add("enc.narrow.b", Tensor({cfg_.narrow_width}));
    latent_w_ = params_.add("enc.latent.w", nn::glorot_uniform(cfg_.wide_width + cfg_.narrow_width, lat, rng));
    latent_b_ = params_.add("enc.latent.b", Tensor({lat}));
    in_w_ = params_.add("dec.in.w", nn::glorot_uniform(lat, hid, rng));
    in_b_ = params_.add("dec.in.b", Tensor({hid}));
    for (std::size_t k = 0; k < cfg_.residual_blocks; ++k)
    {
        const std::string tag = "dec.block" + std::to_string(k) + ".";
        block_params_.push_back(params_.add(tag + "w1", nn::glorot_uniform(hid, hid, rng)));
        block_params_.push_back(params_.add(tag + "b1", Tensor({hid})));
        block_params_.push_back(params_.add(tag + "w2", nn::glorot_uniform(hid, hid, rng)));
        block_params_.push_back(params_.add(tag + "b2", Tensor({hid})));
    }
    out_w_ = params_.add("dec.out.w", nn::glorot_uniform(hid, in, rng));
    out_b_ = params_.add("dec.out.b", Tensor({in}));
}

NodeId Compressor::encode(Graph &g, NodeId x) const
{
    const Tensor &v = g.value(x);
    if (v.rank() != 2 || v.dim(1) != cfg_.input_size())
        throw std::invalid_argument("Compressor: input must be [B, " + std::to_string(cfg_.input_size()) + "]");
    auto p = [&](std::size_t id) { return g.parameter(id, params_[id]); };
    const NodeId wide = g.tanh(g.affine(x, p(wide_w_), p(wide_b_)));
    const NodeId narrow = g.tanh(g.affine(x, p(narrow_w_), p(narrow_b_)));
    return g.affine(g.concat(wide, narrow), p(latent_w_), p(latent_b_));
}

NodeId Compressor::decode(Graph &g, NodeId z) const
{
    const Tensor &v = g.value(z);
    if (v.rank() != 2 || v.dim(1) != cfg_.latent_size())
        throw std::invalid_argument("Compressor: latent must be [B, " + std::to_string(cfg_.latent_size()) + "]");
    auto p = [&](std::size_t id) { return g.parameter(id, params_[id]); };
    NodeId h = g.affine(z, p(in_w_), p(in_b_));
    for (std::size_t k = 0; k < cfg_.residual_blocks; ++k)
    {
        const std::size_t *b = &block_params_[4 * k];
        const NodeId inner = g.tanh(g.affine(h, p(b[0]), p(b[1])));
        h = g.add(h, g.tanh(g.affine(inner, p(b[2]), p(b[3]))));
    }
    return g.affine(h, p(out_w_), p(out_b_));
}

Tensor Compressor::compress(const Tensor &x) const
{
    Graph g;
    return g.value(encode(g, g.constant(x)));
}

Tensor Compressor::decompress(const Tensor &z) const
{
    Graph g;
    return g.value(decode(g, g.constant(z)));
}

channel::CMatrix Compressor::reconstruct(const channel::CMatrix &hv) const
{
    if (std::size_t(hv.rows()) != cfg_.n_r || std::size_t(hv.cols()) != cfg_.n_t)
        throw std::invalid_argument("Compressor: channel shape mismatch");
    const auto flat = channel::to_real(hv);
    const Tensor out = decompress(compress(Tensor({1, flat.size()}, flat)));
    return channel::from_real(out.data(), cfg_.n_r, cfg_.n_t);
}

CompressTrainResult train_compressor(const augment::ChannelDataset &train, const augment::ChannelDataset &validation,
                                     const CompressorConfig &model_cfg, const CompressTrainConfig &cfg,
                                     const CompressEpochCallback &on_epoch)
{
    model_cfg.validate();
    if (cfg.restarts == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0))
        throw std::invalid_argument("train_compressor: invalid configuration");
    const Tensor x = augment::to_training_set(train).channels;
    const Tensor xv = augment::to_training_set(validation).channels;
    if (x.dim(1) != model_cfg.input_size() || xv.dim(1) != model_cfg.input_size())
        throw std::invalid_argument("train_compressor: dataset shape does not match the model");
    const std::size_t n = x.dim(0);

    CompressTrainResult best;
    double best_nmse = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cfg.restarts; ++k)
    {
        const std::uint64_t run_seed = derive_seed(cfg.seed, "compressor-restart", k);
        Compressor model(model_cfg, run_seed);
        nn::AdamState adam = nn::make_adam(model.params(), cfg.learning_rate);
        std::vector<Tensor> grads = model.params().zeros();
        std::vector<double> losses;
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch)
        {
            Rng rng = make_rng(run_seed, "compressor-epoch", epoch);
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            double total = 0.0;
            for (std::size_t begin = 0; begin < n; begin += cfg.batch_size)
            {
                const std::size_t end = std::min(n, begin + cfg.batch_size);
                const Tensor xb = gather_rows(x, std::span(order.data() + begin, end - begin));
                Graph g;
                const NodeId out = model.decode(g, model.encode(g, g.constant(xb)));
                const NodeId loss = nmse_loss(g, out, xb);
                const double value = g.value(loss)[0];
                if (!std::isfinite(value))
                    throw diffusion::DivergenceError("compressor training diverged at epoch " +
                                                     std::to_string(epoch) + ": non-finite loss");
                for (auto &gr : grads)
                    gr.fill(0.0);
                g.backprop_into(loss, grads);
                nn::adam_step(adam, model.params().tensors(), grads);
                total += value * double(end - begin);
            }
            const double epoch_loss = total / double(n);
            if (!losses.empty() && epoch_loss > cfg.divergence_factor * losses.front())
                throw diffusion::DivergenceError("compressor training diverged at epoch " + std::to_string(epoch));
            losses.push_back(epoch_loss);
            if (on_epoch)
                on_epoch(k, epoch + 1, epoch_loss);
        }
        const double v = validation_nmse(model, xv);
        best.restart_nmse.push_back(v);
        if (v < best_nmse)
        {
            best_nmse = v;
            best.model = std::move(model);
            best.losses = std::move(losses);
            best.selected = k;
        }
    }
    return best;
}

NmseResult eval_compressor(const Compressor &model, const augment::ChannelDataset &test)
{
    test.validate();
    const Tensor x = augment::to_training_set(test).channels;
    Graph g;
    const Tensor out = g.value(model.decode(g, model.encode(g, g.constant(x))));
    const auto &cfg = model.config();
    const std::size_t dim = cfg.input_size();
    double sum = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i)
    {
        const channel::CMatrix est = channel::from_real(out.data().subspan(i * dim, dim), cfg.n_r, cfg.n_t);
        sum += evaluation::nmse(est, test.records[i].channel.hv);
    }
    NmseResult r;
    r.linear = sum / double(test.size());
    r.db = evaluation::to_db(r.linear);
    return r;
}

void save_compressor(const std::filesystem::path &path, const Compressor &model)
{
    const auto &c = model.config();
    io::ByteWriter w;
    for (std::size_t v : {c.n_r, c.n_t, c.rate, c.wide_width, c.narrow_width, c.decoder_width, c.residual_blocks})
        w.u64(v);
    w.parameters(model.params());
    io::write_container(path, compressor_magic, compressor_version, w.bytes());
}

Compressor load_compressor(const std::filesystem::path &path)
{
    const auto payload = io::read_container(path, compressor_magic, compressor_version);
    io::ByteReader r(payload);
    CompressorConfig c;
    for (std::size_t *v : {&c.n_r, &c.n_t, &c.rate, &c.wide_width, &c.narrow_width, &c.decoder_width,
                           &c.residual_blocks})
        *v = r.u64();
    Compressor model;
    try
    {
        model = Compressor(c, 0);
    }
    catch (const std::invalid_argument &e)
    {
        throw io::FormatError(std::string("compressor checkpoint: ") + e.what());
    }
    r.parameters(model.params());
    r.expect_end();
    return model;
}

} // namespace chanforge::compress
