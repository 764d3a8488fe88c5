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

#include "chanforge/diffusion.hpp"

#include "chanforge/io.hpp"
#include "chanforge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace chanforge::diffusion
{

using nn::Graph;
using nn::NodeId;
using nn::Tensor;

namespace
{

constexpr std::uint32_t checkpoint_version = 1;
constexpr io::Magic cddim_magic{'C', 'F', 'D', 'M'};
constexpr io::Magic consistency_magic{'C', 'F', 'C', 'M'};

void check_step(std::size_t t, const NoiseSchedule &sched)
{
    if (t == 0 || t > sched.steps)
        throw std::invalid_argument("diffusion step " + std::to_string(t) + " outside [1, " +
                                    std::to_string(sched.steps) + "]");
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

void ema_update(nn::ParameterSet &target, const nn::ParameterSet &source, double mu)
{
    for (std::size_t i = 0; i < target.size(); ++i)
    {
        auto dst = target[i].data();
        auto src = source[i].data();
        for (std::size_t k = 0; k < dst.size(); ++k)
            dst[k] = mu * dst[k] + (1.0 - mu) * src[k];
    }
}

void write_config(io::ByteWriter &w, const DenoiserConfig &c)
{
    w.u64(c.n_r);
    w.u64(c.n_t);
    w.u64(c.width);
    w.u64(c.depth);
    w.u64(c.time_features);
    w.u64(c.position_octaves);
    w.u64(c.position_depth);
    w.u64(c.position_hidden);
    w.u64(c.steps);
    w.f64(c.radius);
}

DenoiserConfig read_config(io::ByteReader &r)
{
    DenoiserConfig c;
    c.n_r = r.u64();
    c.n_t = r.u64();
    c.width = r.u64();
    c.depth = r.u64();
    c.time_features = r.u64();
    c.position_octaves = r.u64();
    c.position_depth = r.u64();
    c.position_hidden = r.u64();
    c.steps = r.u64();
    c.radius = r.f64();
    try
    {
        c.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw io::FormatError(std::string("checkpoint: ") + e.what());
    }
    return c;
}

} // namespace

NoiseSchedule build_schedule(std::size_t steps, double beta_min, double beta_max)
{
    if (steps < 1)
        throw std::invalid_argument("build_schedule: T must be at least 1");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
        throw std::invalid_argument("build_schedule: need 0 < beta_min <= beta_max < 1");

    NoiseSchedule s;
    s.steps = steps;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.beta.assign(steps + 1, 0.0);
    s.alpha.assign(steps + 1, 1.0);
    s.alpha_bar.assign(steps + 1, 1.0);
    s.sigma.assign(steps + 1, 0.0);
    for (std::size_t t = 1; t <= steps; ++t)
    {
        const double frac = steps == 1 ? 0.0 : double(t - 1) / double(steps - 1);
        s.beta[t] = beta_min + (beta_max - beta_min) * frac;
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        s.sigma[t] = std::sqrt(1.0 - s.alpha_bar[t]);
    }
    return s;
}

void DenoiserConfig::validate() const
{
    if (n_r == 0 || n_t == 0 || depth == 0 || time_features == 0 || time_features % 2 != 0 || steps == 0)
        throw std::invalid_argument("DenoiserConfig: sizes must be positive and time_features even");
    if (position_depth > 0 && position_hidden == 0)
        throw std::invalid_argument("DenoiserConfig: position_hidden must be positive");
    if (!(radius > 0.0))
        throw std::invalid_argument("DenoiserConfig: radius must be positive");
}

Denoiser::Denoiser(const DenoiserConfig &cfg, std::uint64_t seed) : cfg_(cfg)
{
    cfg_.validate();
    Rng rng = make_rng(seed, "denoiser-init");
    const std::size_t in = cfg_.input_size(), width = cfg_.hidden_width();
    std::size_t fan_in = in;
    for (std::size_t l = 0; l < cfg_.depth; ++l)
    {
        const std::string tag = "layer" + std::to_string(l) + ".";
        Layer layer{};
        layer.w = params_.add(tag + "w", nn::glorot_uniform(fan_in, width, rng));
        layer.b = params_.add(tag + "b", Tensor({width}));
        layer.p = params_.add(tag + "pos_w", nn::glorot_uniform(cfg_.embedding_width(), width, rng));
        layer.c = params_.add(tag + "pos_b", Tensor({width}, 1.0));
        layer.q = params_.add(tag + "time_w", nn::glorot_uniform(cfg_.time_features, width, rng));
        layer.d = params_.add(tag + "time_b", Tensor({width}));
        layers_.push_back(layer);
        fan_in = width;
    }
    out_w_ = params_.add("out.w", nn::glorot_uniform(width + in, in, rng));
    out_b_ = params_.add("out.b", Tensor({in}));
    fan_in = cfg_.position_features();
    for (std::size_t l = 0; l < cfg_.position_depth; ++l)
    {
        const std::string tag = "embed" + std::to_string(l) + ".";
        embed_ids_.push_back(params_.add(tag + "w", nn::glorot_uniform(fan_in, cfg_.position_hidden, rng)));
        embed_ids_.push_back(params_.add(tag + "b", Tensor({cfg_.position_hidden})));
        fan_in = cfg_.position_hidden;
    }
}

Tensor time_features(std::span<const std::size_t> steps, std::size_t total, std::size_t n_features)
{
    const std::size_t half = n_features / 2;
    Tensor out({steps.size(), n_features});
    for (std::size_t i = 0; i < steps.size(); ++i)
    {
        const double u = double(steps[i]) / double(total);
        for (std::size_t k = 0; k < half; ++k)
        {
            const double w = std::numbers::pi * std::ldexp(1.0, int(k)) * u;
            out.at(i, 2 * k) = std::sin(w);
            out.at(i, 2 * k + 1) = std::cos(w);
        }
    }
    return out;
}

Tensor position_features(const Tensor &positions, double radius, std::size_t octaves)
{
    const std::size_t rows = positions.dim(0), cols = 3 * (1 + 2 * octaves);
    Tensor out({rows, cols});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < 3; ++j)
        {
            const double u = positions.at(i, j) / radius;
            out.at(i, j) = u;
            for (std::size_t k = 0; k < octaves; ++k)
            {
                const double w = std::numbers::pi * std::ldexp(1.0, int(k)) * u;
                out.at(i, 3 + 6 * k + 2 * j) = std::sin(w);
                out.at(i, 3 + 6 * k + 2 * j + 1) = std::cos(w);
            }
        }
    return out;
}

Tensor position_tensor(std::span<const channel::Position> positions)
{
    Tensor out({positions.size(), 3});
    for (std::size_t i = 0; i < positions.size(); ++i)
    {
        out.at(i, 0) = positions[i].x1;
        out.at(i, 1) = positions[i].x2;
        out.at(i, 2) = positions[i].x3;
    }
    return out;
}

NodeId Denoiser::forward(Graph &g, NodeId h_t, const Tensor &positions, std::span<const std::size_t> steps) const
{
    const Tensor &x = g.value(h_t);
    if (x.rank() != 2 || x.dim(1) != cfg_.input_size())
        throw std::invalid_argument("Denoiser: input must be [B, " + std::to_string(cfg_.input_size()) + "]");
    const std::size_t batch = x.dim(0);
    if (positions.rank() != 2 || positions.dim(0) != batch || positions.dim(1) != 3 || steps.size() != batch)
        throw std::invalid_argument("Denoiser: positions must be [B, 3] with one step per row");
    for (std::size_t t : steps)
        if (t == 0 || t > cfg_.steps)
            throw std::invalid_argument("Denoiser: step " + std::to_string(t) + " outside [1, " +
                                        std::to_string(cfg_.steps) + "]");

    const NodeId tf = g.constant(time_features(steps, cfg_.steps, cfg_.time_features));

    auto param = [&](std::size_t id) { return g.parameter(id, params_[id]); };
    NodeId pos = g.constant(position_features(positions, cfg_.radius, cfg_.position_octaves));
    for (std::size_t l = 0; l < embed_ids_.size(); l += 2)
        pos = g.tanh(g.affine(pos, param(embed_ids_[l]), param(embed_ids_[l + 1])));
    NodeId h = h_t;
    for (const Layer &layer : layers_)
    {
        const NodeId z = g.affine(h, param(layer.w), param(layer.b));
        const NodeId pe = g.affine(pos, param(layer.p), param(layer.c));
        const NodeId te = g.affine(tf, param(layer.q), param(layer.d));
        h = g.tanh(g.add(g.mul(z, pe), te));
    }
    return g.affine(g.concat(h, h_t), param(out_w_), param(out_b_));
}

Tensor Denoiser::predict(const Tensor &h_t, const Tensor &positions, std::span<const std::size_t> steps) const
{
    Graph g;
    const NodeId out = forward(g, g.constant(h_t), positions, steps);
    return g.value(out);
}

Tensor forward_noise(const Tensor &h0, std::size_t t, const Tensor &noise, const NoiseSchedule &sched)
{
    if (t > sched.steps)
        throw std::invalid_argument("forward_noise: step outside schedule");
    if (h0.shape() != noise.shape())
        throw std::invalid_argument("forward_noise: shape mismatch");
    const double a = std::sqrt(sched.alpha_bar[t]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
    Tensor out(h0.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a * h0[i] + b * noise[i];
    return out;
}

Tensor ddim_update(const Tensor &h_t, const Tensor &estimate, std::size_t t, std::size_t s,
                   const NoiseSchedule &sched)
{
    check_step(t, sched);
    if (s >= t)
        throw std::invalid_argument("ddim_update: target step must precede the current step");
    if (h_t.shape() != estimate.shape())
        throw std::invalid_argument("ddim_update: shape mismatch");
    const double ab_t = sched.alpha_bar[t], ab_s = sched.alpha_bar[s];
    const double sig_t = std::sqrt(1.0 - ab_t), sig_s = std::sqrt(1.0 - ab_s);
    const double ratio = std::sqrt(ab_s) / std::sqrt(ab_t);
    Tensor out(h_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = sig_s * estimate[i] + ratio * (h_t[i] - sig_t * estimate[i]);
    return out;
}

Tensor ddim_step(const Tensor &h_t, std::size_t t, const Tensor &positions, const Denoiser &model,
                 const NoiseSchedule &sched, std::size_t s)
{
    check_step(t, sched);
    const std::vector<std::size_t> steps(h_t.dim(0), t);
    return ddim_update(h_t, model.predict(h_t, positions, steps), t, s, sched);
}

Tensor ddim_step(const Tensor &h_t, std::size_t t, const Tensor &positions, const Denoiser &model,
                 const NoiseSchedule &sched)
{
    return ddim_step(h_t, t, positions, model, sched, t - 1);
}

std::vector<std::size_t> sampling_steps(std::size_t total, std::size_t count)
{
    if (count == 0 || count > total)
        throw std::invalid_argument("sampling_steps: need 1 <= count <= T");
    std::vector<std::size_t> out(count + 1);
    for (std::size_t k = 0; k <= count; ++k)
        out[k] = (k * total + count / 2) / count;
    std::reverse(out.begin(), out.end());
    return out;
}

Tensor sample(const Denoiser &model, const NoiseSchedule &sched, std::span<const channel::Position> positions,
              std::uint64_t seed, std::size_t num_steps, std::size_t batch_size)
{
    if (model.config().steps != sched.steps)
        throw std::invalid_argument("sample: model and schedule disagree on T");
    const std::size_t dim = model.config().input_size();
    const auto steps = sampling_steps(sched.steps, num_steps == 0 ? sched.steps : num_steps);
    batch_size = std::max<std::size_t>(batch_size, 1);
    Tensor out({positions.size(), dim});
    for (std::size_t begin = 0; begin < positions.size(); begin += batch_size)
    {
        const std::size_t end = std::min(positions.size(), begin + batch_size);
        Tensor h({end - begin, dim});
        for (std::size_t i = begin; i < end; ++i)
        {
            Rng rng = make_rng(seed, "sample", i);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (std::size_t k = 0; k < dim; ++k)
                h.at(i - begin, k) = normal(rng);
        }
        const Tensor pos = position_tensor(positions.subspan(begin, end - begin));
        for (std::size_t k = 0; k + 1 < steps.size(); ++k)
            h = ddim_step(h, steps[k], pos, model, sched, steps[k + 1]);
        std::copy(h.data().begin(), h.data().end(), out.data().begin() + std::ptrdiff_t(begin * dim));
    }
    return out;
}

TrainState init_training(ModelKind kind, const DenoiserConfig &model_cfg, const NoiseSchedule &sched,
                         const TrainConfig &cfg)
{
    if (model_cfg.steps != sched.steps)
        throw std::invalid_argument("init_training: model and schedule disagree on T");
    if (kind == ModelKind::consistency && sched.steps < 2)
        throw std::invalid_argument("init_training: consistency training needs T >= 2");
    TrainState s;
    s.kind = kind;
    s.schedule = sched;
    s.model = Denoiser(model_cfg, cfg.seed);
    if (kind == ModelKind::consistency)
        s.target = s.model;
    s.adam = nn::make_adam(s.model.params(), cfg.learning_rate);
    return s;
}

TrainState warm_start_consistency(const TrainState &source, const TrainConfig &cfg)
{
    if (source.schedule.steps < 2)
        throw std::invalid_argument("warm_start_consistency: consistency training needs T >= 2");
    TrainState s;
    s.kind = ModelKind::consistency;
    s.schedule = source.schedule;
    s.model = source.model;
    s.target = source.model;
    s.adam = nn::make_adam(s.model.params(), cfg.learning_rate);
    return s;
}

void train(TrainState &state, const TrainingSet &data, const TrainConfig &cfg, const EpochCallback &on_epoch)
{
    const std::size_t n = data.size();
    const std::size_t dim = state.model.config().input_size();
    if (n == 0)
        throw std::invalid_argument("train: empty training set");
    if (data.channels.rank() != 2 || data.channels.dim(1) != dim || data.positions.rank() != 2 ||
        data.positions.dim(0) != n || data.positions.dim(1) != 3)
        throw std::invalid_argument("train: training set shape does not match the model");
    if (cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || !(cfg.ema_rate >= 0.0 && cfg.ema_rate < 1.0))
        throw std::invalid_argument("train: invalid configuration");

    const bool consistency = state.kind == ModelKind::consistency;
    const NoiseSchedule &sched = state.schedule;
    const std::size_t t_max = consistency ? sched.steps - 1 : sched.steps;
    state.adam.learning_rate = cfg.learning_rate;
    std::vector<Tensor> grads = state.model.params().zeros();

    while (state.epoch < cfg.epochs)
    {
        Rng rng = make_rng(cfg.seed, consistency ? "consistency-epoch" : "cddim-epoch", state.epoch);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        std::uniform_int_distribution<std::size_t> step_dist(1, t_max);
        std::normal_distribution<double> normal(0.0, 1.0);

        double total = 0.0;
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size)
        {
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const std::span<const std::size_t> rows(order.data() + begin, end - begin);
            const std::size_t b = rows.size();
            const Tensor h0 = gather_rows(data.channels, rows);
            const Tensor pos = gather_rows(data.positions, rows);
            std::vector<std::size_t> steps(b);
            for (auto &t : steps)
                t = step_dist(rng);
            Tensor noise({b, dim});
            for (auto &v : noise.storage())
                v = normal(rng);

            Tensor h_t({b, dim});
            for (std::size_t i = 0; i < b; ++i)
            {
                const double a = std::sqrt(sched.alpha_bar[steps[i]]), s = std::sqrt(1.0 - sched.alpha_bar[steps[i]]);
                for (std::size_t k = 0; k < dim; ++k)
                    h_t.at(i, k) = a * h0.at(i, k) + s * noise.at(i, k);
            }

            Graph g;
            NodeId target;
            NodeId input;
            std::vector<std::size_t> model_steps = steps;
            if (consistency)
            {
                // Same noise at t and t + 1; the EMA network scores step t.
                target = g.constant(state.target.predict(h_t, pos, steps));
                Tensor h_next({b, dim});
                for (std::size_t i = 0; i < b; ++i)
                {
                    const std::size_t t1 = steps[i] + 1;
                    const double a = std::sqrt(sched.alpha_bar[t1]), s = std::sqrt(1.0 - sched.alpha_bar[t1]);
                    for (std::size_t k = 0; k < dim; ++k)
                        h_next.at(i, k) = a * h0.at(i, k) + s * noise.at(i, k);
                    model_steps[i] = t1;
                }
                input = g.constant(std::move(h_next));
            }
            else
            {
                target = g.constant(std::move(noise));
                input = g.constant(std::move(h_t));
            }
            const NodeId out = state.model.forward(g, input, pos, model_steps);
            const NodeId loss = g.mean(g.square(g.sub(out, target)));
            const double value = g.value(loss)[0];
            if (!std::isfinite(value))
                throw DivergenceError("training diverged at epoch " + std::to_string(state.epoch) +
                                      ": non-finite loss");

            for (auto &gr : grads)
                gr.fill(0.0);
            g.backprop_into(loss, grads);
            nn::adam_step(state.adam, state.model.params().tensors(), grads);
            if (consistency)
                ema_update(state.target.params(), state.model.params(), cfg.ema_rate);
            total += value * double(b);
        }

        const double epoch_loss = total / double(n);
        if (!std::isfinite(epoch_loss) ||
            (!state.losses.empty() && epoch_loss > cfg.divergence_factor * state.losses.front()))
            throw DivergenceError("training diverged at epoch " + std::to_string(state.epoch) + ": loss " +
                                  std::to_string(epoch_loss));
        state.losses.push_back(epoch_loss);
        ++state.epoch;
        if (on_epoch)
            on_epoch(state.epoch, epoch_loss);
    }
}

void save_checkpoint(const std::filesystem::path &path, const TrainState &state)
{
    io::ByteWriter w;
    write_config(w, state.model.config());
    w.u64(state.schedule.steps);
    w.f64(state.schedule.beta_min);
    w.f64(state.schedule.beta_max);
    w.u64(state.epoch);
    w.u64(state.losses.size());
    w.doubles(state.losses);
    w.parameters(state.model.params());
    if (state.kind == ModelKind::consistency)
        w.parameters(state.target.params());
    w.adam(state.adam);
    io::write_container(path, state.kind == ModelKind::cddim ? cddim_magic : consistency_magic, checkpoint_version,
                        w.bytes());
}

TrainState load_checkpoint(const std::filesystem::path &path)
{
    const io::Magic magic = io::peek_magic(path);
    TrainState s;
    if (magic == cddim_magic)
        s.kind = ModelKind::cddim;
    else if (magic == consistency_magic)
        s.kind = ModelKind::consistency;
    else
        throw io::FormatError(path.string() + ": not a diffusion checkpoint");

    const auto payload = io::read_container(path, magic, checkpoint_version);
    io::ByteReader r(payload);
    const DenoiserConfig cfg = read_config(r);
    const std::size_t steps = r.u64();
    const double beta_min = r.f64(), beta_max = r.f64();
    try
    {
        s.schedule = build_schedule(steps, beta_min, beta_max);
    }
    catch (const std::invalid_argument &e)
    {
        throw io::FormatError(std::string("checkpoint: ") + e.what());
    }
    s.epoch = r.u64();
    const std::size_t n_losses = r.u64();
    if (n_losses > r.remaining() / sizeof(double))
        throw io::FormatError("checkpoint: loss history larger than file");
    s.losses.resize(n_losses);
    r.doubles(s.losses);
    s.model = Denoiser(cfg, 0);
    r.parameters(s.model.params());
    if (s.kind == ModelKind::consistency)
    {
        s.target = Denoiser(cfg, 0);
        r.parameters(s.target.params());
    }
    s.adam = r.adam();
    r.expect_end();
    if (s.adam.first_moment.size() != s.model.params().size())
        throw io::FormatError("checkpoint: optimizer state does not match the model");
    return s;
}

} // namespace chanforge::diffusion
