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

#include "app.hpp"

#include "chanforge/augment.hpp"
#include "chanforge/evaluation.hpp"
#include "chanforge/io.hpp"
#include "chanforge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <tuple>

namespace chanforge::app
{

namespace
{

using augment::ChannelDataset;

std::tuple<double, double, double> key_of(const channel::Position &p)
{
    return {p.x1, p.x2, p.x3};
}

void require_file(const std::filesystem::path &path, const char *what)
{
    if (!std::filesystem::is_regular_file(path))
        throw MissingInput(std::string(what) + " not found: " + path.string());
}

ChannelDataset load_dataset(const RunConfig &cfg, const std::string &name)
{
    const auto path = cfg.resolve(name);
    require_file(path, "dataset");
    ChannelDataset ds;
    try
    {
        ds = augment::read_dataset(path);
    }
    catch (const io::FormatError &e)
    {
        throw MissingInput(std::string("unreadable dataset: ") + e.what());
    }
    if (ds.meta.scene_hash != cfg.scene.hash())
        throw ConfigError(path.string() + " was generated for a different scene configuration");
    return ds;
}

diffusion::TrainState load_state(const RunConfig &cfg, const std::string &name, const char *what)
{
    const auto path = cfg.resolve(name);
    require_file(path, what);
    diffusion::TrainState s;
    try
    {
        s = diffusion::load_checkpoint(path);
    }
    catch (const io::FormatError &e)
    {
        throw MissingInput(std::string("unreadable checkpoint: ") + e.what());
    }
    if (!(s.model.config() == cfg.model) || !(s.schedule == cfg.schedule()))
        throw ConfigError(path.string() + " was trained with a different model or schedule configuration");
    return s;
}

void save_dataset(const ChannelDataset &ds, const std::filesystem::path &path)
{
    std::filesystem::create_directories(path.parent_path());
    augment::write_dataset(ds, path);
}

std::string shape_of(const ChannelDataset &ds)
{
    return "2x" + std::to_string(ds.n_r()) + "x" + std::to_string(ds.n_t());
}

// `count` fresh scene positions that avoid `taken` exactly.
std::vector<channel::Position> fresh_positions(const RunConfig &cfg, std::uint64_t seed, std::size_t count,
                                               const std::vector<channel::Position> &taken)
{
    std::set<std::tuple<double, double, double>> used;
    for (const auto &p : taken)
        used.insert(key_of(p));
    Rng rng(seed);
    std::vector<channel::Position> out;
    while (out.size() < count)
        for (const auto &p : channel::sample_positions(cfg.scene, count - out.size(), rng))
            if (used.insert(key_of(p)).second)
                out.push_back(p);
    return out;
}

void write_metrics(const RunConfig &cfg, const std::vector<evaluation::MetricRow> &rows, const std::string &name,
                   std::ostream &log)
{
    const auto path = cfg.resolve(name);
    std::filesystem::create_directories(path.parent_path());
    evaluation::export_metrics(rows, path, cfg.echo);
    log << "wrote " << rows.size() << " rows to " << path.string() << '\n';
}

std::size_t report_every(std::size_t epochs)
{
    return std::max<std::size_t>(1, epochs / 10);
}

void eval_peaks(const RunConfig &cfg, std::ostream &log)
{
    const auto &p = cfg.peaks;
    const auto train = load_dataset(cfg, p.train);
    const auto test = load_dataset(cfg, p.test);
    const auto positions = test.positions();
    std::vector<evaluation::MetricRow> rows;
    for (const auto &method : p.methods)
    {
        ChannelDataset generated;
        if (method == "reference")
            generated = test;
        else if (method == "cddim" || method == "consistency")
        {
            const bool cm = method == "consistency";
            const auto state = load_state(cfg, cm ? p.consistency_checkpoint : p.cddim_checkpoint, "checkpoint");
            generated = augment::augment_cddim(state.model, state.schedule, positions, train,
                                               derive_seed(cfg.seed, "eval-" + method),
                                               cm ? p.consistency_steps : 0);
        }
        else if (method == "gaussian")
            generated = augment::gaussian_at_positions(train, positions, cfg.augment.snr_db,
                                                       derive_seed(cfg.seed, "eval-gaussian"));
        else
            generated = augment::augment_nearest(train, positions);
        const auto cdf = evaluation::peak_cdf(generated, test, p.d_max);
        for (std::size_t d = 0; d < cdf.cdf.size(); ++d)
            rows.push_back({method, "peak_cdf", double(d), cdf.cdf[d], cdf.n_samples, cfg.seed});
        log << method << ": P(D=0) " << cdf.at(0);
        if (cdf.cdf.size() > 2)
            log << ", P(D<=2) " << cdf.at(2);
        log << '\n';
    }
    write_metrics(cfg, rows, "metrics_peaks.csv", log);
}

void eval_compress(const RunConfig &cfg, std::ostream &log)
{
    const auto &k = cfg.compress;
    std::vector<std::string> entries = k.datasets;
    if (entries.empty())
    {
        entries.push_back("reference:" + cfg.train.data);
        for (const char *m : {"cddim", "gaussian", "nearest"})
            if (std::filesystem::is_regular_file(cfg.resolve(std::string("aug_") + m + ".chds")))
                entries.push_back(std::string(m) + ":aug_" + m + ".chds");
    }
    const auto test = load_dataset(cfg, k.test);
    compress::CompressTrainConfig tc;
    tc.epochs = k.epochs;
    tc.batch_size = k.batch_size;
    tc.learning_rate = k.learning_rate;
    tc.restarts = k.restarts;
    tc.seed = derive_seed(cfg.seed, "compress");
    tc.divergence_factor = cfg.train.divergence_factor;
    std::vector<evaluation::MetricRow> rows;
    for (const auto &entry : entries)
    {
        const auto colon = entry.find(':');
        const std::string name = entry.substr(0, colon);
        const auto train = load_dataset(cfg, entry.substr(colon + 1));
        const auto validation = k.validation.empty() ? train : load_dataset(cfg, k.validation);
        const std::size_t every = report_every(k.epochs);
        const auto res = compress::train_compressor(
            train, validation, k.model, tc, [&](std::size_t restart, std::size_t epoch, double loss) {
                if (epoch % every == 0)
                    log << name << " restart " << restart << " epoch " << epoch << " loss " << loss << '\n';
            });
        const auto nmse = compress::eval_compressor(res.model, test);
        rows.push_back({name, "nmse_db", double(train.size()), nmse.db, test.size(), cfg.seed});
        rows.push_back({name, "nmse", double(train.size()), nmse.linear, test.size(), cfg.seed});
        log << name << ": NMSE " << nmse.db << " dB\n";
    }
    write_metrics(cfg, rows, "metrics_compress.csv", log);
}

void eval_beam(const RunConfig &cfg, std::ostream &log)
{
    const auto &e = cfg.beam;
    const auto train = load_dataset(cfg, e.train);
    const auto test = load_dataset(cfg, e.test);
    const auto channels = beam::spatial_channels(test);
    const double pt = beam::dbm_to_watt(e.tx_dbm), s2 = beam::dbm_to_watt(e.noise_dbm);
    const auto bs = beam::dft_codebook(cfg.scene.tx, e.oversampling);
    const auto ue = beam::dft_codebook(cfg.scene.rx, e.oversampling);
    const std::uint64_t exhaustive_seed = derive_seed(cfg.seed, "beam-exhaustive");
    std::vector<evaluation::MetricRow> rows;
    for (std::size_t n_probe : e.n_probe)
    {
        beam::ProbingConfig probing{n_probe, pt, s2, derive_seed(cfg.seed, "beam-probe")};
        for (const auto &method : e.methods)
        {
            double snr = 0.0;
            if (method == "bae" || method == "bae_random")
            {
                beam::BaeConfig mc{cfg.scene.n_r(), cfg.scene.n_t(), n_probe, e.hidden, e.depth, method == "bae"};
                beam::BaeTrainConfig tc;
                tc.epochs = e.epochs;
                tc.batch_size = e.batch_size;
                tc.learning_rate = e.learning_rate;
                tc.noisy_measurements = e.noisy_training;
                tc.seed = derive_seed(cfg.seed, "bae");
                tc.divergence_factor = cfg.train.divergence_factor;
                const std::size_t every = report_every(e.epochs);
                const auto res = beam::train_bae(train, probing, mc, tc, [&](std::size_t epoch, double gain) {
                    if (epoch % every == 0)
                        log << method << " N_probe " << n_probe << " epoch " << epoch << " gain " << gain << '\n';
                });
                snr = beam::avg_snr_db(beam::bae_selector(res.model, probing), channels, pt, s2);
            }
            else
            {
                beam::BeamSelector selector;
                if (method == "mrt_mrc")
                    selector = [](const channel::CMatrix &h, std::size_t) { return beam::baseline_mrt_mrc(h); };
                else if (method == "dft_egc")
                    selector = [&](const channel::CMatrix &h, std::size_t) { return beam::baseline_dft_egc(h, bs); };
                else if (method == "genie_dft")
                    selector = [&](const channel::CMatrix &h, std::size_t) {
                        return beam::baseline_genie_dft(h, bs, ue);
                    };
                else
                    selector = [&](const channel::CMatrix &h, std::size_t i) {
                        return beam::baseline_exhaustive(h, bs, ue, pt, s2, derive_seed(exhaustive_seed, "pair", i));
                    };
                snr = beam::avg_snr_db(selector, channels, pt, s2);
            }
            rows.push_back({method, "avg_snr_db", double(n_probe), snr, channels.size(), cfg.seed});
            log << method << " N_probe " << n_probe << ": " << snr << " dB\n";
        }
    }
    write_metrics(cfg, rows, "metrics_beam.csv", log);
}

} // namespace

void cmd_gen_data(const RunConfig &cfg, std::ostream &log)
{
    const std::uint64_t train_seed = cfg.data.train_position_seed ? cfg.data.train_position_seed
                                                                  : derive_seed(cfg.seed, "train-positions");
    const std::uint64_t test_seed = cfg.data.test_position_seed ? cfg.data.test_position_seed
                                                                : derive_seed(cfg.seed, "test-positions");
    if (train_seed == test_seed)
        throw ConfigError("data: train and test position streams coincide");
    Rng train_rng(train_seed), test_rng(test_seed);
    const auto train_pos = channel::sample_positions(cfg.scene, cfg.data.n_train, train_rng);
    const auto test_pos = channel::sample_positions(cfg.scene, cfg.data.n_test, test_rng);
    std::set<std::tuple<double, double, double>> seen;
    for (const auto &p : train_pos)
        seen.insert(key_of(p));
    for (const auto &p : test_pos)
        if (seen.count(key_of(p)))
            throw ConfigError("data: train and test splits share a position");

    const auto train = augment::simulate_dataset(train_pos, cfg.scene, cfg.data.normalization, cfg.seed);
    const auto test = augment::simulate_dataset(test_pos, cfg.scene, cfg.data.normalization, cfg.seed);
    save_dataset(train, cfg.resolve("train.chds"));
    save_dataset(test, cfg.resolve("test.chds"));
    log << "train: N=" << train.size() << " shape=" << shape_of(train) << " seed=" << cfg.seed << " -> "
        << cfg.resolve("train.chds").string() << '\n';
    log << "test: N=" << test.size() << " shape=" << shape_of(test) << " seed=" << cfg.seed << " -> "
        << cfg.resolve("test.chds").string() << '\n';
}

void cmd_train(const RunConfig &cfg, const TrainOptions &opts, std::ostream &log)
{
    const bool cm = opts.mode == TrainMode::consistency;
    const std::string tag = cm ? "consistency" : "cddim";
    const auto data = augment::to_training_set(load_dataset(cfg, cfg.train.data));
    auto tc = cfg.train_config(cm ? cfg.train.consistency_epochs : cfg.train.epochs);
    if (cm)
        tc.learning_rate = cfg.train.consistency_learning_rate;
    const auto kind = cm ? diffusion::ModelKind::consistency : diffusion::ModelKind::cddim;

    diffusion::TrainState state;
    if (opts.resume)
    {
        state = load_state(cfg, tag + ".ckpt", "checkpoint to resume");
        if (state.kind != kind)
            throw ConfigError("checkpoint " + tag + ".ckpt holds a different model kind");
        tc.epochs += state.epoch;
    }
    else if (cm)
    {
        const auto source = load_state(cfg, opts.init.empty() ? "cddim.ckpt" : opts.init, "warm-start checkpoint");
        state = diffusion::warm_start_consistency(source, tc);
    }
    else
        state = diffusion::init_training(kind, cfg.model, cfg.schedule(), tc);

    const std::size_t first = state.epoch;
    const std::size_t every = report_every(tc.epochs - first);
    diffusion::train(state, data, tc, [&](std::size_t epoch, double loss) {
        if (epoch % every == 0 || epoch == tc.epochs)
            log << tag << " epoch " << epoch << " loss " << loss << '\n';
    });
    const auto ckpt = cfg.resolve(tag + ".ckpt");
    std::filesystem::create_directories(ckpt.parent_path());
    diffusion::save_checkpoint(ckpt, state);

    std::vector<evaluation::CsvRow> rows;
    for (std::size_t i = 0; i < state.losses.size(); ++i)
        rows.push_back({std::to_string(i + 1), evaluation::format_double(state.losses[i])});
    const auto csv = cfg.resolve(tag + "_loss.csv");
    evaluation::write_csv(csv, {"epoch", "loss"}, rows, cfg.echo);
    log << tag << ": epochs " << first + 1 << ".." << state.epoch << " -> " << ckpt.string() << ", " << csv.string()
        << '\n';
}

void cmd_augment(const RunConfig &cfg, const std::string &method, std::ostream &log)
{
    const auto &a = cfg.augment;
    const auto train = load_dataset(cfg, a.data);
    const auto positions =
        fresh_positions(cfg, derive_seed(cfg.seed, "augment-positions"), a.n_aug, train.positions());
    ChannelDataset aug;
    if (method == "cddim")
    {
        const auto state = load_state(cfg, a.checkpoint, "checkpoint");
        aug = augment::augment_cddim(state.model, state.schedule, positions, train,
                                     derive_seed(cfg.seed, "augment-cddim"), a.num_steps);
    }
    else if (method == "gaussian")
    {
        const std::size_t factor = (a.n_aug + train.size() - 1) / train.size();
        aug = augment::augment_gaussian(train, a.snr_db, factor, derive_seed(cfg.seed, "augment-gaussian"));
        aug.records.resize(a.n_aug);
    }
    else if (method == "nearest")
        aug = augment::augment_nearest(train, positions);
    else
        throw ConfigError("unknown augmentation method '" + method + "'");

    const auto merged = augment::merge(train, aug);
    const auto path = cfg.resolve("aug_" + method + ".chds");
    save_dataset(merged, path);
    log << method << ": N_train=" << train.size() << " N_aug=" << aug.size() << " total=" << merged.size()
        << " -> " << path.string() << '\n';
}

void cmd_eval(const RunConfig &cfg, const std::string &task, std::ostream &log)
{
    if (task == "peaks")
        eval_peaks(cfg, log);
    else if (task == "compress")
        eval_compress(cfg, log);
    else if (task == "beam")
        eval_beam(cfg, log);
    else
        throw ConfigError("unknown evaluation task '" + task + "'");
}

} // namespace chanforge::app
