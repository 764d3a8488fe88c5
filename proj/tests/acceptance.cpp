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
#include "chanforge/channelsim.hpp"
#include "chanforge/diffusion.hpp"
#include "chanforge/downstream_beam.hpp"
#include "chanforge/downstream_compress.hpp"
#include "chanforge/evaluation.hpp"
#include "chanforge/numerics/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace chanforge;
using nn::Tensor;

namespace
{

struct Outcome
{
    bool pass = false;
    std::string detail;
};

struct Criterion
{
    int id;
    std::string name;
    double budget_s; // 0 = no runtime bound
    std::function<Outcome(const fs::path &)> run;
};

std::string fmt(double v, int precision = 4)
{
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

app::RunConfig make_config(const std::string &text, const fs::path &dir)
{
    std::istringstream in("[run]\noutput_dir = " + dir.string() + "\n" + text);
    return app::parse_config(in);
}

// value of (method, metric, x) in a metrics CSV
std::map<std::string, double> read_metrics(const fs::path &path, const std::string &metric, double x)
{
    std::map<std::string, double> out;
    for (const auto &row : evaluation::parse_metrics(path))
        if (row.metric == metric && row.x == x)
            out[row.method] = row.value;
    return out;
}

std::map<std::string, double> read_metrics(const fs::path &path, const std::string &metric)
{
    std::map<std::string, double> out;
    for (const auto &row : evaluation::parse_metrics(path))
        if (row.metric == metric)
            out[row.method] = row.value;
    return out;
}

std::string read_bytes(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Worst relative error between backprop and central differences over 100
// random parameter coordinates.
double worst_gradient_error(nn::ParameterSet &params, const std::map<std::size_t, Tensor> &grads,
                            const std::function<double()> &loss, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k)
    {
        const std::size_t id = std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng);
        Tensor &p = params[id];
        const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
        const double fd = nn::finite_diff_coordinate(loss, p, idx, 1e-5);
        const double bp = grads.at(id)[idx];
        worst = std::max(worst, std::abs(fd - bp) / std::max({std::abs(fd), std::abs(bp), 1e-3}));
    }
    return worst;
}

Outcome perfect_denoiser(const fs::path &)
{
    double worst = 0.0;
    for (double beta_max : {0.02, 0.08})
    {
        const auto sched = diffusion::build_schedule(64, 1e-4, beta_max);
        std::mt19937_64 rng(1);
        for (std::size_t t = 1; t <= 64; ++t)
        {
            const Tensor h0 = nn::random_normal({4, 256}, rng);
            const Tensor noise = nn::random_normal({4, 256}, rng);
            const Tensor h_t = diffusion::forward_noise(h0, t, noise, sched);
            const Tensor expected = diffusion::forward_noise(h0, t - 1, noise, sched);
            const Tensor got = diffusion::ddim_update(h_t, noise, t, t - 1, sched);
            for (std::size_t i = 0; i < got.size(); ++i)
                worst = std::max(worst, std::abs(got[i] - expected[i]));
        }
    }
    return {worst < 1e-10, "max abs error " + fmt(worst)};
}

Outcome gradients(const fs::path &)
{
    std::mt19937_64 rng(2);

    diffusion::DenoiserConfig dc;
    dc.width = 64;
    dc.position_octaves = 4;
    dc.position_depth = 2;
    dc.position_hidden = 32;
    diffusion::Denoiser denoiser(dc, 3);
    const Tensor h = nn::random_normal({3, dc.input_size()}, rng);
    const Tensor target = nn::random_normal({3, dc.input_size()}, rng);
    const Tensor pos = nn::random_normal({3, 3}, rng, 40.0);
    const std::vector<std::size_t> steps{1, 17, 64};
    auto denoiser_loss = [&](nn::Graph &g) {
        return g.mean(g.square(g.sub(denoiser.forward(g, g.constant(h), pos, steps), g.constant(target))));
    };
    nn::Graph g1;
    const auto dg = g1.backprop(denoiser_loss(g1));
    const double e_denoiser = worst_gradient_error(
        denoiser.params(), dg,
        [&] {
            nn::Graph g;
            return g.value(denoiser_loss(g))[0];
        },
        4);

    compress::Compressor comp(compress::CompressorConfig{}, 5);
    const Tensor x = nn::random_normal({4, 256}, rng);
    auto comp_loss = [&](nn::Graph &g) {
        return g.mean(g.square(g.sub(comp.decode(g, comp.encode(g, g.constant(x))), g.constant(x))));
    };
    nn::Graph g2;
    const auto cg = g2.backprop(comp_loss(g2));
    const double e_comp = worst_gradient_error(
        comp.params(), cg,
        [&] {
            nn::Graph g;
            return g.value(comp_loss(g))[0];
        },
        6);

    beam::BaeModel bae(beam::BaeConfig{}, 7);
    const Tensor re = nn::random_normal({4, 64}, rng), im = nn::random_normal({4, 64}, rng);
    const Tensor noise = nn::random_normal({4, 32}, rng, 0.1);
    nn::Graph g3;
    const auto bg = g3.backprop(bae.mean_gain(g3, re, im, noise));
    const double e_bae = worst_gradient_error(
        bae.params(), bg,
        [&] {
            nn::Graph g;
            return g.value(bae.mean_gain(g, re, im, noise))[0];
        },
        8);

    const double worst = std::max({e_denoiser, e_comp, e_bae});
    return {worst < 1e-4, "relative error denoiser " + fmt(e_denoiser) + ", compressor " + fmt(e_comp) + ", bae " +
                              fmt(e_bae)};
}

// Data: complex Gaussian with independent components of unequal variance.
// The noised marginal at t is Gaussian with variance ab v + (1 - ab), so its
// score is -x / (ab v + 1 - ab); the network's implied score is -eps / sigma_t.
Outcome gaussian_score(const fs::path &)
{
    diffusion::DenoiserConfig dc;
    dc.n_r = 1;
    dc.n_t = 4;
    dc.width = 64;
    dc.depth = 2;
    const std::size_t dim = dc.input_size();
    std::vector<double> variance(dim);
    for (std::size_t i = 0; i < dim; ++i)
        variance[i] = 0.25 * std::pow(4.0, double(i % 4) / 3.0);

    std::mt19937_64 rng(9);
    const std::size_t n = 4000;
    diffusion::TrainingSet data{Tensor({n, dim}), Tensor({n, 3})};
    std::normal_distribution<double> normal;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < dim; ++i)
            data.channels[r * dim + i] = std::sqrt(variance[i]) * normal(rng);

    const auto sched = diffusion::build_schedule(64, 1e-4, 0.08);
    diffusion::TrainConfig tc;
    tc.epochs = 400;
    tc.batch_size = 64;
    tc.learning_rate = 2e-3;
    tc.seed = 10;
    auto state = diffusion::init_training(diffusion::ModelKind::cddim, dc, sched, tc);
    diffusion::train(state, data, tc);

    const std::size_t points = 200;
    double total = 0.0, lowest = 1.0;
    std::size_t count = 0;
    for (std::size_t t : {1, 4, 8, 16, 32, 48, 64})
    {
        const double ab = sched.alpha_bar[t];
        Tensor x({points, dim});
        for (std::size_t r = 0; r < points; ++r)
            for (std::size_t i = 0; i < dim; ++i)
                x[r * dim + i] = std::sqrt(ab * variance[i] + 1.0 - ab) * normal(rng);
        const std::vector<std::size_t> steps(points, t);
        const Tensor eps = state.model.predict(x, Tensor({points, 3}), steps);
        double sum = 0.0;
        for (std::size_t r = 0; r < points; ++r)
        {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t i = 0; i < dim; ++i)
            {
                const double implied = -eps[r * dim + i] / sched.sigma[t];
                const double exact = -x[r * dim + i] / (ab * variance[i] + 1.0 - ab);
                dot += implied * exact;
                na += implied * implied;
                nb += exact * exact;
            }
            sum += dot / std::sqrt(na * nb);
        }
        const double mean = sum / double(points);
        lowest = std::min(lowest, mean);
        total += mean;
        ++count;
    }
    const double mean = total / double(count);
    return {mean > 0.9, "mean cosine " + fmt(mean) + " (lowest per-step mean " + fmt(lowest) + ")"};
}

struct PeakRun
{
    bool done = false;
    std::string error;
    double train_seconds = 0.0;
    std::map<std::string, double> p0, p2;
};

const std::string peaks_config = R"(
seed = 2024

[data]
n_train = 1000
n_test = 500

[train]
epochs = 800

[peaks]
methods = reference, cddim, consistency, gaussian, nearest
)";

PeakRun &peak_run(const fs::path &work)
{
    static PeakRun run;
    if (run.done)
        return run;
    run.done = true;
    try
    {
        const auto cfg = make_config(peaks_config, work / "peaks");
        std::ofstream log(work / "peaks.log");
        app::cmd_gen_data(cfg, log);
        const auto start = std::chrono::steady_clock::now();
        app::cmd_train(cfg, {app::TrainMode::cddim, "", false}, log);
        run.train_seconds = seconds_since(start);
        app::cmd_train(cfg, {app::TrainMode::consistency, "", false}, log);
        app::cmd_eval(cfg, "peaks", log);
        run.p0 = read_metrics(cfg.resolve("metrics_peaks.csv"), "peak_cdf", 0.0);
        run.p2 = read_metrics(cfg.resolve("metrics_peaks.csv"), "peak_cdf", 2.0);
    }
    catch (const std::exception &e)
    {
        run.error = e.what();
    }
    return run;
}

Outcome peak_match(const fs::path &work)
{
    const auto &run = peak_run(work);
    if (!run.error.empty())
        return {false, run.error};
    const double p0 = run.p0.at("cddim"), gauss = run.p0.at("gaussian");
    const bool pass = p0 >= 0.40 && p0 > 1.0 / 32.0 && p0 > gauss && run.train_seconds <= 1800.0;
    return {pass, "P(D=0) cddim " + fmt(p0) + ", gaussian " + fmt(gauss) + ", nearest " + fmt(run.p0.at("nearest")) +
                      ", floor " + fmt(1.0 / 32.0) + "; training " + fmt(run.train_seconds, 5) + " s"};
}

Outcome consistency_steps(const fs::path &work)
{
    const auto &run = peak_run(work);
    if (!run.error.empty())
        return {false, run.error};
    const double full = run.p2.at("cddim"), few = run.p2.at("consistency");
    return {few >= 0.5 * full, "P(D<=2) consistency (8 steps) " + fmt(few) + ", cDDIM (64 steps) " + fmt(full) +
                                   ", ratio " + fmt(few / full)};
}

const std::string compress_config = R"(
seed = 77

[data]
n_train = 500
n_test = 500

[train]
epochs = 600

[augment]
n_aug = 4500

[compress]
datasets = true:true/train.chds, cddim:aug_cddim.chds, gaussian:aug_gaussian.chds, small:train.chds
epochs = 60
)";

Outcome compression(const fs::path &work)
{
    const fs::path dir = work / "compress";
    const auto cfg = make_config(compress_config, dir);
    std::string full_text = compress_config;
    full_text.replace(full_text.find("n_train = 500"), 13, "n_train = 5000");
    const auto full = make_config(full_text, dir / "true");
    std::ofstream log(work / "compress.log");
    app::cmd_gen_data(cfg, log);
    app::cmd_gen_data(full, log);
    app::cmd_train(cfg, {app::TrainMode::cddim, "", false}, log);
    app::cmd_augment(cfg, "cddim", log);
    app::cmd_augment(cfg, "gaussian", log);
    app::cmd_eval(cfg, "compress", log);
    const auto db = read_metrics(cfg.resolve("metrics_compress.csv"), "nmse_db");
    const double aug = db.at("cddim"), truth = db.at("true"), gauss = db.at("gaussian");
    return {aug <= truth + 3.0 && aug < gauss, "NMSE dB: cDDIM-augmented " + fmt(aug) + ", 5000 true " + fmt(truth) +
                                                   ", noise-augmented " + fmt(gauss) + ", 500 true " +
                                                   fmt(db.at("small"))};
}

const std::string beam_config = R"(
seed = 31

[scene]
tx = upa:4x4
rx = upa:2x2
k_rician = 1.5

[data]
n_train = 2000
n_test = 1000

[beam]
n_probe = 16
epochs = 400
methods = bae, bae_random, mrt_mrc, dft_egc, genie_dft
)";

Outcome beam_orderings(const fs::path &work)
{
    const auto cfg = make_config(beam_config, work / "beam");
    std::ofstream log(work / "beam.log");
    app::cmd_gen_data(cfg, log);
    app::cmd_eval(cfg, "beam", log);
    const auto snr = read_metrics(cfg.resolve("metrics_beam.csv"), "avg_snr_db", 16.0);

    // per-set orderings on the noiseless selections, and the noisy exhaustive
    // search against the genie over 100 noise draws
    const auto test = augment::read_dataset(cfg.resolve("test.chds"));
    const auto channels = beam::spatial_channels(test);
    const double pt = beam::dbm_to_watt(cfg.beam.tx_dbm), s2 = beam::dbm_to_watt(cfg.beam.noise_dbm);
    const auto bs = beam::dft_codebook(cfg.scene.tx, cfg.beam.oversampling);
    const auto ue = beam::dft_codebook(cfg.scene.rx, cfg.beam.oversampling);
    std::size_t violations = 0;
    for (const auto &h : channels)
    {
        const double mrt = beam::beam_gain(h, beam::baseline_mrt_mrc(h));
        const double egc = beam::beam_gain(h, beam::baseline_dft_egc(h, bs));
        const double genie = beam::beam_gain(h, beam::baseline_genie_dft(h, bs, ue));
        violations += !(mrt >= egc * (1.0 - 1e-12) && egc >= genie * (1.0 - 1e-12));
    }
    std::vector<double> draws;
    for (std::uint64_t d = 0; d < 100; ++d)
    {
        const beam::BeamSelector noisy = [&](const channel::CMatrix &h, std::size_t i) {
            return beam::baseline_exhaustive(h, bs, ue, pt, s2, derive_seed(d, "draw", i));
        };
        draws.push_back(beam::avg_snr_db(noisy, channels, pt, s2));
    }
    const double genie_all = beam::avg_snr_db(
        [&](const channel::CMatrix &h, std::size_t) { return beam::baseline_genie_dft(h, bs, ue); }, channels, pt, s2);
    const double exhaustive = std::accumulate(draws.begin(), draws.end(), 0.0) / double(draws.size());

    // learned vs random probing, averaged over independent repetitions
    std::vector<double> gaps{snr.at("bae") - snr.at("bae_random")};
    for (int seed = 32; seed <= 35; ++seed)
    {
        std::string text = beam_config;
        text.replace(text.find("seed = 31"), 9, "seed = " + std::to_string(seed));
        text.replace(text.find(", mrt_mrc, dft_egc, genie_dft"), 29, "");
        const auto rep = make_config(text, work / ("beam_" + std::to_string(seed)));
        app::cmd_gen_data(rep, log);
        app::cmd_eval(rep, "beam", log);
        const auto r = read_metrics(rep.resolve("metrics_beam.csv"), "avg_snr_db", 16.0);
        gaps.push_back(r.at("bae") - r.at("bae_random"));
    }
    const double gap = std::accumulate(gaps.begin(), gaps.end(), 0.0) / double(gaps.size());
    std::string gap_list;
    for (const double g : gaps)
        gap_list += (gap_list.empty() ? "" : " ") + fmt(g, 3);

    const bool pass = violations == 0 && snr.at("mrt_mrc") >= snr.at("dft_egc") &&
                      snr.at("dft_egc") >= snr.at("genie_dft") && exhaustive <= genie_all + 1e-9 && gap >= 1.0;
    return {pass, "avg SNR dB: mrt/mrc " + fmt(snr.at("mrt_mrc"), 7) + ", dft+egc " + fmt(snr.at("dft_egc"), 7) +
                      ", genie-dft " + fmt(snr.at("genie_dft"), 7) + ", bae " + fmt(snr.at("bae"), 7) +
                      ", random-probing bae " + fmt(snr.at("bae_random"), 7) + "; per-channel violations " +
                      std::to_string(violations) + "; exhaustive " + fmt(exhaustive, 9) + " vs genie " +
                      fmt(genie_all, 9) + "; learned - random gap " + fmt(gap, 3) + " (runs " + gap_list + ")"};
}

Outcome metric_units(const fs::path &work)
{
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal;
    channel::CMatrix h(4, 32);
    for (Eigen::Index i = 0; i < h.size(); ++i)
        h.data()[i] = {normal(rng), normal(rng)};
    const double rotated = evaluation::nmse(std::polar(1.0, std::numbers::pi) * h, h);

    channel::SceneConfig scene;
    std::vector<channel::Position> pos;
    {
        Rng prng(13);
        pos = channel::sample_positions(scene, 64, prng);
    }
    double round_trip = 0.0;
    for (const auto &p : pos)
    {
        const auto hs = channel::assemble_channel(channel::sample_paths(p, scene), scene);
        const auto back = channel::from_beamspace(channel::to_beamspace(hs));
        round_trip = std::max(round_trip, (back.h - hs.h).cwiseAbs().maxCoeff());
    }

    const auto ref = augment::simulate_dataset(pos, scene, channel::Normalization::frobenius, 1);
    const auto noisy = augment::augment_gaussian(ref, 0.0, 1, 14);
    const auto cdf = evaluation::peak_cdf(noisy, ref, 31);
    const bool monotone = std::is_sorted(cdf.cdf.begin(), cdf.cdf.end()) && cdf.cdf.back() == 1.0;

    const fs::path a = work / "units_a.chds", b = work / "units_b.chds";
    augment::write_dataset(ref, a);
    augment::write_dataset(augment::read_dataset(a), b);
    const bool bytes = read_bytes(a) == read_bytes(b) && augment::read_dataset(b) == ref;

    const bool pass = rotated == 4.0 && round_trip < 1e-10 && monotone && bytes;
    return {pass, "nmse(e^{j pi} H, H) = " + fmt(rotated, 17) + ", dft round trip " + fmt(round_trip) +
                      ", cdf monotone " + (monotone ? "yes" : "no") + ", byte-exact " + (bytes ? "yes" : "no")};
}

const std::string cli_config = R"([run]
seed = 5
output_dir = out

[scene]
tx = ula:8
rx = ula:2

[data]
n_train = 120
n_test = 60

[model]
width = 32

[train]
epochs = 20
consistency_epochs = 10

[augment]
n_aug = 80

[compress]
epochs = 5

[beam]
n_probe = 4
epochs = 5
methods = bae, bae_random, mrt_mrc, dft_egc, genie_dft, exhaustive
)";

std::map<std::string, std::string> snapshot(const fs::path &dir)
{
    std::map<std::string, std::string> files;
    for (const auto &entry : fs::directory_iterator(dir))
        files[entry.path().filename().string()] = read_bytes(entry.path());
    return files;
}

Outcome cli_determinism(const fs::path &work)
{
    const fs::path dir = work / "cli";
    fs::create_directories(dir);
    std::ofstream(dir / "run.ini") << cli_config;
    const std::vector<std::string> commands{
        "gen-data",         "train --mode cddim",   "train --mode consistency", "augment --method cddim",
        "augment --method gaussian", "augment --method nearest", "eval --task peaks", "eval --task compress",
        "eval --task beam"};
    std::map<std::string, std::string> first;
    for (int pass = 0; pass < 2; ++pass)
    {
        fs::remove_all(dir / "out");
        for (const auto &c : commands)
        {
            const std::string line = "cd \"" + dir.string() + "\" && \"" CHANFORGE_CLI "\" " + c +
                                     " --config run.ini > /dev/null";
            if (std::system(line.c_str()) != 0)
                return {false, "command failed: " + c};
        }
        if (pass == 0)
            first = snapshot(dir / "out");
    }
    const auto second = snapshot(dir / "out");
    std::size_t differing = 0;
    for (const auto &[name, bytes] : first)
        differing += !second.count(name) || second.at(name) != bytes;
    differing += second.size() != first.size();
    return {differing == 0 && first.size() == 12,
            std::to_string(first.size()) + " output files, " + std::to_string(differing) + " differ between runs"};
}

} // namespace

int main(int argc, char **argv)
{
    const std::vector<Criterion> criteria{
        {1, "perfect-denoiser identity", 1.0, perfect_denoiser},
        {2, "gradient correctness", 60.0, gradients},
        {3, "gaussian score recovery", 300.0, gaussian_score},
        {4, "peak match", 0.0, peak_match},
        {5, "consistency sampling", 0.0, consistency_steps},
        {6, "compression with augmentation", 1800.0, compression},
        {7, "beam alignment orderings", 1800.0, beam_orderings},
        {8, "metric units", 10.0, metric_units},
        {9, "cli determinism", 0.0, cli_determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.insert(std::atoi(argv[i]));

    const fs::path work = fs::temp_directory_path() / ("chanforge_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);

    int failures = 0;
    for (const auto &c : criteria)
    {
        if (!selected.empty() && !selected.count(c.id))
            continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try
        {
            out = c.run(work);
        }
        catch (const std::exception &e)
        {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed = seconds_since(start);
        if (c.budget_s > 0.0 && elapsed > c.budget_s)
        {
            out.pass = false;
            out.detail += "; over the " + fmt(c.budget_s) + " s budget";
        }
        failures += !out.pass;
        std::cout << "criterion " << c.id << " " << c.name << ": " << (out.pass ? "PASS" : "FAIL") << " ("
                  << out.detail << "; " << std::fixed << std::setprecision(1) << elapsed << " s)" << std::defaultfloat
                  << std::endl;
    }
    fs::remove_all(work);
    return failures == 0 ? 0 : 1;
}
