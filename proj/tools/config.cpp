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

#include "chanforge/evaluation.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

namespace chanforge::app
{

namespace
{

namespace pt = boost::property_tree;

std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string &s, char sep)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep))
        if (const auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

std::string join(const std::vector<std::string> &v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? "," : "") + v[i];
    return out;
}

template <class T> T parse_number(const std::string &text, const std::string &key)
{
    T v{};
    const auto t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(key + ": cannot parse '" + text + "'");
    return v;
}

double parse_real(const std::string &text, const std::string &key)
{
    const auto t = trim(text);
    if (t == "inf" || t == "+inf")
        return std::numeric_limits<double>::infinity();
    const double v = parse_number<double>(t, key);
    if (!std::isfinite(v))
        throw ConfigError(key + ": value must be finite");
    return v;
}

bool parse_bool(const std::string &text, const std::string &key)
{
    const auto t = trim(text);
    if (t == "true" || t == "1" || t == "yes")
        return true;
    if (t == "false" || t == "0" || t == "no")
        return false;
    throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

channel::ArrayConfig parse_array(const std::string &text, const std::string &key)
{
    const auto t = trim(text);
    const auto colon = t.find(':');
    if (colon == std::string::npos)
        throw ConfigError(key + ": expected ula:N or upa:HxV, got '" + text + "'");
    const std::string kind = t.substr(0, colon), dims = t.substr(colon + 1);
    if (kind == "ula")
        return channel::ArrayConfig::ula(parse_number<std::size_t>(dims, key));
    if (kind == "upa")
    {
        const auto x = dims.find('x');
        if (x == std::string::npos)
            throw ConfigError(key + ": expected upa:HxV, got '" + text + "'");
        return channel::ArrayConfig::upa(parse_number<std::size_t>(dims.substr(0, x), key),
                                         parse_number<std::size_t>(dims.substr(x + 1), key));
    }
    throw ConfigError(key + ": unknown array kind '" + kind + "'");
}

std::string format_array(const channel::ArrayConfig &a)
{
    if (a.geometry == channel::ArrayGeometry::ula)
        return "ula:" + std::to_string(a.horizontal);
    return "upa:" + std::to_string(a.horizontal) + "x" + std::to_string(a.vertical);
}

// Reads typed values out of the tree, remembers which keys exist and how to
// print their effective values.
class Binder
{
public:
    explicit Binder(const pt::ptree &tree) : tree_(tree) {}

    template <class T, class Parse, class Format>
    void bind(const std::string &key, T &value, Parse parse, Format format)
    {
        known_.insert(key);
        if (const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '/')))
            value = parse(*v, key);
        printers_.emplace_back(key, [&value, format] { return format(value); });
    }

    void size(const std::string &key, std::size_t &v)
    {
        bind(key, v, parse_number<std::size_t>, [](std::size_t x) { return std::to_string(x); });
    }
    void u64(const std::string &key, std::uint64_t &v)
    {
        bind(key, v, parse_number<std::uint64_t>, [](std::uint64_t x) { return std::to_string(x); });
    }
    void real(const std::string &key, double &v) { bind(key, v, parse_real, evaluation::format_double); }
    void flag(const std::string &key, bool &v)
    {
        bind(key, v, parse_bool, [](bool x) { return std::string(x ? "true" : "false"); });
    }
    void text(const std::string &key, std::string &v)
    {
        bind(key, v, [](const std::string &s, const std::string &) { return trim(s); },
             [](const std::string &s) { return s; });
    }
    void list(const std::string &key, std::vector<std::string> &v)
    {
        bind(key, v, [](const std::string &s, const std::string &) { return split(s, ','); }, join);
    }
    void sizes(const std::string &key, std::vector<std::size_t> &v)
    {
        bind(
            key, v,
            [](const std::string &s, const std::string &k) {
                std::vector<std::size_t> out;
                for (const auto &item : split(s, ','))
                    out.push_back(parse_number<std::size_t>(item, k));
                return out;
            },
            [](const std::vector<std::size_t> &x) {
                std::vector<std::string> parts;
                for (auto n : x)
                    parts.push_back(std::to_string(n));
                return join(parts);
            });
    }

    bool present(const std::string &key) const
    {
        return bool(tree_.get_optional<std::string>(pt::ptree::path_type(key, '/')));
    }

    void reject_unknown() const
    {
        for (const auto &[section, body] : tree_)
        {
            if (body.empty())
                throw ConfigError("key '" + section + "' must sit inside a [section]");
            for (const auto &[name, value] : body)
                if (!known_.count(section + "/" + name))
                    throw ConfigError("unknown key '" + section + "." + name + "'");
        }
    }

    std::vector<std::string> echo() const
    {
        std::vector<std::string> out;
        for (const auto &[key, print] : printers_)
        {
            std::string dotted = key;
            std::replace(dotted.begin(), dotted.end(), '/', '.');
            out.push_back(dotted + "=" + print());
        }
        return out;
    }

private:
    const pt::ptree &tree_;
    std::set<std::string> known_;
    std::vector<std::pair<std::string, std::function<std::string()>>> printers_;
};

void require(bool ok, const std::string &message)
{
    if (!ok)
        throw ConfigError(message);
}

} // namespace

std::filesystem::path RunConfig::resolve(const std::string &path) const
{
    const std::filesystem::path p(path);
    return p.is_absolute() ? p : output_dir / p;
}

diffusion::NoiseSchedule RunConfig::schedule() const
{
    return diffusion::build_schedule(steps, beta_min, beta_max);
}

diffusion::TrainConfig RunConfig::train_config(std::size_t epochs) const
{
    diffusion::TrainConfig t;
    t.epochs = epochs;
    t.batch_size = train.batch_size;
    t.learning_rate = train.learning_rate;
    t.seed = derive_seed(seed, "train");
    t.ema_rate = train.ema_rate;
    t.divergence_factor = train.divergence_factor;
    return t;
}

RunConfig parse_config(std::istream &in)
{
    pt::ptree tree;
    try
    {
        pt::ini_parser::read_ini(in, tree);
    }
    catch (const pt::ini_parser_error &e)
    {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (const char *env = std::getenv("CHANFORGE_SEED"); env && *env)
        tree.put(pt::ptree::path_type("run/seed", '/'), std::string(env));

    RunConfig c;
    Binder b(tree);
    std::string output_dir = c.output_dir.string();
    b.u64("run/seed", c.seed);
    b.text("run/output_dir", output_dir);

    auto &s = c.scene;
    double sector_deg = 60.0, carrier_ghz = 28.0;
    b.bind("scene/tx", s.tx, parse_array, format_array);
    b.bind("scene/rx", s.rx, parse_array, format_array);
    b.real("scene/radius", s.radius);
    b.real("scene/min_range", s.min_range);
    b.real("scene/sector_deg", sector_deg);
    b.real("scene/bs_height", s.bs_height);
    b.real("scene/ue_height_min", s.ue_height_min);
    b.real("scene/ue_height_max", s.ue_height_max);
    b.size("scene/l_max", s.l_max);
    b.size("scene/num_scatterers", s.num_scatterers);
    b.real("scene/carrier_ghz", carrier_ghz);
    b.real("scene/k_rician", s.k_rician);
    b.u64("scene/scene_seed", s.scene_seed);

    b.size("data/n_train", c.data.n_train);
    b.size("data/n_test", c.data.n_test);
    b.bind(
        "data/normalization", c.data.normalization,
        [](const std::string &v, const std::string &k) {
            try
            {
                return channel::parse_normalization(trim(v));
            }
            catch (const std::invalid_argument &)
            {
                throw ConfigError(k + ": unknown normalization '" + v + "'");
            }
        },
        [](channel::Normalization m) { return channel::to_string(m); });
    b.u64("data/train_position_seed", c.data.train_position_seed);
    b.u64("data/test_position_seed", c.data.test_position_seed);

    b.size("schedule/steps", c.steps);
    b.real("schedule/beta_min", c.beta_min);
    b.real("schedule/beta_max", c.beta_max);

    auto &m = c.model;
    m.position_octaves = 4;
    m.position_depth = 2;
    b.size("model/width", m.width);
    b.size("model/depth", m.depth);
    b.size("model/time_features", m.time_features);
    b.size("model/position_octaves", m.position_octaves);
    b.size("model/position_depth", m.position_depth);
    b.size("model/position_hidden", m.position_hidden);

    auto &t = c.train;
    b.text("train/data", t.data);
    b.size("train/epochs", t.epochs);
    b.size("train/consistency_epochs", t.consistency_epochs);
    b.size("train/batch_size", t.batch_size);
    b.real("train/learning_rate", t.learning_rate);
    b.real("train/consistency_learning_rate", t.consistency_learning_rate);
    b.real("train/ema_rate", t.ema_rate);
    b.real("train/divergence_factor", t.divergence_factor);

    auto &a = c.augment;
    b.text("augment/data", a.data);
    b.text("augment/checkpoint", a.checkpoint);
    b.size("augment/n_aug", a.n_aug);
    b.real("augment/snr_db", a.snr_db);
    b.size("augment/num_steps", a.num_steps);

    auto &p = c.peaks;
    const bool has_d_max = b.present("peaks/d_max"), has_cm_steps = b.present("peaks/consistency_steps");
    b.text("peaks/train", p.train);
    b.text("peaks/test", p.test);
    b.text("peaks/cddim_checkpoint", p.cddim_checkpoint);
    b.text("peaks/consistency_checkpoint", p.consistency_checkpoint);
    b.list("peaks/methods", p.methods);
    b.size("peaks/d_max", p.d_max);
    b.size("peaks/consistency_steps", p.consistency_steps);

    auto &k = c.compress;
    b.list("compress/datasets", k.datasets);
    b.text("compress/test", k.test);
    b.text("compress/validation", k.validation);
    b.size("compress/rate", k.model.rate);
    b.size("compress/wide_width", k.model.wide_width);
    b.size("compress/narrow_width", k.model.narrow_width);
    b.size("compress/decoder_width", k.model.decoder_width);
    b.size("compress/residual_blocks", k.model.residual_blocks);
    b.size("compress/epochs", k.epochs);
    b.size("compress/batch_size", k.batch_size);
    b.real("compress/learning_rate", k.learning_rate);
    b.size("compress/restarts", k.restarts);

    auto &e = c.beam;
    b.text("beam/train", e.train);
    b.text("beam/test", e.test);
    b.sizes("beam/n_probe", e.n_probe);
    b.list("beam/methods", e.methods);
    b.size("beam/hidden", e.hidden);
    b.size("beam/depth", e.depth);
    b.size("beam/epochs", e.epochs);
    b.size("beam/batch_size", e.batch_size);
    b.real("beam/learning_rate", e.learning_rate);
    b.real("beam/tx_dbm", e.tx_dbm);
    b.real("beam/noise_dbm", e.noise_dbm);
    b.flag("beam/noisy_training", e.noisy_training);
    b.size("beam/oversampling", e.oversampling);

    b.reject_unknown();

    c.output_dir = output_dir;
    s.sector_half_width = sector_deg * std::numbers::pi / 180.0;
    s.carrier_hz = carrier_ghz * 1e9;
    m.n_r = s.n_r();
    m.n_t = s.n_t();
    m.steps = c.steps;
    m.radius = s.radius;
    k.model.n_r = s.n_r();
    k.model.n_t = s.n_t();
    if (!has_d_max)
        p.d_max = s.n_t() == 0 ? 0 : s.n_t() - 1;
    if (!has_cm_steps)
        p.consistency_steps = std::max<std::size_t>(1, c.steps / 8);

    try
    {
        s.validate();
        m.validate();
        k.model.validate();
        diffusion::build_schedule(c.steps, c.beta_min, c.beta_max);
    }
    catch (const std::invalid_argument &err)
    {
        throw ConfigError(err.what());
    }
    require(!output_dir.empty(), "run.output_dir must not be empty");
    require(c.data.n_train > 0 && c.data.n_test > 0, "data.n_train and data.n_test must be positive");
    require(c.data.train_position_seed == 0 || c.data.train_position_seed != c.data.test_position_seed,
            "data: train and test position seeds coincide, so the splits would share positions");
    require(t.batch_size > 0 && t.learning_rate > 0.0 && t.consistency_learning_rate > 0.0 && t.ema_rate >= 0.0 &&
                t.ema_rate < 1.0 && t.divergence_factor > 1.0,
            "train: need batch_size > 0, learning rates > 0, 0 <= ema_rate < 1, divergence_factor > 1");
    require(a.n_aug > 0, "augment.n_aug must be positive");
    require(!std::isinf(a.snr_db) || a.snr_db > 0.0, "augment.snr_db must be finite or +inf");
    require(a.num_steps <= c.steps, "augment.num_steps cannot exceed schedule.steps");
    require(p.consistency_steps >= 1 && p.consistency_steps <= c.steps,
            "peaks.consistency_steps must lie in [1, schedule.steps]");
    require(k.epochs > 0 && k.batch_size > 0 && k.learning_rate > 0.0 && k.restarts > 0,
            "compress: epochs, batch_size, learning_rate and restarts must be positive");
    require(!e.n_probe.empty() && std::all_of(e.n_probe.begin(), e.n_probe.end(), [](auto n) { return n > 0; }),
            "beam.n_probe must list positive counts");
    require(e.hidden > 0 && e.depth > 0 && e.batch_size > 0 && e.learning_rate > 0.0 && e.oversampling > 0,
            "beam: hidden, depth, batch_size, learning_rate and oversampling must be positive");
    for (const auto &method : p.methods)
        require(method == "reference" || method == "cddim" || method == "consistency" || method == "gaussian" ||
                    method == "nearest",
                "peaks.methods: unknown method '" + method + "'");
    for (const auto &method : e.methods)
        require(method == "bae" || method == "bae_random" || method == "mrt_mrc" || method == "dft_egc" ||
                    method == "genie_dft" || method == "exhaustive",
                "beam.methods: unknown method '" + method + "'");
    for (const auto &d : k.datasets)
        require(d.find(':') != std::string::npos && d.front() != ':' && d.back() != ':',
                "compress.datasets: expected name:path, got '" + d + "'");

    c.echo = b.echo();
    return c;
}

RunConfig load_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw MissingInput("cannot open config file " + path.string());
    return parse_config(in);
}

} // namespace chanforge::app
