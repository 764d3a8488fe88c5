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

#include "chanforge/io.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace chanforge;

int main(int argc, char **argv)
{
    CLI::App cli{"chanforge: position-conditioned channel synthesis, augmentation and downstream evaluation"};
    cli.require_subcommand(1);
    std::string config_path;
    auto add_config = [&](CLI::App *sub) { sub->add_option("-c,--config", config_path, "INI run configuration")->required(); };

    auto *gen = cli.add_subcommand("gen-data", "simulate reference train/test datasets");
    add_config(gen);

    app::TrainOptions train_opts;
    std::string mode = "cddim";
    auto *train = cli.add_subcommand("train", "train the cDDIM or consistency model");
    add_config(train);
    train->add_option("--mode", mode, "cddim or consistency")->check(CLI::IsMember({"cddim", "consistency"}));
    train->add_option("--init", train_opts.init, "cDDIM checkpoint for the consistency warm start");
    train->add_flag("--resume", train_opts.resume, "continue from the existing checkpoint of this mode");

    std::string method = "cddim";
    auto *aug = cli.add_subcommand("augment", "build an augmented dataset");
    add_config(aug);
    aug->add_option("--method", method, "cddim, gaussian or nearest")
        ->check(CLI::IsMember({"cddim", "gaussian", "nearest"}));

    std::string task = "peaks";
    auto *eval = cli.add_subcommand("eval", "evaluate methods and write a metrics CSV");
    add_config(eval);
    eval->add_option("--task", task, "peaks, compress or beam")->check(CLI::IsMember({"peaks", "compress", "beam"}));

    try
    {
        cli.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = cli.exit(e);
        return code == 0 ? app::exit_ok : app::exit_config;
    }

    try
    {
        const app::RunConfig cfg = app::load_config(config_path);
        if (gen->parsed())
            app::cmd_gen_data(cfg, std::cout);
        else if (train->parsed())
        {
            train_opts.mode = mode == "consistency" ? app::TrainMode::consistency : app::TrainMode::cddim;
            app::cmd_train(cfg, train_opts, std::cout);
        }
        else if (aug->parsed())
            app::cmd_augment(cfg, method, std::cout);
        else
            app::cmd_eval(cfg, task, std::cout);
    }
    catch (const app::ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return app::exit_config;
    }
    catch (const app::MissingInput &e)
    {
        std::cerr << "missing input: " << e.what() << '\n';
        return app::exit_missing_input;
    }
    catch (const diffusion::DivergenceError &e)
    {
        std::cerr << "divergence: " << e.what() << '\n';
        return app::exit_divergence;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return app::exit_failure;
    }
    return app::exit_ok;
}
