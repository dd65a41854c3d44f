#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "cfx/commands.hpp"
#include "cfx/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"cfxlab: model extraction against counterfactual-explanation APIs"};
    app.require_subcommand(1);

    std::string config_path, results_csv, out_svg, ablation;
    cfx::CliOverrides cli;
    std::uint64_t lemma_seed = 1;

    auto add_common = [&](CLI::App* cmd, bool sweep_flags) {
        cmd->add_option("--config", config_path, "config file (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--out-dir", cli.out_dir,
                        "output root (default: $CFX_OUT_DIR, then config)");
        if (sweep_flags) {
            cmd->add_option("--jobs", cli.jobs, "parallel sweep cells")
                ->check(CLI::PositiveNumber);
            cmd->add_option("--runs", cli.runs, "runs per query size")
                ->check(CLI::PositiveNumber);
            cmd->add_option("--sizes", cli.sizes, "query sizes (ascending)")
                ->delimiter(',');
        }
    };

    CLI::App* train = app.add_subcommand("train-cloud",
                                         "train the cloud model and checkpoints");
    add_common(train, false);

    CLI::App* sweep = app.add_subcommand("sweep", "run the strategy/size/run grid");
    add_common(sweep, true);
    CLI::Option* seed_opt =
        sweep->add_option("--seed", cli.seed, "override the sweep base seed");

    CLI::App* ablate = app.add_subcommand("ablate", "sweep one ablation axis");
    ablate->add_option("ablation", ablation,
                       "capacity | threshold | metric | imbalance | shuffle")
        ->required();
    add_common(ablate, true);
    CLI::Option* ab_seed_opt =
        ablate->add_option("--seed", cli.seed, "override the sweep base seed");

    CLI::App* plot = app.add_subcommand("plot", "render an aggregates CSV as SVG");
    plot->add_option("results_csv", results_csv, "aggregates CSV")
        ->required()
        ->check(CLI::ExistingFile);
    plot->add_option("out_svg", out_svg, "output SVG path")->required();
    plot->add_option("--cost-axis", cli.cost_axis, "queries | api-calls");

    CLI::App* lemma = app.add_subcommand("lemma-check",
                                         "verify one-pair linear boundary recovery");
    lemma->add_option("--seed", lemma_seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // bad flags are config errors
    }

    cli.has_seed = seed_opt->count() > 0 || ab_seed_opt->count() > 0;

    try {
        if (train->parsed()) {
            cfx::cmd_train_cloud(config_path, cli, std::cout);
        } else if (sweep->parsed()) {
            cfx::cmd_sweep(config_path, cli, std::cout);
        } else if (ablate->parsed()) {
            cfx::cmd_ablate(config_path, ablation, cli, std::cout);
        } else if (plot->parsed()) {
            cfx::cmd_plot(results_csv, out_svg, cli, std::cout);
        } else if (lemma->parsed()) {
            if (!cfx::cmd_lemma_check(lemma_seed, std::cout)) return 2;
        }
    } catch (const cfx::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
