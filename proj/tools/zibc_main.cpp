#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "zibc/cli_io.hpp"
#include "zibc/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitContract = 2;
constexpr int kExitNumerical = 3;

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-inflation bias correction toolkit for aggregate-data "
                 "meta-analysis of Poisson-modeled trials"};
    app.require_subcommand(1);

    zibc::CorrectConfig correct_cfg;
    auto* correct = app.add_subcommand(
        "correct", "Correct reported Poisson effects from a study summary CSV");
    correct->add_option("input", correct_cfg.input, "study table CSV")->required();
    correct->add_option("--out-dir", correct_cfg.out_dir, "output directory");
    correct->add_flag("--pool", correct_cfg.pool,
                      "pool corrected effects with a random-effects model");
    correct->add_option("--format", correct_cfg.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    zibc::FitConfig fit_cfg;
    auto* fit = app.add_subcommand(
        "fit", "Fit a Poisson or zero-inflated Poisson model to participant data");
    fit->add_option("input", fit_cfg.input, "participant-level CSV (y, treat, ...)")
        ->required();
    fit->add_option("--model", fit_cfg.model, "poisson or zip")
        ->check(CLI::IsMember({"poisson", "zip"}));
    fit->add_option("--covariates", fit_cfg.covariates,
                    "covariate column names (grand-mean centered before the fit)");
    fit->add_option("--zero-model", fit_cfg.zero_model, "full or intercept")
        ->check(CLI::IsMember({"full", "intercept"}));
    fit->add_option("--out-dir", fit_cfg.out_dir, "output directory");

    zibc::MetaConfig meta_cfg;
    auto* meta = app.add_subcommand(
        "meta", "Random-effects pooling and forest plot from an effects CSV");
    meta->add_option("input", meta_cfg.input, "effects CSV (study_id,effect,se[,method])")
        ->required();
    meta->add_option("--out-dir", meta_cfg.out_dir, "output directory");

    zibc::SimulateConfig sim_cfg;
    auto* simulate = app.add_subcommand(
        "simulate", "Run the Monte Carlo study described by a scenario file");
    simulate->add_option("scenario", sim_cfg.scenario_file, "scenario file (key=value or JSON)")
        ->required();
    simulate->add_option("--out-dir", sim_cfg.out_dir, "output directory");
    auto* seed_opt = simulate->add_option("--seed", sim_cfg.seed, "random seed (required)");
    simulate->add_option("--workers", sim_cfg.workers, "worker thread count");
    simulate->add_option("--reps", sim_cfg.replications, "override replication count");
    simulate->add_option("--forest-rep", sim_cfg.forest_rep,
                         "replication rendered as the forest plot");
    simulate->add_option("--zero-model", sim_cfg.zero_model,
                         "zero model for the ZIP fits (full or intercept)")
        ->check(CLI::IsMember({"full", "intercept"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitContract;
    }

    try {
        if (*correct) {
            zibc::run_correct(correct_cfg);
        } else if (*fit) {
            zibc::run_fit(fit_cfg);
        } else if (*meta) {
            zibc::run_meta(meta_cfg);
        } else if (*simulate) {
            sim_cfg.has_seed = seed_opt->count() > 0;
            zibc::run_simulate(sim_cfg);
        }
    } catch (const zibc::ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitContract;
    } catch (const zibc::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitContract;
    } catch (const zibc::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
