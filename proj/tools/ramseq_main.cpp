// Command-line front end: scenario-driven solve / simulate / verify / fiscal
// / sweep pipelines plus the standalone closed-form oracle suite.

#include <clocale>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ramseq/commands.hpp"
#include "ramseq/scenario.hpp"

namespace {

struct CommonArgs {
    std::string scenario_path;
    ramseq::cli::CliOptions options;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool scenario_required = true) {
    auto* sc = cmd->add_option("--scenario", args.scenario_path, "scenario file (TOML subset)");
    if (scenario_required) sc->required();
    cmd->add_option("--out", args.options.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--threads", args.options.threads, "worker threads for sweeps")
        ->capture_default_str();
    cmd->add_flag("--allow-unverified", args.options.allow_unverified,
                  "write artifacts even when verification fails");
}

ramseq::Scenario load_or_default(const CommonArgs& args) {
    if (args.scenario_path.empty()) return ramseq::Scenario{};
    return ramseq::load_scenario(args.scenario_path);
}

}  // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_NUMERIC, "C");
    CLI::App app{"equilibrium policies for growth with non-constant discounting"};
    app.require_subcommand(1);

    CommonArgs solve_args, sim_args, verify_args, fiscal_args, sweep_args, oracle_args;
    double kbar = 0.0, k0 = 0.0, horizon = 0.0;

    auto* solve = app.add_subcommand("solve", "construct equilibrium policies");
    add_common(solve, solve_args);
    auto* solve_kbar = solve->add_option("--k-bar", kbar, "single steady-state target");

    auto* simulate = app.add_subcommand("simulate", "simulate the closed-loop path");
    add_common(simulate, sim_args);
    auto* sim_kbar = simulate->add_option("--k-bar", kbar, "steady-state target");
    auto* sim_k0 = simulate->add_option("--k0", k0, "initial capital");
    auto* sim_T = simulate->add_option("--horizon", horizon, "years to simulate");

    auto* verify = app.add_subcommand("verify", "re-check solve artifacts");
    add_common(verify, verify_args);

    auto* fiscal = app.add_subcommand("fiscal", "tax surface and lump sums from a trajectory");
    add_common(fiscal, fiscal_args);
    auto* fis_kbar = fiscal->add_option("--k-bar", kbar, "steady-state target override");

    auto* sweep = app.add_subcommand("sweep", "steady-state family diagnostics");
    add_common(sweep, sweep_args);

    auto* oracle = app.add_subcommand("oracle", "closed-form reference suite");
    add_common(oracle, oracle_args, /*scenario_required=*/false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            if (*solve_kbar) solve_args.options.kbar = kbar;
            return ramseq::cli::cmd_solve(load_or_default(solve_args), solve_args.options);
        }
        if (simulate->parsed()) {
            if (*sim_kbar) sim_args.options.kbar = kbar;
            if (*sim_k0) sim_args.options.k0 = k0;
            if (*sim_T) sim_args.options.horizon = horizon;
            return ramseq::cli::cmd_simulate(load_or_default(sim_args), sim_args.options);
        }
        if (verify->parsed())
            return ramseq::cli::cmd_verify(load_or_default(verify_args), verify_args.options);
        if (fiscal->parsed()) {
            if (*fis_kbar) fiscal_args.options.kbar = kbar;
            return ramseq::cli::cmd_fiscal(load_or_default(fiscal_args), fiscal_args.options);
        }
        if (sweep->parsed())
            return ramseq::cli::cmd_sweep(load_or_default(sweep_args), sweep_args.options);
        if (oracle->parsed())
            return ramseq::cli::cmd_oracle(load_or_default(oracle_args), oracle_args.options);
    } catch (const ramseq::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
