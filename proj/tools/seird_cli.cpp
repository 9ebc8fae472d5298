// Command-line driver for the epidemic calibration / policy pipeline.
//
//   seird fit      --config cfg.json --data cases.csv --out dir [--seed N]
//   seird optimize --config cfg.json --fit fitdir     --out dir [--seed N]
//   seird band     --config cfg.json --fit fitdir --policy policy.csv --out dir
//   seird analyze  --config cfg.json --data cases.csv --out dir
//
// Every default named in the model can be overridden with --set key=value;
// outputs are a pure function of (inputs, seed, overrides).

#include "seird/seird.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& entries) {
    std::map<std::string, std::string> out;
    for (const auto& entry : entries) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0)
            throw seird::ValidationError("--set expects key=value, got '" + entry + "'");
        out[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic SEIRD calibration, lockdown policy search and sensitivity bands"};
    app.require_subcommand(1);

    std::string config_path, data_path, fit_dir, policy_path, out_dir;
    std::uint64_t seed = 0;
    std::vector<std::string> set_entries;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "region config JSON")->required();
        cmd->add_option("--out", out_dir, "output directory")->required();
        cmd->add_option("--seed", seed, "random seed (default 0)");
        cmd->add_option("--set", set_entries, "override key=value (repeatable)");
    };

    CLI::App* cmd_fit = app.add_subcommand("fit", "calibrate transition and testing probabilities");
    add_common(cmd_fit);
    cmd_fit->add_option("--data", data_path, "case-count CSV")->required();

    CLI::App* cmd_optimize = app.add_subcommand("optimize", "grid-search the lockdown policy");
    add_common(cmd_optimize);
    cmd_optimize->add_option("--fit", fit_dir, "directory with fit.csv and testing_probs.csv")->required();

    CLI::App* cmd_band = app.add_subcommand("band", "sensitivity band under the fixed policy");
    add_common(cmd_band);
    cmd_band->add_option("--fit", fit_dir, "directory with fit.csv and testing_probs.csv")->required();
    cmd_band->add_option("--policy", policy_path, "policy.csv from optimize")->required();

    CLI::App* cmd_analyze = app.add_subcommand("analyze", "fit, optimize and band in one run");
    add_common(cmd_analyze);
    cmd_analyze->add_option("--data", data_path, "case-count CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        seird::CommandIo io;
        io.config_path = config_path;
        io.data_path = data_path;
        io.fit_dir = fit_dir;
        io.policy_path = policy_path;
        io.out_dir = out_dir;
        io.seed = seed;
        io.overrides = parse_overrides(set_entries);

        if (cmd_fit->parsed()) seird::run_fit(io);
        else if (cmd_optimize->parsed()) seird::run_optimize(io);
        else if (cmd_band->parsed()) seird::run_band(io);
        else if (cmd_analyze->parsed()) seird::run_analyze(io);
    } catch (const seird::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const seird::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
