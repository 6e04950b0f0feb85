#ifndef ZIBC_CLI_IO_HPP
#define ZIBC_CLI_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "zibc/sim.hpp"

namespace zibc {

/// Command implementations behind the CLI. All configs validate before any
/// computation; errors surface as ContractError (exit 2) or NumericalError
/// (exit 3) in the binary.

struct CorrectConfig {
    std::string input;
    std::string out_dir = ".";
    bool pool = false;
    std::string format = "csv"; // csv | json (json adds the JSON report)
};

struct FitConfig {
    std::string input;
    std::string model = "poisson"; // poisson | zip
    std::vector<std::string> covariates;
    std::string zero_model = "full"; // full | intercept
    std::string out_dir = ".";
};

struct MetaConfig {
    std::string input;
    std::string out_dir = ".";
};

struct SimulateConfig {
    std::string scenario_file;
    std::string out_dir = ".";
    bool has_seed = false;
    std::uint64_t seed = 0;
    int workers = 0;       // 0: take from scenario file
    int replications = 0;  // 0: take from scenario file
    int forest_rep = 0;    // replication rendered as a forest plot
    std::string zero_model; // empty: take from scenario file
};

/// Scenario file contents: flat key=value lines or a JSON object.
struct ScenarioFile {
    SimScenario scenario;
    bool has_seed = false;
};

ScenarioFile parse_scenario_file(const std::string& path);

void run_correct(const CorrectConfig& config);
void run_fit(const FitConfig& config);
void run_meta(const MetaConfig& config);
void run_simulate(const SimulateConfig& config);

} // namespace zibc

#endif
