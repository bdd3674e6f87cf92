#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qlab/experiments.hpp"
#include "qlab_cli/config.hpp"

namespace qlab::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitError = 1,
    kExitNotConverged = 2,
    kExitCertificateFailed = 3,
};

struct RunOptions {
    std::string command;  ///< solve | sweep | diagnose | verify
    std::filesystem::path config;
    std::filesystem::path out;
    int threads = 0;  ///< 0 keeps the OpenMP default
    bool deterministic = false;
    int verbosity = 1;  ///< 0 quiet, 1 summary, 2 per-row detail
};

struct SolveSpec {
    int n = 0;
    MaterialParams params;
    double epsilon = 0.0;
    BoundaryMode boundary = BoundaryMode::hedgehog;
    Vec3 director{0.0, 0.0, 1.0};  ///< constant-vacuum boundary only
    std::string init_mode = "reference";  ///< reference | boundary | file
    double init_core_cells = 3.0;
    std::filesystem::path init_file;
    SolveOptions solve;
};

struct DiagnoseSpec {
    std::filesystem::path field;
    std::optional<int> n;
    std::optional<double> epsilon, a, b, c;
    Ball region{{0.0, 0.0, 0.0}, 0.5};
    std::vector<Vec3> centers;
    std::vector<double> radii;  ///< empty: per-center linear ladder
    double cover_r = 0.0;       ///< ≤ 0: 4ε
    double cover_delta = 0.0;   ///< ≤ 0: s_*/10
};

struct VerifySpec {
    std::filesystem::path report;
};

// Each reader consumes exactly the keys its command understands.
SolveSpec read_solve_spec(ConfigReader& cfg);
SweepConfig read_sweep_config(ConfigReader& cfg);
DiagnoseSpec read_diagnose_spec(ConfigReader& cfg);
VerifySpec read_verify_spec(ConfigReader& cfg);

/// Runs one command; progress goes to `log`, errors to `err`. Never throws.
int run(const RunOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace qlab::cli
