#include <iostream>

#include <CLI11.hpp>

#include "qlab_cli/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Q-tensor lab: vanishing-elasticity sweeps and diagnostics"};
    app.set_version_flag("--version", QLAB_VERSION);
    app.require_subcommand(1, 1);

    qlab::cli::RunOptions opts;
    bool quiet = false;
    bool verbose = false;
    for (const char* name : {"solve", "sweep", "diagnose", "verify"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config, "key=value config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out, "output directory (created if absent)")->required();
        sub->add_option("--threads", opts.threads, "OpenMP thread count")->check(CLI::PositiveNumber);
        sub->add_flag("--deterministic", opts.deterministic, "pin scheduling and omit wall times from reports");
        sub->add_flag("-q,--quiet", quiet, "errors only");
        sub->add_flag("-v,--verbose", verbose, "per-row progress");
        sub->callback([&opts, name] { opts.command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? qlab::cli::kExitOk : qlab::cli::kExitError;
    }
    opts.verbosity = quiet ? 0 : (verbose ? 2 : 1);
    return qlab::cli::run(opts, std::cout, std::cerr);
}
