// Command-line front end: one subcommand per experiment.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dnlspde/cli/config.hpp"
#include "dnlspde/cli/manifest.hpp"
#include "dnlspde/cli/run.hpp"

namespace {

// --workers wins over DNLSPDE_WORKERS, which wins over montecarlo.workers.
unsigned resolve_workers(std::optional<unsigned> flag, std::optional<unsigned> from_config) {
    if (flag) return *flag;
    if (const char* env = std::getenv("DNLSPDE_WORKERS"); env && *env) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid DNLSPDE_WORKERS=" << env << "\n";
    }
    return from_config.value_or(1);
}

} // namespace

int main(int argc, char** argv) {
    using namespace dnlspde::cli;

    CLI::App app{"Numerical lab for doubly nonlinear stochastic parabolic equations"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::optional<std::string> out_dir;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "TOML run configuration (defaults apply when omitted)");
    app.add_option("--out", out_dir, "output directory (overrides output.directory)");
    app.add_option("--workers", workers, "worker threads (overrides DNLSPDE_WORKERS)")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "base seed (overrides montecarlo.base_seed)");

    const std::pair<const char*, const char*> commands[] = {
        {"validate", "check the coefficient assumptions on random samples"},
        {"skeleton", "solve the controlled deterministic equation"},
        {"simulate", "Monte Carlo ensembles of the small-noise equation"},
        {"ldp", "rate function and empirical large-deviation probabilities"},
        {"invariant", "dissipativity, occupation averages, moment bound, semigroup"},
        {"convergence", "time-step refinement and weak-control continuity tables"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kSuccess : kConfigError;
    }

    RunOptions opt;
    opt.experiment = parse_experiment(app.get_subcommands().front()->get_name());
    opt.out_dir = out_dir;
    opt.seed = seed;
    opt.config_path = config_path.value_or("");

    const std::string started = utc_timestamp();
    RunConfig cfg;
    try {
        if (config_path) cfg = parse_config(*config_path);
    } catch (const ConfigError& e) {
        opt.workers = resolve_workers(workers, std::nullopt);
        std::cerr << e.what() << "\n";
        return report_config_error(e, opt, started).exit_code;
    }
    opt.workers = resolve_workers(workers, cfg.montecarlo.workers);

    const auto res = run(cfg, opt);
    for (const auto& e : res.manifest.errors) std::cerr << "error: " << e << "\n";
    std::cout << res.manifest.experiment << ": exit " << res.exit_code << ", " << res.manifest.files.size()
              << " artifacts in " << res.out_dir.string() << "\n";
    return res.exit_code;
}
