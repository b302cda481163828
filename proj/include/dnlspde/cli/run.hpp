#pragma once

// Experiment dispatch. run() writes CSV/JSON artifacts plus manifest.json
// and maps outcomes to exit codes: 0 success, 1 experiment-level failure,
// 2 configuration error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dnlspde/cli/config.hpp"
#include "dnlspde/cli/manifest.hpp"
#include "dnlspde/coefficients.hpp"
#include "dnlspde/dynamics.hpp"
#include "dnlspde/ergodic.hpp"
#include "dnlspde/io.hpp"
#include "dnlspde/ldp.hpp"
#include "dnlspde/montecarlo.hpp"
#include "dnlspde/parallel.hpp"

namespace dnlspde::cli {

enum ExitCode : int { kSuccess = 0, kExperimentFailure = 1, kConfigError = 2 };

struct RunOptions {
    std::optional<Experiment> experiment;  // overrides the config's `experiment`
    std::optional<std::string> out_dir;    // overrides output.directory
    std::optional<std::uint64_t> seed;     // overrides montecarlo.base_seed
    unsigned workers = 1;
    std::string config_path;
};

struct RunResult {
    int exit_code = kSuccess;
    std::filesystem::path out_dir;
    RunManifest manifest;
};

namespace detail {

inline std::string dump(const io::json& j) { return j.dump(2) + "\n"; }

struct Context {
    const RunConfig& cfg;
    ArtifactWriter& out;
    const WorkerPool& pool;
    std::uint64_t seed;
    std::vector<std::string>& errors;

    Grid1D grid() const { return Grid1D(cfg.grid.n_interior, cfg.grid.length); }
    Coefficients coefficients() const { return make_coefficients(cfg.coefficients); }
    SolverSettings solver() const { return make_solver(cfg.solver); }
    Field u0() const { return make_initial(cfg.initial, grid()); }
    Control control(std::size_t n_steps) const { return make_control(cfg.control, cfg.time.T, n_steps); }
    Control control() const { return control(cfg.time.N); }
};

template <class Fn>
std::string render(Fn&& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

inline int run_validate(Context& ctx) {
    const auto c = ctx.coefficients();
    const auto rep = validate_assumptions(c, ctx.cfg.validate.samples, ctx.seed);
    io::json j = {{"assumptions", io::to_json(rep)}};
    if (ctx.cfg.validate.dissipativity) {
        const auto d = check_dissipativity(c, ctx.cfg.ergodic.dissipativity_samples, ctx.seed, ctx.grid());
        j["dissipativity"] = io::to_json(d, ctx.cfg.ergodic.dissipativity_samples);
    }
    ctx.out.write("validation.json", dump(j));
    if (!rep.all_passed()) {
        for (const auto& chk : rep.checks)
            if (!chk.passed) ctx.errors.push_back("assumption " + chk.name + " failed");
        return kExperimentFailure;
    }
    return kSuccess;
}

inline int run_skeleton(Context& ctx) {
    const auto c = ctx.coefficients();
    const auto ctrl = ctx.control();
    const auto traj = solve_skeleton(ctx.u0(), ctrl, c, ctx.solver());
    ctx.out.write("grid.json", dump(io::to_json(traj.grid)));
    ctx.out.write("control.csv", render([&](std::ostream& os) {
                      os << "step,t,h\n";
                      for (std::size_t k = 0; k < ctrl.n_steps(); ++k)
                          os << k + 1 << ',' << io::fmt(traj.times[k + 1]) << ',' << io::fmt(ctrl[k]) << '\n';
                  }));
    ctx.out.write("trajectory.csv", render([&](std::ostream& os) { io::write_trajectory_csv(os, traj, c.p()); }));
    if (ctx.cfg.output.dump_interval > 0)
        ctx.out.write("fields.csv", render([&](std::ostream& os) {
                          io::write_fields_csv(os, traj, ctx.cfg.output.dump_interval);
                      }));
    io::json d = io::to_json(apriori_report(traj, c));
    d["control_energy"] = io::num(ctrl.energy());
    ctx.out.write("diagnostics.json", dump(d));
    return kSuccess;
}

inline int run_simulate(Context& ctx) {
    const auto c = ctx.coefficients();
    const auto& mc = ctx.cfg.montecarlo;
    std::optional<Control> shift;
    if (ctx.cfg.control.kind != "zero") shift = ctx.control();
    io::json runs = io::json::array();
    std::vector<C1Row> c1;
    for (std::size_t i = 0; i < mc.eps_list.size(); ++i) {
        EnsembleConfig e{mc.paths, ctx.seed, mc.eps_list[i], shift, c, ctx.u0(), ctx.cfg.time.T, ctx.cfg.time.N,
                         ctx.solver()};
        const auto rep = ensemble_stats(e, ctx.pool);
        ctx.out.write("ensemble_" + std::to_string(i) + ".csv",
                      render([&](std::ostream& os) { io::write_ensemble_csv(os, rep); }));
        io::json r = io::to_json(rep);
        r["epsilon"] = io::num(mc.eps_list[i]);
        r["jensen_holds"] = rep.sup_b_l2_4.mean >= rep.sup_b_l2_sq.mean * rep.sup_b_l2_sq.mean;
        runs.push_back(std::move(r));
        c1.push_back({mc.eps_list[i], rep.sup_deviation, rep.failed_paths});
    }
    ctx.out.write("c1.csv", render([&](std::ostream& os) { io::write_c1_csv(os, c1); }));
    ctx.out.write("ensemble_summary.json", dump({{"shifted", shift.has_value()}, {"runs", std::move(runs)}}));
    return kSuccess;
}

inline EventSpec make_event(const Context& ctx, const Coefficients& c) {
    const auto& ev = ctx.cfg.event;
    const auto grid = ctx.grid();
    if (ev.target == "tabulated") return EventSpec::endpoint_ball(Field(grid, ev.values), ev.radius);
    std::vector<Field> knots;
    if (ev.target == "zero") {
        knots.assign(ctx.cfg.time.N + 1, Field(grid));
    } else {
        const auto ref = solve_skeleton(ctx.u0(), Control::constant(ctx.cfg.time.T, ctx.cfg.time.N, ev.target_control),
                                        c, ctx.solver());
        for (const auto& u : ref.u) knots.push_back(ev.target_scale * u);
    }
    if (ev.kind == "sup_tube") return EventSpec::sup_tube(std::move(knots), ev.radius);
    return EventSpec::endpoint_ball(knots.back(), ev.radius);
}

inline int run_ldp(Context& ctx) {
    for (double e : ctx.cfg.montecarlo.eps_list)
        if (!(e > 0.0)) throw ConfigError({"montecarlo.eps_list: entries must be positive for ldp runs"});
    const auto c = ctx.coefficients();
    const auto ev = make_event(ctx, c);
    const auto u0 = ctx.u0();
    const auto& o = ctx.cfg.optimizer;
    OptimizerSettings opt;
    opt.penalty_schedule = o.penalty_schedule;
    opt.fd_step = o.fd_step;
    opt.max_iter = o.max_iter;
    opt.grad_tol = o.grad_tol;
    opt.event_tol = o.event_tol;
    opt.horizon = ctx.cfg.time.T;
    opt.n_steps = ctx.cfg.time.N;
    opt.solver = ctx.solver();
    const auto rate = rate_function(ev, u0, c, opt, ctx.pool);
    ctx.out.write("rate.csv", render([&](std::ostream& os) { io::write_rate_csv(os, rate); }));
    ctx.out.write("rate.json", dump(io::to_json(rate)));

    const SimulationSetup setup{u0, c, ctx.cfg.time.T, ctx.cfg.time.N, ctx.solver()};
    const auto rows = empirical_ldp(ev, ctx.cfg.montecarlo.eps_list, ctx.cfg.montecarlo.paths, ctx.seed, setup, ctx.pool);
    ctx.out.write("ldp.csv", render([&](std::ostream& os) { io::write_ldp_csv(os, rows); }));
    io::json jr = io::json::array();
    for (const auto& r : rows) jr.push_back(io::to_json(r));
    ctx.out.write("ldp.json", dump({{"minus_I", io::num(-rate.value)}, {"rows", std::move(jr)}}));

    if (!rate.converged) {
        ctx.errors.push_back("rate function optimizer did not reach the event (residual " +
                             io::fmt(rate.constraint_residual) + ")");
        return kExperimentFailure;
    }
    return kSuccess;
}

inline int run_invariant(Context& ctx) {
    const auto c = ctx.coefficients();
    const auto grid = ctx.grid();
    const auto u0 = ctx.u0();
    const auto& g = ctx.cfg.ergodic;
    int code = kSuccess;

    const auto diss = check_dissipativity(c, g.dissipativity_samples, ctx.seed, grid);
    ctx.out.write("dissipativity.json", dump(io::to_json(diss, g.dissipativity_samples)));
    if (!diss.passed) ctx.errors.push_back("dissipativity condition fails on the sampled fields");

    const LongRunSettings lr{g.horizon, g.window, g.tau, g.eps, ctx.solver()};
    auto occ = long_run(u0, c, lr, ctx.seed);
    std::vector<std::string> ids = g.observables;
    if (ids.empty()) ids = occ.observable_ids;
    OccupationSummary shown = occ;
    shown.observable_ids.clear();
    for (auto& row : shown.cesaro_average) row.clear();
    for (auto& row : shown.discrepancy_prev) row.clear();
    for (std::size_t j = 0; j < occ.observable_ids.size(); ++j) {
        if (std::find(ids.begin(), ids.end(), occ.observable_ids[j]) == ids.end()) continue;
        shown.observable_ids.push_back(occ.observable_ids[j]);
        for (std::size_t w = 0; w < occ.windows(); ++w) {
            shown.cesaro_average[w].push_back(occ.cesaro_average[w][j]);
            shown.discrepancy_prev[w].push_back(occ.discrepancy_prev[w][j]);
        }
    }
    ctx.out.write("occupation.csv", render([&](std::ostream& os) { io::write_occupation_csv(os, shown); }));

    io::json moment = {{"delta_hat", io::num(diss.delta_hat)}, {"slack", g.slack}};
    if (diss.passed) {
        const auto mb = moment_bound_ensemble(u0, c, diss.delta_hat, ctx.cfg.time.T, ctx.cfg.time.N, g.moment_paths,
                                              ctx.seed, g.slack, ctx.solver(), ctx.pool);
        moment["ensemble"] = io::to_json(mb);
        if (!mb.passed) {
            ctx.errors.push_back("time-averaged moment bound violated");
            code = kExperimentFailure;
        }
    } else {
        moment["ensemble"] = nullptr;
        code = kExperimentFailure;
    }
    moment["long_run_time_average"] = io::num(occ.time_average_u_l2_p);
    ctx.out.write("moment_bound.json", dump(moment));

    SemigroupSettings sg{g.tau, g.eps, ctx.solver()};
    ctx.out.write("semigroup.csv", render([&](std::ostream& os) {
                      os << "observable_id,t,mean,std_error\n";
                      for (const auto& id : ids) {
                          const auto m = semigroup_estimate(id, u0, g.semigroup_t, g.semigroup_paths, ctx.seed, c, sg,
                                                            ctx.pool);
                          os << id << ',' << io::fmt(g.semigroup_t) << ',' << io::fmt(m.mean) << ','
                             << io::fmt(m.std_error) << '\n';
                      }
                  }));
    return code;
}

inline int run_convergence(Context& ctx) {
    const auto c = ctx.coefficients();
    const auto u0 = ctx.u0();
    const auto s = ctx.solver();
    ctx.out.write("convergence_tau.csv", render([&](std::ostream& os) {
                      os << "level,n_steps,tau,sup_B_l2_sq,relative_change\n";
                      double prev = 0.0;
                      for (std::size_t l = 0; l < ctx.cfg.convergence.levels; ++l) {
                          const std::size_t N = ctx.cfg.time.N << l;
                          const auto traj = solve_skeleton(u0, ctx.control(N), c, s);
                          double sup = 0.0;
                          for (const auto& b : traj.b) sup = std::max(sup, std::pow(norm_lq(b, 2.0), 2));
                          os << l << ',' << N << ',' << io::fmt(traj.tau) << ',' << io::fmt(sup) << ','
                             << (l == 0 ? std::string() : io::fmt(std::abs(sup - prev) / std::max(prev, 1e-300)))
                             << '\n';
                          prev = sup;
                      }
                  }));
    const auto rows = continuity_experiment(control_function(ctx.cfg.control, ctx.cfg.time.T),
                                            ctx.cfg.convergence.frequencies, c, u0, ctx.cfg.time.T, ctx.cfg.time.N, s);
    ctx.out.write("continuity.csv", render([&](std::ostream& os) { io::write_continuity_csv(os, rows); }));
    return kSuccess;
}

} // namespace detail

/// Writes the manifest for a run that never got a valid configuration.
inline RunResult report_config_error(const ConfigError& e, const RunOptions& opt, const std::string& started) {
    RunResult res;
    res.exit_code = kConfigError;
    res.out_dir = opt.out_dir.value_or("out");
    RunManifest& m = res.manifest;
    m.experiment = opt.experiment ? to_string(*opt.experiment) : "";
    m.config_path = opt.config_path;
    m.started_at = started;
    m.finished_at = utc_timestamp();
    m.workers = opt.workers;
    m.base_seed = opt.seed.value_or(0);
    m.errors = e.errors();
    m.exit_code = kConfigError;
    try {
        ArtifactWriter(res.out_dir).write_raw("manifest.json", detail::dump(m.to_json()));
    } catch (const std::exception&) {
        // Output directory unusable: the exit code still reports the failure.
    }
    return res;
}

inline RunResult run(const RunConfig& cfg_in, const RunOptions& opt) {
    const std::string started = utc_timestamp();
    RunConfig cfg = cfg_in;
    if (opt.experiment) cfg.experiment = opt.experiment;
    if (opt.seed) cfg.montecarlo.base_seed = *opt.seed;
    if (opt.out_dir) cfg.output.directory = *opt.out_dir;
    if (!cfg.experiment) return report_config_error(ConfigError({"experiment: no experiment selected"}), opt, started);

    RunResult res;
    res.out_dir = cfg.output.directory;
    RunManifest& m = res.manifest;
    m.experiment = to_string(*cfg.experiment);
    m.config_path = opt.config_path;
    m.config_hash = sha256_hex(to_json(cfg).dump());
    m.started_at = started;
    m.workers = opt.workers;
    m.base_seed = cfg.montecarlo.base_seed;

    std::optional<ArtifactWriter> out;
    try {
        out.emplace(res.out_dir);
    } catch (const std::exception& e) {
        m.errors.push_back(e.what());
        res.exit_code = kExperimentFailure;
        return res;
    }

    const WorkerPool pool(opt.workers);
    detail::Context ctx{cfg, *out, pool, cfg.montecarlo.base_seed, m.errors};
    int code = kSuccess;
    try {
        switch (*cfg.experiment) {
        case Experiment::validate: code = detail::run_validate(ctx); break;
        case Experiment::skeleton: code = detail::run_skeleton(ctx); break;
        case Experiment::simulate: code = detail::run_simulate(ctx); break;
        case Experiment::ldp: code = detail::run_ldp(ctx); break;
        case Experiment::invariant: code = detail::run_invariant(ctx); break;
        case Experiment::convergence: code = detail::run_convergence(ctx); break;
        }
    } catch (const ConfigError& e) {
        for (const auto& x : e.errors()) m.errors.push_back(x);
        code = kConfigError;
    } catch (const std::invalid_argument& e) {
        m.errors.push_back(e.what());
        code = kConfigError;
    } catch (const std::exception& e) {
        m.errors.push_back(e.what());
        code = kExperimentFailure;
    }

    m.files = out->records();
    m.finished_at = utc_timestamp();
    m.exit_code = code;
    res.exit_code = code;
    try {
        out->write_raw("manifest.json", detail::dump(m.to_json()));
    } catch (const std::exception& e) {
        m.errors.push_back(e.what());
        res.exit_code = kExperimentFailure;
    }
    return res;
}

} // namespace dnlspde::cli
