#pragma once

// Invariant-measure diagnostics for the eps = 1 equation: dissipativity
// sampling, Krylov-Bogoliubov occupation averages, the time-averaged moment
// bound, and a Monte Carlo estimator of the transition semigroup.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dnlspde/coefficients.hpp"
#include "dnlspde/dynamics.hpp"
#include "dnlspde/montecarlo.hpp"
#include "dnlspde/parallel.hpp"

namespace dnlspde {

// ---------------------------------------------------------------------------
// Dissipativity:  2 C1 C3 ||grad u||_p^p - ||sigma(u)||^2 >= delta ||u||_2^p.

struct DissipativityReport {
    std::vector<double> ratios;  // (2 C1 C3 ||grad u||^p - ||sigma(u)||^2) / ||u||_2^p per sample
    double min_ratio = std::numeric_limits<double>::infinity();
    double delta_hat = 0.0;      // max(0, min_ratio)
    bool passed = false;
    std::optional<Field> witness;  // sample attaining min_ratio when it is <= 0

    double margin(std::size_t i, double delta) const { return ratios[i] - delta; }
};

/// Random nonzero fields: a few sine modes with decaying random weights plus
/// nodal noise, rescaled to amplitudes spread over [1e-3, 1e2]. Every eighth
/// sample is a pure first mode.
inline std::vector<Field> sample_fields(const Grid1D& grid, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double L = grid.length();
    std::vector<Field> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> w(8, 0.0);
        double noise = 0.0;
        if (s % 8 == 0) {
            w[0] = 1.0;
        } else {
            for (std::size_t m = 0; m < w.size(); ++m) w[m] = normal(gen) / static_cast<double>(m + 1);
            noise = 0.1 * unit(gen);
        }
        std::vector<double> v(grid.n_interior());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double x = grid.node(i);
            double f = 0.0;
            for (std::size_t m = 0; m < w.size(); ++m)
                f += w[m] * std::sin(static_cast<double>(m + 1) * std::numbers::pi * x / L);
            v[i] = f + noise * normal(gen);
        }
        double peak = 0.0;
        for (double x : v) peak = std::max(peak, std::abs(x));
        if (peak == 0.0) {
            v[0] = 1.0;
            peak = 1.0;
        }
        const double amp = std::pow(10.0, -3.0 + 5.0 * unit(gen)) / peak;
        for (double& x : v) x *= amp;
        out.emplace_back(grid, std::move(v));
    }
    return out;
}

/// The ratio whose infimum is the admissible delta.
inline double dissipativity_ratio(const Coefficients& c, const Field& u) {
    const double p = c.p();
    const double lhs = 2.0 * c.flux.constants().C1 * c.b.C3() * std::pow(seminorm_w1p(u, p), p);
    const double s = norm_lq(apply_sigma(c.sigma, u), 2.0);
    return (lhs - s * s) / std::pow(norm_lq(u, 2.0), p);
}

inline DissipativityReport check_dissipativity(const Coefficients& c, std::size_t sample_count,
                                               std::uint64_t seed, const Grid1D& grid) {
    if (sample_count < 1) throw std::invalid_argument("check_dissipativity: sample_count must be >= 1");
    DissipativityReport rep;
    const auto fields = sample_fields(grid, sample_count, seed);
    std::size_t argmin = 0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const double r = dissipativity_ratio(c, fields[i]);
        rep.ratios.push_back(r);
        if (r < rep.min_ratio) {
            rep.min_ratio = r;
            argmin = i;
        }
    }
    rep.delta_hat = std::max(0.0, rep.min_ratio);
    rep.passed = rep.delta_hat > 0.0;
    if (!rep.passed) rep.witness = fields[argmin];
    return rep;
}

// ---------------------------------------------------------------------------
// Observables: bounded, continuous functions of B(u).

struct Observable {
    std::string id;
    std::function<double(const Field&)> eval;
    double lower = 0.0;
    double upper = 1.0;
};

class UnknownObservableError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Gaussian bumps exp(-||B - c_j||^2) at c_j = a_j sin(pi x / L) for
/// a_j in {0, 0.5, 1}, and the clipped norm min(||B||, 1).
inline std::vector<Observable> observable_battery(const Grid1D& grid) {
    std::vector<Observable> out;
    const double L = grid.length();
    const std::pair<const char*, double> centers[] = {{"bump_0", 0.0}, {"bump_half", 0.5}, {"bump_one", 1.0}};
    for (const auto& [id, a] : centers) {
        const Field center = Field::sample(grid, [a = a, L](double x) { return a * std::sin(std::numbers::pi * x / L); });
        out.push_back({id, [center](const Field& B) {
                           const double d = norm_lq(B - center, 2.0);
                           return std::exp(-d * d);
                       }});
    }
    out.push_back({"clipped_norm", [](const Field& B) { return std::min(norm_lq(B, 2.0), 1.0); }});
    return out;
}

inline Observable find_observable(const std::string& id, const Grid1D& grid) {
    for (auto& o : observable_battery(grid))
        if (o.id == id) return o;
    throw UnknownObservableError("unknown observable id: " + id);
}

// ---------------------------------------------------------------------------
// Long runs.

struct OccupationSummary {
    double window_length = 0.0;
    std::vector<std::string> observable_ids;
    // [window][observable]
    std::vector<std::vector<double>> window_average;   // average over window j alone
    std::vector<std::vector<double>> cesaro_average;   // average over [0, (j+1) window]
    std::vector<std::vector<double>> discrepancy_prev; // |cesaro_j - cesaro_{j-1}|, 0 for j = 0
    std::vector<double> standard_error;                // batch-means error of the final Cesaro average
    double time_average_u_l2_p = 0.0;                  // (1/T) tau sum_k ||u_k||_2^p
    double horizon = 0.0;

    std::size_t windows() const noexcept { return cesaro_average.size(); }

    /// max over observables of discrepancy_prev[j].
    double max_discrepancy(std::size_t j) const {
        double m = 0.0;
        for (double d : discrepancy_prev.at(j)) m = std::max(m, d);
        return m;
    }
};

struct LongRunSettings {
    double horizon = 10.0;   // T_long
    double window = 1.0;
    double tau = 0.01;
    double eps = 1.0;
    SolverSettings solver;
};

/// One stochastic trajectory over [0, T_long]; observables are evaluated at
/// the right end of every step and averaged per window and cumulatively.
inline OccupationSummary long_run(const Field& u0, const Coefficients& c, const LongRunSettings& cfg,
                                  std::uint64_t seed) {
    const auto steps_per_window = static_cast<std::size_t>(std::llround(cfg.window / cfg.tau));
    const auto n_windows = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.window));
    if (steps_per_window < 1 || n_windows < 1)
        throw std::invalid_argument("long_run: window must hold at least one step and fit in the horizon");
    if (std::abs(static_cast<double>(steps_per_window) * cfg.tau - cfg.window) > 1e-9 * cfg.window ||
        std::abs(static_cast<double>(n_windows) * cfg.window - cfg.horizon) > 1e-9 * cfg.horizon)
        throw std::invalid_argument("long_run: horizon, window and tau must be commensurate");

    const auto battery = observable_battery(u0.grid());
    const double p = c.p();
    const double amp = std::sqrt(cfg.eps);
    OccupationSummary out;
    out.window_length = cfg.window;
    out.horizon = cfg.horizon;
    for (const auto& o : battery) out.observable_ids.push_back(o.id);

    Field u = u0;
    if (cfg.solver.regularize_initial) u = regularize_initial(u0, cfg.tau, c, cfg.solver).u;

    std::vector<double> running(battery.size(), 0.0);
    double u_moment = 0.0;
    std::size_t k = 0;
    for (std::size_t w = 0; w < n_windows; ++w) {
        std::vector<double> acc(battery.size(), 0.0);
        for (std::size_t s = 0; s < steps_per_window; ++s, ++k) {
            const double forcing = amp * brownian_increment(seed, k, cfg.tau);
            try {
                u = implicit_step(u, forcing, cfg.tau, c, cfg.solver).u;
            } catch (SolveError& e) {
                e.with_step(k + 1).with_seed(seed);
                throw;
            }
            const Field B = apply_b(c.b, u);
            for (std::size_t j = 0; j < battery.size(); ++j) acc[j] += battery[j].eval(B);
            u_moment += cfg.tau * std::pow(norm_lq(u, 2.0), p);
        }
        std::vector<double> avg(battery.size()), ces(battery.size()), disc(battery.size(), 0.0);
        for (std::size_t j = 0; j < battery.size(); ++j) {
            avg[j] = acc[j] / static_cast<double>(steps_per_window);
            running[j] += avg[j];
            ces[j] = running[j] / static_cast<double>(w + 1);
            if (w > 0) disc[j] = std::abs(ces[j] - out.cesaro_average.back()[j]);
        }
        out.window_average.push_back(std::move(avg));
        out.cesaro_average.push_back(std::move(ces));
        out.discrepancy_prev.push_back(std::move(disc));
    }
    out.time_average_u_l2_p = u_moment / cfg.horizon;

    for (std::size_t j = 0; j < battery.size(); ++j) {
        std::vector<double> col;
        for (const auto& row : out.window_average) col.push_back(row[j]);
        out.standard_error.push_back(sample_moment(col).std_error);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Time-averaged moment bound
//     (1/T) int_0^T E||u||_2^p dt <= (1/delta) (2 C4 ||K1||_L1 + ||B(u0)||^2 / T).
// For b = identity this is exactly the bound used to get tightness of the
// occupation measures.

class MomentBoundError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct MomentBoundReport {
    double lhs = 0.0;
    double rhs = 0.0;
    bool passed = false;
};

inline double moment_bound_rhs(const Coefficients& c, double delta, const Field& u0, double horizon) {
    if (!(delta > 0.0)) throw MomentBoundError("moment bound: delta must be positive");
    const double k1_l1 = c.flux.constants().K1 * u0.grid().length();
    const double b0 = norm_lq(apply_b(c.b, u0), 2.0);
    return (2.0 * c.b.C4() * k1_l1 + b0 * b0 / horizon) / delta;
}

/// (1/T) tau sum_{k=1}^N ||u_k||_2^p, the right-endpoint time average.
inline double time_average_l2_p(const Trajectory& traj, double p) {
    double s = 0.0;
    for (std::size_t k = 1; k < traj.u.size(); ++k) s += traj.tau * std::pow(norm_lq(traj.u[k], 2.0), p);
    return s / traj.horizon();
}

inline MomentBoundReport moment_bound_check(const Trajectory& traj, const Coefficients& c, double delta,
                                            const Field& u0, double slack = 0.0) {
    MomentBoundReport r;
    r.rhs = moment_bound_rhs(c, delta, u0, traj.horizon());
    r.lhs = time_average_l2_p(traj, c.p());
    r.passed = r.lhs <= r.rhs * (1.0 + slack);
    return r;
}

/// Ensemble version: lhs is the path average of the time averages (eps = 1).
inline MomentBoundReport moment_bound_ensemble(const Field& u0, const Coefficients& c, double delta,
                                               double horizon, std::size_t n_steps, std::size_t paths,
                                               std::uint64_t base_seed, double slack,
                                               const SolverSettings& settings = {},
                                               const WorkerPool& pool = WorkerPool{}) {
    const double tau = horizon / static_cast<double>(n_steps);
    auto vals = run_paths<double>(paths, base_seed, pool, [&](std::size_t, std::uint64_t seed) {
        const auto traj = solve_spde(u0, 1.0, sample_path(seed, n_steps, tau), std::nullopt, c, settings);
        return time_average_l2_p(traj, c.p());
    });
    std::vector<double> ok;
    for (const auto& v : vals)
        if (v) ok.push_back(*v);
    check_failure_budget(paths - ok.size(), paths);
    MomentBoundReport r;
    r.rhs = moment_bound_rhs(c, delta, u0, horizon);
    r.lhs = sample_moment(ok).mean;
    r.passed = r.lhs <= r.rhs * (1.0 + slack);
    return r;
}

// ---------------------------------------------------------------------------
// Semigroup (P_t phi)(v) = E[phi(B(u(t, v)))].

struct SemigroupSettings {
    double tau = 0.01;
    double eps = 1.0;
    SolverSettings solver;
};

inline Moment semigroup_estimate(const Observable& phi, const Field& v, double t, std::size_t paths,
                                 std::uint64_t base_seed, const Coefficients& c,
                                 const SemigroupSettings& cfg = {}, const WorkerPool& pool = WorkerPool{}) {
    if (!(t >= 0.0)) throw std::invalid_argument("semigroup_estimate: t must be >= 0");
    if (t == 0.0) return {phi.eval(apply_b(c.b, v)), 0.0};
    const auto n_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t / cfg.tau)));
    const double tau = t / static_cast<double>(n_steps);
    auto vals = run_paths<double>(paths, base_seed, pool, [&](std::size_t, std::uint64_t seed) {
        const auto traj = solve_spde(v, cfg.eps, sample_path(seed, n_steps, tau), std::nullopt, c, cfg.solver);
        return phi.eval(traj.b.back());
    });
    std::vector<double> ok;
    for (const auto& x : vals)
        if (x) ok.push_back(*x);
    check_failure_budget(paths - ok.size(), paths);
    return sample_moment(ok);
}

inline Moment semigroup_estimate(const std::string& observable_id, const Field& v, double t,
                                 std::size_t paths, std::uint64_t base_seed, const Coefficients& c,
                                 const SemigroupSettings& cfg = {}, const WorkerPool& pool = WorkerPool{}) {
    return semigroup_estimate(find_observable(observable_id, v.grid()), v, t, paths, base_seed, c, cfg, pool);
}

} // namespace dnlspde
