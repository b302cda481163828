#pragma once

// Rate function by penalized control optimization, and empirical
// large-deviation experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dnlspde/dynamics.hpp"
#include "dnlspde/montecarlo.hpp"
#include "dnlspde/parallel.hpp"

namespace dnlspde {

/// A closed set in C([0,T]; L2): an L2 ball around a target endpoint, or a
/// tube of radius delta around a target trajectory (sup over the knots).
class EventSpec {
public:
    enum class Kind { endpoint_ball, sup_tube };

    static EventSpec endpoint_ball(Field target, double radius) {
        return EventSpec(Kind::endpoint_ball, {std::move(target)}, radius);
    }
    static EventSpec sup_tube(std::vector<Field> knots, double radius) {
        if (knots.empty()) throw std::invalid_argument("EventSpec: tube needs target knots");
        return EventSpec(Kind::sup_tube, std::move(knots), radius);
    }
    /// The whole space (radius +inf).
    static EventSpec everything(const Grid1D& grid) {
        return endpoint_ball(Field(grid), std::numeric_limits<double>::infinity());
    }

    Kind kind() const noexcept { return kind_; }
    double radius() const noexcept { return radius_; }
    const std::vector<Field>& target() const noexcept { return target_; }

    double distance(const Trajectory& traj) const {
        if (kind_ == Kind::endpoint_ball) return norm_lq(traj.u.back() - target_.front(), 2.0);
        if (traj.u.size() != target_.size())
            throw std::invalid_argument("EventSpec: trajectory and tube have different knot counts");
        double d = 0.0;
        for (std::size_t k = 0; k < target_.size(); ++k)
            d = std::max(d, norm_lq(traj.u[k] - target_[k], 2.0));
        return d;
    }

    bool contains(const Trajectory& traj) const { return distance(traj) <= radius_; }

private:
    EventSpec(Kind kind, std::vector<Field> target, double radius)
        : kind_(kind), target_(std::move(target)), radius_(radius) {
        if (!(radius > 0.0)) throw std::invalid_argument("EventSpec: radius must be positive");
    }

    Kind kind_;
    std::vector<Field> target_;
    double radius_;
};

struct OptimizerSettings {
    std::vector<double> penalty_schedule{10.0, 1e2, 1e3, 1e4};
    double fd_step = 1e-5;
    int max_iter = 200;        // per penalty stage
    double grad_tol = 1e-8;    // infinity norm of the penalized gradient
    double event_tol = 1e-4;   // admissible constraint violation
    double horizon = 1.0;
    std::size_t n_steps = 16;  // control pieces (also the time steps of the skeleton)
    SolverSettings solver;
};

struct PenaltyStage {
    double lambda = 0.0;
    double value = 0.0;                // I of the stage's final iterate
    double constraint_residual = 0.0;  // max(0, dist - delta)
    bool converged = false;            // residual within event_tol
    int iterations = 0;
};

struct RateFunctionResult {
    Control control;
    double value = 0.0;
    double constraint_residual = 0.0;
    bool converged = false;
    double penalty_weight = 0.0;
    std::vector<PenaltyStage> stages;
};

namespace detail {

struct ControlEval {
    double energy = 0.0;
    double residual = 0.0;  // max(0, dist - delta)
    double penalized = 0.0;
};

} // namespace detail

/// Minimizes 1/2 tau sum h_k^2 + lambda max(0, dist(u_h, event) - delta)^2 over
/// piecewise-constant controls for each lambda of the continuation schedule
/// (warm-started), using central finite-difference gradients and a BFGS
/// direction with Armijo backtracking. Returns the cheapest iterate whose
/// constraint violation is within event_tol; if none was found the result is
/// flagged as not converged and carries the last iterate.
inline RateFunctionResult rate_function(const EventSpec& ev, const Field& u0, const Coefficients& c,
                                        const OptimizerSettings& opt,
                                        const WorkerPool& pool = WorkerPool{}) {
    const std::size_t N = opt.n_steps;
    if (N < 1) throw std::invalid_argument("rate_function: n_steps must be >= 1");
    if (opt.penalty_schedule.empty()) throw std::invalid_argument("rate_function: empty penalty schedule");
    const double tau = opt.horizon / static_cast<double>(N);
    const double inf = std::numeric_limits<double>::infinity();

    auto evaluate = [&](const std::vector<double>& h, double lambda) {
        detail::ControlEval e;
        double s = 0.0;
        for (double v : h) s += v * v;
        e.energy = 0.5 * tau * s;
        try {
            const auto traj = solve_skeleton(u0, Control(opt.horizon, h), c, opt.solver);
            e.residual = std::max(0.0, ev.distance(traj) - ev.radius());
        } catch (const SolveError&) {
            e.residual = inf;
        }
        e.penalized = e.energy + lambda * e.residual * e.residual;
        return e;
    };

    auto gradient_at = [&](const std::vector<double>& h, double lambda) {
        std::vector<double> g(N);
        pool.for_each_index(N, [&](std::size_t i) {
            auto hp = h, hm = h;
            hp[i] += opt.fd_step;
            hm[i] -= opt.fd_step;
            g[i] = (evaluate(hp, lambda).penalized - evaluate(hm, lambda).penalized) / (2.0 * opt.fd_step);
        });
        return g;
    };

    RateFunctionResult result{Control::zero(opt.horizon, N), 0.0, inf, false, 0.0, {}};
    std::optional<std::vector<double>> best;
    double best_value = inf;
    double best_residual = inf;
    double best_lambda = 0.0;

    auto consider = [&](const std::vector<double>& h, const detail::ControlEval& e, double lambda) {
        if (e.residual <= opt.event_tol && e.energy < best_value) {
            best = h;
            best_value = e.energy;
            best_residual = e.residual;
            best_lambda = lambda;
        }
    };

    std::vector<double> x(N, 0.0);
    detail::ControlEval last{};
    for (double lambda : opt.penalty_schedule) {
        auto fx = evaluate(x, lambda);
        consider(x, fx, lambda);
        auto g = gradient_at(x, lambda);
        std::vector<double> H(N * N, 0.0);
        auto reset_h = [&] {
            std::fill(H.begin(), H.end(), 0.0);
            for (std::size_t i = 0; i < N; ++i) H[i * N + i] = 1.0;
        };
        reset_h();

        PenaltyStage stage;
        stage.lambda = lambda;
        for (int it = 0; it < opt.max_iter; ++it) {
            double gmax = 0.0;
            for (double v : g) gmax = std::max(gmax, std::abs(v));
            if (gmax <= opt.grad_tol) break;
            ++stage.iterations;

            std::vector<double> d(N, 0.0);
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t j = 0; j < N; ++j) d[i] -= H[i * N + j] * g[j];
            double slope = 0.0;
            for (std::size_t i = 0; i < N; ++i) slope += g[i] * d[i];
            if (!(slope < 0.0)) {
                reset_h();
                for (std::size_t i = 0; i < N; ++i) d[i] = -g[i];
                slope = 0.0;
                for (std::size_t i = 0; i < N; ++i) slope += g[i] * d[i];
            }

            double alpha = 1.0;
            std::vector<double> xn(N);
            detail::ControlEval fn{};
            bool accepted = false;
            for (int ls = 0; ls < 50; ++ls) {
                for (std::size_t i = 0; i < N; ++i) xn[i] = x[i] + alpha * d[i];
                fn = evaluate(xn, lambda);
                if (fn.penalized <= fx.penalized + 1e-4 * alpha * slope) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) break;

            auto gn = gradient_at(xn, lambda);
            std::vector<double> s(N), y(N);
            double sy = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                s[i] = xn[i] - x[i];
                y[i] = gn[i] - g[i];
                sy += s[i] * y[i];
            }
            if (sy > 1e-14) {
                // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
                const double rho = 1.0 / sy;
                std::vector<double> Hy(N, 0.0);
                for (std::size_t i = 0; i < N; ++i)
                    for (std::size_t j = 0; j < N; ++j) Hy[i] += H[i * N + j] * y[j];
                double yHy = 0.0;
                for (std::size_t i = 0; i < N; ++i) yHy += y[i] * Hy[i];
                for (std::size_t i = 0; i < N; ++i)
                    for (std::size_t j = 0; j < N; ++j)
                        H[i * N + j] += -rho * (Hy[i] * s[j] + s[i] * Hy[j]) +
                                        (rho * rho * yHy + rho) * s[i] * s[j];
            }

            const double decrease = fx.penalized - fn.penalized;
            x = std::move(xn);
            g = std::move(gn);
            fx = fn;
            consider(x, fx, lambda);
            if (decrease <= 1e-15 * (1.0 + std::abs(fx.penalized))) break;
        }
        stage.value = fx.energy;
        stage.constraint_residual = fx.residual;
        stage.converged = fx.residual <= opt.event_tol;
        result.stages.push_back(stage);
        last = fx;
    }

    if (best) {
        result.control = Control(opt.horizon, *best);
        result.value = best_value;
        result.constraint_residual = best_residual;
        result.converged = true;
        result.penalty_weight = best_lambda;
    } else {
        result.control = Control(opt.horizon, x);
        result.value = last.energy;
        result.constraint_residual = last.residual;
        result.converged = false;
        result.penalty_weight = opt.penalty_schedule.back();
    }
    // Report exactly 1/2 tau sum h_k^2 of the returned control.
    result.value = result.control.energy();
    return result;
}

// ---------------------------------------------------------------------------
// Empirical large deviations.

struct Interval {
    double low = 0.0;
    double high = 1.0;
};

/// Wilson score interval for `hits` successes out of `trials` at normal quantile z.
inline Interval wilson_interval(std::size_t hits, std::size_t trials, double z = 1.959963984540054) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(hits) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    const double low = hits == 0 ? 0.0 : std::max(0.0, center - half);
    const double high = hits == trials ? 1.0 : std::min(1.0, center + half);
    return {low, high};
}

struct LdpRow {
    double eps = 0.0;
    std::size_t hits = 0;
    std::size_t trials = 0;
    std::size_t failed = 0;
    double p_hat = 0.0;
    Interval ci;
    double eps2_log_p = 0.0;
    bool zero_hits = false;  // eps2_log_p then uses the rule-of-three bound 3/M
};

struct SimulationSetup {
    Field u0;
    Coefficients coefficients;
    double horizon = 1.0;
    std::size_t n_steps = 16;
    SolverSettings settings;
};

/// Monte Carlo estimate of P(u^eps in event) for each eps, with Wilson
/// intervals and eps^2 log P.
inline std::vector<LdpRow> empirical_ldp(const EventSpec& ev, const std::vector<double>& eps_list,
                                         std::size_t paths, std::uint64_t base_seed,
                                         const SimulationSetup& setup,
                                         const WorkerPool& pool = WorkerPool{}) {
    if (eps_list.empty()) throw std::invalid_argument("empirical_ldp: eps_list is empty");
    if (paths < 1) throw std::invalid_argument("empirical_ldp: need at least one path");
    const double tau = setup.horizon / static_cast<double>(setup.n_steps);
    std::vector<LdpRow> rows;
    for (double eps : eps_list) {
        if (!(eps > 0.0)) throw std::invalid_argument("empirical_ldp: eps must be positive");
        auto hits = run_paths<bool>(paths, base_seed, pool, [&](std::size_t, std::uint64_t seed) {
            const auto path = sample_path(seed, setup.n_steps, tau);
            const auto traj = solve_spde(setup.u0, eps, path, std::nullopt, setup.coefficients, setup.settings);
            return ev.contains(traj);
        });
        LdpRow row;
        row.eps = eps;
        for (const auto& h : hits) {
            if (!h)
                ++row.failed;
            else if (*h)
                ++row.hits;
        }
        check_failure_budget(row.failed, paths);
        row.trials = paths - row.failed;
        row.p_hat = static_cast<double>(row.hits) / static_cast<double>(row.trials);
        row.ci = wilson_interval(row.hits, row.trials);
        if (row.hits == 0) {
            row.zero_hits = true;
            row.eps2_log_p = eps * eps * std::log(3.0 / static_cast<double>(row.trials));
        } else {
            row.eps2_log_p = eps * eps * std::log(row.p_hat);
        }
        rows.push_back(row);
    }
    return rows;
}

struct C1Row {
    double eps = 0.0;
    Moment sup_deviation;  // E[sup_t ||B(v^eps) - B(u_h)||_L2]
    std::size_t failed = 0;
};

/// Shifted small-noise solutions against the skeleton solution u_h.
inline std::vector<C1Row> c1_experiment(const Control& h, const std::vector<double>& eps_list,
                                        std::size_t paths, std::uint64_t base_seed,
                                        const SimulationSetup& setup,
                                        const WorkerPool& pool = WorkerPool{}) {
    std::vector<C1Row> rows;
    for (double eps : eps_list) {
        EnsembleConfig cfg{paths, base_seed, eps, h, setup.coefficients, setup.u0,
                           h.horizon(), h.n_steps(), setup.settings};
        const auto rep = ensemble_stats(cfg, pool);
        rows.push_back({eps, rep.sup_deviation, rep.failed_paths});
    }
    return rows;
}

} // namespace dnlspde
