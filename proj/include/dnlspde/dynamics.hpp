#pragma once

// Semi-implicit time stepping
//     B(u_{k+1}) - B(u_k) - tau div A(grad u_{k+1}) = forcing_k * sigma(u_k)
// with forcing_k = tau h_{k+1} for the skeleton equation and
// tau h_{k+1} + sqrt(eps) dW_{k+1} for the stochastic one. The noise
// coefficient is frozen at the old level, so each step is a single monotone
// resolvent solve.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnlspde/coefficients.hpp"
#include "dnlspde/errors.hpp"
#include "dnlspde/grid.hpp"

namespace dnlspde {

struct SolverSettings {
    double newton_tol = 1e-10;  // h-weighted L2 norm of the residual
    int max_iter = 100;
    int max_halvings = 30;
    bool regularize_initial = true;
};

struct SolveReport {
    int iterations = 0;
    double residual = 0.0;
    int damping_events = 0;
    int picard_steps = 0;
    bool converged = false;
};

struct StepResult {
    Field u;
    SolveReport report;
};

namespace detail {

/// Newton solve of  b(u) - tau div a(grad u) = rhs  on the interior nodes.
///
/// BFun needs operator(), derivative() and C4(); Flux needs operator(),
/// derivative() and secant(). The Jacobian diag(b'(u)) + tau D^T diag(a') D is
/// a symmetric M-matrix, so each linear solve is one Thomas sweep.
///
/// Globalization: residual-halving line search; if no halving reduces the
/// residual the iterate takes one lagged-coefficient (Kacanov) step
///     C4 w - tau div(s grad w) = C4 u - b(u) + rhs,   s = a(g)/g,
/// whose fixed point is the same root.
template <class BFun, class Flux>
StepResult solve_resolvent(const Grid1D& grid, std::vector<double> u, std::span<const double> rhs,
                           double tau, const BFun& bfun, const Flux& flux,
                           const SolverSettings& settings) {
    const std::size_t n = grid.n_interior();
    const double h = grid.spacing();
    const double c = tau / (h * h);

    std::vector<double> grad(n + 1), edge(n + 1), res(n), trial(n), step(n);
    std::vector<double> lo(n), di(n), up(n);
    std::vector<double> history;

    auto residual = [&](std::span<const double> v, std::span<double> r) {
        kernels::gradient(v, h, grad);
        for (std::size_t e = 0; e <= n; ++e) edge[e] = flux(grad[e]);
        for (std::size_t i = 0; i < n; ++i)
            r[i] = bfun(v[i]) - tau * (edge[i + 1] - edge[i]) / h - rhs[i];
        return kernels::weighted_lq(r, h, 2.0);
    };

    SolveReport report;
    double norm = residual(u, res);
    history.push_back(norm);

    auto fail_if_nan = [&](double value) {
        if (!std::isfinite(value))
            throw SolveError(SolveError::Kind::divergence, "resolvent solve: non-finite residual",
                             history);
    };
    fail_if_nan(norm);

    while (norm > settings.newton_tol) {
        if (report.iterations >= settings.max_iter) {
            report.residual = norm;
            throw SolveError(SolveError::Kind::nonconvergence,
                             "resolvent solve: no convergence after " +
                                 std::to_string(settings.max_iter) + " iterations (residual " +
                                 std::to_string(norm) + ")",
                             history);
        }
        ++report.iterations;

        // Newton direction: J(u) step = -R(u); res still holds R(u).
        kernels::gradient(u, h, grad);
        for (std::size_t e = 0; e <= n; ++e) edge[e] = flux.derivative(grad[e]);
        for (std::size_t i = 0; i < n; ++i) {
            di[i] = bfun.derivative(u[i]) + c * (edge[i] + edge[i + 1]);
            lo[i] = -c * edge[i];
            up[i] = -c * edge[i + 1];
            res[i] = -res[i];
        }
        kernels::solve_tridiagonal(lo, di, up, res, step);

        double alpha = 1.0;
        double trial_norm = std::numeric_limits<double>::infinity();
        int halvings = 0;
        for (;;) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + alpha * step[i];
            trial_norm = residual(trial, res);
            if (trial_norm < norm) break;
            if (++halvings > settings.max_halvings) break;
            ++report.damping_events;
            alpha *= 0.5;
        }

        if (halvings > settings.max_halvings) {
            // Stall: lagged-coefficient step from u.
            kernels::gradient(u, h, grad);
            const double m = bfun.C4();
            for (std::size_t e = 0; e <= n; ++e) edge[e] = flux.secant(grad[e]);
            for (std::size_t i = 0; i < n; ++i) {
                di[i] = m + c * (edge[i] + edge[i + 1]);
                lo[i] = -c * edge[i];
                up[i] = -c * edge[i + 1];
                step[i] = m * u[i] - bfun(u[i]) + rhs[i];
            }
            kernels::solve_tridiagonal(lo, di, up, step, trial);
            trial_norm = residual(trial, res);
            ++report.picard_steps;
        }

        fail_if_nan(trial_norm);
        u.swap(trial);
        norm = trial_norm;
        history.push_back(norm);
    }

    report.residual = norm;
    report.converged = true;
    return StepResult{Field(grid, std::move(u)), report};
}

/// b = identity with the constants solve_resolvent expects.
struct IdentityB {
    double operator()(double r) const noexcept { return r; }
    double derivative(double) const noexcept { return 1.0; }
    double C4() const noexcept { return 1.0; }
};

} // namespace detail

/// One step of the semi-implicit scheme. The right-hand side is
/// B(u_prev) + forcing * sigma(u_prev) nodewise; the solve starts from u_prev.
inline StepResult implicit_step(const Field& u_prev, double forcing, double tau,
                                const Coefficients& c, const SolverSettings& settings = {}) {
    if (!(tau > 0.0)) throw std::invalid_argument("implicit_step: tau must be positive");
    const std::size_t n = u_prev.size();
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = c.b(u_prev[i]) + forcing * c.sigma(u_prev[i]);
    std::vector<double> guess(u_prev.values().begin(), u_prev.values().end());
    return detail::solve_resolvent(u_prev.grid(), std::move(guess), rhs, tau, c.b, c.flux, settings);
}

/// Initial-data regularization w - tau Delta_p w = u0 (always the p-Laplacian
/// of the coefficient exponent, independent of the flux shape).
inline StepResult regularize_initial(const Field& u0, double tau, const Coefficients& c,
                                     const SolverSettings& settings = {}) {
    if (!(tau > 0.0)) throw std::invalid_argument("regularize_initial: tau must be positive");
    const auto plap = FluxFunction::p_laplacian(c.p()).with_regularization(c.flux.regularization());
    std::vector<double> guess(u0.values().begin(), u0.values().end());
    return detail::solve_resolvent(u0.grid(), std::move(guess), u0.values(), tau, detail::IdentityB{},
                                   plap, settings);
}

// ---------------------------------------------------------------------------
// Controls.

/// Piecewise-constant control on a uniform partition of [0, T].
class Control {
public:
    Control(double horizon, std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw std::invalid_argument("Control: need at least one step");
        if (!(horizon > 0.0)) throw std::invalid_argument("Control: horizon must be positive");
        tau_ = horizon / static_cast<double>(values_.size());
    }

    static Control zero(double horizon, std::size_t n_steps) {
        return Control(horizon, std::vector<double>(n_steps, 0.0));
    }
    static Control constant(double horizon, std::size_t n_steps, double value) {
        return Control(horizon, std::vector<double>(n_steps, value));
    }

    std::size_t n_steps() const noexcept { return values_.size(); }
    double tau() const noexcept { return tau_; }
    double horizon() const noexcept { return tau_ * static_cast<double>(values_.size()); }
    const std::vector<double>& values() const noexcept { return values_; }
    double operator[](std::size_t k) const noexcept { return values_[k]; }

    /// 1/2 tau sum h_k^2.
    double energy() const noexcept {
        double s = 0.0;
        for (double v : values_) s += v * v;
        return 0.5 * tau_ * s;
    }

    /// Value on (t_k, t_{k+1}], i.e. the step function the control represents.
    double at(double t) const noexcept {
        if (t <= 0.0) return values_.front();
        auto k = static_cast<std::size_t>(std::ceil(t / tau_)) - 1;
        return values_[std::min(k, values_.size() - 1)];
    }

private:
    std::vector<double> values_;
    double tau_;
};

/// L2 projection onto step functions: h_k is the mean of h over
/// ((k-1) tau, k tau], computed by a composite midpoint rule with
/// quad_points nodes per cell.
template <class F>
Control project_control(F&& h, double horizon, std::size_t n_steps, std::size_t quad_points = 32) {
    if (n_steps < 1) throw std::invalid_argument("project_control: N must be >= 1");
    if (quad_points < 1) throw std::invalid_argument("project_control: quad_points must be >= 1");
    const double tau = horizon / static_cast<double>(n_steps);
    const double sub = tau / static_cast<double>(quad_points);
    std::vector<double> v(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        double s = 0.0;
        const double t0 = static_cast<double>(k) * tau;
        for (std::size_t q = 0; q < quad_points; ++q) s += h(t0 + (static_cast<double>(q) + 0.5) * sub);
        v[k] = s / static_cast<double>(quad_points);
    }
    return Control(horizon, std::move(v));
}

// ---------------------------------------------------------------------------
// Trajectories.

struct Trajectory {
    Grid1D grid;
    double tau;
    std::vector<double> times;   // t_0..t_N
    std::vector<Field> u;        // u_0..u_N (u_0 is the regularized initial datum)
    std::vector<Field> b;        // B(u_0)..B(u_N)
    std::vector<SolveReport> reports;  // one per step
    SolveReport initial_report;

    std::size_t n_steps() const noexcept { return reports.size(); }
    double horizon() const noexcept { return times.back(); }

    /// Right-continuous step interpolant: u_{k+1} on [t_k, t_{k+1}), u_N at T.
    Field step_right(double t) const { return u[std::min(interval(t) + 1, n_steps())]; }

    /// Left-continuous step interpolant: u_k on (t_k, t_{k+1}], u_0 at 0.
    Field step_left(double t) const {
        if (t <= times.front()) return u.front();
        const double x = t / tau;
        auto k = static_cast<std::size_t>(std::ceil(x)) - 1;
        return u[std::min(k, n_steps() - 1)];
    }

    /// Piecewise affine interpolant of u.
    Field affine_u(double t) const { return affine(u, t); }
    /// Piecewise affine interpolant of B(u).
    Field affine_b(double t) const { return affine(b, t); }

private:
    std::size_t interval(double t) const {
        if (t <= 0.0) return 0;
        auto k = static_cast<std::size_t>(std::floor(t / tau));
        return std::min(k, n_steps());
    }

    Field affine(const std::vector<Field>& knots, double t) const {
        const std::size_t k = interval(t);
        if (k >= n_steps()) return knots.back();
        const double w = (t - times[k]) / tau;
        return (1.0 - w) * knots[k] + w * knots[k + 1];
    }
};

namespace detail {

/// Runs N steps with forcing(k) multiplying sigma(u_k) in step k -> k+1.
template <class Forcing>
Trajectory march(const Field& u0, std::size_t n_steps, double tau, Forcing&& forcing,
                 const Coefficients& c, const SolverSettings& settings) {
    Trajectory traj{u0.grid(), tau, {}, {}, {}, {}, {}};
    traj.times.reserve(n_steps + 1);
    traj.u.reserve(n_steps + 1);
    traj.b.reserve(n_steps + 1);
    traj.reports.reserve(n_steps);

    Field start = u0;
    if (settings.regularize_initial) {
        auto init = regularize_initial(u0, tau, c, settings);
        start = std::move(init.u);
        traj.initial_report = init.report;
    } else {
        traj.initial_report.converged = true;
    }
    traj.times.push_back(0.0);
    traj.b.push_back(apply_b(c.b, start));
    traj.u.push_back(std::move(start));

    for (std::size_t k = 0; k < n_steps; ++k) {
        try {
            auto step = implicit_step(traj.u.back(), forcing(k), tau, c, settings);
            traj.times.push_back(static_cast<double>(k + 1) * tau);
            traj.b.push_back(apply_b(c.b, step.u));
            traj.u.push_back(std::move(step.u));
            traj.reports.push_back(step.report);
        } catch (SolveError& e) {
            e.with_step(k + 1);
            throw;
        }
    }
    return traj;
}

} // namespace detail

/// Skeleton equation dB(u) - div A(grad u) dt = sigma(u) h dt, discretized with
/// the control's partition.
inline Trajectory solve_skeleton(const Field& u0, const Control& ctrl, const Coefficients& c,
                                 const SolverSettings& settings = {}) {
    const double tau = ctrl.tau();
    return detail::march(
        u0, ctrl.n_steps(), tau, [&](std::size_t k) { return tau * ctrl[k]; }, c, settings);
}

// ---------------------------------------------------------------------------
// A-priori diagnostics.

struct HolderEntry {
    double s;
    double t;
    double ratio;  // ||B~(t) - B~(s)||_{H^-1 proxy} / |t - s|^beta
};

struct Diagnostics {
    double sup_b_l2_sq = 0.0;          // max_k ||B(u_k)||^2
    double sum_jumps_sq = 0.0;         // sum_k ||B(u_{k+1}) - B(u_k)||^2
    double tau_sum_grad_p = 0.0;       // tau sum_k ||grad u_{k+1}||_p^p
    double tau_sum_flux_pprime = 0.0;  // tau sum_k ||A(grad u_{k+1})||_{p'}^{p'}

    // Discrete energy law for zero forcing, one entry per knot n = 0..N:
    //   lhs_n = 1/2||B_n||^2 + 1/2 sum_{k<n} jumps^2 + tau C1 C3 sum_{k<n} ||grad u_{k+1}||_p^p
    //   rhs_n = 1/2||B_0||^2 + n tau C4 ||K1||_{L1}
    std::vector<double> energy_lhs;
    std::vector<double> energy_rhs;

    double holder_exponent = 0.0;
    double holder_max = 0.0;
    std::vector<HolderEntry> holder;
};

inline Diagnostics apriori_report(const Trajectory& traj, const Coefficients& c,
                                  std::optional<double> holder_exponent = std::nullopt) {
    Diagnostics d;
    const double p = c.p();
    const double pp = c.flux.p_conjugate();
    const double h = traj.grid.spacing();
    const double tau = traj.tau;
    const auto& k = c.flux.constants();
    const double c1c3 = k.C1 * c.b.C3();
    const double k1_l1 = k.K1 * traj.grid.length();
    const std::size_t N = traj.n_steps();

    double running = 0.0;  // 1/2 sum jumps^2 + tau C1 C3 sum grad^p
    for (std::size_t n = 0; n <= N; ++n) {
        const double bn = norm_lq(traj.b[n], 2.0);
        d.sup_b_l2_sq = std::max(d.sup_b_l2_sq, bn * bn);
        if (n > 0) {
            const double jump = norm_lq(traj.b[n] - traj.b[n - 1], 2.0);
            const auto G = gradient(traj.u[n]);
            const double gp = std::pow(norm_lq(G, p), p);
            const double ap = std::pow(norm_lq(apply_flux(c, G), pp), pp);
            d.sum_jumps_sq += jump * jump;
            d.tau_sum_grad_p += tau * gp;
            d.tau_sum_flux_pprime += tau * ap;
            running += 0.5 * jump * jump + tau * c1c3 * gp;
        }
        d.energy_lhs.push_back(0.5 * bn * bn + running);
    }
    const double b0 = norm_lq(traj.b.front(), 2.0);
    for (std::size_t n = 0; n <= N; ++n)
        d.energy_rhs.push_back(0.5 * b0 * b0 + static_cast<double>(n) * tau * c.b.C4() * k1_l1);

    // Time regularity of the affine interpolant of B, sampled at the knots.
    const double beta = holder_exponent.value_or(1.0 / p);
    d.holder_exponent = beta;
    std::vector<std::vector<double>> kinv(N + 1);
    for (std::size_t i = 0; i <= N; ++i) kinv[i] = solve_stiffness(traj.b[i].values(), h);
    for (std::size_t i = 0; i <= N; ++i) {
        for (std::size_t j = i + 1; j <= N; ++j) {
            // <Bj - Bi, K^{-1}(Bj - Bi)> by linearity of K^{-1}
            double s = 0.0;
            for (std::size_t m = 0; m < traj.grid.n_interior(); ++m)
                s += (traj.b[j][m] - traj.b[i][m]) * (kinv[j][m] - kinv[i][m]);
            const double dist = std::sqrt(std::max(0.0, h * s));
            const double ratio = dist / std::pow(traj.times[j] - traj.times[i], beta);
            d.holder.push_back({traj.times[i], traj.times[j], ratio});
            d.holder_max = std::max(d.holder_max, ratio);
        }
    }
    return d;
}

/// sup_k ||B(u_k) - B(w_k)||_{L2} over the common knots of two trajectories.
inline double sup_b_distance(const Trajectory& a, const Trajectory& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.b.size(); ++k) s = std::max(s, norm_lq(a.b[k] - b.b[k], 2.0));
    return s;
}

// ---------------------------------------------------------------------------
// Compactness experiment: weakly converging controls h + sin(2 pi n t).

struct ContinuityRow {
    int frequency;
    double sup_b_distance;
};

template <class F>
std::vector<ContinuityRow> continuity_experiment(F&& h, const std::vector<int>& frequencies,
                                                 const Coefficients& c, const Field& u0,
                                                 double horizon, std::size_t n_steps,
                                                 const SolverSettings& settings = {}) {
    const auto base = solve_skeleton(u0, project_control(h, horizon, n_steps), c, settings);
    std::vector<ContinuityRow> rows;
    rows.reserve(frequencies.size());
    for (int n : frequencies) {
        const double omega = 2.0 * std::numbers::pi * static_cast<double>(n);
        auto hn = [&](double t) { return h(t) + std::sin(omega * t); };
        const auto traj = solve_skeleton(u0, project_control(hn, horizon, n_steps), c, settings);
        rows.push_back({n, sup_b_distance(traj, base)});
    }
    return rows;
}

} // namespace dnlspde
