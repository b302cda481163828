#pragma once

// Small-noise SPDE  dB(v) - div A(grad v) dt = sigma(v) h dt + sqrt(eps) sigma(v) dW
// driven by a one-dimensional Brownian motion, plus ensemble moment estimates.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dnlspde/dynamics.hpp"
#include "dnlspde/parallel.hpp"
#include "dnlspde/philox.hpp"

namespace dnlspde {

struct NoisePath {
    std::uint64_t seed = 0;
    double tau = 0.0;
    std::vector<double> increments;  // dW_1..dW_N, each N(0, tau)

    std::size_t n_steps() const noexcept { return increments.size(); }
};

/// Brownian increment k (0-based) of the path keyed by seed.
inline double brownian_increment(std::uint64_t seed, std::size_t k, double tau) noexcept {
    return std::sqrt(tau) * counter_normal(seed, k);
}

inline NoisePath sample_path(std::uint64_t seed, std::size_t n_steps, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("sample_path: tau must be positive");
    NoisePath path{seed, tau, std::vector<double>(n_steps)};
    for (std::size_t k = 0; k < n_steps; ++k) path.increments[k] = brownian_increment(seed, k, tau);
    return path;
}

/// Semi-implicit Euler-Maruyama for the (optionally shifted) small-noise SPDE.
/// Step forcing is tau h_{k+1} + sqrt(eps) dW_{k+1}; with eps = 0 and no shift
/// the result is bitwise the zero-control skeleton trajectory.
inline Trajectory solve_spde(const Field& u0, double eps, const NoisePath& path,
                             const std::optional<Control>& shift, const Coefficients& c,
                             const SolverSettings& settings = {}) {
    if (!(eps >= 0.0)) throw std::invalid_argument("solve_spde: eps must be >= 0");
    if (shift && shift->n_steps() != path.n_steps())
        throw std::invalid_argument("solve_spde: shift and path lengths differ");
    if (shift && std::abs(shift->tau() - path.tau) > 1e-14 * path.tau)
        throw std::invalid_argument("solve_spde: shift and path step sizes differ");
    const double tau = path.tau;
    const double amp = std::sqrt(eps);
    try {
        return detail::march(
            u0, path.n_steps(), tau,
            [&](std::size_t k) {
                const double drift = shift ? tau * (*shift)[k] : 0.0;
                return drift + amp * path.increments[k];
            },
            c, settings);
    } catch (SolveError& e) {
        e.with_seed(path.seed);
        throw;
    }
}

// ---------------------------------------------------------------------------
// Ensembles.

/// Per-path seed: base seed xor path index.
inline std::uint64_t path_seed(std::uint64_t base_seed, std::size_t index) noexcept {
    return base_seed ^ static_cast<std::uint64_t>(index);
}

struct EnsembleConfig {
    std::size_t paths = 1;
    std::uint64_t base_seed = 0;
    double eps = 1.0;
    std::optional<Control> shift;
    Coefficients coefficients;
    Field u0;
    double horizon = 1.0;
    std::size_t n_steps = 1;
    SolverSettings settings;
};

struct Moment {
    double mean = 0.0;
    double std_error = 0.0;
};

struct PathRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    double sup_b_l2_sq = 0.0;   // sup_k ||B(v_k)||^2
    double sup_b_l2_4 = 0.0;    // sup_k ||B(v_k)||^4
    double int_w1p_p_sq = 0.0;  // (tau sum_k ||grad v_k||_p^p)^2
    double sup_deviation = 0.0; // sup_k ||B(v_k) - B(v0_k)||, v0 the eps = 0 solution
    bool converged = false;
    std::string error;
};

struct MomentReport {
    Moment sup_b_l2_sq;
    Moment sup_b_l2_4;
    Moment int_w1p_p_sq;
    Moment sup_deviation;     // E[sup ||B(v^eps) - B(v^0)||]
    Moment sup_deviation_sq;  // E[sup ||B(v^eps) - B(v^0)||^2]
    std::size_t failed_paths = 0;
    std::vector<PathRecord> paths;
};

class EnsembleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mean and standard error accumulated in the given (index) order.
inline Moment sample_moment(const std::vector<double>& xs) {
    Moment m;
    if (xs.empty()) return m;
    double s = 0.0;
    for (double x : xs) s += x;
    m.mean = s / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double v = 0.0;
        for (double x : xs) v += (x - m.mean) * (x - m.mean);
        v /= static_cast<double>(xs.size() - 1);
        m.std_error = std::sqrt(v / static_cast<double>(xs.size()));
    }
    return m;
}

/// Runs fn(index, seed) for every path and returns the per-index results;
/// failed paths (SolveError) come back empty with the message recorded.
template <class T, class Fn>
std::vector<std::optional<T>> run_paths(std::size_t count, std::uint64_t base_seed,
                                        const WorkerPool& pool, Fn&& fn,
                                        std::vector<std::string>* errors = nullptr) {
    std::vector<std::optional<T>> out(count);
    std::vector<std::string> errs(count);
    pool.for_each_index(count, [&](std::size_t i) {
        try {
            out[i] = fn(i, path_seed(base_seed, i));
        } catch (const SolveError& e) {
            errs[i] = e.what();
        }
    });
    if (errors) *errors = std::move(errs);
    return out;
}

/// Throws EnsembleError when more than 10% of the paths failed.
inline void check_failure_budget(std::size_t failed, std::size_t total) {
    if (failed * 10 > total)
        throw EnsembleError("ensemble: " + std::to_string(failed) + " of " + std::to_string(total) +
                            " paths failed");
}

inline MomentReport ensemble_stats(const EnsembleConfig& cfg, const WorkerPool& pool = WorkerPool{}) {
    if (cfg.paths < 1) throw std::invalid_argument("ensemble_stats: need at least one path");
    if (!(cfg.eps >= 0.0)) throw std::invalid_argument("ensemble_stats: eps must be >= 0");
    const double tau = cfg.horizon / static_cast<double>(cfg.n_steps);
    const auto& c = cfg.coefficients;
    const double p = c.p();

    const NoisePath quiet{0, tau, std::vector<double>(cfg.n_steps, 0.0)};
    const auto reference = solve_spde(cfg.u0, 0.0, quiet, cfg.shift, c, cfg.settings);

    std::vector<std::string> errors;
    auto results = run_paths<PathRecord>(
        cfg.paths, cfg.base_seed, pool,
        [&](std::size_t i, std::uint64_t seed) {
            const auto path = sample_path(seed, cfg.n_steps, tau);
            const auto traj = solve_spde(cfg.u0, cfg.eps, path, cfg.shift, c, cfg.settings);
            PathRecord r;
            r.index = i;
            r.seed = seed;
            double sup_sq = 0.0, integral = 0.0;
            for (std::size_t k = 0; k < traj.b.size(); ++k) {
                const double nb = norm_lq(traj.b[k], 2.0);
                sup_sq = std::max(sup_sq, nb * nb);
                if (k > 0) integral += tau * std::pow(seminorm_w1p(traj.u[k], p), p);
            }
            r.sup_b_l2_sq = sup_sq;
            r.sup_b_l2_4 = sup_sq * sup_sq;
            r.int_w1p_p_sq = integral * integral;
            r.sup_deviation = sup_b_distance(traj, reference);
            r.converged = true;
            return r;
        },
        &errors);

    MomentReport report;
    std::vector<double> s2, s4, w, dev, dev2;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i]) {
            const auto& r = *results[i];
            s2.push_back(r.sup_b_l2_sq);
            s4.push_back(r.sup_b_l2_4);
            w.push_back(r.int_w1p_p_sq);
            dev.push_back(r.sup_deviation);
            dev2.push_back(r.sup_deviation * r.sup_deviation);
            report.paths.push_back(r);
        } else {
            ++report.failed_paths;
            PathRecord r;
            r.index = i;
            r.seed = path_seed(cfg.base_seed, i);
            r.error = errors[i];
            report.paths.push_back(r);
        }
    }
    check_failure_budget(report.failed_paths, cfg.paths);
    report.sup_b_l2_sq = sample_moment(s2);
    report.sup_b_l2_4 = sample_moment(s4);
    report.int_w1p_p_sq = sample_moment(w);
    report.sup_deviation = sample_moment(dev);
    report.sup_deviation_sq = sample_moment(dev2);
    return report;
}

} // namespace dnlspde
