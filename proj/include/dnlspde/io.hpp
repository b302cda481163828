#pragma once

// CSV and JSON serialization of fields, trajectories and experiment tables.
// Doubles are printed with 17 significant digits so files round-trip and
// byte-level digests are stable.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnlspde/coefficients.hpp"
#include "dnlspde/dynamics.hpp"
#include "dnlspde/ergodic.hpp"
#include "dnlspde/ldp.hpp"
#include "dnlspde/montecarlo.hpp"

namespace dnlspde::io {

using json = nlohmann::ordered_json;

inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// JSON number, or null for non-finite values.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const Grid1D& g) { return {{"n_interior", g.n_interior()}, {"length", g.length()}}; }

inline json to_json(const Field& f) {
    json a = json::array();
    for (double v : f.values()) a.push_back(v);
    return a;
}

inline json to_json(const SolveReport& r) {
    return {{"iterations", r.iterations},       {"residual", num(r.residual)},
            {"damping_events", r.damping_events}, {"picard_steps", r.picard_steps},
            {"converged", r.converged}};
}

// ---------------------------------------------------------------------------
// grid / dynamics

inline void write_fields_header(std::ostream& os, std::size_t n) {
    os << 't';
    for (std::size_t i = 1; i <= n; ++i) os << ",x_" << i;
    os << '\n';
}

inline void write_field_row(std::ostream& os, double t, const Field& f) {
    os << fmt(t);
    for (double v : f.values()) os << ',' << fmt(v);
    os << '\n';
}

/// Knots 0, every, 2*every, ... and always the last one.
inline void write_fields_csv(std::ostream& os, const Trajectory& traj, std::size_t every = 1) {
    write_fields_header(os, traj.grid.n_interior());
    if (every == 0) every = 1;
    const std::size_t N = traj.n_steps();
    for (std::size_t k = 0; k <= N; ++k)
        if (k % every == 0 || k == N) write_field_row(os, traj.times[k], traj.u[k]);
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, double p) {
    os << "step,t,norm_B_l2,seminorm_w1p,residual,newton_iters\n";
    for (std::size_t k = 0; k < traj.u.size(); ++k) {
        const auto& r = k == 0 ? traj.initial_report : traj.reports[k - 1];
        os << k << ',' << fmt(traj.times[k]) << ',' << fmt(norm_lq(traj.b[k], 2.0)) << ','
           << fmt(seminorm_w1p(traj.u[k], p)) << ',' << fmt(r.residual) << ',' << r.iterations << '\n';
    }
}

inline json to_json(const Diagnostics& d, bool with_holder_table = true) {
    json j = {{"sup_B_l2_sq", num(d.sup_b_l2_sq)},
              {"sum_jumps_sq", num(d.sum_jumps_sq)},
              {"tau_sum_grad_p", num(d.tau_sum_grad_p)},
              {"tau_sum_flux_pprime", num(d.tau_sum_flux_pprime)},
              {"holder_exponent", num(d.holder_exponent)},
              {"holder_max", num(d.holder_max)}};
    json lhs = json::array(), rhs = json::array();
    for (std::size_t n = 0; n < d.energy_lhs.size(); ++n) {
        lhs.push_back(num(d.energy_lhs[n]));
        rhs.push_back(num(d.energy_rhs[n]));
    }
    j["energy_lhs"] = std::move(lhs);
    j["energy_rhs"] = std::move(rhs);
    if (with_holder_table) {
        json h = json::array();
        for (const auto& e : d.holder) h.push_back({num(e.s), num(e.t), num(e.ratio)});
        j["holder_table"] = std::move(h);
    }
    return j;
}

// ---------------------------------------------------------------------------
// coefficients

inline json to_json(const ValidationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) {
        json e = {{"name", c.name}, {"description", c.description}, {"passed", c.passed}, {"samples", c.samples}};
        if (c.witness)
            e["witness"] = {{"x1", num(c.witness->x1)},
                            {"x2", num(c.witness->x2)},
                            {"lhs", num(c.witness->lhs)},
                            {"rhs", num(c.witness->rhs)}};
        checks.push_back(std::move(e));
    }
    return {{"all_passed", r.all_passed()},
            {"sampled_b_derivative_min", num(r.sampled_b_derivative_min)},
            {"sampled_b_derivative_max", num(r.sampled_b_derivative_max)},
            {"checks", std::move(checks)}};
}

// ---------------------------------------------------------------------------
// montecarlo

inline void write_ensemble_csv(std::ostream& os, const MomentReport& rep) {
    os << "path_index,seed,sup_B_l2_sq,sup_B_l2_4,int_w1p_p_sq,converged\n";
    for (const auto& r : rep.paths) {
        os << r.index << ',' << r.seed << ',';
        if (r.converged)
            os << fmt(r.sup_b_l2_sq) << ',' << fmt(r.sup_b_l2_4) << ',' << fmt(r.int_w1p_p_sq) << ",1\n";
        else
            os << ",,,0\n";
    }
}

inline json to_json(const Moment& m) { return {{"mean", num(m.mean)}, {"std_error", num(m.std_error)}}; }

inline json to_json(const MomentReport& rep) {
    json errors = json::array();
    for (const auto& r : rep.paths)
        if (!r.converged) errors.push_back({{"path_index", r.index}, {"seed", r.seed}, {"error", r.error}});
    return {{"paths", rep.paths.size()},
            {"failed_paths", rep.failed_paths},
            {"sup_B_l2_sq", to_json(rep.sup_b_l2_sq)},
            {"sup_B_l2_4", to_json(rep.sup_b_l2_4)},
            {"int_w1p_p_sq", to_json(rep.int_w1p_p_sq)},
            {"sup_deviation", to_json(rep.sup_deviation)},
            {"sup_deviation_sq", to_json(rep.sup_deviation_sq)},
            {"path_errors", std::move(errors)}};
}

// ---------------------------------------------------------------------------
// ldp

inline void write_ldp_csv(std::ostream& os, const std::vector<LdpRow>& rows) {
    os << "epsilon,p_hat,ci_low,ci_high,eps2_log_p\n";
    for (const auto& r : rows)
        os << fmt(r.eps) << ',' << fmt(r.p_hat) << ',' << fmt(r.ci.low) << ',' << fmt(r.ci.high) << ','
           << fmt(r.eps2_log_p) << '\n';
}

inline json to_json(const LdpRow& r) {
    return {{"epsilon", num(r.eps)}, {"hits", r.hits},         {"trials", r.trials},
            {"failed", r.failed},     {"p_hat", num(r.p_hat)},  {"ci_low", num(r.ci.low)},
            {"ci_high", num(r.ci.high)}, {"eps2_log_p", num(r.eps2_log_p)}, {"zero_hits", r.zero_hits}};
}

inline void write_rate_csv(std::ostream& os, const RateFunctionResult& r) {
    os << "lambda,I,constraint_residual,converged\n";
    for (const auto& s : r.stages)
        os << fmt(s.lambda) << ',' << fmt(s.value) << ',' << fmt(s.constraint_residual) << ','
           << (s.converged ? 1 : 0) << '\n';
}

inline json to_json(const RateFunctionResult& r) {
    json ctrl = json::array();
    for (double v : r.control.values()) ctrl.push_back(num(v));
    return {{"I", num(r.value)},
            {"constraint_residual", num(r.constraint_residual)},
            {"converged", r.converged},
            {"penalty_weight", num(r.penalty_weight)},
            {"control", std::move(ctrl)}};
}

inline void write_c1_csv(std::ostream& os, const std::vector<C1Row>& rows) {
    os << "epsilon,mean_sup_deviation,std_error,failed\n";
    for (const auto& r : rows)
        os << fmt(r.eps) << ',' << fmt(r.sup_deviation.mean) << ',' << fmt(r.sup_deviation.std_error) << ','
           << r.failed << '\n';
}

inline void write_continuity_csv(std::ostream& os, const std::vector<ContinuityRow>& rows) {
    os << "frequency,sup_B_distance\n";
    for (const auto& r : rows) os << r.frequency << ',' << fmt(r.sup_b_distance) << '\n';
}

// ---------------------------------------------------------------------------
// ergodic

inline void write_occupation_csv(std::ostream& os, const OccupationSummary& s) {
    os << "window_index,observable_id,average,discrepancy_prev\n";
    for (std::size_t w = 0; w < s.windows(); ++w)
        for (std::size_t j = 0; j < s.observable_ids.size(); ++j)
            os << w << ',' << s.observable_ids[j] << ',' << fmt(s.cesaro_average[w][j]) << ','
               << (w == 0 ? std::string() : fmt(s.discrepancy_prev[w][j])) << '\n';
}

inline json to_json(const DissipativityReport& r, std::size_t sample_count) {
    json j = {{"samples", sample_count},
              {"min_ratio", num(r.min_ratio)},
              {"delta_hat", num(r.delta_hat)},
              {"passed", r.passed}};
    if (r.witness) j["witness"] = to_json(*r.witness);
    return j;
}

inline json to_json(const MomentBoundReport& r) {
    return {{"lhs", num(r.lhs)}, {"rhs", num(r.rhs)}, {"passed", r.passed}};
}

} // namespace dnlspde::io
