#pragma once

// TOML run configuration: schema, defaults, validation with key paths, and
// construction of the domain objects an experiment needs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "dnlspde/coefficients.hpp"
#include "dnlspde/dynamics.hpp"
#include "dnlspde/ergodic.hpp"
#include "dnlspde/ldp.hpp"

namespace dnlspde::cli {

enum class Experiment { validate, skeleton, simulate, ldp, invariant, convergence };

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"validate", "skeleton",  "simulate",
                                                "ldp",      "invariant", "convergence"};
    return names;
}

inline std::string to_string(Experiment e) { return experiment_names()[static_cast<std::size_t>(e)]; }

inline std::optional<Experiment> parse_experiment(std::string_view s) {
    const auto& n = experiment_names();
    for (std::size_t i = 0; i < n.size(); ++i)
        if (n[i] == s) return static_cast<Experiment>(i);
    return std::nullopt;
}

struct GridBlock {
    std::size_t n_interior = 32;
    double length = 1.0;
};

struct TimeBlock {
    double T = 1.0;
    std::size_t N = 64;
};

struct CoefficientsBlock {
    std::string flux = "p_laplacian";  // p_laplacian | linear | custom
    double p = 4.0;
    double kappa = 1.0;                // linear flux slope
    double kappa_power = 1.0;          // custom: kp |g|^{p-2} g + kl g + kt tanh g
    double kappa_linear = 0.0;
    double kappa_tanh = 0.0;
    double regularization = 1e-10;
    std::optional<double> C1, C2, K1, K2;
    std::string b = "wave";            // linear | wave
    double beta = 2.0;
    double gamma = 1.0;
    std::string sigma = "linear";      // linear | sine | saturating | zero
    double sigma_lipschitz = 0.1;
};

struct InitialBlock {
    std::string kind = "sine";  // zero | sine | tabulated
    double amplitude = 1.0;
    std::size_t mode = 1;
    std::vector<double> values;
};

struct ControlBlock {
    std::string kind = "zero";  // zero | constant | sine | tabulated
    double value = 0.0;         // constant level (also the offset of sine)
    double amplitude = 1.0;
    double frequency = 1.0;
    std::vector<double> values;  // step values on a uniform partition of [0, T]
};

struct SolverBlock {
    double newton_tol = 1e-10;
    int max_iter = 100;
    int max_halvings = 30;
    bool regularize_initial = true;
};

struct MonteCarloBlock {
    std::size_t paths = 64;
    std::uint64_t base_seed = 0;
    std::vector<double> eps_list{0.1};
    std::optional<unsigned> workers;
};

struct OptimizerBlock {
    std::vector<double> penalty_schedule{10.0, 1e2, 1e3, 1e4};
    double fd_step = 1e-5;
    int max_iter = 200;
    double grad_tol = 1e-8;
    double event_tol = 1e-4;
};

struct EventBlock {
    std::string kind = "endpoint_ball";  // endpoint_ball | sup_tube
    std::string target = "skeleton";     // skeleton | zero | tabulated
    double target_control = 0.0;         // constant control generating a skeleton target
    double target_scale = 1.0;
    std::vector<double> values;          // tabulated endpoint
    double radius = 0.1;
};

struct ErgodicBlock {
    double horizon = 20.0;
    double window = 1.0;
    double tau = 0.02;
    double eps = 1.0;
    std::size_t dissipativity_samples = 2000;
    std::size_t moment_paths = 64;
    double slack = 0.1;
    double semigroup_t = 0.5;
    std::size_t semigroup_paths = 64;
    std::vector<std::string> observables;  // empty = whole battery
};

struct ValidateBlock {
    std::size_t samples = 100000;
    bool dissipativity = true;
};

struct ConvergenceBlock {
    std::size_t levels = 3;
    std::vector<int> frequencies{1, 2, 4, 8, 16};
};

struct OutputBlock {
    std::string directory = "out";
    std::size_t dump_interval = 0;  // 0: no full-field dump
};

struct RunConfig {
    std::optional<Experiment> experiment;
    GridBlock grid;
    TimeBlock time;
    CoefficientsBlock coefficients;
    InitialBlock initial;
    ControlBlock control;
    SolverBlock solver;
    MonteCarloBlock montecarlo;
    OptimizerBlock optimizer;
    EventBlock event;
    ErgodicBlock ergodic;
    ValidateBlock validate;
    ConvergenceBlock convergence;
    OutputBlock output;
};

/// All validation problems of a config, one "key.path: message" per entry.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s = "invalid configuration:";
        for (const auto& x : e) s += "\n  " + x;
        return s;
    }
    std::vector<std::string> errors_;
};

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

inline std::string nearest(std::string_view key, const std::vector<std::string>& candidates) {
    std::string best;
    std::size_t best_d = static_cast<std::size_t>(-1);
    for (const auto& c : candidates) {
        const auto d = edit_distance(key, c);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

namespace detail {

// Reads typed values out of one TOML section and records every problem.
class Section {
public:
    Section(const toml::table* tbl, std::string name, std::vector<std::string>& errors)
        : tbl_(tbl), name_(std::move(name)), errors_(errors) {}

    std::string path(std::string_view key) const { return name_.empty() ? std::string(key) : name_ + "." + std::string(key); }

    void error(std::string_view key, const std::string& msg) { errors_.push_back(path(key) + ": " + msg); }

    void require(bool ok, std::string_view key, const std::string& msg) {
        if (!ok) error(key, msg);
    }

    void real(std::string_view key, double& out) {
        const auto* n = find(key);
        if (!n) return;
        if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer()))
            out = *v;
        else
            error(key, "expected a number");
    }

    void real(std::string_view key, std::optional<double>& out) {
        if (!find(key)) return;
        double v = 0.0;
        real(key, v);
        out = v;
    }

    template <class Int>
    void integer(std::string_view key, Int& out) {
        const auto* n = find(key);
        if (!n) return;
        if (!n->is_integer()) return error(key, "expected an integer");
        const auto v = *n->value<std::int64_t>();
        if (v < 0 && !std::is_signed_v<Int>) return error(key, "must be >= 0");
        out = static_cast<Int>(v);
    }

    void unsigned64(std::string_view key, std::uint64_t& out) {
        const auto* n = find(key);
        if (!n) return;
        if (!n->is_integer()) return error(key, "expected an integer");
        out = static_cast<std::uint64_t>(*n->value<std::int64_t>());
    }

    void boolean(std::string_view key, bool& out) {
        const auto* n = find(key);
        if (!n) return;
        if (!n->is_boolean()) return error(key, "expected true or false");
        out = *n->value<bool>();
    }

    void string(std::string_view key, std::string& out, const std::vector<std::string>& allowed = {}) {
        const auto* n = find(key);
        if (!n) return;
        if (!n->is_string()) return error(key, "expected a string");
        const auto v = *n->value<std::string>();
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            return error(key, "unknown value \"" + v + "\" (expected one of: " + list + ")");
        }
        out = v;
    }

    void reals(std::string_view key, std::vector<double>& out) {
        const auto* n = find(key);
        if (!n) return;
        const auto* arr = n->as_array();
        if (!arr) return error(key, "expected an array of numbers");
        std::vector<double> v;
        for (const auto& e : *arr) {
            if (!(e.is_floating_point() || e.is_integer())) return error(key, "expected an array of numbers");
            v.push_back(*e.value<double>());
        }
        out = std::move(v);
    }

    void integers(std::string_view key, std::vector<int>& out) {
        const auto* n = find(key);
        if (!n) return;
        const auto* arr = n->as_array();
        if (!arr) return error(key, "expected an array of integers");
        std::vector<int> v;
        for (const auto& e : *arr) {
            if (!e.is_integer()) return error(key, "expected an array of integers");
            v.push_back(static_cast<int>(*e.value<std::int64_t>()));
        }
        out = std::move(v);
    }

    void strings(std::string_view key, std::vector<std::string>& out) {
        const auto* n = find(key);
        if (!n) return;
        const auto* arr = n->as_array();
        if (!arr) return error(key, "expected an array of strings");
        std::vector<std::string> v;
        for (const auto& e : *arr) {
            if (!e.is_string()) return error(key, "expected an array of strings");
            v.push_back(*e.value<std::string>());
        }
        out = std::move(v);
    }

    bool has(std::string_view key) const { return find(key) != nullptr; }

    /// Reports keys of this section that are not in `known`.
    void reject_unknown(const std::vector<std::string>& known) {
        if (!tbl_) return;
        for (auto&& [k, v] : *tbl_) {
            const std::string key(k.str());
            if (std::find(known.begin(), known.end(), key) == known.end())
                error(key, "unknown key (did you mean \"" + path(nearest(key, known)) + "\"?)");
        }
    }

private:
    const toml::node* find(std::string_view key) const { return tbl_ ? tbl_->get(key) : nullptr; }

    const toml::table* tbl_;
    std::string name_;
    std::vector<std::string>& errors_;
};

} // namespace detail

/// Builds the coefficient triple described by a config block; throws
/// std::invalid_argument on inconsistent parameters.
inline Coefficients make_coefficients(const CoefficientsBlock& b) {
    FluxFunction flux = b.flux == "linear" ? FluxFunction::linear(b.kappa)
                        : b.flux == "custom"
                            ? FluxFunction::custom(b.p, b.kappa_power, b.kappa_linear, b.kappa_tanh)
                            : FluxFunction::p_laplacian(b.p);
    if (b.C1 || b.C2 || b.K1 || b.K2) {
        auto k = flux.constants();
        k.C1 = b.C1.value_or(k.C1);
        k.C2 = b.C2.value_or(k.C2);
        k.K1 = b.K1.value_or(k.K1);
        k.K2 = b.K2.value_or(k.K2);
        flux = flux.with_constants(k);
    }
    flux = flux.with_regularization(b.regularization);
    const BFunction bf = b.b == "wave" ? BFunction::wave(b.beta, b.gamma) : BFunction::linear(b.beta);
    NoiseFunction sigma = NoiseFunction::zero();
    if (b.sigma == "linear") sigma = NoiseFunction::linear(b.sigma_lipschitz);
    else if (b.sigma == "sine") sigma = NoiseFunction::sine(b.sigma_lipschitz);
    else if (b.sigma == "saturating") sigma = NoiseFunction::saturating(b.sigma_lipschitz);
    return Coefficients{flux, bf, sigma};
}

inline Field make_initial(const InitialBlock& b, const Grid1D& grid) {
    if (b.kind == "zero") return Field(grid);
    if (b.kind == "tabulated") return Field(grid, b.values);
    const double L = grid.length();
    const double m = static_cast<double>(b.mode);
    return Field::sample(grid, [&](double x) { return b.amplitude * std::sin(m * std::numbers::pi * x / L); });
}

/// The control as a function of time on [0, horizon].
inline std::function<double(double)> control_function(const ControlBlock& b, double horizon) {
    if (b.kind == "zero") return [](double) { return 0.0; };
    if (b.kind == "constant") return [v = b.value](double) { return v; };
    if (b.kind == "sine") {
        const double w = 2.0 * std::numbers::pi * b.frequency;
        return [v = b.value, a = b.amplitude, w](double t) { return v + a * std::sin(w * t); };
    }
    const Control table(horizon, b.values);
    return [table](double t) { return table.at(t); };
}

inline Control make_control(const ControlBlock& b, double horizon, std::size_t n_steps) {
    if (b.kind == "zero") return Control::zero(horizon, n_steps);
    if (b.kind == "constant") return Control::constant(horizon, n_steps, b.value);
    return project_control(control_function(b, horizon), horizon, n_steps);
}

inline SolverSettings make_solver(const SolverBlock& b) {
    return SolverSettings{b.newton_tol, b.max_iter, b.max_halvings, b.regularize_initial};
}

namespace detail {

inline void validate_values(RunConfig& cfg, std::vector<std::string>& errors) {
    auto err = [&](const std::string& key, const std::string& msg) { errors.push_back(key + ": " + msg); };
    if (cfg.grid.n_interior < 1) err("grid.n_interior", "must be >= 1");
    if (!(cfg.grid.length > 0.0)) err("grid.length", "must be positive");
    if (!(cfg.time.T > 0.0)) err("time.T", "must be positive");
    if (cfg.time.N < 1) err("time.N", "must be >= 1");

    const auto& c = cfg.coefficients;
    if (c.flux != "linear" && !(c.p >= 2.0)) err("coefficients.p", "must be >= 2");
    if (!(c.regularization >= 0.0)) err("coefficients.regularization", "must be >= 0");
    if (!(c.beta > 0.0)) err("coefficients.beta", "must be positive");
    if (c.b == "wave" && !(c.beta > std::abs(c.gamma))) err("coefficients.gamma", "wave b needs beta > |gamma|");
    if (!(c.sigma_lipschitz >= 0.0)) err("coefficients.sigma_lipschitz", "must be >= 0");
    for (const auto& [key, v] : {std::pair{"C1", c.C1}, {"C2", c.C2}, {"K1", c.K1}, {"K2", c.K2}})
        if (v && !(*v >= 0.0)) err(std::string("coefficients.") + key, "must be >= 0");

    if (cfg.initial.kind == "tabulated" && cfg.initial.values.size() != cfg.grid.n_interior)
        err("initial.values", "needs exactly grid.n_interior = " + std::to_string(cfg.grid.n_interior) + " values");
    if (cfg.initial.mode < 1) err("initial.mode", "must be >= 1");
    if (cfg.control.kind == "tabulated" && cfg.control.values.empty()) err("control.values", "must not be empty");

    if (!(cfg.solver.newton_tol > 0.0)) err("solver.newton_tol", "must be positive");
    if (cfg.solver.max_iter < 1) err("solver.max_iter", "must be >= 1");
    if (cfg.solver.max_halvings < 0) err("solver.max_halvings", "must be >= 0");

    if (cfg.montecarlo.paths < 1) err("montecarlo.paths", "must be >= 1");
    if (cfg.montecarlo.eps_list.empty()) err("montecarlo.eps_list", "must not be empty");
    for (double e : cfg.montecarlo.eps_list)
        if (!(e >= 0.0)) {
            err("montecarlo.eps_list", "entries must be >= 0");
            break;
        }
    if (cfg.montecarlo.workers && *cfg.montecarlo.workers < 1) err("montecarlo.workers", "must be >= 1");

    if (cfg.optimizer.penalty_schedule.empty()) err("optimizer.penalty_schedule", "must not be empty");
    for (double l : cfg.optimizer.penalty_schedule)
        if (!(l > 0.0)) {
            err("optimizer.penalty_schedule", "entries must be positive");
            break;
        }
    if (!(cfg.optimizer.fd_step > 0.0)) err("optimizer.fd_step", "must be positive");
    if (cfg.optimizer.max_iter < 1) err("optimizer.max_iter", "must be >= 1");
    if (!(cfg.optimizer.grad_tol > 0.0)) err("optimizer.grad_tol", "must be positive");
    if (!(cfg.optimizer.event_tol >= 0.0)) err("optimizer.event_tol", "must be >= 0");

    if (!(cfg.event.radius > 0.0)) err("event.radius", "must be positive");
    if (cfg.event.target == "tabulated") {
        if (cfg.event.kind != "endpoint_ball") err("event.target", "tabulated targets need kind = \"endpoint_ball\"");
        if (cfg.event.values.size() != cfg.grid.n_interior)
            err("event.values", "needs exactly grid.n_interior = " + std::to_string(cfg.grid.n_interior) + " values");
    }

    const auto& g = cfg.ergodic;
    if (!(g.horizon > 0.0)) err("ergodic.horizon", "must be positive");
    if (!(g.window > 0.0)) err("ergodic.window", "must be positive");
    if (!(g.tau > 0.0)) err("ergodic.tau", "must be positive");
    if (!(g.eps >= 0.0)) err("ergodic.eps", "must be >= 0");
    if (g.horizon > 0.0 && g.window > 0.0 && g.tau > 0.0) {
        const double spw = g.window / g.tau, nw = g.horizon / g.window;
        if (std::abs(spw - std::round(spw)) > 1e-9 * spw || std::round(spw) < 1)
            err("ergodic.window", "must be a positive multiple of ergodic.tau");
        if (std::abs(nw - std::round(nw)) > 1e-9 * nw || std::round(nw) < 1)
            err("ergodic.horizon", "must be a positive multiple of ergodic.window");
    }
    if (g.dissipativity_samples < 1) err("ergodic.dissipativity_samples", "must be >= 1");
    if (g.moment_paths < 1) err("ergodic.moment_paths", "must be >= 1");
    if (!(g.slack >= 0.0)) err("ergodic.slack", "must be >= 0");
    if (!(g.semigroup_t >= 0.0)) err("ergodic.semigroup_t", "must be >= 0");
    if (g.semigroup_paths < 1) err("ergodic.semigroup_paths", "must be >= 1");
    if (cfg.grid.n_interior >= 1 && cfg.grid.length > 0.0) {
        const auto battery = observable_battery(Grid1D(cfg.grid.n_interior, cfg.grid.length));
        for (const auto& id : g.observables)
            if (std::none_of(battery.begin(), battery.end(), [&](const auto& o) { return o.id == id; }))
                err("ergodic.observables", "unknown observable \"" + id + "\"");
    }

    if (cfg.validate.samples < 1) err("validate.samples", "must be >= 1");
    if (cfg.convergence.levels < 1) err("convergence.levels", "must be >= 1");
    if (cfg.convergence.frequencies.empty()) err("convergence.frequencies", "must not be empty");
    for (int f : cfg.convergence.frequencies)
        if (f < 0) {
            err("convergence.frequencies", "entries must be >= 0");
            break;
        }
    if (cfg.output.directory.empty()) err("output.directory", "must not be empty");

    // Cross-check that the coefficient set can actually be built.
    if (errors.empty()) {
        try {
            (void)make_coefficients(cfg.coefficients);
        } catch (const std::exception& e) {
            err("coefficients", e.what());
        }
    }
}

} // namespace detail

/// Parses and validates a TOML document; throws ConfigError listing every problem.
inline RunConfig parse_config_string(std::string_view text, std::string_view source = "config") {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << source << ':' << e.source().begin.line << ':' << e.source().begin.column << ": " << e.description();
        throw ConfigError({os.str()});
    }

    std::vector<std::string> errors;
    RunConfig cfg;
    using detail::Section;

    static const std::map<std::string, std::vector<std::string>> schema{
        {"grid", {"n_interior", "length"}},
        {"time", {"T", "N"}},
        {"coefficients",
         {"flux", "p", "kappa", "kappa_power", "kappa_linear", "kappa_tanh", "regularization", "C1", "C2", "K1",
          "K2", "b", "beta", "gamma", "sigma", "sigma_lipschitz"}},
        {"initial", {"kind", "amplitude", "mode", "values"}},
        {"control", {"kind", "value", "amplitude", "frequency", "values"}},
        {"solver", {"newton_tol", "max_iter", "max_halvings", "regularize_initial"}},
        {"montecarlo", {"paths", "base_seed", "eps_list", "workers"}},
        {"optimizer", {"penalty_schedule", "fd_step", "max_iter", "grad_tol", "event_tol"}},
        {"event", {"kind", "target", "target_control", "target_scale", "values", "radius"}},
        {"ergodic",
         {"horizon", "window", "tau", "eps", "dissipativity_samples", "moment_paths", "slack", "semigroup_t",
          "semigroup_paths", "observables"}},
        {"validate", {"samples", "dissipativity"}},
        {"convergence", {"levels", "frequencies"}},
        {"output", {"directory", "dump_interval"}},
    };

    std::vector<std::string> top_keys{"experiment"};
    for (const auto& [k, _] : schema) top_keys.push_back(k);
    Section top(&root, "", errors);
    top.reject_unknown(top_keys);
    std::string exp;
    top.string("experiment", exp, experiment_names());
    if (!exp.empty()) cfg.experiment = parse_experiment(exp);

    auto section = [&](const std::string& name) {
        const toml::node* n = root.get(name);
        const toml::table* t = n ? n->as_table() : nullptr;
        if (n && !t) errors.push_back(name + ": expected a table");
        Section s(t, name, errors);
        s.reject_unknown(schema.at(name));
        return s;
    };

    {
        auto s = section("grid");
        s.integer("n_interior", cfg.grid.n_interior);
        s.real("length", cfg.grid.length);
    }
    {
        auto s = section("time");
        s.real("T", cfg.time.T);
        s.integer("N", cfg.time.N);
    }
    {
        auto s = section("coefficients");
        auto& c = cfg.coefficients;
        s.string("flux", c.flux, {"p_laplacian", "linear", "custom"});
        s.real("p", c.p);
        s.real("kappa", c.kappa);
        s.real("kappa_power", c.kappa_power);
        s.real("kappa_linear", c.kappa_linear);
        s.real("kappa_tanh", c.kappa_tanh);
        s.real("regularization", c.regularization);
        s.real("C1", c.C1);
        s.real("C2", c.C2);
        s.real("K1", c.K1);
        s.real("K2", c.K2);
        s.string("b", c.b, {"linear", "wave"});
        s.real("beta", c.beta);
        s.real("gamma", c.gamma);
        s.string("sigma", c.sigma, {"linear", "sine", "saturating", "zero"});
        s.real("sigma_lipschitz", c.sigma_lipschitz);
        if (c.b == "linear" && !s.has("gamma")) c.gamma = 0.0;
        if (c.b == "linear" && !s.has("beta")) c.beta = 1.0;
    }
    {
        auto s = section("initial");
        s.string("kind", cfg.initial.kind, {"zero", "sine", "tabulated"});
        s.real("amplitude", cfg.initial.amplitude);
        s.integer("mode", cfg.initial.mode);
        s.reals("values", cfg.initial.values);
    }
    {
        auto s = section("control");
        s.string("kind", cfg.control.kind, {"zero", "constant", "sine", "tabulated"});
        s.real("value", cfg.control.value);
        s.real("amplitude", cfg.control.amplitude);
        s.real("frequency", cfg.control.frequency);
        s.reals("values", cfg.control.values);
    }
    {
        auto s = section("solver");
        s.real("newton_tol", cfg.solver.newton_tol);
        s.integer("max_iter", cfg.solver.max_iter);
        s.integer("max_halvings", cfg.solver.max_halvings);
        s.boolean("regularize_initial", cfg.solver.regularize_initial);
    }
    {
        auto s = section("montecarlo");
        s.integer("paths", cfg.montecarlo.paths);
        s.unsigned64("base_seed", cfg.montecarlo.base_seed);
        s.reals("eps_list", cfg.montecarlo.eps_list);
        if (s.has("workers")) {
            unsigned w = 0;
            s.integer("workers", w);
            cfg.montecarlo.workers = w;
        }
    }
    {
        auto s = section("optimizer");
        s.reals("penalty_schedule", cfg.optimizer.penalty_schedule);
        s.real("fd_step", cfg.optimizer.fd_step);
        s.integer("max_iter", cfg.optimizer.max_iter);
        s.real("grad_tol", cfg.optimizer.grad_tol);
        s.real("event_tol", cfg.optimizer.event_tol);
    }
    {
        auto s = section("event");
        s.string("kind", cfg.event.kind, {"endpoint_ball", "sup_tube"});
        s.string("target", cfg.event.target, {"skeleton", "zero", "tabulated"});
        s.real("target_control", cfg.event.target_control);
        s.real("target_scale", cfg.event.target_scale);
        s.reals("values", cfg.event.values);
        s.real("radius", cfg.event.radius);
    }
    {
        auto s = section("ergodic");
        auto& g = cfg.ergodic;
        s.real("horizon", g.horizon);
        s.real("window", g.window);
        s.real("tau", g.tau);
        s.real("eps", g.eps);
        s.integer("dissipativity_samples", g.dissipativity_samples);
        s.integer("moment_paths", g.moment_paths);
        s.real("slack", g.slack);
        s.real("semigroup_t", g.semigroup_t);
        s.integer("semigroup_paths", g.semigroup_paths);
        s.strings("observables", g.observables);
    }
    {
        auto s = section("validate");
        s.integer("samples", cfg.validate.samples);
        s.boolean("dissipativity", cfg.validate.dissipativity);
    }
    {
        auto s = section("convergence");
        s.integer("levels", cfg.convergence.levels);
        s.integers("frequencies", cfg.convergence.frequencies);
    }
    {
        auto s = section("output");
        s.string("directory", cfg.output.directory);
        s.integer("dump_interval", cfg.output.dump_interval);
    }

    detail::validate_values(cfg, errors);
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

/// Reads and parses a config file.
inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({path + ": cannot read file"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_string(ss.str(), path);
}

/// Canonical JSON view of the effective configuration. The worker count is
/// left out: it never changes results.
inline nlohmann::ordered_json to_json(const RunConfig& c) {
    using nlohmann::ordered_json;
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    const auto& k = c.coefficients;
    return ordered_json{
        {"experiment", c.experiment ? to_string(*c.experiment) : ""},
        {"grid", {{"n_interior", c.grid.n_interior}, {"length", c.grid.length}}},
        {"time", {{"T", c.time.T}, {"N", c.time.N}}},
        {"coefficients",
         {{"flux", k.flux}, {"p", k.p}, {"kappa", k.kappa}, {"kappa_power", k.kappa_power},
          {"kappa_linear", k.kappa_linear}, {"kappa_tanh", k.kappa_tanh}, {"regularization", k.regularization},
          {"C1", opt(k.C1)}, {"C2", opt(k.C2)}, {"K1", opt(k.K1)}, {"K2", opt(k.K2)}, {"b", k.b},
          {"beta", k.beta}, {"gamma", k.gamma}, {"sigma", k.sigma}, {"sigma_lipschitz", k.sigma_lipschitz}}},
        {"initial",
         {{"kind", c.initial.kind}, {"amplitude", c.initial.amplitude}, {"mode", c.initial.mode},
          {"values", c.initial.values}}},
        {"control",
         {{"kind", c.control.kind}, {"value", c.control.value}, {"amplitude", c.control.amplitude},
          {"frequency", c.control.frequency}, {"values", c.control.values}}},
        {"solver",
         {{"newton_tol", c.solver.newton_tol}, {"max_iter", c.solver.max_iter},
          {"max_halvings", c.solver.max_halvings}, {"regularize_initial", c.solver.regularize_initial}}},
        {"montecarlo",
         {{"paths", c.montecarlo.paths}, {"base_seed", c.montecarlo.base_seed}, {"eps_list", c.montecarlo.eps_list}}},
        {"optimizer",
         {{"penalty_schedule", c.optimizer.penalty_schedule}, {"fd_step", c.optimizer.fd_step},
          {"max_iter", c.optimizer.max_iter}, {"grad_tol", c.optimizer.grad_tol},
          {"event_tol", c.optimizer.event_tol}}},
        {"event",
         {{"kind", c.event.kind}, {"target", c.event.target}, {"target_control", c.event.target_control},
          {"target_scale", c.event.target_scale}, {"values", c.event.values}, {"radius", c.event.radius}}},
        {"ergodic",
         {{"horizon", c.ergodic.horizon}, {"window", c.ergodic.window}, {"tau", c.ergodic.tau},
          {"eps", c.ergodic.eps}, {"dissipativity_samples", c.ergodic.dissipativity_samples},
          {"moment_paths", c.ergodic.moment_paths}, {"slack", c.ergodic.slack},
          {"semigroup_t", c.ergodic.semigroup_t}, {"semigroup_paths", c.ergodic.semigroup_paths},
          {"observables", c.ergodic.observables}}},
        {"validate", {{"samples", c.validate.samples}, {"dissipativity", c.validate.dissipativity}}},
        {"convergence", {{"levels", c.convergence.levels}, {"frequencies", c.convergence.frequencies}}},
        {"output", {{"dump_interval", c.output.dump_interval}}},
    };
}

} // namespace dnlspde::cli
