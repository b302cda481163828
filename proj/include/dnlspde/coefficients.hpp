#pragma once

// The coefficient triple (a, b, sigma) of
//     dB(u) - div A(grad u) dt = sigma(u) dW,   B(u) = b(u), A(g) = a(g),
// together with the structure constants the a-priori estimates are stated in.
// Coefficients are tabulated parameter sets rather than arbitrary callables
// so that the sampled validators below stay meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dnlspde/errors.hpp"
#include "dnlspde/grid.hpp"

namespace dnlspde {

/// Structure constants of the flux: a(g) g >= C1 |g|^p - K1 and |a(g)| <= C2 |g|^(p-1) + K2.
struct FluxConstants {
    double C1 = 1.0;
    double C2 = 1.0;
    double K1 = 0.0;
    double K2 = 0.0;
};

class FluxFunction {
public:
    enum class Kind { p_laplacian, linear, custom };

    /// a(g) = |g|^(p-2) g.
    static FluxFunction p_laplacian(double p) {
        check_p(p);
        return FluxFunction(Kind::p_laplacian, p, 1.0, 0.0, 0.0, FluxConstants{1.0, 1.0, 0.0, 0.0});
    }

    /// a(g) = kappa g (growth exponent 2). kappa < 0 gives a non-monotone flux,
    /// which is only useful for exercising the validators.
    static FluxFunction linear(double kappa = 1.0) {
        const double k = std::abs(kappa);
        return FluxFunction(Kind::linear, 2.0, 0.0, kappa, 0.0, FluxConstants{k, k, 0.0, 0.0});
    }

    /// a(g) = kp |g|^(p-2) g + kl g + kt tanh(g).
    ///
    /// Default constants are valid when all three weights are nonnegative;
    /// for other parameter sets declare them with with_constants().
    static FluxFunction custom(double p, double kp, double kl, double kt) {
        check_p(p);
        FluxConstants k{kp, kp + std::max(kl, 0.0), 0.0, std::max(kl, 0.0) + std::abs(kt)};
        return FluxFunction(Kind::custom, p, kp, kl, kt, k);
    }

    FluxFunction with_constants(FluxConstants k) const {
        FluxFunction f = *this;
        f.constants_ = k;
        return f;
    }

    FluxFunction with_regularization(double delta) const {
        if (!(delta >= 0.0)) throw std::invalid_argument("flux regularization must be >= 0");
        FluxFunction f = *this;
        f.delta_reg_ = delta;
        return f;
    }

    Kind kind() const noexcept { return kind_; }
    double p() const noexcept { return p_; }
    double p_conjugate() const noexcept { return p_ / (p_ - 1.0); }
    const FluxConstants& constants() const noexcept { return constants_; }
    double regularization() const noexcept { return delta_reg_; }
    double kappa_power() const noexcept { return kp_; }
    double kappa_linear() const noexcept { return kl_; }
    double kappa_tanh() const noexcept { return kt_; }

    double operator()(double g) const noexcept {
        switch (kind_) {
            case Kind::p_laplacian: return power_term(g);
            case Kind::linear: return kl_ * g;
            case Kind::custom: return kp_ * power_term(g) + kl_ * g + kt_ * std::tanh(g);
        }
        return 0.0;
    }

    /// a'(g), plus the regularization delta_reg. Only Newton Jacobians use this,
    /// never residuals.
    double derivative(double g) const noexcept {
        switch (kind_) {
            case Kind::p_laplacian: return power_derivative(g) + delta_reg_;
            case Kind::linear: return kl_;
            case Kind::custom: {
                const double th = std::tanh(g);
                return kp_ * power_derivative(g) + kl_ + kt_ * (1.0 - th * th) + delta_reg_;
            }
        }
        return 0.0;
    }

    /// a(g)/g, the secant coefficient used by the lagged-coefficient fallback.
    double secant(double g) const noexcept {
        if (g == 0.0) return derivative(0.0);
        return (*this)(g) / g;
    }

private:
    FluxFunction(Kind kind, double p, double kp, double kl, double kt, FluxConstants k)
        : kind_(kind), p_(p), kp_(kp), kl_(kl), kt_(kt), constants_(k) {}

    static void check_p(double p) {
        if (!(p >= 2.0) || !std::isfinite(p))
            throw InvalidExponentError("flux growth exponent p must be >= 2");
    }

    double power_term(double g) const noexcept {
        if (p_ == 2.0) return g;
        const double a = std::abs(g);
        if (p_ == 4.0) return a * a * g;
        if (p_ == 3.0) return a * g;
        return std::pow(a, p_ - 2.0) * g;
    }

    double power_derivative(double g) const noexcept {
        if (p_ == 2.0) return 1.0;
        const double a = std::abs(g);
        if (p_ == 4.0) return 3.0 * a * a;
        if (p_ == 3.0) return 2.0 * a;
        return (p_ - 1.0) * std::pow(a, p_ - 2.0);
    }

    Kind kind_;
    double p_;
    double kp_;
    double kl_;
    double kt_;
    FluxConstants constants_;
    double delta_reg_ = 1e-10;
};

/// Strictly increasing b with b(0) = 0 and C3 <= b' <= C4.
class BFunction {
public:
    enum class Kind { linear, wave };

    static BFunction linear(double beta) {
        if (!(beta > 0.0)) throw std::invalid_argument("linear b requires beta > 0");
        return BFunction(Kind::linear, beta, 0.0);
    }

    /// b(r) = beta r + gamma sin r, requires beta > |gamma|.
    static BFunction wave(double beta, double gamma) {
        if (!(beta - std::abs(gamma) > 0.0))
            throw std::invalid_argument("wave b requires beta > |gamma|");
        return BFunction(Kind::wave, beta, gamma);
    }

    static BFunction identity() { return linear(1.0); }

    Kind kind() const noexcept { return kind_; }
    double beta() const noexcept { return beta_; }
    double gamma() const noexcept { return gamma_; }
    double C3() const noexcept { return beta_ - std::abs(gamma_); }
    double C4() const noexcept { return beta_ + std::abs(gamma_); }
    double derivative_lipschitz() const noexcept { return std::abs(gamma_); }

    double operator()(double r) const noexcept {
        return kind_ == Kind::linear ? beta_ * r : beta_ * r + gamma_ * std::sin(r);
    }
    double derivative(double r) const noexcept {
        return kind_ == Kind::linear ? beta_ : beta_ + gamma_ * std::cos(r);
    }

private:
    BFunction(Kind kind, double beta, double gamma) : kind_(kind), beta_(beta), gamma_(gamma) {}

    Kind kind_;
    double beta_;
    double gamma_;
};

/// Lipschitz noise coefficient with sigma(0) = 0.
class NoiseFunction {
public:
    enum class Kind { linear, sine, saturating };

    /// sigma(r) = c r.
    static NoiseFunction linear(double c) { return NoiseFunction(Kind::linear, c); }
    /// sigma(r) = c sin r.
    static NoiseFunction sine(double c) { return NoiseFunction(Kind::sine, c); }
    /// sigma(r) = c r|r| / (1 + |r|): quadratic near 0, linear growth, Lipschitz constant c.
    static NoiseFunction saturating(double c) { return NoiseFunction(Kind::saturating, c); }
    static NoiseFunction zero() { return linear(0.0); }

    Kind kind() const noexcept { return kind_; }
    double lipschitz() const noexcept { return std::abs(c_); }
    double scale() const noexcept { return c_; }

    double operator()(double r) const noexcept {
        switch (kind_) {
            case Kind::linear: return c_ * r;
            case Kind::sine: return c_ * std::sin(r);
            case Kind::saturating: {
                const double a = std::abs(r);
                return c_ * r * a / (1.0 + a);
            }
        }
        return 0.0;
    }

private:
    NoiseFunction(Kind kind, double c) : kind_(kind), c_(c) {}

    Kind kind_;
    double c_;
};

struct Coefficients {
    FluxFunction flux;
    BFunction b;
    NoiseFunction sigma;

    double p() const noexcept { return flux.p(); }
};

// ---------------------------------------------------------------------------
// Nemytskii operators.

inline EdgeField apply_flux(const Coefficients& c, const EdgeField& G) {
    std::vector<double> out(G.size());
    for (std::size_t e = 0; e < out.size(); ++e) out[e] = c.flux(G[e]);
    return EdgeField(G.grid(), std::move(out));
}

inline Field apply_b(const BFunction& b, const Field& u) {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = b(u[i]);
    return Field(u.grid(), std::move(out));
}

inline Field apply_sigma(const NoiseFunction& s, const Field& u) {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s(u[i]);
    return Field(u.grid(), std::move(out));
}

/// Solves b(r) = y to |b(r) - y| <= tol with Newton steps safeguarded by a
/// bisection bracket. Since b' >= C3 the root lies in [-|y|/C3, |y|/C3].
inline double b_inverse(const BFunction& b, double y, double tol, int max_iter = 200) {
    if (!(tol > 0.0)) throw std::invalid_argument("b_inverse: tol must be positive");
    if (y == 0.0) return 0.0;
    const double radius = std::abs(y) / b.C3();
    double lo = -radius, hi = radius;
    double r = y / b.derivative(0.0);
    r = std::clamp(r, lo, hi);
    for (int it = 0; it < max_iter; ++it) {
        const double f = b(r) - y;
        if (std::abs(f) <= tol) return r;
        if (f > 0.0)
            hi = r;
        else
            lo = r;
        double next = r - f / b.derivative(r);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == r) break;
        r = next;
    }
    const double f = b(r) - y;
    if (std::abs(f) <= tol) return r;
    throw BracketError("b_inverse: iteration cap exceeded", lo, hi);
}

// ---------------------------------------------------------------------------
// Sampled validation of the structural assumptions.

struct Witness {
    double x1 = 0.0;
    double x2 = 0.0;
    // The inequality reads lhs >= rhs (or lhs <= rhs for upper bounds).
    double lhs = 0.0;
    double rhs = 0.0;
};

struct AssumptionCheck {
    std::string name;
    std::string description;
    bool passed = true;
    std::size_t samples = 0;
    std::optional<Witness> witness;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    // Sampled range of b'; the report does not claim C3/C4 are tight.
    double sampled_b_derivative_min = std::numeric_limits<double>::infinity();
    double sampled_b_derivative_max = -std::numeric_limits<double>::infinity();

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }

    const AssumptionCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

namespace detail {

// Magnitudes spread log-uniformly over [1e-4, 1e3] with random sign, plus
// occasional exact zeros.
class HeavyTailedSampler {
public:
    explicit HeavyTailedSampler(std::uint64_t seed) : gen_(seed) {}

    double draw() {
        const double u = unit_(gen_);
        if (u < 0.01) return 0.0;
        const double mag = std::pow(10.0, -4.0 + 7.0 * unit_(gen_));
        return unit_(gen_) < 0.5 ? -mag : mag;
    }

    /// Pair that is close together half of the time, independent otherwise.
    std::pair<double, double> pair() {
        const double x = draw();
        if (unit_(gen_) < 0.5) return {x, draw()};
        const double gap = std::pow(10.0, -6.0 + 5.0 * unit_(gen_)) * (1.0 + std::abs(x));
        return {x, unit_(gen_) < 0.5 ? x + gap : x - gap};
    }

private:
    std::mt19937_64 gen_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

inline void record(AssumptionCheck& check, bool ok, Witness w) {
    ++check.samples;
    if (!ok && check.passed) {
        check.passed = false;
        check.witness = w;
    }
}

constexpr double kRelSlack = 1e-12;

} // namespace detail

/// Checks every inequality of the flux, b and sigma assumptions on
/// sample_count random points (and pairs). Failures are data: each failed
/// check carries the first witness found.
inline ValidationReport validate_assumptions(const Coefficients& c, std::size_t sample_count,
                                             std::uint64_t seed) {
    if (sample_count < 1) throw std::invalid_argument("validate_assumptions: sample_count must be >= 1");

    detail::HeavyTailedSampler sampler(seed);
    const auto& a = c.flux;
    const auto& k = a.constants();
    const double p = a.p();
    const auto& b = c.b;
    const auto& s = c.sigma;

    ValidationReport report;
    auto make = [](std::string name, std::string desc) {
        AssumptionCheck ch;
        ch.name = std::move(name);
        ch.description = std::move(desc);
        return ch;
    };
    auto monotone = make("A2.monotone", "(a(x1)-a(x2))(x1-x2) >= 0");
    auto coercive = make("A2.coercive", "a(x) x >= C1 |x|^p - K1");
    auto bounded = make("A2.bounded", "|a(x)| <= C2 |x|^(p-1) + K2");
    auto constants = make("A2.constants", "C1 > 0, C2 > 0, K1 >= 0, K2 >= 0");
    auto b_zero = make("A3.b_zero", "b(0) = 0");
    auto b_bounds = make("A3.b_derivative_bounds", "0 < C3 <= b'(r) <= C4");
    auto b_lip = make("A3.b_derivative_lipschitz", "|b'(r1)-b'(r2)| <= Cb' |r1-r2|");
    auto b_reverse = make("A3.reverse_pointwise", "|r1-r2| <= |b(r1)-b(r2)| / C3");
    auto s_zero = make("A4.sigma_zero", "sigma(0) = 0");
    auto s_lip = make("A4.sigma_lipschitz", "|sigma(r1)-sigma(r2)| <= c_sigma |r1-r2|");

    detail::record(constants, k.C1 > 0.0 && k.C2 > 0.0 && k.K1 >= 0.0 && k.K2 >= 0.0,
                   Witness{k.C1, k.C2, k.K1, k.K2});
    detail::record(b_zero, b(0.0) == 0.0, Witness{0.0, 0.0, b(0.0), 0.0});
    detail::record(s_zero, s(0.0) == 0.0, Witness{0.0, 0.0, s(0.0), 0.0});

    const double C3 = b.C3(), C4 = b.C4(), Cbp = b.derivative_lipschitz(), cs = s.lipschitz();
    constexpr double eps = detail::kRelSlack;

    for (std::size_t i = 0; i < sample_count; ++i) {
        const auto [x1, x2] = sampler.pair();
        const double a1 = a(x1), a2 = a(x2);

        {
            const double lhs = (a1 - a2) * (x1 - x2);
            const double scale = (std::abs(a1) + std::abs(a2)) * std::abs(x1 - x2);
            detail::record(monotone, lhs >= -eps * scale, Witness{x1, x2, lhs, 0.0});
        }
        {
            const double lhs = a1 * x1;
            const double rhs = k.C1 * std::pow(std::abs(x1), p) - k.K1;
            const double scale = std::abs(lhs) + std::abs(rhs);
            detail::record(coercive, lhs >= rhs - eps * scale, Witness{x1, 0.0, lhs, rhs});
        }
        {
            const double lhs = std::abs(a1);
            const double rhs = k.C2 * std::pow(std::abs(x1), p - 1.0) + k.K2;
            detail::record(bounded, lhs <= rhs + eps * (lhs + rhs), Witness{x1, 0.0, lhs, rhs});
        }

        // b and sigma live on the solution scale; shrink the heavy tail so that
        // sin-type terms are actually probed at O(1) arguments.
        const double r1 = x1 * 1e-1, r2 = x2 * 1e-1;
        const double d1 = b.derivative(r1), d2 = b.derivative(r2);
        report.sampled_b_derivative_min = std::min({report.sampled_b_derivative_min, d1, d2});
        report.sampled_b_derivative_max = std::max({report.sampled_b_derivative_max, d1, d2});
        detail::record(b_bounds, C3 > 0.0 && d1 >= C3 * (1 - eps) && d1 <= C4 * (1 + eps),
                       Witness{r1, 0.0, d1, d1 < C3 ? C3 : C4});
        {
            const double lhs = std::abs(d1 - d2);
            const double rhs = Cbp * std::abs(r1 - r2);
            detail::record(b_lip, lhs <= rhs + eps * (std::abs(d1) + std::abs(d2)),
                           Witness{r1, r2, lhs, rhs});
        }
        {
            const double lhs = std::abs(r1 - r2);
            const double db = std::abs(b(r1) - b(r2));
            const double rhs = db / C3;
            detail::record(b_reverse, lhs <= rhs + eps * (std::abs(r1) + std::abs(r2)) / C3,
                           Witness{r1, r2, lhs, rhs});
        }
        {
            const double s1 = s(r1), s2 = s(r2);
            const double lhs = std::abs(s1 - s2);
            const double rhs = cs * std::abs(r1 - r2);
            detail::record(s_lip, lhs <= rhs + eps * (std::abs(s1) + std::abs(s2)),
                           Witness{r1, r2, lhs, rhs});
        }
    }

    report.checks = {monotone, coercive, bounded, constants, b_zero, b_bounds,
                     b_lip,    b_reverse, s_zero, s_lip};
    return report;
}

} // namespace dnlspde
