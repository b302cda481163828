#pragma once

// One-dimensional uniform grid with homogeneous Dirichlet boundary.
//
// Unknowns live on the n interior nodes x_i = i*h, i = 1..n, h = L/(n+1).
// Gradients live on the n+1 edges; edge e joins node e-1 and node e
// (nodes 0 and n+1 are the boundary, where the field is zero). With this
// layout divergence is exactly the negative adjoint of gradient under the
// h-weighted inner products, so discrete energy identities hold verbatim.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dnlspde/errors.hpp"

namespace dnlspde {

class Grid1D {
public:
    Grid1D(std::size_t n_interior, double length) : n_(n_interior), length_(length) {
        if (n_interior < 1) throw std::invalid_argument("Grid1D: n_interior must be >= 1");
        if (!(length > 0.0) || !std::isfinite(length))
            throw std::invalid_argument("Grid1D: length must be positive and finite");
        spacing_ = length / static_cast<double>(n_interior + 1);
    }

    std::size_t n_interior() const noexcept { return n_; }
    std::size_t n_edges() const noexcept { return n_ + 1; }
    double length() const noexcept { return length_; }
    double spacing() const noexcept { return spacing_; }

    /// Coordinate of interior node i (0-based), i.e. (i+1)*h.
    double node(std::size_t i) const noexcept { return static_cast<double>(i + 1) * spacing_; }

    std::vector<double> nodes() const {
        std::vector<double> x(n_);
        for (std::size_t i = 0; i < n_; ++i) x[i] = node(i);
        return x;
    }

    friend bool operator==(const Grid1D& a, const Grid1D& b) noexcept {
        return a.n_ == b.n_ && a.length_ == b.length_;
    }

private:
    std::size_t n_;
    double length_;
    double spacing_;
};

namespace detail {
template <class Tag>
class GridVector {
public:
    GridVector(const Grid1D& grid, std::vector<double> values, std::size_t expected)
        : grid_(grid), values_(std::move(values)) {
        if (values_.size() != expected)
            throw std::invalid_argument("grid vector: wrong number of values");
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("grid vector: non-finite value");
    }

    const Grid1D& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    // Unchecked mutable access for solvers that own the object.
    std::vector<double>& raw() noexcept { return values_; }

private:
    Grid1D grid_;
    std::vector<double> values_;
};
} // namespace detail

/// Nodal profile on the interior nodes; boundary values are implicitly zero.
class Field : public detail::GridVector<struct FieldTag> {
public:
    explicit Field(const Grid1D& grid)
        : GridVector(grid, std::vector<double>(grid.n_interior(), 0.0), grid.n_interior()) {}
    Field(const Grid1D& grid, std::vector<double> values)
        : GridVector(grid, std::move(values), grid.n_interior()) {}

    /// Samples f at the interior nodes.
    template <class F>
    static Field sample(const Grid1D& grid, F&& f) {
        std::vector<double> v(grid.n_interior());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.node(i));
        return Field(grid, std::move(v));
    }
};

/// One value per edge (n_interior + 1 values).
class EdgeField : public detail::GridVector<struct EdgeFieldTag> {
public:
    explicit EdgeField(const Grid1D& grid)
        : GridVector(grid, std::vector<double>(grid.n_edges(), 0.0), grid.n_edges()) {}
    EdgeField(const Grid1D& grid, std::vector<double> values)
        : GridVector(grid, std::move(values), grid.n_edges()) {}
};

// ---------------------------------------------------------------------------
// Raw-span kernels. The solvers call these directly to avoid re-validating
// intermediate iterates.

namespace kernels {

inline void gradient(std::span<const double> f, double h, std::span<double> out) {
    const std::size_t n = f.size();
    const double inv_h = 1.0 / h;
    out[0] = f[0] * inv_h;
    for (std::size_t e = 1; e < n; ++e) out[e] = (f[e] - f[e - 1]) * inv_h;
    out[n] = -f[n - 1] * inv_h;
}

inline void divergence(std::span<const double> edge, double h, std::span<double> out) {
    const std::size_t n = out.size();
    const double inv_h = 1.0 / h;
    for (std::size_t i = 0; i < n; ++i) out[i] = (edge[i + 1] - edge[i]) * inv_h;
}

inline double weighted_lq(std::span<const double> v, double h, double q) {
    double s = 0.0;
    if (q == 2.0) {
        for (double x : v) s += x * x;
        return std::sqrt(h * s);
    }
    for (double x : v) s += std::pow(std::abs(x), q);
    return std::pow(h * s, 1.0 / q);
}

inline double weighted_dot(std::span<const double> a, std::span<const double> b, double h) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return h * s;
}

/// Thomas algorithm for a tridiagonal system. lower[0] and upper[n-1] are
/// ignored. Requires a matrix for which no pivoting is needed (e.g. strictly
/// diagonally dominant or SPD M-matrix).
inline void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<const double> rhs,
                              std::span<double> x) {
    const std::size_t n = diag.size();
    std::vector<double> c(n), d(n);
    double denom = diag[0];
    c[0] = n > 1 ? upper[0] / denom : 0.0;
    d[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - lower[i] * c[i - 1];
        c[i] = i + 1 < n ? upper[i] / denom : 0.0;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
}

} // namespace kernels

// ---------------------------------------------------------------------------

/// Forward differences with zero ghost values: (f_i - f_{i-1}) / h on each edge.
inline EdgeField gradient(const Field& f) {
    std::vector<double> out(f.grid().n_edges());
    kernels::gradient(f.values(), f.grid().spacing(), out);
    return EdgeField(f.grid(), std::move(out));
}

/// (F_{i+1} - F_i) / h on each interior node; exact negative adjoint of gradient.
inline Field divergence(const EdgeField& F) {
    std::vector<double> out(F.grid().n_interior());
    kernels::divergence(F.values(), F.grid().spacing(), out);
    return Field(F.grid(), std::move(out));
}

/// (h * sum |f_i|^q)^(1/q).
inline double norm_lq(const Field& f, double q) {
    if (!(q >= 1.0)) throw InvalidExponentError("norm_lq: exponent must be >= 1");
    return kernels::weighted_lq(f.values(), f.grid().spacing(), q);
}

/// Same weighted norm over the edges of an EdgeField.
inline double norm_lq(const EdgeField& F, double q) {
    if (!(q >= 1.0)) throw InvalidExponentError("norm_lq: exponent must be >= 1");
    return kernels::weighted_lq(F.values(), F.grid().spacing(), q);
}

/// Discrete W^{1,p}_0 seminorm, the edge L^p norm of the gradient.
inline double seminorm_w1p(const Field& f, double p) {
    if (!(p > 1.0)) throw InvalidExponentError("seminorm_w1p: exponent must be > 1");
    return norm_lq(gradient(f), p);
}

inline double inner(const Field& a, const Field& b) {
    return kernels::weighted_dot(a.values(), b.values(), a.grid().spacing());
}

inline double inner(const EdgeField& a, const EdgeField& b) {
    return kernels::weighted_dot(a.values(), b.values(), a.grid().spacing());
}

/// Solves K w = f for the Dirichlet stiffness K = -Delta_h = tridiag(-1, 2, -1) / h^2.
inline std::vector<double> solve_stiffness(std::span<const double> f, double h) {
    const std::size_t n = f.size();
    const double inv_h2 = 1.0 / (h * h);
    std::vector<double> lo(n, -inv_h2), di(n, 2.0 * inv_h2), up(n, -inv_h2), w(n);
    kernels::solve_tridiagonal(lo, di, up, f, w);
    return w;
}

/// H^{-1} proxy: sqrt(<f, K^{-1} f>_h) with K the Dirichlet second-difference operator.
inline double dual_norm_h1(const Field& f) {
    const double h = f.grid().spacing();
    const auto w = solve_stiffness(f.values(), h);
    const double s = kernels::weighted_dot(f.values(), w, h);
    return std::sqrt(std::max(0.0, s));
}

// Elementwise helpers used throughout the experiments.

inline Field operator-(const Field& a, const Field& b) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] - b[i];
    return Field(a.grid(), std::move(v));
}

inline Field operator+(const Field& a, const Field& b) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + b[i];
    return Field(a.grid(), std::move(v));
}

inline Field operator*(double c, const Field& a) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * a[i];
    return Field(a.grid(), std::move(v));
}

} // namespace dnlspde
