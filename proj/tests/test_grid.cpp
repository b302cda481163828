#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dnlspde/grid.hpp"

using namespace dnlspde;

namespace {

std::vector<double> randvec(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = d(gen);
    return v;
}

// Dense stiffness matrix tridiag(-1, 2, -1) / h^2.
std::vector<std::vector<double>> dense_stiffness(std::size_t n, double h) {
    std::vector<std::vector<double>> K(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        K[i][i] = 2.0 / (h * h);
        if (i > 0) K[i][i - 1] = -1.0 / (h * h);
        if (i + 1 < n) K[i][i + 1] = -1.0 / (h * h);
    }
    return K;
}

// Plain Gaussian elimination, no pivoting needed for an SPD matrix.
std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = A[i][k] / A[k][k];
            for (std::size_t j = k; j < n; ++j) A[i][j] -= f * A[k][j];
            b[i] -= f * b[k];
        }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
        x[i] = s / A[i][i];
    }
    return x;
}

} // namespace

TEST(Grid1D, SpacingAndNodes) {
    Grid1D g(3, 1.0);
    EXPECT_DOUBLE_EQ(g.spacing(), 0.25);
    EXPECT_EQ(g.n_edges(), 4u);
    EXPECT_NEAR(g.spacing() * 4.0, g.length(), 1e-15);
    EXPECT_DOUBLE_EQ(g.node(0), 0.25);
    EXPECT_DOUBLE_EQ(g.node(2), 0.75);
}

TEST(Grid1D, RejectsDegenerateInput) {
    EXPECT_THROW(Grid1D(0, 1.0), std::invalid_argument);
    EXPECT_THROW(Grid1D(3, 0.0), std::invalid_argument);
    EXPECT_THROW(Grid1D(3, -1.0), std::invalid_argument);
}

TEST(Field, RejectsNonFiniteAndWrongLength) {
    Grid1D g(2, 1.0);
    EXPECT_THROW(Field(g, std::vector<double>{1.0}), std::invalid_argument);
    EXPECT_THROW(Field(g, std::vector<double>{1.0, NAN}), std::invalid_argument);
    EXPECT_THROW(EdgeField(g, std::vector<double>{1.0, INFINITY, 0.0}), std::invalid_argument);
}

TEST(Gradient, ConstantFieldHasBoundaryJumpsOnly) {
    Grid1D g(3, 1.0);
    const auto G = gradient(Field(g, {1, 1, 1}));
    const std::vector<double> want{4, 0, 0, -4};
    for (std::size_t e = 0; e < 4; ++e) EXPECT_DOUBLE_EQ(G[e], want[e]);
}

TEST(Gradient, TwoNodes) {
    Grid1D g(2, 1.0);
    const auto G = gradient(Field(g, {1, 2}));
    EXPECT_NEAR(G[0], 3.0, 1e-14);
    EXPECT_NEAR(G[1], 3.0, 1e-14);
    EXPECT_NEAR(G[2], -6.0, 1e-14);
}

TEST(Gradient, ZeroMapsToZero) {
    Grid1D g(5, 2.0);
    const auto G = gradient(Field(g));
    for (std::size_t e = 0; e < G.size(); ++e) EXPECT_EQ(G[e], 0.0);
}

TEST(Divergence, ConstantFluxIsDivergenceFree) {
    Grid1D g(6, 1.0);
    const auto d = divergence(EdgeField(g, std::vector<double>(7, 3.5)));
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d[i], 0.0);
}

TEST(Divergence, DirectFormula) {
    Grid1D g(3, 1.0);
    const auto d = divergence(EdgeField(g, {0, 1, 0, 0}));
    EXPECT_DOUBLE_EQ(d[0], 4.0);
    EXPECT_DOUBLE_EQ(d[1], -4.0);
    EXPECT_DOUBLE_EQ(d[2], 0.0);
}

TEST(Divergence, SummationByParts) {
    std::mt19937_64 gen(7);
    for (std::size_t n : {1u, 8u, 64u, 257u}) {
        Grid1D g(n, 1.7);
        for (int trial = 0; trial < 50; ++trial) {
            const Field phi(g, randvec(gen, n));
            const EdgeField F(g, randvec(gen, n + 1));
            const double lhs = inner(divergence(F), phi) + inner(F, gradient(phi));
            const double scale = norm_lq(F, 2.0) * norm_lq(phi, 2.0);
            EXPECT_LE(std::abs(lhs), 1e-12 * scale);
        }
    }
}

TEST(Divergence, DivGradIsSymmetricNegativeDefinite) {
    const std::size_t n = 7;
    Grid1D g(n, 1.0);
    std::vector<std::vector<double>> M(n, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        const auto col = divergence(gradient(Field(g, e)));
        for (std::size_t i = 0; i < n; ++i) M[i][j] = col[i];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(M[i][j], M[j][i], 1e-12);
    std::mt19937_64 gen(3);
    for (int t = 0; t < 20; ++t) {
        const auto v = randvec(gen, n);
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) q += v[i] * M[i][j] * v[j];
        EXPECT_LT(q, 0.0);
    }
}

TEST(Norms, Examples) {
    EXPECT_NEAR(norm_lq(Field(Grid1D(3, 1.0), {1, 1, 1}), 2.0), 0.8660254037844386, 1e-12);
    EXPECT_EQ(norm_lq(Field(Grid1D(4, 1.0)), 3.0), 0.0);
    EXPECT_NEAR(norm_lq(Field(Grid1D(1, 1.0), {2}), 4.0), 1.6817928305074290, 1e-12);
}

TEST(Norms, InvalidExponent) {
    Field f(Grid1D(2, 1.0), {1, 2});
    EXPECT_THROW(norm_lq(f, 0.5), InvalidExponentError);
    EXPECT_THROW(seminorm_w1p(f, 1.0), InvalidExponentError);
    EXPECT_THROW(seminorm_w1p(f, 0.3), InvalidExponentError);
}

TEST(Norms, Homogeneity) {
    std::mt19937_64 gen(11);
    Grid1D g(17, 2.0);
    for (double q : {1.0, 1.5, 2.0, 4.0}) {
        const Field f(g, randvec(gen, 17));
        for (double c : {-3.0, 0.0, 0.25, 7.0})
            EXPECT_NEAR(norm_lq(c * f, q), std::abs(c) * norm_lq(f, q), 1e-12 * (1 + std::abs(c) * norm_lq(f, q)));
    }
}

TEST(Seminorm, Examples) {
    Grid1D g(1, 1.0);
    EXPECT_EQ(seminorm_w1p(Field(g), 4.0), 0.0);
    EXPECT_NEAR(seminorm_w1p(Field(g, {1}), 2.0), 2.0, 1e-14);
    EXPECT_NEAR(seminorm_w1p(Field(g, {1}), 4.0), 2.0, 1e-14);
}

TEST(DualNorm, ScalarOracle) {
    EXPECT_EQ(dual_norm_h1(Field(Grid1D(1, 1.0))), 0.0);
    EXPECT_NEAR(dual_norm_h1(Field(Grid1D(1, 1.0), {1})), 0.25, 1e-15);
}

TEST(DualNorm, MatchesDenseSolve) {
    std::mt19937_64 gen(5);
    const std::size_t n = 20;
    Grid1D g(n, 1.3);
    const auto K = dense_stiffness(n, g.spacing());
    for (int t = 0; t < 10; ++t) {
        const auto f = randvec(gen, n);
        const auto x = dense_solve(K, f);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += f[i] * x[i];
        EXPECT_NEAR(dual_norm_h1(Field(g, f)), std::sqrt(g.spacing() * s), 1e-12);
    }
}

TEST(DualNorm, PoincareBound) {
    // Smallest eigenvalue of K is (4/h^2) sin^2(pi h / (2L)), so ||f||_{-1} <= ||f|| / sqrt(lambda_1).
    std::mt19937_64 gen(9);
    for (std::size_t n : {4u, 31u, 128u}) {
        Grid1D g(n, 1.0);
        const double h = g.spacing();
        const double s = std::sin(M_PI * h / 2.0);
        const double cp = 1.0 / std::sqrt(4.0 / (h * h) * s * s);
        for (int t = 0; t < 20; ++t) {
            const Field f(g, randvec(gen, n));
            EXPECT_LE(dual_norm_h1(f), cp * norm_lq(f, 2.0) * (1 + 1e-12));
        }
        // Equality on the first eigenvector.
        const Field e1 = Field::sample(g, [](double x) { return std::sin(M_PI * x); });
        EXPECT_NEAR(dual_norm_h1(e1), cp * norm_lq(e1, 2.0), 1e-10);
    }
}

TEST(Tridiagonal, SolvesRandomDiagonallyDominantSystem) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1, 1);
    const std::size_t n = 30;
    std::vector<double> lo(n), di(n), up(n), rhs(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = i ? u(gen) : 0.0;
        up[i] = i + 1 < n ? u(gen) : 0.0;
        di[i] = 3.0 + u(gen);
        rhs[i] = u(gen);
    }
    kernels::solve_tridiagonal(lo, di, up, rhs, x);
    for (std::size_t i = 0; i < n; ++i) {
        double r = di[i] * x[i] - rhs[i];
        if (i) r += lo[i] * x[i - 1];
        if (i + 1 < n) r += up[i] * x[i + 1];
        EXPECT_NEAR(r, 0.0, 1e-13);
    }
}
