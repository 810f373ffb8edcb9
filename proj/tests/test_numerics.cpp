#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fdest/numerics.hpp"

using namespace fdest;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// |cos| of the angle between a basis column and the expected direction.
double alignment(const Vector& a, const Vector& b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

}  // namespace

TEST(NullSpace, RankOneRow) {
    const Matrix n = null_space(mat({{1, -1}}));
    ASSERT_EQ(n.cols(), 1);
    EXPECT_NEAR(alignment(n.col(0), vec({1, 1})), 1.0, 1e-14);
    EXPECT_NEAR(n.col(0).norm(), 1.0, 1e-14);
}

TEST(NullSpace, FullRankIsEmpty) { EXPECT_EQ(null_space(Matrix::Identity(2, 2)).cols(), 0); }

TEST(NullSpace, TwoByThree) {
    // x1 + x3 = 0, x2 + x3 = 0  =>  x = t (1, 1, -1)
    const Matrix n = null_space(mat({{1, 0, 1}, {0, 1, 1}}));
    ASSERT_EQ(n.cols(), 1);
    EXPECT_NEAR(alignment(n.col(0), vec({1, 1, -1})), 1.0, 1e-14);
}

TEST(NullSpace, RejectsNonFinite) {
    Matrix m = Matrix::Ones(2, 2);
    m(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(null_space(m), InvalidMatrix);
}

TEST(NullSpace, OrthogonalToRowsProperty) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> dim(1, 6);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        const int rows = dim(rng);
        const int cols = dim(rng);
        const int rank = std::min({rows, cols, dim(rng)});
        Matrix l(rows, rank), r(rank, cols);
        for (auto* m : {&l, &r}) {
            for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = g(rng);
        }
        const Matrix m = l * r;
        const double tol = 1e-9;
        const Matrix n = null_space(m, tol);
        EXPECT_GE(n.cols(), cols - rank);
        if (n.cols() == 0) continue;
        EXPECT_LT((n.transpose() * n - Matrix::Identity(n.cols(), n.cols())).norm(), 1e-12);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index c = 0; c < n.cols(); ++c) {
                EXPECT_LE(std::abs(m.row(i).dot(n.col(c))), tol * m.row(i).norm() + 1e-13);
            }
        }
    }
}

TEST(SolveAffine, ConsistentOverdetermined) {
    const auto res = solve_affine(mat({{1}, {-1}}), vec({2, -2}));
    const auto* sol = std::get_if<AffineSolution>(&res);
    ASSERT_NE(sol, nullptr);
    EXPECT_NEAR(sol->particular(0), 2.0, 1e-14);
    EXPECT_EQ(sol->homogeneous_basis.cols(), 0);
}

TEST(SolveAffine, Inconsistent) {
    const auto res = solve_affine(mat({{1}, {-1}}), vec({1, 1}));
    EXPECT_TRUE(std::holds_alternative<Inconsistent>(res));
}

TEST(SolveAffine, MinimumNormAgainstPseudoinverse) {
    const Matrix m = mat({{1, 1}});
    const Vector b = vec({2});
    const auto res = solve_affine(m, b);
    const auto& sol = std::get<AffineSolution>(res);
    // Full row rank: x = M^T (M M^T)^{-1} b.
    const Vector oracle = m.transpose() * (m * m.transpose()).inverse() * b;
    EXPECT_NEAR((sol.particular - oracle).norm(), 0.0, 1e-14);
    EXPECT_NEAR(sol.particular.norm(), std::sqrt(2.0), 1e-14);
    EXPECT_EQ(sol.homogeneous_basis.cols(), 1);
}

TEST(SolveAffine, DimensionMismatch) { EXPECT_THROW(solve_affine(mat({{1, 2}}), vec({1, 2})), DimensionError); }

TEST(SolveAffine, MinNormPropertyUnderPerturbation) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 40; ++trial) {
        Matrix m(2, 5);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
        Vector b(2);
        b << g(rng), g(rng);
        const auto sol = std::get<AffineSolution>(solve_affine(m, b));
        EXPECT_LT((m * sol.particular - b).norm(), 1e-12);
        ASSERT_EQ(sol.homogeneous_basis.cols(), 3);
        for (int k = 0; k < 10; ++k) {
            Vector c(3);
            c << g(rng), g(rng), g(rng);
            const Vector other = sol.particular + sol.homogeneous_basis * c;
            EXPECT_LT((m * other - b).norm(), 1e-11);
            EXPECT_GT(other.norm(), sol.particular.norm());
        }
    }
}

TEST(Companion, ScalarRoot) {
    const std::vector<double> a{2};
    const Spectrum s = companion_eigenvalues(a);
    ASSERT_EQ(s.eigenvalues.size(), 1u);
    EXPECT_NEAR(s.eigenvalues[0].real(), -2.0, 1e-12);
    EXPECT_TRUE(s.hurwitz);
}

TEST(Companion, UnstablePair) {
    const std::vector<double> a{0, -1};
    const Spectrum s = companion_eigenvalues(a);
    std::vector<double> re;
    for (auto l : s.eigenvalues) re.push_back(l.real());
    std::sort(re.begin(), re.end());
    EXPECT_NEAR(re[0], -1.0, 1e-12);
    EXPECT_NEAR(re[1], 1.0, 1e-12);
    EXPECT_FALSE(s.hurwitz);
}

TEST(Companion, FactoredQuadratic) {
    const std::vector<double> a{3, 2};
    const Spectrum s = companion_eigenvalues(a);
    std::vector<double> re;
    for (auto l : s.eigenvalues) re.push_back(l.real());
    std::sort(re.begin(), re.end());
    EXPECT_NEAR(re[0], -2.0, 1e-12);
    EXPECT_NEAR(re[1], -1.0, 1e-12);
    EXPECT_TRUE(s.hurwitz);
    EXPECT_NEAR(s.stability_margin, 1.0, 1e-12);
}

TEST(Companion, MatrixLayout) {
    const std::vector<double> a{3, 2};
    const Matrix c = companion_matrix(a);
    EXPECT_EQ(c, mat({{0, -2}, {1, -3}}));
}

TEST(Companion, RootsSatisfyPolynomialProperty) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 60; ++trial) {
        const int s = 1 + trial % 5;
        std::vector<double> a(static_cast<std::size_t>(s));
        for (auto& x : a) x = u(rng);
        const Spectrum sp = companion_eigenvalues(a);
        ASSERT_EQ(static_cast<int>(sp.eigenvalues.size()), s);
        bool all_left = true;
        for (auto l : sp.eigenvalues) {
            Complex p = 1.0;
            double scale = 1.0;
            for (double c : a) {
                p = p * l + c;
                scale = scale * std::abs(l) + std::abs(c);
            }
            EXPECT_LE(std::abs(p), 1e-9 * std::max(1.0, scale));
            all_left = all_left && l.real() < 0.0;
        }
        EXPECT_EQ(sp.hurwitz, all_left);
    }
}

TEST(MatrixExponential, ZeroIsIdentity) {
    EXPECT_EQ(matrix_exponential(Matrix::Zero(3, 3), 1.7), Matrix::Identity(3, 3));
}

TEST(MatrixExponential, Nilpotent) {
    const double tau = 2.5;
    const Matrix e = matrix_exponential(mat({{0, 1}, {0, 0}}), tau);
    EXPECT_LT((e - mat({{1, tau}, {0, 1}})).norm(), 1e-14);
}

TEST(MatrixExponential, Scalar) {
    EXPECT_NEAR(matrix_exponential(mat({{-2}}), 1.0)(0, 0), std::exp(-2.0), 1e-15);
    EXPECT_NEAR(matrix_exponential(mat({{-2}}), 1.0)(0, 0), 0.135335, 1e-6);
}

TEST(MatrixExponential, NonSquare) { EXPECT_THROW(matrix_exponential(Matrix::Zero(2, 3), 1.0), DimensionError); }

TEST(MatrixExponential, SymmetricSpectralOracle) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a(4, 4);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
        const Matrix s = 0.5 * (a + a.transpose());
        const double t = 0.7;
        Eigen::SelfAdjointEigenSolver<Matrix> es(s);
        const Matrix oracle = es.eigenvectors() * (es.eigenvalues() * t).array().exp().matrix().asDiagonal() *
                              es.eigenvectors().transpose();
        EXPECT_LT((matrix_exponential(s, t) - oracle).norm(), 1e-12 * oracle.norm());
    }
}

TEST(MatrixExponential, SemigroupProperty) {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        Matrix m(3, 3);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
        const double scale = 2.0 / std::max(1.0, m.norm());
        const double t1 = u(rng) * scale;
        const double t2 = u(rng) * scale;
        const Matrix lhs = matrix_exponential(m, t1 + t2);
        const Matrix rhs = matrix_exponential(m, t1) * matrix_exponential(m, t2);
        EXPECT_LT((lhs - rhs).norm(), 1e-10 * std::max(1.0, lhs.norm()));
    }
}

TEST(Rk4, ConstantField) {
    const auto tr = integrate_rk4([](double, const Vector& x) { return Vector::Zero(x.size()); }, vec({5}), 0, 3, 0.1);
    EXPECT_EQ(tr.x.back()(0), 5.0);
}

TEST(Rk4, ExponentialDecay) {
    const auto tr = integrate_rk4([](double, const Vector& x) { return Vector(-x); }, vec({1}), 0, 1, 0.01);
    EXPECT_NEAR(tr.x.back()(0), std::exp(-1.0), 1e-8);
    EXPECT_NEAR(tr.x.back()(0), 0.367879, 1e-6);
}

TEST(Rk4, HarmonicOscillatorPeriod) {
    const Matrix a = mat({{0, 1}, {-1, 0}});
    const auto tr = integrate_rk4([&a](double, const Vector& x) { return Vector(a * x); }, vec({1, 0}), 0,
                                  2 * std::numbers::pi, 0.01);
    EXPECT_LT((tr.x.back() - vec({1, 0})).norm(), 1e-6);
}

TEST(Rk4, LastStepLandsOnEnd) {
    const auto tr = integrate_rk4([](double, const Vector& x) { return Vector(-x); }, vec({1}), 0, 1.05, 0.1);
    EXPECT_EQ(tr.t.back(), 1.05);
    EXPECT_EQ(tr.t.size(), 12u);
    EXPECT_NEAR(tr.x.back()(0), std::exp(-1.05), 1e-6);
}

TEST(Rk4, FourthOrderConvergence) {
    auto error = [](double dt) {
        const auto tr = integrate_rk4([](double, const Vector& x) { return Vector(-x); }, vec({1}), 0, 1, dt);
        return std::abs(tr.x.back()(0) - std::exp(-1.0));
    };
    for (double dt : {0.2, 0.1, 0.05}) EXPECT_GE(error(dt) / error(dt / 2), 12.0) << "dt = " << dt;
}

TEST(Rk4, DivergenceReportsLastFiniteTime) {
    // x' = x^2 from x(0) = 1 blows up at t = 1.
    try {
        integrate_rk4([](double, const Vector& x) { return Vector(x.array().square()); }, vec({1}), 0, 2, 0.01);
        FAIL() << "expected divergence";
    } catch (const DivergedSimulation& e) {
        EXPECT_GT(e.last_finite_time(), 0.9);
        EXPECT_LT(e.last_finite_time(), 1.1);
    }
}

TEST(DirectionalDerivative, Square) {
    const ScalarField phi = [](const Vector& x) { return x(0) * x(0); };
    EXPECT_NEAR(directional_derivative(phi, vec({3}), vec({1}), 1e-5), 6.0, 1e-6);
}

TEST(DirectionalDerivative, Constant) {
    const ScalarField phi = [](const Vector&) { return 4.2; };
    EXPECT_EQ(directional_derivative(phi, vec({1, 2}), vec({0.3, -1})), 0.0);
}

TEST(DirectionalDerivative, ChainRule) {
    const ScalarField phi = [](const Vector& x) { return std::sin(x(0)); };
    EXPECT_NEAR(directional_derivative(phi, vec({0}), vec({2})), 2.0, 1e-6);
}

TEST(DirectionalDerivative, NonFinite) {
    const ScalarField phi = [](const Vector& x) { return std::sqrt(x(0)); };
    EXPECT_THROW(directional_derivative(phi, vec({0}), vec({1}), 1e-3), EvaluationError);
}

TEST(DirectionalDerivative, SecondOrderAccuracy) {
    const ScalarField phi = [](const Vector& x) { return std::exp(x(0)); };
    const double e1 = std::abs(directional_derivative(phi, vec({0.3}), vec({1}), 1e-2) - std::exp(0.3));
    const double e2 = std::abs(directional_derivative(phi, vec({0.3}), vec({1}), 5e-3) - std::exp(0.3));
    EXPECT_NEAR(e1 / e2, 4.0, 0.1);
}
