#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fdest/errors.hpp"

namespace fdest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Complex = std::complex<double>;

/// Relative singular-value cutoff used when no tolerance is supplied.
inline constexpr double kDefaultRankTol = 1e-9;

/// Evaluable map R^dim_in -> R^dim_out. Callbacks must be pure.
struct VectorField {
    std::size_t dim_in = 0;
    std::size_t dim_out = 0;
    std::function<Vector(const Vector&)> eval;

    /// Evaluates with dimension and finiteness checks.
    Vector operator()(const Vector& x) const;
};

using ScalarField = std::function<double(const Vector&)>;

/// Right-hand side of a (possibly time-varying) ODE.
using OdeRhs = std::function<Vector(double, const Vector&)>;

bool all_finite(const Matrix& m);
void require_finite(const Matrix& m, const std::string& what);

/// Orthonormal basis of the right null space of `m`. Singular values below
/// `rank_tol * sigma_max` count as zero. May have zero columns.
Matrix null_space(const Matrix& m, double rank_tol = kDefaultRankTol);

/// Numerical rank with the same relative cutoff as null_space.
std::size_t numerical_rank(const Matrix& m, double rank_tol = kDefaultRankTol);

struct AffineSolution {
    Vector particular;         ///< minimum-norm solution
    Matrix homogeneous_basis;  ///< orthonormal basis of ker(M)
    double residual = 0.0;     ///< ||M * particular - b||
};

struct Inconsistent {
    double residual = 0.0;  ///< ||M * x_ls - b|| for the least-squares x
    double threshold = 0.0;
};

using AffineResult = std::variant<AffineSolution, Inconsistent>;

/// Solves M x = b in the minimum-norm sense. Returns Inconsistent when b is
/// outside the column space, i.e. the least-squares residual exceeds
/// rank_tol * ||[M b]||.
AffineResult solve_affine(const Matrix& m, const Vector& b, double rank_tol = kDefaultRankTol);

struct Spectrum {
    std::vector<Complex> eigenvalues;
    bool hurwitz = false;
    /// min_j -Re(lambda_j); positive iff Hurwitz.
    double stability_margin = 0.0;
};

/// Left-companion matrix of lambda^s + alpha_1 lambda^{s-1} + ... + alpha_s,
/// with unit subdiagonal and last column [-alpha_s, ..., -alpha_1]^T.
Matrix companion_matrix(std::span<const double> alpha);

/// Roots of lambda^s + alpha_1 lambda^{s-1} + ... + alpha_s.
Spectrum companion_eigenvalues(std::span<const double> alpha);

/// Eigenvalues of an arbitrary square matrix plus Hurwitz classification.
Spectrum spectrum(const Matrix& m);

/// exp(M t) by Pade scaling and squaring.
Matrix matrix_exponential(const Matrix& m, double t);

struct SampledTrajectory {
    std::vector<double> t;
    std::vector<Vector> x;
};

/// One classical Runge-Kutta step.
Vector rk4_step(const OdeRhs& f, double t, const Vector& x, double h);

/// Fixed-step classical RK4 from t0 to t1. The final step is shortened to
/// land exactly on t1; every step is recorded.
SampledTrajectory integrate_rk4(const OdeRhs& f, const Vector& x0, double t0, double t1, double dt);

/// Default central-difference step for a displacement along `d` from `p`:
/// cbrt(eps) * (1 + ||p||) / max(1, ||d||).
double default_fd_step(const Vector& p, const Vector& d);

/// Central difference (phi(p + h d) - phi(p - h d)) / (2 h).
double directional_derivative(const ScalarField& phi, const Vector& p, const Vector& d,
                              std::optional<double> h = std::nullopt);

/// Matrix power for small dense matrices (k >= 0).
Matrix matrix_power(const Matrix& m, int k);

}  // namespace fdest
