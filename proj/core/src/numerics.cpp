#include "fdest/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace fdest {

namespace {

Eigen::JacobiSVD<Matrix> full_svd(const Matrix& m) {
    return Eigen::JacobiSVD<Matrix>(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
}

std::size_t rank_from_singular_values(const Vector& sv, double rank_tol) {
    if (sv.size() == 0) return 0;
    const double cutoff = rank_tol * sv(0);
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff && sv(i) > 0.0) ++r;
    }
    return r;
}

Spectrum classify(std::vector<Complex> eig) {
    Spectrum out;
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& l : eig) margin = std::min(margin, -l.real());
    std::sort(eig.begin(), eig.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    out.eigenvalues = std::move(eig);
    out.stability_margin = out.eigenvalues.empty() ? 0.0 : margin;
    out.hurwitz = !out.eigenvalues.empty() && margin > 0.0;
    return out;
}

}  // namespace

Vector VectorField::operator()(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != dim_in) {
        std::ostringstream os;
        os << "vector field expects input of length " << dim_in << ", got " << x.size();
        throw DimensionError(os.str());
    }
    Vector y = eval(x);
    if (static_cast<std::size_t>(y.size()) != dim_out) {
        std::ostringstream os;
        os << "vector field returned length " << y.size() << ", declared " << dim_out;
        throw DimensionError(os.str());
    }
    if (!y.allFinite()) throw EvaluationError("vector field returned a non-finite value");
    return y;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) throw InvalidMatrix(what + " has non-finite entries");
}

Matrix null_space(const Matrix& m, double rank_tol) {
    require_finite(m, "null_space input");
    if (!(rank_tol > 0.0)) throw InvalidMatrix("rank_tol must be positive");
    const Eigen::Index cols = m.cols();
    if (m.rows() == 0 || cols == 0) return Matrix::Identity(cols, cols);
    const auto svd = full_svd(m);
    const auto r = static_cast<Eigen::Index>(rank_from_singular_values(svd.singularValues(), rank_tol));
    return svd.matrixV().rightCols(cols - r);
}

std::size_t numerical_rank(const Matrix& m, double rank_tol) {
    require_finite(m, "rank input");
    if (m.size() == 0) return 0;
    return rank_from_singular_values(Eigen::JacobiSVD<Matrix>(m).singularValues(), rank_tol);
}

AffineResult solve_affine(const Matrix& m, const Vector& b, double rank_tol) {
    if (m.rows() != b.size()) {
        std::ostringstream os;
        os << "solve_affine: matrix has " << m.rows() << " rows but right side has " << b.size();
        throw DimensionError(os.str());
    }
    require_finite(m, "solve_affine matrix");
    require_finite(b, "solve_affine right side");

    const Eigen::Index cols = m.cols();
    Vector x = Vector::Zero(cols);
    Matrix basis = Matrix::Identity(cols, cols);
    if (m.rows() > 0 && cols > 0) {
        const auto svd = full_svd(m);
        const Vector& sv = svd.singularValues();
        const auto r = static_cast<Eigen::Index>(rank_from_singular_values(sv, rank_tol));
        const Vector ub = svd.matrixU().leftCols(r).transpose() * b;
        x = svd.matrixV().leftCols(r) * ub.cwiseQuotient(sv.head(r));
        basis = svd.matrixV().rightCols(cols - r);
    }

    const double residual = m.rows() > 0 ? (m * x - b).norm() : 0.0;
    Matrix aug(m.rows(), cols + 1);
    aug << m, b;
    const double threshold = rank_tol * aug.norm();
    if (residual > threshold) return Inconsistent{residual, threshold};
    return AffineSolution{std::move(x), std::move(basis), residual};
}

Matrix companion_matrix(std::span<const double> alpha) {
    const auto s = static_cast<Eigen::Index>(alpha.size());
    if (s < 1) throw InvalidSpec("characteristic polynomial needs at least one coefficient");
    Matrix a = Matrix::Zero(s, s);
    for (Eigen::Index i = 1; i < s; ++i) a(i, i - 1) = 1.0;
    // last column, top to bottom: -alpha_s, ..., -alpha_1
    for (Eigen::Index i = 0; i < s; ++i) a(i, s - 1) = -alpha[static_cast<std::size_t>(s - 1 - i)];
    return a;
}

Spectrum companion_eigenvalues(std::span<const double> alpha) {
    for (double a : alpha) {
        if (!std::isfinite(a)) throw InvalidMatrix("non-finite polynomial coefficient");
    }
    return spectrum(companion_matrix(alpha));
}

Spectrum spectrum(const Matrix& m) {
    if (m.rows() != m.cols()) throw DimensionError("spectrum requires a square matrix");
    require_finite(m, "spectrum input");
    if (m.rows() == 0) return {};
    Eigen::EigenSolver<Matrix> es(m, false);
    if (es.info() != Eigen::Success) throw NoConvergence("eigenvalue iteration failed");
    std::vector<Complex> eig(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    return classify(std::move(eig));
}

Matrix matrix_exponential(const Matrix& m, double t) {
    if (m.rows() != m.cols()) throw DimensionError("matrix_exponential requires a square matrix");
    require_finite(m, "matrix_exponential input");
    if (m.rows() == 0) return m;
    const Matrix scaled = m * t;
    return scaled.exp();
}

Matrix matrix_power(const Matrix& m, int k) {
    if (m.rows() != m.cols()) throw DimensionError("matrix_power requires a square matrix");
    if (k < 0) throw InvalidSpec("negative matrix power");
    Matrix out = Matrix::Identity(m.rows(), m.cols());
    for (int i = 0; i < k; ++i) out = out * m;
    return out;
}

Vector rk4_step(const OdeRhs& f, double t, const Vector& x, double h) {
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    const Vector k4 = f(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

SampledTrajectory integrate_rk4(const OdeRhs& f, const Vector& x0, double t0, double t1, double dt) {
    if (!(dt > 0.0)) throw InvalidSpec("integration step must be positive");
    if (t1 < t0) throw InvalidSpec("integration end precedes start");
    if (!x0.allFinite()) throw DivergedSimulation("initial state is not finite", t0);

    SampledTrajectory out;
    out.t.push_back(t0);
    out.x.push_back(x0);
    Vector x = x0;
    std::size_t k = 0;
    double t = t0;
    // Grid points are t0 + k*dt; a remainder below 1e-9*dt is absorbed into the last step.
    while (t < t1) {
        double next = t0 + static_cast<double>(k + 1) * dt;
        if (next > t1 || t1 - next < 1e-9 * dt) next = t1;
        x = rk4_step(f, t, x, next - t);
        if (!x.allFinite()) {
            std::ostringstream os;
            os << "non-finite state after step to t=" << next;
            throw DivergedSimulation(os.str(), t);
        }
        t = next;
        ++k;
        out.t.push_back(t);
        out.x.push_back(x);
    }
    return out;
}

double default_fd_step(const Vector& p, const Vector& d) {
    const double eps = std::numeric_limits<double>::epsilon();
    return std::cbrt(eps) * (1.0 + p.norm()) / std::max(1.0, d.norm());
}

double directional_derivative(const ScalarField& phi, const Vector& p, const Vector& d, std::optional<double> h) {
    if (p.size() != d.size()) throw DimensionError("point and direction differ in length");
    const double step = h.value_or(default_fd_step(p, d));
    if (!(step > 0.0)) throw InvalidSpec("finite-difference step must be positive");
    const double plus = phi(p + step * d);
    const double minus = phi(p - step * d);
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw EvaluationError("scalar field is not finite near the evaluation point");
    }
    return (plus - minus) / (2.0 * step);
}

}  // namespace fdest
