#include "fdest/exo_system.hpp"

#include <cmath>
#include <sstream>

namespace fdest {

std::string_view to_string(ExoKind kind) {
    switch (kind) {
        case ExoKind::Step: return "step";
        case ExoKind::Ramp: return "ramp";
        case ExoKind::Sine: return "sine";
        case ExoKind::Custom: return "custom";
    }
    return "custom";
}

ExoKind exo_kind_from_string(std::string_view name) {
    if (name == "step") return ExoKind::Step;
    if (name == "ramp") return ExoKind::Ramp;
    if (name == "sine") return ExoKind::Sine;
    if (name == "custom") return ExoKind::Custom;
    throw InvalidSpec("unknown exo-system kind '" + std::string(name) + "'");
}

ExoSystem::ExoSystem(Matrix r, Matrix q, ExoKind kind, double omega)
    : r_(std::move(r)), q_(std::move(q)), kind_(kind), omega_(omega) {}

ExoSystem ExoSystem::make_step() {
    return ExoSystem(Matrix::Zero(1, 1), Matrix::Ones(1, 1), ExoKind::Step, 0.0);
}

ExoSystem ExoSystem::make_ramp() {
    Matrix r(2, 2);
    r << 0.0, 1.0,
         0.0, 0.0;
    Matrix q(1, 2);
    q << 1.0, 0.0;
    return ExoSystem(std::move(r), std::move(q), ExoKind::Ramp, 0.0);
}

ExoSystem ExoSystem::make_sine(double omega) {
    if (!(omega > 0.0) || !std::isfinite(omega)) throw InvalidSpec("sine exo-system needs omega > 0");
    Matrix r(2, 2);
    r << 0.0, omega,
         -omega, 0.0;
    Matrix q(1, 2);
    q << 1.0, 0.0;
    return ExoSystem(std::move(r), std::move(q), ExoKind::Sine, omega);
}

ExoSystem ExoSystem::custom(Matrix r, Matrix q) {
    if (r.rows() != r.cols() || r.rows() == 0) throw DimensionError("exo-system R must be square and non-empty");
    if (q.rows() != 1 || q.cols() != r.cols()) {
        std::ostringstream os;
        os << "exo-system Q must be 1x" << r.cols() << ", got " << q.rows() << "x" << q.cols();
        throw DimensionError(os.str());
    }
    require_finite(r, "exo-system R");
    require_finite(q, "exo-system Q");
    return ExoSystem(std::move(r), std::move(q), ExoKind::Custom, 0.0);
}

Vector exo_state(const ExoSystem& exo, const Vector& xo0, double t) {
    if (xo0.size() != exo.order()) throw DimensionError("exo state length does not match the exo-system order");
    switch (exo.kind()) {
        case ExoKind::Step:
            return xo0;
        case ExoKind::Ramp: {
            Vector x(2);
            x << xo0(0) + xo0(1) * t, xo0(1);
            return x;
        }
        case ExoKind::Sine: {
            const double c = std::cos(exo.omega() * t);
            const double s = std::sin(exo.omega() * t);
            Vector x(2);
            x << c * xo0(0) + s * xo0(1), -s * xo0(0) + c * xo0(1);
            return x;
        }
        case ExoKind::Custom:
            break;
    }
    return matrix_exponential(exo.R(), t) * xo0;
}

double fault_signal(const ExoSystem& exo, const Vector& xo0, double t) {
    return exo.q_row().dot(exo_state(exo, xo0, t));
}

Matrix partial_char_poly(const Matrix& r, std::span<const double> alpha, int j) {
    if (j < 0 || static_cast<std::size_t>(j) > alpha.size()) throw InvalidSpec("partial polynomial degree out of range");
    // Horner: (((R + a1 I) R + a2 I) R + ...) + aj I
    const Eigen::Index n = r.rows();
    Matrix acc = Matrix::Identity(n, n);
    for (int k = 1; k <= j; ++k) {
        acc = acc * r + alpha[static_cast<std::size_t>(k - 1)] * Matrix::Identity(n, n);
    }
    return acc;
}

Matrix apply_char_poly(const ExoSystem& exo, std::span<const double> alpha) {
    if (alpha.empty()) throw InvalidSpec("characteristic polynomial needs s >= 1");
    return partial_char_poly(exo.R(), alpha, static_cast<int>(alpha.size()));
}

}  // namespace fdest
