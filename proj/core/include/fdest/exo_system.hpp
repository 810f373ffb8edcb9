#pragma once

#include <span>
#include <string>
#include <string_view>

#include "fdest/numerics.hpp"

namespace fdest {

enum class ExoKind { Step, Ramp, Sine, Custom };

std::string_view to_string(ExoKind kind);
ExoKind exo_kind_from_string(std::string_view name);

/// Linear fault generator  x_o' = R x_o,  f = Q x_o.
class ExoSystem {
public:
    static ExoSystem make_step();
    static ExoSystem make_ramp();
    static ExoSystem make_sine(double omega);
    /// Arbitrary (R, Q); R square, Q a single row with R.cols() entries.
    static ExoSystem custom(Matrix r, Matrix q);

    const Matrix& R() const noexcept { return r_; }
    const Matrix& Q() const noexcept { return q_; }
    RowVector q_row() const { return q_.row(0); }
    ExoKind kind() const noexcept { return kind_; }
    double omega() const noexcept { return omega_; }
    Eigen::Index order() const noexcept { return r_.rows(); }

private:
    ExoSystem(Matrix r, Matrix q, ExoKind kind, double omega);

    Matrix r_;
    Matrix q_;
    ExoKind kind_;
    double omega_ = 0.0;
};

/// x_o(t) = e^{Rt} x_o(0); closed forms for the tagged kinds.
Vector exo_state(const ExoSystem& exo, const Vector& xo0, double t);

/// f(t) = Q e^{Rt} x_o(0).
double fault_signal(const ExoSystem& exo, const Vector& xo0, double t);

/// P_A(R) = R^s + alpha_1 R^{s-1} + ... + alpha_{s-1} R + alpha_s I.
Matrix apply_char_poly(const ExoSystem& exo, std::span<const double> alpha);

/// Partial polynomial R^j + alpha_1 R^{j-1} + ... + alpha_j I for 0 <= j <= s.
Matrix partial_char_poly(const Matrix& r, std::span<const double> alpha, int j);

}  // namespace fdest
