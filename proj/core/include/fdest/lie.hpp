#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "fdest/numerics.hpp"

namespace fdest {

/// A Lie-derivative value with its estimated numerical error, split into a
/// smooth truncation part and a rounding-noise part.
struct LieValue {
    double value = 0.0;
    double truncation = 0.0;
    double noise = 0.0;

    double error() const { return truncation + noise; }
};

/// User-supplied closed forms for the output map. `output(k, p)` returns
/// L_{F_e}^k H_e(p) in R^p; `disturbance(i, k, p)` returns
/// L_{E_i} L_{F_e}^k H_e(p) in R^p. Both are linear in the parity row, so
/// these vectors determine every term of the constant-vector conditions.
struct AnalyticLie {
    std::function<Vector(int k, const Vector& p)> output;
    std::function<Vector(std::size_t i, int k, const Vector& p)> disturbance;
    int max_order = 2;
};

/// Nested Lie derivatives by central differences (numeric mode) or by
/// user-supplied closed forms (analytic mode).
///
/// Numeric mode: every nesting level takes a central difference along the
/// field evaluated at the current point, with displacement
/// eta * (1 + ||p||) where eta = eps^{1/(K+2)} for total depth K. The error
/// estimate combines a Richardson comparison against the doubled step, the
/// variation of the inner truncation estimate, and propagated rounding noise.
/// Numeric nesting is limited to depth 2.
class LieEngine {
public:
    static constexpr int kNumericOrderLimit = 2;

    explicit LieEngine(int max_order = 2);
    LieEngine(int max_order, AnalyticLie analytic);

    int max_order() const noexcept { return max_order_; }
    bool has_analytic() const noexcept { return analytic_.has_value(); }
    const AnalyticLie& analytic() const;

    /// Throws UnsupportedOrder if depth `order` cannot be evaluated, either
    /// numerically (`numeric` true) or through the analytic tables.
    void require_order(int order, bool numeric) const;

    /// L_F^order phi (p). order 0 returns phi(p).
    LieValue derivative(const ScalarField& phi, const VectorField& along, int order, const Vector& p) const;

    /// L_E L_F^k phi (p).
    LieValue derivative_then(const ScalarField& phi, const VectorField& inner, int k, const VectorField& outer,
                             const Vector& p) const;

    /// General nested derivative: directions listed outermost first.
    LieValue nested(const ScalarField& phi, const std::vector<const VectorField*>& directions,
                    const Vector& p) const;

private:
    int max_order_;
    std::optional<AnalyticLie> analytic_;
};

}  // namespace fdest
