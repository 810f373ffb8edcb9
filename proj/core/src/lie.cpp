#include "fdest/lie.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fdest {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

LieValue nested_impl(const ScalarField& phi, const std::vector<const VectorField*>& dirs, std::size_t level,
                     const Vector& p, double eta) {
    if (level == dirs.size()) {
        const double v = phi(p);
        if (!std::isfinite(v)) throw EvaluationError("scalar field is not finite at a Lie evaluation point");
        return {v, 0.0, 4.0 * kEps * std::abs(v)};
    }
    const Vector d = (*dirs[level])(p);
    const double dn = d.norm();
    if (dn == 0.0) return {0.0, 0.0, 0.0};

    const double h = eta * (1.0 + p.norm()) / dn;
    const LieValue a_plus = nested_impl(phi, dirs, level + 1, p + h * d, eta);
    const LieValue a_minus = nested_impl(phi, dirs, level + 1, p - h * d, eta);
    const LieValue b_plus = nested_impl(phi, dirs, level + 1, p + 2.0 * h * d, eta);
    const LieValue b_minus = nested_impl(phi, dirs, level + 1, p - 2.0 * h * d, eta);

    const double d1 = (a_plus.value - a_minus.value) / (2.0 * h);
    const double d2 = (b_plus.value - b_minus.value) / (4.0 * h);

    LieValue out;
    out.value = d1;
    out.truncation = 2.0 * std::abs(d1 - d2) / 3.0 + std::abs(a_plus.truncation - a_minus.truncation) / (2.0 * h);
    out.noise = (a_plus.noise + a_minus.noise) / (2.0 * h) +
                4.0 * kEps * (std::abs(a_plus.value) + std::abs(a_minus.value)) / (2.0 * h);
    return out;
}

}  // namespace

LieEngine::LieEngine(int max_order) : max_order_(max_order) {
    if (max_order < 0) throw InvalidSpec("Lie engine order cap must be non-negative");
}

LieEngine::LieEngine(int max_order, AnalyticLie analytic) : max_order_(max_order), analytic_(std::move(analytic)) {
    if (max_order < 0) throw InvalidSpec("Lie engine order cap must be non-negative");
    if (!analytic_->output) throw InvalidSpec("analytic Lie table needs an output callback");
}

const AnalyticLie& LieEngine::analytic() const {
    if (!analytic_) throw InvalidSpec("Lie engine has no analytic derivatives");
    return *analytic_;
}

void LieEngine::require_order(int order, bool numeric) const {
    std::ostringstream os;
    if (order > max_order_) {
        os << "Lie derivative depth " << order << " exceeds the engine cap " << max_order_;
        throw UnsupportedOrder(os.str());
    }
    if (numeric && order > kNumericOrderLimit) {
        os << "numeric Lie derivatives are limited to depth " << kNumericOrderLimit
           << "; supply analytic derivatives for depth " << order;
        throw UnsupportedOrder(os.str());
    }
    if (!numeric && analytic_ && order > analytic_->max_order) {
        os << "analytic Lie table covers depth " << analytic_->max_order << ", requested " << order;
        throw UnsupportedOrder(os.str());
    }
}

LieValue LieEngine::nested(const ScalarField& phi, const std::vector<const VectorField*>& directions,
                           const Vector& p) const {
    const int depth = static_cast<int>(directions.size());
    require_order(depth, true);
    const double eta = std::pow(kEps, 1.0 / (depth + 2.0));
    return nested_impl(phi, directions, 0, p, eta);
}

LieValue LieEngine::derivative(const ScalarField& phi, const VectorField& along, int order, const Vector& p) const {
    if (order < 0) throw InvalidSpec("negative Lie derivative order");
    std::vector<const VectorField*> dirs(static_cast<std::size_t>(order), &along);
    return nested(phi, dirs, p);
}

LieValue LieEngine::derivative_then(const ScalarField& phi, const VectorField& inner, int k, const VectorField& outer,
                                    const Vector& p) const {
    if (k < 0) throw InvalidSpec("negative Lie derivative order");
    std::vector<const VectorField*> dirs;
    dirs.push_back(&outer);
    for (int i = 0; i < k; ++i) dirs.push_back(&inner);
    return nested(phi, dirs, p);
}

}  // namespace fdest
