#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fdest/exo_system.hpp"
#include "fdest/lie.hpp"
#include "fdest/numerics.hpp"
#include "fdest/plant_model.hpp"

namespace fdest {

/// Parity "vectors" v_0..v_s, either constant rows in R^p or scalar
/// functions of the measurement y (output-injection designs).
class ParityMap {
public:
    using OutputFunction = std::function<double(const Vector&)>;

    static ParityMap constant(std::vector<RowVector> rows);
    static ParityMap functions(std::vector<OutputFunction> fns, std::size_t p);

    int order() const noexcept { return static_cast<int>(size_) - 1; }
    std::size_t outputs() const noexcept { return p_; }
    bool is_constant() const noexcept { return fns_.empty(); }

    const RowVector& row(std::size_t j) const;
    double eval(std::size_t j, const Vector& y) const;
    /// p -> v_j(H_e(p)) as a scalar field on the extended space.
    ScalarField composed(std::size_t j, const VectorField& output_map) const;

private:
    std::size_t size_ = 0;
    std::size_t p_ = 0;
    std::vector<RowVector> rows_;
    std::vector<OutputFunction> fns_;
};

enum class AlphaMode { Fixed, Free };

struct ParitySolution {
    int s = 0;
    std::vector<RowVector> v;    ///< v_0 .. v_s
    std::vector<double> alpha;   ///< alpha_1 .. alpha_s
    AlphaMode mode = AlphaMode::Fixed;
    double equation_residual = 0.0;
    Spectrum spectrum;
    std::string path = "general";  ///< "general" or "additive-sensor"
    std::size_t candidates_tried = 0;

    RowVector stacked() const;
    ParityMap map() const { return ParityMap::constant(v); }
};

/// Block matrices of the linear parity equation
/// [v_0 ... v_s][Gamma_o Gamma_f Gamma_w] = [0  -Q P_A(R)  0].
struct GammaBlocks {
    Matrix obs;    ///< (s+1)p x n
    Matrix fault;  ///< (s+1)p x n_o
    Matrix dist;   ///< (s+1)p x (s+1)m
};

GammaBlocks build_gamma(const LinearPlant& plant, const ExoSystem& exo, int s);

/// Right side block -Q P_A(R).
RowVector parity_fault_target(const ExoSystem& exo, std::span<const double> alpha);

struct SynthesisFailure {
    enum class Reason { Inconsistent, FaultInvisible, NoHurwitzAlpha };
    Reason reason = Reason::Inconsistent;
    std::string message;
    double residual = 0.0;
    std::size_t candidates_tried = 0;
};

using ParityResult = std::variant<ParitySolution, SynthesisFailure>;

struct SynthesisOptions {
    double rank_tol = kDefaultRankTol;
    std::size_t candidate_budget = 10000;
    std::uint64_t seed = 0;
    /// Half-width of the alpha search box in the solution-family coordinates;
    /// 0 selects 10 * max(1, ||alpha_particular||).
    double search_radius = 0.0;
};

/// Solves the linear parity equation. With `alpha` the characteristic
/// coefficients are fixed (they must be Hurwitz); without it they are
/// unknowns and the Hurwitz candidate with the largest stability margin is
/// selected from the affine solution family. Plants with G = 0 take the
/// additive-sensor split path. The returned v is the minimum-norm solution.
ParityResult solve_parity_linear(const LinearPlant& plant, const ExoSystem& exo, int s,
                                 std::optional<std::vector<double>> alpha = std::nullopt,
                                 const SynthesisOptions& options = {});

/// Split solve for additive sensor faults (G = 0): the output-side condition
/// v[Gamma_o Gamma_w] = 0 and the exo-side identity
/// sum_k (v_k J + alpha_{s-k}) Q R^k = 0 (alpha_0 = 1), with alpha fixed.
ParityResult solve_parity_additive_sensor(const LinearPlant& plant, const ExoSystem& exo, int s,
                                          std::span<const double> alpha, const SynthesisOptions& options = {});

/// || v [Gamma_o Gamma_f Gamma_w] - [0 -QP_A(R) 0] ||.
double parity_equation_residual(const LinearPlant& plant, const ExoSystem& exo, const ParitySolution& sol);

/// Linear functional observer z' = A z + B y, f_hat = C z + D y, or its
/// output-injection variant z' = A z + beta(y), f_hat = C z + delta(y).
struct ResidualGenerator {
    Matrix A;  ///< s x s
    Matrix B;  ///< s x p (empty with injection)
    Matrix C;  ///< 1 x s
    Matrix D;  ///< 1 x p (empty with injection)
    std::function<Vector(const Vector&)> beta;
    std::function<double(const Vector&)> delta;

    bool injection() const { return static_cast<bool>(beta); }
    Eigen::Index order() const { return A.rows(); }
    Vector derivative(const Vector& z, const Vector& y) const;
    double estimate(const Vector& z, const Vector& y) const;
    /// Companion structure, C = [0 ... 0 1], (C, A) observable, A Hurwitz.
    void validate() const;
};

ResidualGenerator build_observer(const ParitySolution& sol);
ResidualGenerator build_observer_injection(std::vector<ParityMap::OutputFunction> v_fns, std::vector<double> alpha,
                                           std::size_t p);

/// T(x, x_o) assembled from parity functions, characteristic coefficients
/// and Lie derivatives of v_mu H_e along F_e.
class TMap {
public:
    TMap(ExtendedSystem ext, ParityMap parity, std::vector<double> alpha, LieEngine lie);

    int order() const { return parity_.order(); }
    const ExtendedSystem& system() const noexcept { return ext_; }
    const ParityMap& parity() const noexcept { return parity_; }
    const std::vector<double>& alpha() const noexcept { return alpha_; }
    const LieEngine& lie() const noexcept { return lie_; }

    Vector operator()(const Vector& point) const;
    Vector operator()(const Vector& x, const Vector& xo) const { return (*this)(ext_.stack(x, xo)); }
    /// Components with error estimates.
    std::vector<LieValue> evaluate(const Vector& point) const;

private:
    ExtendedSystem ext_;
    ParityMap parity_;
    std::vector<double> alpha_;
    LieEngine lie_;
};

/// Requires s <= lie.max_order() (the manifold check differentiates T once more).
TMap build_tmap(const ExtendedSystem& ext, const ParityMap& parity, std::vector<double> alpha, const LieEngine& lie);
TMap build_tmap(const ExtendedSystem& ext, const ParitySolution& sol, const LieEngine& lie);

/// Closed-form T for linear plants: s x (n + n_o) matrix.
Matrix linear_tmap(const LinearPlant& plant, const ExoSystem& exo, const ParitySolution& sol);

/// Residual norms of the four linear design identities.
struct LinearDesignResiduals {
    double invariance = 0.0;   ///< T Phi - A T - B [H JQ]
    double output = 0.0;       ///< C T + D [H JQ] - [0 Q]
    double decoupling = 0.0;   ///< T [E; 0] - B K
    double feedthrough = 0.0;  ///< D K
};
LinearDesignResiduals linear_design_residuals(const LinearPlant& plant, const ExoSystem& exo,
                                              const ParitySolution& sol, const ResidualGenerator& gen);

/// Real coefficients alpha_1..alpha_s of prod_j (lambda - lambda_j).
std::vector<double> alpha_from_eigenvalues(std::span<const Complex> eigenvalues);

/// sum_j 1/lambda_j against -alpha_{s-1}/alpha_s (alpha_0 = 1).
struct RampConstraintCheck {
    double reciprocal_sum = 0.0;
    double ratio = 0.0;
    double relative_error = 0.0;
    bool satisfied = false;
};
RampConstraintCheck check_ramp_constraint(std::span<const double> alpha, double rel_tol = 1e-9);

/// For step faults: (v, alpha) -> (v * alpha'_s / alpha_s, alpha').
ParitySolution rescale_step_solution(const ParitySolution& sol, std::vector<double> new_alpha);

}  // namespace fdest
