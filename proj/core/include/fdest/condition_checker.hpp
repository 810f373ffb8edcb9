#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdest/lie.hpp"
#include "fdest/numerics.hpp"
#include "fdest/plant_model.hpp"
#include "fdest/synthesis.hpp"

namespace fdest {

struct CheckOptions {
    std::size_t samples = 200;
    /// Relative tolerance; the absolute tolerance is tol * output scale.
    double tol = 1e-6;
    std::uint64_t seed = 0;
    /// Expected fault magnitude; the exo box is |x_o,j| <= 10 * fault_scale.
    double fault_scale = 1.0;
    /// Overrides the exo box half-widths.
    std::optional<Vector> exo_half_width;
    /// Multiplier on the engine's error estimate when forming the noise floor.
    double noise_safety = 10.0;
};

struct CheckRow {
    std::string label;
    double max_residual = 0.0;
    std::size_t argmax_index = 0;
};

/// Outcome of a sampled condition check. passed <=> max_residual <= tolerance + noise_floor.
struct CheckReport {
    std::string condition;
    std::size_t samples = 0;
    double max_residual = 0.0;
    std::size_t argmax_index = 0;
    Vector argmax_point;
    double tolerance = 0.0;
    double noise_floor = 0.0;
    double output_scale = 1.0;
    bool passed = false;
    std::vector<CheckRow> rows;
    std::vector<std::string> notes;
};

/// Deterministic low-discrepancy points in [lower, upper]: a Halton sequence
/// with a seeded Cranley-Patterson rotation.
std::vector<Vector> halton_points(const Vector& lower, const Vector& upper, std::size_t count, std::uint64_t seed);

/// Sampling box of the extended space: plant box times the exo box.
OperatingBox extended_box(const ExtendedSystem& ext, const CheckOptions& options);

/// Characteristic output scale: max |H_e| component over the extended box
/// corners and center (1 when that is zero).
double output_scale(const ExtendedSystem& ext, const OperatingBox& box);

/// Left side of the existence condition at one extended-space point.
LieValue existence_residual(const ExtendedSystem& ext, const ParityMap& parity, std::span<const double> alpha,
                            const LieEngine& lie, const Vector& point);

/// Detection-only left side sum_k L_F^k (v_k H)(x), computed on the plant
/// alone (no exo-system).
LieValue detection_residual(const NonlinearPlant& plant, const ParityMap& parity, const LieEngine& lie,
                            const Vector& x);

/// Decoupling rows for disturbance i at one point: kappa = 1..s followed by
/// the v_s K_i row.
std::vector<LieValue> decoupling_residuals(const ExtendedSystem& ext, const ParityMap& parity, std::size_t i,
                                           const LieEngine& lie, const Vector& point);

CheckReport check_existence(const ExtendedSystem& ext, const ParityMap& parity, std::span<const double> alpha,
                            const LieEngine& lie, const CheckOptions& options = {});
CheckReport check_existence(const ExtendedSystem& ext, const ParitySolution& sol, const LieEngine& lie,
                            const CheckOptions& options = {});

CheckReport check_decoupling(const ExtendedSystem& ext, const ParityMap& parity, const LieEngine& lie,
                             const CheckOptions& options = {});
CheckReport check_decoupling(const ExtendedSystem& ext, const ParitySolution& sol, const LieEngine& lie,
                             const CheckOptions& options = {});

/// Invariance of z = T(x, x_o) under the cascade and the output identity
/// C T + D H_e = Q x_o, for an arbitrary generator paired with `tmap`.
CheckReport check_manifold(const TMap& tmap, const ResidualGenerator& gen, const CheckOptions& options = {});
CheckReport check_manifold(const ExtendedSystem& ext, const ParitySolution& sol, const TMap& tmap,
                           const CheckOptions& options = {});

enum class SpecialCase { Auto, AdditiveSensor, ProcessFault, Injection };

std::string_view to_string(SpecialCase kind);

/// Split conditions for structured problems. Additive sensor faults
/// (G = 0, constant J): output-side sampled identity, exact exo-side matrix
/// identity and the sensor-disturbance rows. Scalar process faults (s = 1,
/// J = 0) and scalar output-injection designs: drift identity, fault-gain
/// identity and disturbance rows, all sampled on the plant box.
CheckReport check_special_cases(const ExtendedSystem& ext, const ParityMap& parity, std::span<const double> alpha,
                                const LieEngine& lie, SpecialCase kind = SpecialCase::Auto,
                                const CheckOptions& options = {});
CheckReport check_special_cases(const ExtendedSystem& ext, const ParitySolution& sol, const LieEngine& lie,
                                SpecialCase kind = SpecialCase::Auto, const CheckOptions& options = {});

}  // namespace fdest
