#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fdest/exo_system.hpp"
#include "fdest/numerics.hpp"

namespace fdest {

/// Per-state bounds of the physical operating domain.
struct OperatingBox {
    Vector lower;
    Vector upper;

    std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
    Vector center() const { return 0.5 * (lower + upper); }
    void validate(std::size_t n) const;
    static OperatingBox symmetric(std::size_t n, double half_width);
};

/// x' = F x + G f + E w,  y = H x + J f + K w   (single scalar fault f).
struct LinearPlant {
    Matrix F, G, E, H, J, K;

    Eigen::Index n() const { return F.rows(); }
    Eigen::Index p() const { return H.rows(); }
    Eigen::Index m() const { return E.cols(); }
    void validate() const;
};

/// x' = F(x) + G(x) f + sum_i E_i(x) w_i,  y = H(x) + J(x) f + sum_i K_i(x) w_i.
struct NonlinearPlant {
    std::size_t n = 0;
    std::size_t p = 0;
    VectorField F;  ///< n -> n
    VectorField G;  ///< n -> n, fault direction
    std::vector<VectorField> E;  ///< n -> n each
    VectorField H;  ///< n -> p
    VectorField J;  ///< n -> p, fault feedthrough
    std::vector<VectorField> K;  ///< n -> p each
    OperatingBox box;

    std::size_t m() const { return E.size(); }
    /// Dimension checks plus finiteness and purity spot checks on the box.
    void validate() const;
};

/// Wraps the affine maps of a linear plant as callbacks.
NonlinearPlant lift_linear(const LinearPlant& plant, std::optional<OperatingBox> box = std::nullopt);

/// Plant in cascade with its fault generator:
///   F_e(x, x_o) = [F(x) + G(x) Q x_o ; R x_o],   H_e(x, x_o) = H(x) + J(x) Q x_o.
/// Points of the extended space are stacked as [x; x_o].
class ExtendedSystem {
public:
    ExtendedSystem(NonlinearPlant plant, ExoSystem exo);

    const NonlinearPlant& plant() const noexcept { return plant_; }
    const ExoSystem& exo() const noexcept { return exo_; }
    const VectorField& Fe() const noexcept { return fe_; }
    const VectorField& He() const noexcept { return he_; }
    /// Disturbance direction E_i lifted to the extended space as [E_i(x); 0].
    VectorField disturbance_direction(std::size_t i) const;
    /// Fault direction G lifted as [G(x); 0].
    VectorField fault_direction() const;
    /// Drift without the exo coupling, [F(x); 0].
    VectorField drift_direction() const;

    std::size_t n() const { return plant_.n; }
    std::size_t n_o() const { return static_cast<std::size_t>(exo_.order()); }
    std::size_t dim() const { return n() + n_o(); }
    std::size_t p() const { return plant_.p; }

    Vector stack(const Vector& x, const Vector& xo) const;
    Vector state_part(const Vector& point) const { return point.head(static_cast<Eigen::Index>(n())); }
    Vector exo_part(const Vector& point) const { return point.tail(static_cast<Eigen::Index>(n_o())); }

private:
    NonlinearPlant plant_;
    ExoSystem exo_;
    VectorField fe_;
    VectorField he_;
};

/// Assembles F_e and H_e; requires a scalar fault channel (Q one row).
ExtendedSystem extend(const NonlinearPlant& plant, const ExoSystem& exo);

/// A fault or disturbance input: process direction (n -> n) and sensor
/// feedthrough (n -> p).
struct InputChannel {
    std::string name;
    VectorField process;
    VectorField sensor;
};

/// Process with several fault channels and disturbance channels. Each
/// residual generator of an isolation bank sees one fault and treats the
/// remaining faults as disturbances.
struct ProcessModel {
    std::string name;
    std::size_t n = 0;
    std::size_t p = 0;
    VectorField F;
    VectorField H;
    std::vector<InputChannel> faults;
    std::vector<InputChannel> disturbances;
    OperatingBox box;

    /// Single-fault view for fault `k`: the other faults come first in the
    /// disturbance list, followed by the true disturbances.
    NonlinearPlant view_for_fault(std::size_t k) const;
    /// Channel names in the order used by view_for_fault(k).E.
    std::vector<std::string> disturbance_names_for_fault(std::size_t k) const;
    void validate() const;
};

/// One-fault process model built from a linear plant.
ProcessModel process_from_linear(const LinearPlant& plant, std::optional<OperatingBox> box = std::nullopt);

VectorField constant_field(std::size_t dim_in, const Vector& value);
VectorField linear_field(const Matrix& m);

}  // namespace fdest
