#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fdest/lie.hpp"
#include "fdest/numerics.hpp"
#include "fdest/plant_model.hpp"
#include "fdest/simulation.hpp"
#include "fdest/synthesis.hpp"

namespace fdest::reactor {

/// How the mixed units of the parameter table are read. PerSecond converts
/// the l/min flows to l/s; PaperLiteral uses every number verbatim.
enum class UnitConvention { PerSecond, PaperLiteral };

std::string_view to_string(UnitConvention u);

struct ReactorParams {
    double c_A_in = 4.0;       // mol/l
    double c_B_in = 3.0;       // mol/l
    double theta_in = 333.0;   // K
    double theta_J_in = 300.0; // K
    double F = 0.02;           // l/min
    double F_J = 1.0;          // l/min
    double V = 1.0;            // l
    double V_J = 3e-2;         // l
    double A1 = 0.0;           // set from e^8.08 in the constructor
    double A2 = 0.0;
    double A3 = 0.0;
    double E1 = 3952.0;        // K
    double E2 = 7927.0;
    double E3 = 12989.0;
    double dH = -160.0;        // kJ/mol
    double rho = 1200.0;       // g/l
    double rho_J = 1200.0;
    double c_p = 3.4;          // J/(g K)
    double c_pJ = 3.4;
    double UA = 0.942;         // W/K
    double Z = 0.0021;         // mol/l
    UnitConvention units = UnitConvention::PerSecond;

    ReactorParams();
    void validate() const;

    /// Flow in litres per model time unit.
    double flow_per_unit(double litres_per_minute) const;
    double flow_rate() const;         ///< F/V
    double jacket_flow_rate() const;  ///< F_J/V_J
    double heat_release() const;      ///< (-dH)/(rho c_p), K l/mol
    double heat_capacity_ratio() const;  ///< rho c_p/(-dH)
    double reactor_exchange() const;  ///< UA/(rho c_p V)
    double jacket_exchange() const;   ///< UA/(rho_J c_pJ V_J)
    double wall_coupling() const;     ///< UA/((-dH) V)
    double jacket_residence() const;  ///< V_J/F_J
    double jacket_ratio() const;      ///< UA/(rho_J c_pJ F_J)
};

/// Reactor state; `deviation` tags translated coordinates.
struct ReactorState {
    double c_A = 0.0;
    double c_B = 0.0;
    double theta = 0.0;
    double theta_J = 0.0;
    bool deviation = false;

    Vector vec() const;
    static ReactorState from(const Vector& v, bool deviation);
};

/// Steady state reported with the parameter table.
ReactorState paper_steady_state();

/// Rate expression evaluated exactly as written; w is additive.
double reaction_rate(double c_A, double c_B, double theta, double w, const ReactorParams& p);

/// Gradient of the kinetic part with respect to (c_A, c_B, theta).
std::array<double, 3> reaction_rate_gradient(double c_A, double c_B, double theta, const ReactorParams& p);

/// Absolute-coordinate balances.
Vector reactor_rhs(const ReactorState& state, double f2, double w, const ReactorParams& p);

/// Translated balances about `steady`. With `project_kinetics` the kinetic
/// terms see max(c, 0) for both concentrations.
Vector reactor_deviation_rhs(const Vector& dev, double f2, double w, const ReactorParams& p,
                             const ReactorState& steady, bool project_kinetics = true);

struct SteadyStateResult {
    ReactorState state;
    int iterations = 0;
    double scaled_residual = 0.0;
};

/// Damped Newton (factor 0.5, 200 iterations) on the absolute balances from
/// the inlet state. Throws NoConvergence.
SteadyStateResult find_steady_state(const ReactorParams& p);

/// Deviation-form process with fault channels f1 (analyser, ramp), f2
/// (jacket inlet, step) and disturbance w (rate uncertainty).
ProcessModel reactor_process(const ReactorParams& p, const ReactorState& steady);

/// Operating box of the translated states.
OperatingBox reactor_box();

/// Extended system of fault view k (0: f1 with ramp exo, 1: f2 with step exo).
ExtendedSystem reactor_extended(const ReactorParams& p, const ReactorState& steady, std::size_t fault);

/// Closed-form Lie derivatives of the output map for fault view k (depth <= 2).
AnalyticLie reactor_analytic_lie(const ReactorParams& p, const ReactorState& steady, std::size_t fault);

ParitySolution parity_observer1(const ReactorParams& p);
ParitySolution parity_observer2(const ReactorParams& p, double alpha1);
ResidualGenerator observer1(const ReactorParams& p);
ResidualGenerator observer2(const ReactorParams& p, double alpha1);

enum class SteadyStateSource { Paper, Computed };

struct ScenarioOptions {
    ReactorParams params;
    SteadyStateSource steady_source = SteadyStateSource::Paper;
    double t_end = 8000.0;
    double dt = 0.1;
    double w = 1e5;
    bool disturbance = true;
    bool faults = true;
    double alpha2 = 0.01;
    double init_error = 1.0;
    double f1_onset = 2000.0;
    Vector f1_xo0 = (Vector(2) << 1.0, 0.001).finished();
    double f2_onset = 5000.0;
    double f2_value = 10.0;
    /// RK4 steps per sample; 0 picks the smallest count keeping |lambda| h
    /// inside the RK4 stability interval for the linearised plant.
    int substeps = 0;
};

/// Smallest substep count with |lambda| dt / m <= 2.5 for the reactor
/// Jacobian at the steady state and with the kinetics switched off.
int stable_substeps(const ReactorParams& p, const ReactorState& steady, double dt);

/// Exponential decay of fhat from the initial error before the first onset.
struct DecayMetric {
    std::size_t samples = 0;
    double max_relative_error = 0.0;  ///< max |fhat - e0 e^{-alpha t}| / (|e0| e^{-alpha t})
    double max_excess = 0.0;          ///< max of |err| - (rel_tol |pred| + floor)
    double floor = 0.0;               ///< largest roundoff floor used
    bool passed = false;
};

/// max |signal - reference| over [t_from, t_to).
struct WindowMetric {
    double t_from = 0.0;
    double t_to = 0.0;
    std::size_t samples = 0;
    double max_abs_error = 0.0;
    double bound = 0.0;
    bool passed = false;
};

struct ScenarioMetrics {
    std::array<DecayMetric, 2> decay;
    WindowMetric step_tracking;      ///< |fhat2 - 10| after 5000 + 5/alpha2
    WindowMetric ramp_tracking;      ///< |fhat1 - f1| after 2000 + 7/alpha1
    WindowMetric cross_decoupling;   ///< |fhat2| while only f1 is active, against the detection floor
    std::array<double, 2> alpha{};
};

struct ScenarioResult {
    ScenarioOptions options;
    ReactorState steady;
    ProcessModel process;
    std::vector<ObserverSpec> observers;
    FaultSchedule schedule;
    std::vector<DisturbanceSignal> disturbances;
    SimulationConfig config;
    BankResult bank;
    ScenarioMetrics metrics;
    std::vector<std::string> notes;
};

/// Relative tolerance used by the decay metric.
inline constexpr double kDecayRelTol = 0.05;

/// Roundoff floor for fhat = C z + D y at sample k, from the magnitudes of
/// the summed terms and the number of steps taken.
double roundoff_floor(double z_mag, double dy_mag, std::size_t step);

ScenarioResult run_paper_scenario(const ScenarioOptions& options = {});

}  // namespace fdest::reactor
