#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fdest/exo_system.hpp"
#include "fdest/numerics.hpp"
#include "fdest/plant_model.hpp"
#include "fdest/synthesis.hpp"

namespace fdest {

/// A fault channel switching on at `onset_time`: x_o is held at zero before
/// onset and set to `xo0` at onset.
struct FaultEvent {
    std::size_t channel = 0;
    ExoSystem exo = ExoSystem::make_step();
    double onset_time = 0.0;
    Vector xo0;
};

using FaultSchedule = std::vector<FaultEvent>;

/// Onset times >= 0, known channels, one event per channel, matching x_o0 length.
void validate_schedule(const FaultSchedule& schedule, std::size_t channels);

struct DisturbanceSignal {
    std::size_t channel = 0;
    std::string kind;
    std::function<double(double)> value;

    static DisturbanceSignal constant(std::size_t channel, double w);
    /// Piecewise constant: values[k] on [times[k], times[k+1]); 0 before times[0].
    static DisturbanceSignal piecewise(std::size_t channel, std::vector<double> times, std::vector<double> values);
    static DisturbanceSignal callback(std::size_t channel, std::function<double(double)> fn);
};

struct ObserverSpec {
    std::string name;
    ResidualGenerator generator;
    Vector z0;
    /// Fault channel the observer estimates (used for metrics only).
    std::optional<std::size_t> channel;
};

struct SimulationConfig {
    double t0 = 0.0;
    double t_end = 0.0;
    double dt = 0.1;
    Vector x0;
    /// RK4 steps per sample interval; samples stay on the dt grid.
    int substeps = 1;
};

/// Samples on the grid t0 + k dt (final step shortened to land on t_end).
/// Rows are samples; columns follow the stacked layout of each quantity.
struct Trajectory {
    std::vector<double> t;
    Matrix x;
    Matrix xo;    ///< exo states of every scheduled event, in schedule order
    Matrix z;     ///< observer states, in bank order
    Matrix y;
    Matrix f;     ///< one column per fault channel
    Matrix fhat;  ///< one column per observer
    std::vector<std::string> observer_names;
    std::vector<std::string> channel_names;

    std::size_t size() const { return t.size(); }
};

/// Integrates plant, exo-systems and observers as one stacked RK4 system.
/// Fault onsets falling between grid points split the step. t_end == t0
/// yields an empty trajectory.
Trajectory simulate_cascade(const ProcessModel& plant, const FaultSchedule& schedule,
                            const std::vector<DisturbanceSignal>& disturbances,
                            const std::vector<ObserverSpec>& observers, const SimulationConfig& config);

/// Measurement y = H(x) + sum_c J_c(x) f_c + sum_i K_i(x) w_i.
Vector measure(const ProcessModel& plant, const Vector& x, const Vector& f, const Vector& w);

/// C e^{At} e0.
double analytic_error(const ResidualGenerator& gen, const Vector& e0, double t);

struct DetectionRule {
    double threshold = 0.0;
    double dwell = 0.0;
    /// Flags are ignored before this time (initial transients).
    double arm_time = 0.0;
};

/// First time at which |fhat| has exceeded the threshold continuously for
/// `dwell`, counted from arm_time; nullopt if never.
std::optional<double> first_detection(const Trajectory& traj, std::size_t observer, const DetectionRule& rule);

/// Whether the observer is flagged at time t.
bool flagged_at(const Trajectory& traj, std::size_t observer, const DetectionRule& rule, double t);

struct BankResult {
    Trajectory trajectory;
    std::vector<DetectionRule> rules;
    std::vector<std::optional<double>> first_flag;

    /// Observers flagged at time t.
    std::vector<std::size_t> isolation_at(double t) const;
    /// Latest estimate (at or before t) of every flagged observer.
    std::vector<std::pair<std::size_t, double>> estimates_at(double t) const;
};

/// Default rule: arm_time = 5 / slowest decay rate, threshold = 3 x max |fhat|
/// after arming in a fault-free calibration run (floored at 1e-6),
/// dwell = 10 dt.
DetectionRule calibrate_rule(const Trajectory& calibration, std::size_t observer, double arm_time, double dt);

BankResult run_bank(const ProcessModel& plant, const FaultSchedule& schedule,
                    const std::vector<DisturbanceSignal>& disturbances, const std::vector<ObserverSpec>& bank,
                    const SimulationConfig& config, std::optional<std::vector<DetectionRule>> rules = std::nullopt);

struct ProbeResult {
    double max_difference = 0.0;
    double time_of_max = 0.0;
};

/// sup_t |fhat_on(t) - fhat_off(t)| for a single observer.
ProbeResult decoupling_probe(const ProcessModel& plant, const FaultSchedule& schedule,
                             const std::vector<DisturbanceSignal>& disturbances_on,
                             const std::vector<DisturbanceSignal>& disturbances_off, const ObserverSpec& observer,
                             const SimulationConfig& config);

/// Shortest round-trip decimal text of a double.
std::string format_number(double v);

/// CSV with header t,x1..,xo1..,z1..,y1..,f1..,fhat1..; `state_offset`
/// (length n) is added to the x columns when given.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const std::optional<Vector>& state_offset = std::nullopt);

}  // namespace fdest
