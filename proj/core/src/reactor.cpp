#include "fdest/reactor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fdest::reactor {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr std::size_t kStates = 4;

struct Kinetics {
    double k1, k2, k3;
};

Kinetics rate_constants(double theta, const ReactorParams& p) {
    if (!(theta > 0.0)) {
        std::ostringstream os;
        os << "reactor temperature must be positive, got " << theta;
        throw InvalidState(os.str());
    }
    return {p.A1 * std::exp(-p.E1 / theta), p.A2 * std::exp(-p.E2 / theta), p.A3 * std::exp(-p.E3 / theta)};
}

double kinetic_rate(double c_A, double c_B, double theta, const ReactorParams& p) {
    const Kinetics k = rate_constants(theta, p);
    return k.k1 * k.k2 * c_A * c_B * p.Z / (1.0 + k.k2 * c_B) + k.k3 * c_A * c_B;
}

Vector state_vec(double a, double b, double c, double d) { return (Vector(4) << a, b, c, d).finished(); }

// Jacobian of the absolute balances.
Matrix absolute_jacobian(const ReactorState& s, const ReactorParams& p) {
    const auto g = reaction_rate_gradient(s.c_A, s.c_B, s.theta, p);
    const double a = p.flow_rate();
    const double h = p.heat_release();
    const double b = p.reactor_exchange();
    const double fj = p.jacket_flow_rate();
    const double cj = p.jacket_exchange();
    Matrix j(4, 4);
    j << -a - g[0], -g[1], -g[2], 0.0,
         -g[0], -a - g[1], -g[2], 0.0,
         h * g[0], h * g[1], -a + h * g[2] - b, b,
         0.0, 0.0, cj, -fj - cj;
    return j;
}

// Sum of term magnitudes of each balance, used to scale residuals.
Vector balance_scales(const ReactorState& s, const ReactorParams& p) {
    const double r = std::abs(kinetic_rate(s.c_A, s.c_B, s.theta, p));
    const double a = p.flow_rate();
    const double b = p.reactor_exchange();
    const double fj = p.jacket_flow_rate();
    const double cj = p.jacket_exchange();
    Vector sc(4);
    sc << a * (std::abs(p.c_A_in) + std::abs(s.c_A)) + r, a * (std::abs(p.c_B_in) + std::abs(s.c_B)) + r,
        a * (std::abs(p.theta_in) + std::abs(s.theta)) + p.heat_release() * r + b * (std::abs(s.theta) + std::abs(s.theta_J)),
        fj * (std::abs(p.theta_J_in) + std::abs(s.theta_J)) + cj * (std::abs(s.theta) + std::abs(s.theta_J));
    return sc;
}

// Deviation-form Jacobian (kinetics projected as in the simulation model).
Matrix deviation_jacobian(const Vector& dev, const ReactorParams& p, const ReactorState& steady) {
    const double ca = steady.c_A + dev(0);
    const double cb = steady.c_B + dev(1);
    const double th = steady.theta + dev(2);
    auto g = reaction_rate_gradient(std::max(ca, 0.0), std::max(cb, 0.0), th, p);
    if (ca < 0.0) g[0] = 0.0;
    if (cb < 0.0) g[1] = 0.0;
    const double a = p.flow_rate();
    const double h = p.heat_release();
    const double b = p.reactor_exchange();
    const double fj = p.jacket_flow_rate();
    const double cj = p.jacket_exchange();
    Matrix j(4, 4);
    j << -a - g[0], -g[1], -g[2], 0.0,
         -g[0], -a - g[1], -g[2], 0.0,
         h * g[0], h * g[1], -a + h * g[2] - b, b,
         0.0, 0.0, cj, -fj - cj;
    return j;
}

Vector jacket_fault_direction(const ReactorParams& p) { return state_vec(0.0, 0.0, 0.0, p.jacket_flow_rate()); }

Vector rate_direction(const ReactorParams& p) { return state_vec(-1.0, -1.0, p.heat_release(), 0.0); }

ExoSystem view_exo(std::size_t fault) {
    if (fault == 0) return ExoSystem::make_ramp();
    if (fault == 1) return ExoSystem::make_step();
    throw InvalidSpec("reactor has fault channels 0 (f1) and 1 (f2)");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

std::string_view to_string(UnitConvention u) {
    return u == UnitConvention::PerSecond ? "per-second" : "paper-literal";
}

ReactorParams::ReactorParams() : A1(std::exp(8.08)), A2(std::exp(28.12)), A3(std::exp(25.12)) {}

void ReactorParams::validate() const {
    const double positive[] = {c_A_in, c_B_in, theta_in, theta_J_in, F, F_J, V, V_J, A1, A2, A3, E1, E2, E3,
                               rho, rho_J, c_p, c_pJ, UA, Z};
    for (double v : positive) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidSpec("reactor parameters must be finite and positive");
    }
    if (!(dH < 0.0) || !std::isfinite(dH)) throw InvalidSpec("heat of reaction must be negative (exothermic)");
}

double ReactorParams::flow_per_unit(double litres_per_minute) const {
    return units == UnitConvention::PerSecond ? litres_per_minute / 60.0 : litres_per_minute;
}

double ReactorParams::flow_rate() const { return flow_per_unit(F) / V; }
double ReactorParams::jacket_flow_rate() const { return flow_per_unit(F_J) / V_J; }
double ReactorParams::heat_release() const { return -dH * 1000.0 / (rho * c_p); }
double ReactorParams::heat_capacity_ratio() const { return rho * c_p / (-dH * 1000.0); }
double ReactorParams::reactor_exchange() const { return UA / (rho * c_p * V); }
double ReactorParams::jacket_exchange() const { return UA / (rho_J * c_pJ * V_J); }
double ReactorParams::wall_coupling() const { return UA / (-dH * 1000.0 * V); }
double ReactorParams::jacket_residence() const { return V_J / flow_per_unit(F_J); }
double ReactorParams::jacket_ratio() const { return UA / (rho_J * c_pJ * flow_per_unit(F_J)); }

Vector ReactorState::vec() const { return state_vec(c_A, c_B, theta, theta_J); }

ReactorState ReactorState::from(const Vector& v, bool deviation) {
    if (v.size() != 4) throw DimensionError("reactor state has four components");
    return {v(0), v(1), v(2), v(3), deviation};
}

ReactorState paper_steady_state() { return {1.211, 0.211, 386.20, 300.02, false}; }

double reaction_rate(double c_A, double c_B, double theta, double w, const ReactorParams& p) {
    return kinetic_rate(c_A, c_B, theta, p) + w;
}

std::array<double, 3> reaction_rate_gradient(double c_A, double c_B, double theta, const ReactorParams& p) {
    const Kinetics k = rate_constants(theta, p);
    const double den = 1.0 + k.k2 * c_B;
    const double n = k.k1 * k.k2 * p.Z;
    const double d_ca = n * c_B / den + k.k3 * c_B;
    const double d_cb = n * c_A / (den * den) + k.k3 * c_A;
    const double t2 = theta * theta;
    const double dn = n * (p.E1 + p.E2) / t2;
    const double dden = k.k2 * c_B * p.E2 / t2;
    const double d_th = c_A * c_B * (dn * den - n * dden) / (den * den) + k.k3 * c_A * c_B * p.E3 / t2;
    return {d_ca, d_cb, d_th};
}

Vector reactor_rhs(const ReactorState& s, double f2, double w, const ReactorParams& p) {
    if (s.deviation) throw InvalidState("reactor_rhs expects absolute coordinates");
    const double r = reaction_rate(s.c_A, s.c_B, s.theta, w, p);
    const double a = p.flow_rate();
    return state_vec(a * (p.c_A_in - s.c_A) - r, a * (p.c_B_in - s.c_B) - r,
                     a * (p.theta_in - s.theta) + p.heat_release() * r - p.reactor_exchange() * (s.theta - s.theta_J),
                     p.jacket_flow_rate() * (p.theta_J_in + f2 - s.theta_J) + p.jacket_exchange() * (s.theta - s.theta_J));
}

Vector reactor_deviation_rhs(const Vector& dev, double f2, double w, const ReactorParams& p,
                             const ReactorState& steady, bool project_kinetics) {
    if (dev.size() != 4) throw DimensionError("reactor state has four components");
    double ca = steady.c_A + dev(0);
    double cb = steady.c_B + dev(1);
    if (project_kinetics) {
        ca = std::max(ca, 0.0);
        cb = std::max(cb, 0.0);
    }
    const double dr = kinetic_rate(ca, cb, steady.theta + dev(2), p) + w -
                      kinetic_rate(steady.c_A, steady.c_B, steady.theta, p);
    const double a = p.flow_rate();
    return state_vec(-a * dev(0) - dr, -a * dev(1) - dr,
                     -a * dev(2) + p.heat_release() * dr - p.reactor_exchange() * (dev(2) - dev(3)),
                     p.jacket_flow_rate() * (f2 - dev(3)) + p.jacket_exchange() * (dev(2) - dev(3)));
}

SteadyStateResult find_steady_state(const ReactorParams& p) {
    p.validate();
    constexpr int kBudget = 200;
    constexpr double kDamping = 0.5;
    constexpr double kTarget = 1e-10;
    ReactorState s{p.c_A_in, p.c_B_in, p.theta_in, p.theta_J_in, false};
    for (int it = 0; it <= kBudget; ++it) {
        const Vector r = reactor_rhs(s, 0.0, 0.0, p);
        const double scaled = r.cwiseAbs().cwiseQuotient(balance_scales(s, p)).maxCoeff();
        if (scaled < kTarget) return {s, it, scaled};
        if (it == kBudget) break;
        const Vector step = absolute_jacobian(s, p).fullPivLu().solve(r);
        double lambda = kDamping;
        Vector next = s.vec() - lambda * step;
        while ((!next.allFinite() || next(2) <= 0.0) && lambda > 1e-12) {
            lambda *= 0.5;
            next = s.vec() - lambda * step;
        }
        if (!next.allFinite() || next(2) <= 0.0) break;
        s = ReactorState::from(next, false);
    }
    throw NoConvergence("steady-state Newton iteration did not converge in 200 iterations");
}

OperatingBox reactor_box() {
    return {state_vec(-0.5, -0.2, -10.0, -10.0), state_vec(0.5, 0.2, 10.0, 10.0)};
}

ProcessModel reactor_process(const ReactorParams& p, const ReactorState& steady) {
    p.validate();
    if (steady.deviation) throw InvalidState("steady state must be given in absolute coordinates");
    ProcessModel m;
    m.name = "pyridine_cstr";
    m.n = kStates;
    m.p = 3;
    m.F = {kStates, kStates, [p, steady](const Vector& x) { return reactor_deviation_rhs(x, 0.0, 0.0, p, steady); }};
    Matrix h = Matrix::Zero(3, 4);
    h(0, 0) = 1.0;
    h(1, 2) = 1.0;
    h(2, 3) = 1.0;
    m.H = linear_field(h);
    const Vector zero_n = Vector::Zero(4);
    const Vector zero_p = Vector::Zero(3);
    m.faults.push_back({"f1", constant_field(kStates, zero_n), constant_field(kStates, (Vector(3) << 1.0, 0.0, 0.0).finished())});
    m.faults.push_back({"f2", constant_field(kStates, jacket_fault_direction(p)), constant_field(kStates, zero_p)});
    m.disturbances.push_back({"w", constant_field(kStates, rate_direction(p)), constant_field(kStates, zero_p)});
    m.box = reactor_box();
    m.validate();
    return m;
}

ExtendedSystem reactor_extended(const ReactorParams& p, const ReactorState& steady, std::size_t fault) {
    const ProcessModel m = reactor_process(p, steady);
    return extend(m.view_for_fault(fault), view_exo(fault));
}

AnalyticLie reactor_analytic_lie(const ReactorParams& p, const ReactorState& steady, std::size_t fault) {
    const ExoSystem exo = view_exo(fault);
    const ExtendedSystem ext = reactor_extended(p, steady, fault);
    const Eigen::Index no = exo.order();
    const Eigen::Index dim = 4 + no;

    // H_e is linear: H_e(p) = M p.
    Matrix m = Matrix::Zero(3, dim);
    m(0, 0) = 1.0;
    m(1, 2) = 1.0;
    m(2, 3) = 1.0;
    if (fault == 0) m.block(0, 4, 1, no) = exo.Q();

    Vector g = fault == 1 ? jacket_fault_direction(p) : Vector::Zero(4);
    std::vector<Vector> dirs;
    auto lift = [dim](const Vector& v) {
        Vector e = Vector::Zero(dim);
        e.head(4) = v;
        return e;
    };
    if (fault == 0) {
        dirs.push_back(lift(jacket_fault_direction(p)));
    } else {
        dirs.push_back(lift(Vector::Zero(4)));
    }
    dirs.push_back(lift(rate_direction(p)));

    auto jac = [p, steady, g, exo, dim, no](const Vector& pt) {
        Matrix j = Matrix::Zero(dim, dim);
        j.topLeftCorner(4, 4) = deviation_jacobian(pt.head(4), p, steady);
        j.topRightCorner(4, no) = g * exo.Q();
        j.bottomRightCorner(no, no) = exo.R();
        return j;
    };
    const VectorField fe = ext.Fe();

    AnalyticLie out;
    out.max_order = 2;
    out.output = [m, fe, jac](int k, const Vector& pt) -> Vector {
        switch (k) {
            case 0: return m * pt;
            case 1: return m * fe(pt);
            case 2: return m * (jac(pt) * fe(pt));
            default: throw UnsupportedOrder("reactor analytic table covers depth <= 2");
        }
    };
    out.disturbance = [m, dirs, jac](std::size_t i, int k, const Vector& pt) -> Vector {
        if (i >= dirs.size()) throw DimensionError("disturbance index out of range");
        switch (k) {
            case 0: return m * dirs[i];
            case 1: return m * (jac(pt) * dirs[i]);
            default: throw UnsupportedOrder("reactor analytic disturbance table covers depth <= 1");
        }
    };
    return out;
}

ParitySolution parity_observer1(const ReactorParams& p) {
    p.validate();
    const double a = p.flow_rate();
    const double k = p.heat_capacity_ratio();
    ParitySolution sol;
    sol.s = 1;
    sol.v = {(RowVector(3) << -a, -k * (a + p.reactor_exchange()), p.wall_coupling()).finished(),
             (RowVector(3) << -1.0, -k, 0.0).finished()};
    sol.alpha = {a};
    sol.spectrum = companion_eigenvalues(sol.alpha);
    sol.path = "reactor";
    return sol;
}

ParitySolution parity_observer2(const ReactorParams& p, double alpha1) {
    p.validate();
    if (!(alpha1 > 0.0)) throw InvalidSpec("observer 2 gain must be positive");
    const double c = p.jacket_ratio();
    ParitySolution sol;
    sol.s = 1;
    sol.v = {(RowVector(3) << 0.0, alpha1 * c, -alpha1 * (1.0 + c)).finished(),
             (RowVector(3) << 0.0, 0.0, -alpha1 * p.jacket_residence()).finished()};
    sol.alpha = {alpha1};
    sol.spectrum = companion_eigenvalues(sol.alpha);
    sol.path = "reactor";
    return sol;
}

ResidualGenerator observer1(const ReactorParams& p) { return build_observer(parity_observer1(p)); }

ResidualGenerator observer2(const ReactorParams& p, double alpha1) { return build_observer(parity_observer2(p, alpha1)); }

int stable_substeps(const ReactorParams& p, const ReactorState& steady, double dt) {
    if (!(dt > 0.0)) throw InvalidSpec("dt must be positive");
    Matrix lin = deviation_jacobian(Vector::Zero(4), p, steady);
    Matrix bare = lin;
    bare.topLeftCorner(3, 3).setZero();
    bare(0, 0) = bare(1, 1) = -p.flow_rate();
    bare(2, 2) = -p.flow_rate() - p.reactor_exchange();
    double rho = 0.0;
    for (const Matrix* m : {&lin, &bare}) {
        const Eigen::VectorXcd ev = m->eigenvalues();
        rho = std::max(rho, ev.cwiseAbs().maxCoeff());
    }
    constexpr double kStableReach = 2.5;
    return std::max(1, static_cast<int>(std::ceil(rho * dt / kStableReach)));
}

double roundoff_floor(double z_mag, double dy_mag, std::size_t step) {
    return 16.0 * kEps * (z_mag + dy_mag) * std::sqrt(static_cast<double>(step) + 1.0);
}

namespace {

WindowMetric window(const Trajectory& tr, std::size_t obs, double from, double to, double bound, bool against_f,
                    std::size_t channel) {
    WindowMetric w;
    w.t_from = from;
    w.t_to = to;
    w.bound = bound;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        if (tr.t[k] < from || tr.t[k] >= to) continue;
        const auto r = static_cast<Eigen::Index>(k);
        const double ref = against_f ? tr.f(r, static_cast<Eigen::Index>(channel)) : 0.0;
        w.max_abs_error = std::max(w.max_abs_error, std::abs(tr.fhat(r, static_cast<Eigen::Index>(obs)) - ref));
        ++w.samples;
    }
    w.passed = w.samples > 0 && w.max_abs_error < bound;
    return w;
}

DecayMetric decay(const Trajectory& tr, const ResidualGenerator& gen, std::size_t obs, double alpha, double e0,
                  double until) {
    DecayMetric d;
    d.passed = true;
    const RowVector dabs = gen.D.cwiseAbs();
    for (std::size_t k = 0; k < tr.size(); ++k) {
        if (tr.t[k] >= until) break;
        const auto r = static_cast<Eigen::Index>(k);
        const double pred = e0 * std::exp(-alpha * tr.t[k]);
        const double err = std::abs(tr.fhat(r, static_cast<Eigen::Index>(obs)) - pred);
        const double floor = roundoff_floor(std::abs(tr.z(r, static_cast<Eigen::Index>(obs))),
                                            dabs.dot(tr.y.row(r).cwiseAbs()), k);
        d.floor = std::max(d.floor, floor);
        if (pred != 0.0) d.max_relative_error = std::max(d.max_relative_error, err / std::abs(pred));
        const double excess = err - (kDecayRelTol * std::abs(pred) + floor);
        if (d.samples == 0 || excess > d.max_excess) d.max_excess = excess;
        if (excess > 0.0) d.passed = false;
        ++d.samples;
    }
    if (d.samples == 0) d.passed = false;
    return d;
}

}  // namespace

ScenarioResult run_paper_scenario(const ScenarioOptions& options) {
    const ReactorParams& p = options.params;
    p.validate();
    if (!(options.dt > 0.0) || !(options.t_end >= 0.0)) throw InvalidSpec("scenario needs dt > 0 and t_end >= 0");

    ScenarioResult res;
    res.options = options;
    if (options.steady_source == SteadyStateSource::Paper) {
        res.steady = paper_steady_state();
    } else {
        res.steady = find_steady_state(p).state;
    }
    res.process = reactor_process(p, res.steady);

    const ParitySolution sol1 = parity_observer1(p);
    const ParitySolution sol2 = parity_observer2(p, options.alpha2);
    const ResidualGenerator gen1 = build_observer(sol1);
    const ResidualGenerator gen2 = build_observer(sol2);

    const Vector x0 = Vector::Zero(4);
    const LieEngine lie;
    const ExtendedSystem ext1 = extend(res.process.view_for_fault(0), view_exo(0));
    const ExtendedSystem ext2 = extend(res.process.view_for_fault(1), view_exo(1));
    const Vector t1 = build_tmap(ext1, sol1, lie)(x0, Vector::Zero(2));
    const Vector t2 = build_tmap(ext2, sol2, lie)(x0, Vector::Zero(1));
    const Vector e0 = Vector::Constant(1, options.init_error);
    res.observers = {{"observer1", gen1, t1 + e0, 0}, {"observer2", gen2, t2 + e0, 1}};

    if (options.faults) {
        res.schedule.push_back({0, ExoSystem::make_ramp(), options.f1_onset, options.f1_xo0});
        res.schedule.push_back({1, ExoSystem::make_step(), options.f2_onset, Vector::Constant(1, options.f2_value)});
    }
    if (options.disturbance) res.disturbances.push_back(DisturbanceSignal::constant(0, options.w));
    const int sub = options.substeps > 0 ? options.substeps : stable_substeps(p, res.steady, options.dt);
    res.config = {0.0, options.t_end, options.dt, x0, sub};

    res.bank = run_bank(res.process, res.schedule, res.disturbances, res.observers, res.config);
    const Trajectory& tr = res.bank.trajectory;

    ScenarioMetrics& m = res.metrics;
    m.alpha = {sol1.alpha[0], sol2.alpha[0]};
    const double inf = std::numeric_limits<double>::infinity();
    const double first_onset = options.faults ? std::min(options.f1_onset, options.f2_onset) : inf;
    m.decay[0] = decay(tr, gen1, 0, m.alpha[0], options.init_error, first_onset);
    m.decay[1] = decay(tr, gen2, 1, m.alpha[1], options.init_error, first_onset);
    m.step_tracking = window(tr, 1, options.f2_onset + 5.0 / m.alpha[1], inf, 0.1, true, 1);
    m.ramp_tracking = window(tr, 0, options.f1_onset + 7.0 / m.alpha[0], inf, 0.01, true, 0);
    m.cross_decoupling = window(tr, 1, options.f1_onset, options.f2_onset, res.bank.rules[1].threshold, false, 1);

    auto& notes = res.notes;
    notes.push_back("units: " + std::string(to_string(p.units)) + "; F/V = " + fmt(p.flow_rate()) +
                    ", F_J/V_J = " + fmt(p.jacket_flow_rate()) + ", UA/(rho c_p V) = " + fmt(p.reactor_exchange()));
    notes.push_back("observer 1 gain is forced: alpha1 = F/V = " + fmt(m.alpha[0]) +
                    "; the stated alpha1 = " + fmt(options.alpha2) + " is applied to observer 2");
    notes.push_back(std::string("steady state: ") +
                    (options.steady_source == SteadyStateSource::Paper ? "paper-reported values" : "Newton solution") +
                    " (" + fmt(res.steady.c_A) + ", " + fmt(res.steady.c_B) + ", " + fmt(res.steady.theta) + ", " +
                    fmt(res.steady.theta_J) + ")");
    if (options.disturbance) {
        notes.push_back("w = " + fmt(options.w) +
                        " is added to the rate in model units; concentrations leave the physical range, so the "
                        "kinetic terms are evaluated at max(c, 0)");
    }
    if (res.config.substeps > 1) {
        notes.push_back("RK4 runs " + std::to_string(res.config.substeps) + " substeps per sample of " +
                        fmt(options.dt) + " to stay inside its stability interval");
    }
    if (m.ramp_tracking.samples == 0) {
        notes.push_back("ramp tracking window starts after t_end (7/alpha1 = " + fmt(7.0 / m.alpha[0]) + ")");
    }
    return res;
}

}  // namespace fdest::reactor
