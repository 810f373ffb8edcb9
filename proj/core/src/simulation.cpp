#include "fdest/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace fdest {

void validate_schedule(const FaultSchedule& schedule, std::size_t channels) {
    std::vector<bool> used(channels, false);
    for (const auto& ev : schedule) {
        if (ev.channel >= channels) throw InvalidSpec("fault event targets an unknown channel");
        if (used[ev.channel]) throw InvalidSpec("more than one fault event on channel " + std::to_string(ev.channel + 1));
        used[ev.channel] = true;
        if (!(ev.onset_time >= 0.0) || !std::isfinite(ev.onset_time)) throw InvalidSpec("fault onset time must be >= 0");
        if (ev.xo0.size() != ev.exo.order()) throw DimensionError("fault event x_o0 length does not match its exo-system");
        require_finite(ev.xo0, "fault event x_o0");
    }
}

DisturbanceSignal DisturbanceSignal::constant(std::size_t channel, double w) {
    if (!std::isfinite(w)) throw InvalidSpec("disturbance value must be finite");
    return {channel, "constant", [w](double) { return w; }};
}

DisturbanceSignal DisturbanceSignal::piecewise(std::size_t channel, std::vector<double> times,
                                               std::vector<double> values) {
    if (times.size() != values.size() || times.empty()) {
        throw InvalidSpec("piecewise disturbance needs matching, non-empty times and values");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(values[i])) throw InvalidSpec("piecewise disturbance is not finite");
        if (i > 0 && times[i] <= times[i - 1]) throw InvalidSpec("piecewise disturbance times must increase");
    }
    return {channel, "piecewise", [times = std::move(times), values = std::move(values)](double t) {
                const auto it = std::upper_bound(times.begin(), times.end(), t);
                if (it == times.begin()) return 0.0;
                return values[static_cast<std::size_t>(it - times.begin()) - 1];
            }};
}

DisturbanceSignal DisturbanceSignal::callback(std::size_t channel, std::function<double(double)> fn) {
    if (!fn) throw InvalidSpec("disturbance callback is not set");
    return {channel, "callback", std::move(fn)};
}

Vector measure(const ProcessModel& plant, const Vector& x, const Vector& f, const Vector& w) {
    Vector y = plant.H(x);
    for (std::size_t c = 0; c < plant.faults.size(); ++c) {
        const double fc = f(static_cast<Eigen::Index>(c));
        if (fc != 0.0) y += plant.faults[c].sensor(x) * fc;
    }
    for (std::size_t i = 0; i < plant.disturbances.size(); ++i) {
        const double wi = w(static_cast<Eigen::Index>(i));
        if (wi != 0.0) y += plant.disturbances[i].sensor(x) * wi;
    }
    return y;
}

namespace {

struct Layout {
    Eigen::Index n = 0;
    std::vector<Eigen::Index> xo_offset;
    std::vector<Eigen::Index> z_offset;
    Eigen::Index xo_total = 0;
    Eigen::Index z_total = 0;
    Eigen::Index total = 0;
};

class Cascade {
public:
    Cascade(const ProcessModel& plant, const FaultSchedule& schedule, const std::vector<DisturbanceSignal>& dist,
            const std::vector<ObserverSpec>& observers)
        : plant_(plant), schedule_(schedule), dist_(dist), observers_(observers), active_(schedule.size(), false) {
        lay_.n = static_cast<Eigen::Index>(plant.n);
        Eigen::Index off = lay_.n;
        for (const auto& ev : schedule) {
            lay_.xo_offset.push_back(off);
            off += ev.exo.order();
        }
        lay_.xo_total = off - lay_.n;
        for (const auto& ob : observers) {
            lay_.z_offset.push_back(off);
            off += ob.generator.order();
        }
        lay_.z_total = off - lay_.n - lay_.xo_total;
        lay_.total = off;
    }

    const Layout& layout() const { return lay_; }

    Vector faults(const Vector& s) const {
        Vector f = Vector::Zero(static_cast<Eigen::Index>(plant_.faults.size()));
        for (std::size_t e = 0; e < schedule_.size(); ++e) {
            if (!active_[e]) continue;
            const auto& ev = schedule_[e];
            f(static_cast<Eigen::Index>(ev.channel)) = ev.exo.q_row().dot(s.segment(lay_.xo_offset[e], ev.exo.order()));
        }
        return f;
    }

    Vector disturbances(double t) const {
        Vector w = Vector::Zero(static_cast<Eigen::Index>(plant_.disturbances.size()));
        for (const auto& d : dist_) {
            const double v = d.value(t);
            if (!std::isfinite(v)) throw EvaluationError("disturbance signal is not finite");
            w(static_cast<Eigen::Index>(d.channel)) += v;
        }
        return w;
    }

    Vector output(double t, const Vector& s) const { return measure(plant_, s.head(lay_.n), faults(s), disturbances(t)); }

    Vector rhs(double t, const Vector& s) const {
        const Vector x = s.head(lay_.n);
        const Vector f = faults(s);
        const Vector w = disturbances(t);
        Vector ds = Vector::Zero(lay_.total);
        Vector dx = plant_.F(x);
        for (std::size_t c = 0; c < plant_.faults.size(); ++c) {
            const double fc = f(static_cast<Eigen::Index>(c));
            if (fc != 0.0) dx += plant_.faults[c].process(x) * fc;
        }
        for (std::size_t i = 0; i < plant_.disturbances.size(); ++i) {
            const double wi = w(static_cast<Eigen::Index>(i));
            if (wi != 0.0) dx += plant_.disturbances[i].process(x) * wi;
        }
        ds.head(lay_.n) = dx;
        for (std::size_t e = 0; e < schedule_.size(); ++e) {
            if (!active_[e]) continue;
            const auto no = schedule_[e].exo.order();
            ds.segment(lay_.xo_offset[e], no) = schedule_[e].exo.R() * s.segment(lay_.xo_offset[e], no);
        }
        const Vector y = measure(plant_, x, f, w);
        for (std::size_t o = 0; o < observers_.size(); ++o) {
            const auto& gen = observers_[o].generator;
            ds.segment(lay_.z_offset[o], gen.order()) = gen.derivative(s.segment(lay_.z_offset[o], gen.order()), y);
        }
        return ds;
    }

    // Installs every pending event with onset <= t (+ slack).
    void install(double t, double slack, Vector& s) {
        for (std::size_t e = 0; e < schedule_.size(); ++e) {
            if (!active_[e] && schedule_[e].onset_time <= t + slack) {
                active_[e] = true;
                s.segment(lay_.xo_offset[e], schedule_[e].exo.order()) = schedule_[e].xo0;
            }
        }
    }

    std::optional<double> next_onset(double after, double before) const {
        std::optional<double> out;
        for (std::size_t e = 0; e < schedule_.size(); ++e) {
            const double on = schedule_[e].onset_time;
            if (!active_[e] && on > after && on < before && (!out || on < *out)) out = on;
        }
        return out;
    }

private:
    const ProcessModel& plant_;
    const FaultSchedule& schedule_;
    const std::vector<DisturbanceSignal>& dist_;
    const std::vector<ObserverSpec>& observers_;
    std::vector<bool> active_;
    Layout lay_;
};

}  // namespace

Trajectory simulate_cascade(const ProcessModel& plant, const FaultSchedule& schedule,
                            const std::vector<DisturbanceSignal>& disturbances,
                            const std::vector<ObserverSpec>& observers, const SimulationConfig& config) {
    plant.validate();
    validate_schedule(schedule, plant.faults.size());
    if (!(config.dt > 0.0) || !std::isfinite(config.dt)) throw InvalidSpec("time step must be positive");
    if (config.substeps < 1) throw InvalidSpec("substeps must be >= 1");
    if (!std::isfinite(config.t0) || !std::isfinite(config.t_end) || config.t_end < config.t0) {
        throw InvalidSpec("t_end must be finite and >= t0");
    }
    if (static_cast<std::size_t>(config.x0.size()) != plant.n) throw DimensionError("x0 has the wrong length");
    require_finite(config.x0, "x0");
    for (const auto& d : disturbances) {
        if (d.channel >= plant.disturbances.size()) throw InvalidSpec("disturbance signal targets an unknown channel");
        if (!d.value) throw InvalidSpec("disturbance signal is not set");
    }
    for (const auto& ob : observers) {
        if (ob.z0.size() != ob.generator.order()) throw DimensionError("observer " + ob.name + ": z0 has the wrong length");
        require_finite(ob.z0, "observer z0");
        if (!ob.generator.injection() && ob.generator.B.cols() != static_cast<Eigen::Index>(plant.p)) {
            throw DimensionError("observer " + ob.name + " expects a different number of outputs");
        }
    }

    Cascade cas(plant, schedule, disturbances, observers);
    const Layout& lay = cas.layout();

    Trajectory traj;
    for (const auto& ob : observers) traj.observer_names.push_back(ob.name);
    for (const auto& ch : plant.faults) traj.channel_names.push_back(ch.name);

    const double span = config.t_end - config.t0;
    const double slack = 1e-9 * config.dt;
    std::size_t steps = 0;
    if (span > 0.0) {
        steps = static_cast<std::size_t>(std::ceil(span / config.dt - 1e-9));
        if (steps == 0) steps = 1;
    }
    const std::size_t samples = span > 0.0 ? steps + 1 : 0;
    const auto rows = static_cast<Eigen::Index>(samples);
    const auto nf = static_cast<Eigen::Index>(plant.faults.size());
    const auto no = static_cast<Eigen::Index>(observers.size());
    traj.x.resize(rows, lay.n);
    traj.xo.resize(rows, lay.xo_total);
    traj.z.resize(rows, lay.z_total);
    traj.y.resize(rows, static_cast<Eigen::Index>(plant.p));
    traj.f.resize(rows, nf);
    traj.fhat.resize(rows, no);
    traj.t.reserve(samples);
    if (samples == 0) return traj;

    Vector s = Vector::Zero(lay.total);
    s.head(lay.n) = config.x0;
    for (std::size_t o = 0; o < observers.size(); ++o) {
        s.segment(lay.z_offset[o], observers[o].generator.order()) = observers[o].z0;
    }

    const OdeRhs rhs = [&cas](double t, const Vector& st) { return cas.rhs(t, st); };
    auto record = [&](double t, const Vector& st) {
        const auto r = static_cast<Eigen::Index>(traj.t.size());
        traj.t.push_back(t);
        traj.x.row(r) = st.head(lay.n).transpose();
        traj.xo.row(r) = st.segment(lay.n, lay.xo_total).transpose();
        traj.z.row(r) = st.segment(lay.n + lay.xo_total, lay.z_total).transpose();
        const Vector y = cas.output(t, st);
        traj.y.row(r) = y.transpose();
        traj.f.row(r) = cas.faults(st).transpose();
        for (std::size_t o = 0; o < observers.size(); ++o) {
            const auto& gen = observers[o].generator;
            traj.fhat(r, static_cast<Eigen::Index>(o)) = gen.estimate(st.segment(lay.z_offset[o], gen.order()), y);
        }
    };
    auto advance = [&](double from, double to, Vector& st) {
        const int m = config.substeps;
        const double h = (to - from) / m;
        for (int i = 0; i < m; ++i) {
            const double a = from + i * h;
            try {
                st = rk4_step(rhs, a, st, i + 1 == m ? to - a : h);
            } catch (const EvaluationError& e) {
                std::ostringstream os;
                os << "cascade diverged on the step to t=" << to << ": " << e.what();
                throw DivergedSimulation(os.str(), from);
            }
        }
        if (!st.allFinite()) {
            std::ostringstream os;
            os << "cascade state became non-finite on the step to t=" << to;
            throw DivergedSimulation(os.str(), from);
        }
    };

    double t = config.t0;
    cas.install(t, slack, s);
    record(t, s);
    for (std::size_t k = 1; k <= steps; ++k) {
        double next = config.t0 + static_cast<double>(k) * config.dt;
        if (k == steps) next = config.t_end;
        while (const auto on = cas.next_onset(t + slack, next - slack)) {
            advance(t, *on, s);
            t = *on;
            cas.install(t, 0.0, s);
        }
        advance(t, next, s);
        t = next;
        cas.install(t, slack, s);
        record(t, s);
    }
    return traj;
}

double analytic_error(const ResidualGenerator& gen, const Vector& e0, double t) {
    if (e0.size() != gen.order()) throw DimensionError("initial error has the wrong length");
    return (gen.C * matrix_exponential(gen.A, t) * e0)(0);
}

std::optional<double> first_detection(const Trajectory& traj, std::size_t observer, const DetectionRule& rule) {
    if (static_cast<Eigen::Index>(observer) >= traj.fhat.cols()) throw DimensionError("observer index out of range");
    std::optional<double> start;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = traj.t[k];
        if (t < rule.arm_time) continue;
        if (std::abs(traj.fhat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(observer))) > rule.threshold) {
            if (!start) start = t;
            if (t - *start >= rule.dwell) return t;
        } else {
            start.reset();
        }
    }
    return std::nullopt;
}

bool flagged_at(const Trajectory& traj, std::size_t observer, const DetectionRule& rule, double t) {
    if (static_cast<Eigen::Index>(observer) >= traj.fhat.cols()) throw DimensionError("observer index out of range");
    std::optional<double> start;
    double last = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < traj.size() && traj.t[k] <= t; ++k) {
        last = traj.t[k];
        if (last < rule.arm_time) continue;
        if (std::abs(traj.fhat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(observer))) > rule.threshold) {
            if (!start) start = last;
        } else {
            start.reset();
        }
    }
    return start && last - *start >= rule.dwell;
}

std::vector<std::size_t> BankResult::isolation_at(double t) const {
    std::vector<std::size_t> out;
    for (std::size_t o = 0; o < rules.size(); ++o) {
        if (flagged_at(trajectory, o, rules[o], t)) out.push_back(o);
    }
    return out;
}

std::vector<std::pair<std::size_t, double>> BankResult::estimates_at(double t) const {
    std::vector<std::pair<std::size_t, double>> out;
    const auto it = std::upper_bound(trajectory.t.begin(), trajectory.t.end(), t);
    if (it == trajectory.t.begin()) return out;
    const auto row = static_cast<Eigen::Index>(it - trajectory.t.begin()) - 1;
    for (std::size_t o : isolation_at(t)) out.emplace_back(o, trajectory.fhat(row, static_cast<Eigen::Index>(o)));
    return out;
}

DetectionRule calibrate_rule(const Trajectory& calibration, std::size_t observer, double arm_time, double dt) {
    const auto col = static_cast<Eigen::Index>(observer);
    if (col >= calibration.fhat.cols()) throw DimensionError("observer index out of range");
    double peak = 0.0;
    bool any = false;
    for (std::size_t k = 0; k < calibration.size(); ++k) {
        if (calibration.t[k] < arm_time) continue;
        any = true;
        peak = std::max(peak, std::abs(calibration.fhat(static_cast<Eigen::Index>(k), col)));
    }
    if (!any) {
        for (std::size_t k = 0; k < calibration.size(); ++k) {
            peak = std::max(peak, std::abs(calibration.fhat(static_cast<Eigen::Index>(k), col)));
        }
    }
    return {std::max(3.0 * peak, 1e-6), 10.0 * dt, arm_time};
}

BankResult run_bank(const ProcessModel& plant, const FaultSchedule& schedule,
                    const std::vector<DisturbanceSignal>& disturbances, const std::vector<ObserverSpec>& bank,
                    const SimulationConfig& config, std::optional<std::vector<DetectionRule>> rules) {
    BankResult out;
    out.trajectory = simulate_cascade(plant, schedule, disturbances, bank, config);
    if (rules) {
        if (rules->size() != bank.size()) throw InvalidSpec("one detection rule per observer is required");
        out.rules = std::move(*rules);
    } else {
        const Trajectory calib = simulate_cascade(plant, {}, disturbances, bank, config);
        for (std::size_t o = 0; o < bank.size(); ++o) {
            const double rate = spectrum(bank[o].generator.A).stability_margin;
            const double arm = config.t0 + 5.0 / rate;
            out.rules.push_back(calibrate_rule(calib, o, arm, config.dt));
        }
    }
    for (const auto& r : out.rules) {
        if (!(r.threshold > 0.0) || !(r.dwell >= 0.0)) throw InvalidSpec("detection rule needs threshold > 0, dwell >= 0");
    }
    for (std::size_t o = 0; o < bank.size(); ++o) out.first_flag.push_back(first_detection(out.trajectory, o, out.rules[o]));
    return out;
}

ProbeResult decoupling_probe(const ProcessModel& plant, const FaultSchedule& schedule,
                             const std::vector<DisturbanceSignal>& disturbances_on,
                             const std::vector<DisturbanceSignal>& disturbances_off, const ObserverSpec& observer,
                             const SimulationConfig& config) {
    const std::vector<ObserverSpec> bank{observer};
    const Trajectory on = simulate_cascade(plant, schedule, disturbances_on, bank, config);
    const Trajectory off = simulate_cascade(plant, schedule, disturbances_off, bank, config);
    ProbeResult res;
    for (std::size_t k = 0; k < on.size(); ++k) {
        const double d = std::abs(on.fhat(static_cast<Eigen::Index>(k), 0) - off.fhat(static_cast<Eigen::Index>(k), 0));
        if (d > res.max_difference) {
            res.max_difference = d;
            res.time_of_max = on.t[k];
        }
    }
    return res;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::optional<Vector>& state_offset) {
    if (state_offset && state_offset->size() != traj.x.cols()) throw DimensionError("state offset has the wrong length");
    auto cols = [&os](const char* prefix, Eigen::Index count) {
        for (Eigen::Index i = 0; i < count; ++i) os << ',' << prefix << (i + 1);
    };
    os << 't';
    cols("x", traj.x.cols());
    cols("xo", traj.xo.cols());
    cols("z", traj.z.cols());
    cols("y", traj.y.cols());
    cols("f", traj.f.cols());
    cols("fhat", traj.fhat.cols());
    os << '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        os << format_number(traj.t[k]);
        for (Eigen::Index i = 0; i < traj.x.cols(); ++i) {
            os << ',' << format_number(traj.x(r, i) + (state_offset ? (*state_offset)(i) : 0.0));
        }
        for (const Matrix* m : {&traj.xo, &traj.z, &traj.y, &traj.f, &traj.fhat}) {
            for (Eigen::Index i = 0; i < m->cols(); ++i) os << ',' << format_number((*m)(r, i));
        }
        os << '\n';
    }
}

}  // namespace fdest
