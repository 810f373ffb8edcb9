#include "fdest_cli/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fdest/condition_checker.hpp"
#include "fdest/reactor.hpp"
#include "fdest/simulation.hpp"
#include "fdest/synthesis.hpp"
#include "fdest_cli/json_io.hpp"

namespace fdest::cli {

namespace fs = std::filesystem;

namespace {

/// Everything the commands need about the monitored process for one observer.
struct Problem {
    ProcessModel process;
    std::size_t fault = 0;
    ExoSystem exo = ExoSystem::make_step();
    std::optional<LinearPlant> linear;
    std::optional<ExtendedSystem> ext;
    reactor::ReactorParams params;
    reactor::ReactorState steady;
};

reactor::ReactorParams builtin_params(const BuiltinSpec& b) {
    reactor::ReactorParams p;
    p.units = b.paper_literal ? reactor::UnitConvention::PaperLiteral : reactor::UnitConvention::PerSecond;
    return p;
}

Problem make_problem(const ScenarioConfig& cfg) {
    Problem pr;
    if (cfg.plant.builtin) {
        pr.params = builtin_params(cfg.plant.reactor);
        pr.steady = cfg.plant.reactor.steady == reactor::SteadyStateSource::Paper
                        ? reactor::paper_steady_state()
                        : reactor::find_steady_state(pr.params).state;
        pr.process = reactor::reactor_process(pr.params, pr.steady);
        pr.fault = static_cast<std::size_t>(cfg.plant.reactor.observer - 1);
        pr.exo = pr.fault == 0 ? ExoSystem::make_ramp() : ExoSystem::make_step();
        pr.ext = reactor::reactor_extended(pr.params, pr.steady, pr.fault);
        return pr;
    }
    pr.linear = cfg.plant.linear;
    pr.linear->validate();
    pr.process = process_from_linear(*pr.linear, cfg.plant.box);
    pr.exo = cfg.exo->exo;
    pr.ext = extend(pr.process.view_for_fault(0), pr.exo);
    return pr;
}

fs::path prepare_output(const GlobalOptions& g, const ScenarioConfig* cfg) {
    const fs::path dir = output_directory(g, cfg ? cfg->output : std::nullopt);
    fs::create_directories(dir);
    return dir;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

std::string matrix_text(const Matrix& m) {
    std::ostringstream os;
    os << std::setprecision(12);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << "  [";
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? ", " : "") << m(i, j);
        os << "]\n";
    }
    return os.str();
}

std::string design_report(const Design& d) {
    const ParitySolution& s = d.solution;
    std::ostringstream os;
    os << "order s = " << s.s << " (" << (s.mode == AlphaMode::Fixed ? "fixed" : "free") << " alpha, " << s.path
       << " path)\n";
    os << "alpha =";
    for (double a : s.alpha) os << ' ' << std::setprecision(12) << a;
    os << "\neigenvalues:";
    for (const auto& l : s.spectrum.eigenvalues) os << ' ' << fmt(l.real()) << (l.imag() >= 0 ? "+" : "") << fmt(l.imag()) << 'i';
    os << "\nhurwitz: " << (s.spectrum.hurwitz ? "yes" : "no") << ", slowest decay rate " << fmt(s.spectrum.stability_margin)
       << "\nparity equation residual: " << fmt(s.equation_residual) << '\n';
    if (d.exo_kind == ExoKind::Ramp) {
        const auto rc = check_ramp_constraint(s.alpha);
        os << "ramp ratio: sum 1/lambda = " << fmt(rc.reciprocal_sum) << ", -alpha_{s-1}/alpha_s = " << fmt(rc.ratio)
           << ", relative error " << fmt(rc.relative_error) << (rc.satisfied ? " (ok)" : " (VIOLATED)") << '\n';
    }
    for (std::size_t j = 0; j < s.v.size(); ++j) os << "v" << j << " =\n" << matrix_text(s.v[j]);
    os << "A =\n" << matrix_text(d.generator.A) << "B =\n" << matrix_text(d.generator.B) << "C =\n"
       << matrix_text(d.generator.C) << "D =\n" << matrix_text(d.generator.D);
    for (const auto& n : d.notes) os << "note: " << n << '\n';
    return os.str();
}

std::string point_text(const Vector& p) {
    std::ostringstream os;
    os << '(';
    for (Eigen::Index i = 0; i < p.size(); ++i) os << (i ? ", " : "") << fmt(p(i));
    os << ')';
    return os.str();
}

std::vector<DisturbanceSignal> disturbances_from(const SimulationSpec& sim) {
    std::vector<DisturbanceSignal> out;
    for (const auto& d : sim.disturbances) {
        if (d.kind == "constant") {
            out.push_back(DisturbanceSignal::constant(d.channel, d.value));
        } else {
            out.push_back(DisturbanceSignal::piecewise(d.channel, d.times, d.values));
        }
    }
    return out;
}

Vector tmap_at(const Problem& pr, const ParitySolution& sol, const Vector& x0) {
    const Vector xo = Vector::Zero(pr.exo.order());
    if (pr.linear) {
        Vector point(x0.size() + xo.size());
        point << x0, xo;
        return linear_tmap(*pr.linear, pr.exo, sol) * point;
    }
    return build_tmap(*pr.ext, sol, LieEngine{})(x0, xo);
}

json steady_state_header(const reactor::ScenarioResult& r) {
    json steady = {r.steady.c_A, r.steady.c_B, r.steady.theta, r.steady.theta_J};
    return steady;
}

}  // namespace

fs::path output_directory(const GlobalOptions& g, const std::optional<std::string>& from_config) {
    if (g.output) return *g.output;
    if (from_config) return *from_config;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return ".";
}

int cmd_design(const ScenarioConfig& cfg, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
    const Problem pr = make_problem(cfg);
    Design d;
    d.exo_kind = pr.exo.kind();
    if (cfg.plant.builtin) {
        d.solution = pr.fault == 0 ? reactor::parity_observer1(pr.params)
                                   : reactor::parity_observer2(pr.params, cfg.plant.reactor.alpha);
        if (pr.fault == 0) {
            d.notes.push_back("alpha1 is forced to F/V = " + fmt(pr.params.flow_rate()) + " by the ramp fault model");
        }
        d.notes.push_back("units: " + std::string(reactor::to_string(pr.params.units)));
    } else {
        SynthesisOptions opts;
        opts.seed = g.seed.value_or(cfg.seed);
        opts.candidate_budget = cfg.design.candidate_budget;
        const ParityResult res = solve_parity_linear(*pr.linear, pr.exo, cfg.design.s, cfg.design.alpha, opts);
        if (const auto* fail = std::get_if<SynthesisFailure>(&res)) {
            err << "no solution: " << fail->message << '\n';
            return kNoSolution;
        }
        d.solution = std::get<ParitySolution>(res);
        if (d.solution.mode == AlphaMode::Free) {
            d.notes.push_back("alpha chosen as the Hurwitz candidate with the largest stability margin out of " +
                              std::to_string(d.solution.candidates_tried) +
                              " tried; v is the minimum-norm solution for that alpha");
        }
    }
    d.generator = build_observer(d.solution);
    const fs::path dir = prepare_output(g, &cfg);
    write_text(dir / "design.json", dump(design_document(d)));
    const std::string report = design_report(d);
    write_text(dir / "design.txt", report);
    out << report << "wrote " << (dir / "design.json").string() << '\n';
    return kOk;
}

int cmd_check(const ScenarioConfig& cfg, const fs::path& design_path, const GlobalOptions& g, std::ostream& out,
              std::ostream&) {
    const Problem pr = make_problem(cfg);
    const Design d = load_design(design_path);
    if (d.exo_kind != pr.exo.kind()) throw ConfigError(design_path.string() + ": design was made for another exo-system");
    if (d.solution.v.front().size() != static_cast<Eigen::Index>(pr.ext->p())) {
        throw ConfigError(design_path.string() + ": design has the wrong number of outputs");
    }
    CheckOptions opts;
    opts.samples = g.samples.value_or(cfg.check.samples);
    opts.tol = g.tol.value_or(cfg.check.tol);
    opts.seed = g.seed.value_or(cfg.seed);
    opts.fault_scale = cfg.check.fault_scale;
    const LieEngine lie(cfg.check.max_order);
    lie.require_order(d.solution.s, true);

    std::vector<CheckReport> reports;
    reports.push_back(check_existence(*pr.ext, d.solution, lie, opts));
    reports.push_back(check_decoupling(*pr.ext, d.solution, lie, opts));
    reports.push_back(check_manifold(*pr.ext, d.solution, build_tmap(*pr.ext, d.solution, lie), opts));
    try {
        reports.push_back(check_special_cases(*pr.ext, d.solution, lie, SpecialCase::Auto, opts));
    } catch (const InvalidSpec&) {
        // No split structure applies to this plant.
    }
    bool all = true;
    json doc = {{"schema", 1}, {"kind", "fdest-check"}, {"design", design_path.string()}, {"seed", opts.seed}};
    doc["reports"] = json::array();
    for (const auto& r : reports) {
        all = all && r.passed;
        doc["reports"].push_back(to_json(r));
        out << std::left << std::setw(28) << r.condition << (r.passed ? "PASS" : "FAIL") << "  max " << fmt(r.max_residual)
            << "  tol " << fmt(r.tolerance) << "  floor " << fmt(r.noise_floor) << '\n';
        if (!r.passed) out << "  worst sample " << r.argmax_index << " at " << point_text(r.argmax_point) << '\n';
    }
    doc["passed"] = all;
    const fs::path dir = prepare_output(g, &cfg);
    write_text(dir / "check.json", dump(doc));
    return all ? kOk : kCheckFailed;
}

int cmd_simulate(const ScenarioConfig& cfg, const fs::path& design_path, const GlobalOptions& g, std::ostream& out,
                 std::ostream&) {
    const Problem pr = make_problem(cfg);
    const Design d = load_design(design_path);
    if (d.exo_kind != pr.exo.kind()) throw ConfigError(design_path.string() + ": design was made for another exo-system");
    const SimulationSpec& sim = cfg.simulation;
    SimulationConfig sc;
    sc.t_end = sim.t_end;
    sc.dt = sim.dt;
    sc.substeps = sim.substeps;
    sc.x0 = sim.x0.value_or(Vector::Zero(static_cast<Eigen::Index>(pr.process.n)));
    FaultSchedule schedule;
    if (cfg.exo) schedule.push_back({pr.fault, cfg.exo->exo, cfg.exo->onset_time, cfg.exo->xo0});
    const Vector err0 = sim.init_error.value_or(Vector::Zero(d.solution.s));
    const ObserverSpec obs{"observer", d.generator, tmap_at(pr, d.solution, sc.x0) + err0, pr.fault};
    const Trajectory tr = simulate_cascade(pr.process, schedule, disturbances_from(sim), {obs}, sc);

    const fs::path dir = prepare_output(g, &cfg);
    std::ostringstream csv;
    write_trajectory_csv(csv, tr);
    write_text(dir / "trajectory.csv", csv.str());
    json meta = {{"schema", 1},
                 {"kind", "fdest-trajectory"},
                 {"config", cfg.raw},
                 {"design", design_document(d)},
                 {"seed", g.seed.value_or(cfg.seed)},
                 {"samples", tr.size()},
                 {"z0", to_json(obs.z0)}};
    write_text(dir / "trajectory.json", dump(meta));
    out << "simulated " << tr.size() << " samples; wrote " << (dir / "trajectory.csv").string() << '\n';
    return kOk;
}

int cmd_reactor(const ReactorFlags& flags, const GlobalOptions& g, std::ostream& out, std::ostream&) {
    reactor::ScenarioOptions o;
    o.params.units = flags.paper_literal ? reactor::UnitConvention::PaperLiteral : reactor::UnitConvention::PerSecond;
    if (flags.t_end) o.t_end = *flags.t_end;
    if (flags.dt) o.dt = *flags.dt;
    if (flags.alpha2) o.alpha2 = *flags.alpha2;
    if (flags.substeps) o.substeps = *flags.substeps;
    o.disturbance = !flags.no_disturbance;
    o.faults = !flags.no_faults;
    if (flags.computed_steady_state) o.steady_source = reactor::SteadyStateSource::Computed;
    const reactor::ScenarioResult r = reactor::run_paper_scenario(o);
    const Trajectory& tr = r.bank.trajectory;

    const fs::path dir = prepare_output(g, nullptr);
    std::ostringstream csv;
    write_trajectory_csv(csv, tr, flags.absolute ? std::optional<Vector>(r.steady.vec()) : std::nullopt);
    write_text(dir / "reactor_trajectory.csv", csv.str());

    std::ostringstream est;
    est << "# t f1 fhat1 f2 fhat2\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        est << format_number(tr.t[k]) << ' ' << format_number(tr.f(i, 0)) << ' ' << format_number(tr.fhat(i, 0)) << ' '
            << format_number(tr.f(i, 1)) << ' ' << format_number(tr.fhat(i, 1)) << '\n';
    }
    write_text(dir / "estimates.dat", est.str());

    const auto& m = r.metrics;
    auto window = [](const reactor::WindowMetric& w) {
        return json{{"t_from", w.t_from}, {"t_to", std::isfinite(w.t_to) ? json(w.t_to) : json("end")},
                    {"samples", w.samples}, {"max_abs_error", w.max_abs_error}, {"bound", w.bound}, {"passed", w.passed}};
    };
    json decay = json::array();
    for (const auto& dm : m.decay) {
        decay.push_back({{"samples", dm.samples}, {"max_relative_error", dm.max_relative_error},
                         {"max_excess", dm.max_excess}, {"roundoff_floor", dm.floor}, {"passed", dm.passed}});
    }
    json rules = json::array();
    for (std::size_t i = 0; i < r.bank.rules.size(); ++i) {
        const auto& rule = r.bank.rules[i];
        rules.push_back({{"observer", r.observers[i].name}, {"threshold", rule.threshold}, {"dwell", rule.dwell},
                         {"arm_time", rule.arm_time},
                         {"first_flag", r.bank.first_flag[i] ? json(*r.bank.first_flag[i]) : json(nullptr)}});
    }
    json observers = json::array();
    for (const auto& ob : r.observers) {
        observers.push_back({{"name", ob.name}, {"A", to_json(ob.generator.A)}, {"B", to_json(ob.generator.B)},
                             {"C", to_json(ob.generator.C)}, {"D", to_json(ob.generator.D)}, {"z0", to_json(ob.z0)}});
    }
    json report = {{"schema", 1},
                   {"kind", "fdest-reactor"},
                   {"units", std::string(reactor::to_string(o.params.units))},
                   {"t_end", o.t_end},
                   {"dt", o.dt},
                   {"substeps", r.config.substeps},
                   {"disturbance", o.disturbance ? o.w : 0.0},
                   {"steady_state", steady_state_header(r)},
                   {"alpha", {m.alpha[0], m.alpha[1]}},
                   {"observers", observers},
                   {"detection", rules},
                   {"metrics",
                    {{"decay", decay},
                     {"step_tracking", window(m.step_tracking)},
                     {"ramp_tracking", window(m.ramp_tracking)},
                     {"cross_decoupling", window(m.cross_decoupling)}}},
                   {"samples", tr.size()},
                   {"notes", r.notes}};
    write_text(dir / "reactor_report.json", dump(report));

    out << "reactor scenario (" << reactor::to_string(o.params.units) << "), " << tr.size() << " samples\n";
    for (std::size_t j = 0; j < 2; ++j) {
        out << "  decay observer " << j + 1 << ": " << (m.decay[j].passed ? "ok" : "off") << " (worst excess "
            << fmt(m.decay[j].max_excess) << ")\n";
    }
    out << "  step tracking  max |fhat2 - f2| = " << fmt(m.step_tracking.max_abs_error) << " over "
        << m.step_tracking.samples << " samples\n";
    out << "  ramp tracking  max |fhat1 - f1| = " << fmt(m.ramp_tracking.max_abs_error) << " over "
        << m.ramp_tracking.samples << " samples\n";
    out << "  observer 2 before the f2 onset: max |fhat2| = " << fmt(m.cross_decoupling.max_abs_error)
        << " (threshold " << fmt(m.cross_decoupling.bound) << ")\n";
    for (const auto& n : r.notes) out << "  note: " << n << '\n';
    out << "wrote " << dir.string() << "/{reactor_trajectory.csv,reactor_report.json,estimates.dat}\n";
    return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fault estimation with disturbance-decoupled functional observers", "fdest"};
    app.require_subcommand(1);
    GlobalOptions g;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    double tol = 0.0;
    std::string output;
    auto* seed_opt = app.add_option("--seed", seed, "Seed for sampling and candidate search")->check(CLI::NonNegativeNumber);
    auto* samples_opt = app.add_option("--samples", samples, "Samples per condition check")->check(CLI::PositiveNumber);
    auto* tol_opt = app.add_option("--tol", tol, "Relative check tolerance")->check(CLI::PositiveNumber);
    auto* output_opt = app.add_option("--output,-o", output, "Output directory (default $FDEST_OUTPUT_DIR or .)");
    app.fallthrough();

    std::string config_path;
    std::string design_path;
    auto* design = app.add_subcommand("design", "Solve for parity vectors and build the residual generator");
    design->add_option("config", config_path, "Scenario config (JSON)")->required();

    auto* check = app.add_subcommand("check", "Verify the design conditions by sampling");
    check->add_option("config", config_path, "Scenario config (JSON)")->required();
    check->add_option("--design", design_path, "Design file written by `design`")->required();

    auto* simulate = app.add_subcommand("simulate", "Simulate plant, fault generator and observer");
    simulate->add_option("config", config_path, "Scenario config (JSON)")->required();
    simulate->add_option("--design", design_path, "Design file written by `design`")->required();

    ReactorFlags rf;
    double t_end = 0.0;
    double dt = 0.0;
    double alpha2 = 0.0;
    int substeps = 0;
    auto* reactor = app.add_subcommand("reactor", "Run the two-fault CSTR scenario");
    reactor->add_flag("--paper-literal", rf.paper_literal, "Use the parameter table verbatim (no l/min conversion)");
    auto* t_end_opt = reactor->add_option("--t-end", t_end, "End time")->check(CLI::NonNegativeNumber);
    auto* dt_opt = reactor->add_option("--dt", dt, "Sample interval")->check(CLI::PositiveNumber);
    auto* alpha_opt = reactor->add_option("--alpha2", alpha2, "Gain of the jacket-fault observer")->check(CLI::PositiveNumber);
    auto* sub_opt = reactor->add_option("--substeps", substeps, "RK4 steps per sample (default: automatic)")
                        ->check(CLI::PositiveNumber);
    reactor->add_flag("--no-disturbance", rf.no_disturbance, "Drop the rate disturbance");
    reactor->add_flag("--no-faults", rf.no_faults, "Fault-free run");
    reactor->add_flag("--computed-steady-state", rf.computed_steady_state, "Linearise about the Newton steady state");
    reactor->add_flag("--absolute", rf.absolute, "Write absolute states instead of deviations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "fdest: " << e.what() << '\n';
        return kConfigError;
    }
    if (*seed_opt) g.seed = seed;
    if (*samples_opt) g.samples = samples;
    if (*tol_opt) g.tol = tol;
    if (*output_opt) g.output = output;
    if (*t_end_opt) rf.t_end = t_end;
    if (*dt_opt) rf.dt = dt;
    if (*alpha_opt) rf.alpha2 = alpha2;
    if (*sub_opt) rf.substeps = substeps;

    try {
        if (design->parsed()) return cmd_design(load_config(config_path), g, out, err);
        if (check->parsed()) return cmd_check(load_config(config_path), design_path, g, out, err);
        if (simulate->parsed()) return cmd_simulate(load_config(config_path), design_path, g, out, err);
        if (reactor->parsed()) return cmd_reactor(rf, g, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const UnsupportedOrder& e) {
        err << "unsupported: " << e.what() << '\n';
        return kUnsupported;
    } catch (const NoConvergence& e) {
        err << "no solution: " << e.what() << '\n';
        return kNoSolution;
    } catch (const InvalidSpec& e) {
        err << "invalid specification: " << e.what() << '\n';
        return kConfigError;
    } catch (const DimensionError& e) {
        err << "invalid specification: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kCheckFailed;
    }
    return kConfigError;
}

}  // namespace fdest::cli
