#include "fdest/condition_checker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace fdest {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

using RowEval = std::function<std::vector<LieValue>(const Vector&)>;

std::vector<unsigned> first_primes(std::size_t count) {
    std::vector<unsigned> primes;
    for (unsigned c = 2; primes.size() < count; ++c) {
        bool prime = true;
        for (unsigned q : primes) {
            if (q * q > c) break;
            if (c % q == 0) {
                prime = false;
                break;
            }
        }
        if (prime) primes.push_back(c);
    }
    return primes;
}

double radical_inverse(std::size_t index, unsigned base) {
    double result = 0.0;
    double f = 1.0 / base;
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= base;
    }
    return result;
}

// Center plus corners (or axis points in high dimension).
std::vector<Vector> probe_points(const OperatingBox& box) {
    const Eigen::Index dim = box.lower.size();
    std::vector<Vector> pts{box.center()};
    if (dim <= 10) {
        const std::size_t corners = std::size_t{1} << dim;
        for (std::size_t mask = 0; mask < corners; ++mask) {
            Vector c(dim);
            for (Eigen::Index d = 0; d < dim; ++d) c(d) = (mask >> d) & 1U ? box.upper(d) : box.lower(d);
            pts.push_back(c);
        }
    } else {
        for (Eigen::Index d = 0; d < dim; ++d) {
            Vector lo = box.center();
            Vector hi = box.center();
            lo(d) = box.lower(d);
            hi(d) = box.upper(d);
            pts.push_back(lo);
            pts.push_back(hi);
        }
    }
    return pts;
}

bool use_analytic(const LieEngine& lie, const ParityMap& parity) { return lie.has_analytic() && parity.is_constant(); }

LieValue output_term(const ExtendedSystem& ext, const ParityMap& parity, std::size_t j, int k, const LieEngine& lie,
                     const Vector& point) {
    if (use_analytic(lie, parity)) return {parity.row(j).dot(lie.analytic().output(k, point)), 0.0, 0.0};
    return lie.derivative(parity.composed(j, ext.He()), ext.Fe(), k, point);
}

LieValue disturbance_term(const ExtendedSystem& ext, const ParityMap& parity, std::size_t i, std::size_t j, int k,
                          const VectorField& direction, const LieEngine& lie, const Vector& point) {
    if (use_analytic(lie, parity) && lie.analytic().disturbance) {
        return {parity.row(j).dot(lie.analytic().disturbance(i, k, point)), 0.0, 0.0};
    }
    return lie.derivative_then(parity.composed(j, ext.He()), ext.Fe(), k, direction, point);
}

void add(LieValue& acc, const LieValue& v) {
    acc.value += v.value;
    acc.truncation += v.truncation;
    acc.noise += v.noise;
}

CheckReport run_sampled(std::string condition, const std::vector<std::string>& labels, const RowEval& eval,
                        const std::vector<Vector>& samples, const std::vector<Vector>& probes, double tol_abs,
                        double scale, double safety) {
    CheckReport rep;
    rep.condition = std::move(condition);
    rep.samples = samples.size();
    rep.tolerance = tol_abs;
    rep.output_scale = scale;
    for (const auto& l : labels) rep.rows.push_back({l, 0.0, 0});
    rep.max_residual = 0.0;

    for (std::size_t idx = 0; idx < samples.size(); ++idx) {
        const auto vals = eval(samples[idx]);
        if (vals.size() != labels.size()) throw InvalidSpec("condition row count mismatch");
        for (std::size_t r = 0; r < vals.size(); ++r) {
            const double a = std::abs(vals[r].value);
            if (!std::isfinite(a)) throw EvaluationError("condition residual is not finite at sample " + std::to_string(idx));
            if (a > rep.rows[r].max_residual) {
                rep.rows[r].max_residual = a;
                rep.rows[r].argmax_index = idx;
            }
            if (a > rep.max_residual) {
                rep.max_residual = a;
                rep.argmax_index = idx;
            }
        }
    }
    if (!samples.empty()) rep.argmax_point = samples[rep.argmax_index];

    double floor = 0.0;
    for (const Vector& p : probes) {
        for (const auto& v : eval(p)) floor = std::max(floor, v.error());
    }
    rep.noise_floor = safety * floor;
    rep.passed = rep.max_residual <= rep.tolerance + rep.noise_floor;
    return rep;
}

struct SamplingSetup {
    std::vector<Vector> samples;
    std::vector<Vector> probes;
    double scale = 1.0;
};

SamplingSetup extended_setup(const ExtendedSystem& ext, const CheckOptions& options) {
    const OperatingBox box = extended_box(ext, options);
    SamplingSetup s;
    s.samples = halton_points(box.lower, box.upper, options.samples, options.seed);
    s.probes = probe_points(box);
    s.scale = output_scale(ext, box);
    return s;
}

SamplingSetup plant_setup(const ExtendedSystem& ext, const CheckOptions& options) {
    SamplingSetup s;
    const OperatingBox& box = ext.plant().box;
    s.samples = halton_points(box.lower, box.upper, options.samples, options.seed);
    s.probes = probe_points(box);
    s.scale = output_scale(ext, extended_box(ext, options));
    return s;
}

void require_options(const CheckOptions& options) {
    if (!(options.tol >= 0.0) || !std::isfinite(options.tol)) throw InvalidSpec("tolerance must be finite and >= 0");
    if (!(options.fault_scale > 0.0)) throw InvalidSpec("fault scale must be positive");
}

void require_parity(const ExtendedSystem& ext, const ParityMap& parity, std::span<const double> alpha) {
    if (parity.outputs() != ext.p()) throw DimensionError("parity map and plant disagree on p");
    if (static_cast<int>(alpha.size()) != parity.order()) throw DimensionError("alpha length must equal s");
}

// K_i sampled at the probes; output-injection designs support only K_i = 0.
bool sensor_gain_vanishes(const VectorField& k, const std::vector<Vector>& xs) {
    for (const Vector& x : xs) {
        if (k(x).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
}

Vector embed_state(const ExtendedSystem& ext, const Vector& x) {
    return ext.stack(x, Vector::Zero(static_cast<Eigen::Index>(ext.n_o())));
}

}  // namespace

std::vector<Vector> halton_points(const Vector& lower, const Vector& upper, std::size_t count, std::uint64_t seed) {
    if (lower.size() != upper.size()) throw DimensionError("sampling bounds differ in length");
    const auto dim = static_cast<std::size_t>(lower.size());
    const auto primes = first_primes(dim);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> shift(dim);
    for (auto& s : shift) s = unit(rng);

    std::vector<Vector> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vector p(lower.size());
        for (std::size_t d = 0; d < dim; ++d) {
            double u = radical_inverse(i + 1, primes[d]) + shift[d];
            u -= std::floor(u);
            const auto di = static_cast<Eigen::Index>(d);
            p(di) = lower(di) + u * (upper(di) - lower(di));
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

OperatingBox extended_box(const ExtendedSystem& ext, const CheckOptions& options) {
    const auto n = static_cast<Eigen::Index>(ext.n());
    const auto no = static_cast<Eigen::Index>(ext.n_o());
    Vector hw = options.exo_half_width.value_or(Vector::Constant(no, 10.0 * options.fault_scale));
    if (hw.size() != no) throw DimensionError("exo half-width has the wrong length");
    if ((hw.array() < 0.0).any()) throw InvalidSpec("exo half-width must be non-negative");
    OperatingBox box;
    box.lower.resize(n + no);
    box.upper.resize(n + no);
    box.lower << ext.plant().box.lower, -hw;
    box.upper << ext.plant().box.upper, hw;
    return box;
}

double output_scale(const ExtendedSystem& ext, const OperatingBox& box) {
    double scale = 0.0;
    for (const Vector& p : probe_points(box)) scale = std::max(scale, ext.He()(p).cwiseAbs().maxCoeff());
    return scale > 0.0 ? scale : 1.0;
}

LieValue existence_residual(const ExtendedSystem& ext, const ParityMap& parity, std::span<const double> alpha,
                            const LieEngine& lie, const Vector& point) {
    require_parity(ext, parity, alpha);
    const int s = parity.order();
    LieValue acc;
    for (int k = 0; k <= s; ++k) add(acc, output_term(ext, parity, static_cast<std::size_t>(k), k, lie, point));
    const Vector xo = ext.exo_part(point);
    acc.value += (ext.exo().Q() * apply_char_poly(ext.exo(), alpha) * xo)(0);
    return acc;
}

LieValue detection_residual(const NonlinearPlant& plant, const ParityMap& parity, const LieEngine& lie,
                            const Vector& x) {
    if (parity.outputs() != plant.p) throw DimensionError("parity map and plant disagree on p");
    LieValue acc;
    for (int k = 0; k <= parity.order(); ++k) {
        add(acc, lie.derivative(parity.composed(static_cast<std::size_t>(k), plant.H), plant.F, k, x));
    }
    return acc;
}

std::vector<LieValue> decoupling_residuals(const ExtendedSystem& ext, const ParityMap& parity, std::size_t i,
                                           const LieEngine& lie, const Vector& point) {
    const int s = parity.order();
    const VectorField dir = ext.disturbance_direction(i);
    const Vector x = ext.state_part(point);
    const bool constant = parity.is_constant();
    const Vector ki = ext.plant().K[i](x);
    if (!constant && ki.cwiseAbs().maxCoeff() != 0.0) {
        throw InvalidSpec("output-injection decoupling is supported only for K_i = 0");
    }
    std::vector<LieValue> rows;
    for (int kappa = 1; kappa <= s; ++kappa) {
        LieValue acc;
        if (constant) {
            const double kv = parity.row(static_cast<std::size_t>(kappa - 1)).dot(ki);
            acc.value += kv;
            acc.noise += 4.0 * kEps * std::abs(kv);
        }
        for (int mu = kappa; mu <= s; ++mu) {
            add(acc, disturbance_term(ext, parity, i, static_cast<std::size_t>(mu), mu - kappa, dir, lie, point));
        }
        rows.push_back(acc);
    }
    const double last = constant ? parity.row(static_cast<std::size_t>(s)).dot(ki) : 0.0;
    rows.push_back({last, 0.0, 4.0 * kEps * std::abs(last)});
    return rows;
}

CheckReport check_existence(const ExtendedSystem& ext, const ParityMap& parity, std::span<const double> alpha,
                            const LieEngine& lie, const CheckOptions& options) {
    require_options(options);
    require_parity(ext, parity, alpha);
    lie.require_order(parity.order(), !use_analytic(lie, parity));
    const SamplingSetup setup = extended_setup(ext, options);
    const std::vector<double> a(alpha.begin(), alpha.end());
    RowEval eval = [&](const Vector& p) { return std::vector<LieValue>{existence_residual(ext, parity, a, lie, p)}; };
    CheckReport rep = run_sampled("existence", {"existence"}, eval, setup.samples, setup.probes,
                                  options.tol * setup.scale, setup.scale, options.noise_safety);
    rep.notes.push_back(use_analytic(lie, parity) ? "analytic Lie derivatives" : "numeric Lie derivatives");
    return rep;
}

CheckReport check_existence(const ExtendedSystem& ext, const ParitySolution& sol, const LieEngine& lie,
                            const CheckOptions& options) {
    return check_existence(ext, sol.map(), sol.alpha, lie, options);
}

CheckReport check_decoupling(const ExtendedSystem& ext, const ParityMap& parity, const LieEngine& lie,
                             const CheckOptions& options) {
    require_options(options);
    if (parity.outputs() != ext.p()) throw DimensionError("parity map and plant disagree on p");
    const int s = parity.order();
    lie.require_order(s, !use_analytic(lie, parity));
    const SamplingSetup setup = extended_setup(ext, options);
    const std::size_t m = ext.plant().m();

    std::vector<std::string> labels;
    for (std::size_t i = 0; i < m; ++i) {
        for (int kappa = 1; kappa <= s; ++kappa) {
            labels.push_back("channel " + std::to_string(i + 1) + " kappa " + std::to_string(kappa));
        }
        labels.push_back("channel " + std::to_string(i + 1) + " feedthrough");
    }
    RowEval eval = [&](const Vector& p) {
        std::vector<LieValue> all;
        for (std::size_t i = 0; i < m; ++i) {
            auto rows = decoupling_residuals(ext, parity, i, lie, p);
            all.insert(all.end(), rows.begin(), rows.end());
        }
        return all;
    };
    CheckReport rep = run_sampled("decoupling", labels, eval, setup.samples, setup.probes, options.tol * setup.scale,
                                  setup.scale, options.noise_safety);
    if (m == 0) rep.notes.push_back("no disturbance channels declared");
    return rep;
}

CheckReport check_decoupling(const ExtendedSystem& ext, const ParitySolution& sol, const LieEngine& lie,
                             const CheckOptions& options) {
    return check_decoupling(ext, sol.map(), lie, options);
}

CheckReport check_manifold(const TMap& tmap, const ResidualGenerator& gen, const CheckOptions& options) {
    require_options(options);
    const ExtendedSystem& ext = tmap.system();
    const ParityMap& parity = tmap.parity();
    const LieEngine& lie = tmap.lie();
    const int s = tmap.order();
    if (gen.order() != s) throw DimensionError("generator order differs from the T map order");
    const SamplingSetup setup = extended_setup(ext, options);
    const Matrix& r = ext.exo().R();
    const Matrix& q = ext.exo().Q();

    std::vector<std::string> labels;
    for (int k = 1; k <= s; ++k) labels.push_back("invariance " + std::to_string(k));
    labels.push_back("output");

    RowEval eval = [&](const Vector& p) {
        const auto tv = tmap.evaluate(p);
        Vector t(s);
        for (int k = 0; k < s; ++k) t(k) = tv[static_cast<std::size_t>(k)].value;
        const Vector y = ext.He()(p);
        const Vector xo = ext.exo_part(p);
        const Vector rhs = gen.derivative(t, y);

        std::vector<LieValue> rows;
        for (int k = 1; k <= s; ++k) {
            LieValue acc;
            for (int mu = k; mu <= s; ++mu) {
                add(acc, output_term(ext, parity, static_cast<std::size_t>(mu), mu - k + 1, lie, p));
            }
            acc.value += (q * partial_char_poly(r, tmap.alpha(), s - k) * r * xo)(0);
            acc.value -= rhs(k - 1);
            // Errors of T propagate through A.
            for (int j = 0; j < s; ++j) {
                const double g = std::abs(gen.A(k - 1, j));
                acc.truncation += g * tv[static_cast<std::size_t>(j)].truncation;
                acc.noise += g * tv[static_cast<std::size_t>(j)].noise;
            }
            rows.push_back(acc);
        }
        LieValue out;
        out.value = gen.estimate(t, y) - (q * xo)(0);
        out.truncation = tv.back().truncation;
        out.noise = tv.back().noise + 4.0 * kEps * (std::abs(t(s - 1)) + std::abs((q * xo)(0)));
        rows.push_back(out);
        return rows;
    };
    return run_sampled("manifold", labels, eval, setup.samples, setup.probes, options.tol * setup.scale, setup.scale,
                       options.noise_safety);
}

CheckReport check_manifold(const ExtendedSystem& ext, const ParitySolution& sol, const TMap& tmap,
                           const CheckOptions& options) {
    if (tmap.order() != sol.s || tmap.system().dim() != ext.dim()) {
        throw InvalidSpec("T map was not built from this solution");
    }
    return check_manifold(tmap, build_observer(sol), options);
}

std::string_view to_string(SpecialCase kind) {
    switch (kind) {
        case SpecialCase::Auto: return "auto";
        case SpecialCase::AdditiveSensor: return "additive-sensor";
        case SpecialCase::ProcessFault: return "process-fault";
        case SpecialCase::Injection: return "injection";
    }
    return "auto";
}

namespace {

bool field_vanishes(const VectorField& f, const std::vector<Vector>& xs) {
    for (const Vector& x : xs) {
        if (f(x).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
}

bool field_constant(const VectorField& f, const std::vector<Vector>& xs) {
    const Vector ref = f(xs.front());
    for (const Vector& x : xs) {
        if (f(x) != ref) return false;
    }
    return true;
}

CheckReport additive_sensor_case(const ExtendedSystem& ext, const ParityMap& parity, std::span<const double> alpha,
                                 const LieEngine& lie, const CheckOptions& options, const SamplingSetup& setup) {
    const NonlinearPlant& plant = ext.plant();
    const int s = parity.order();
    const std::size_t m = plant.m();

    std::vector<std::string> labels{"output-side"};
    for (std::size_t i = 0; i < m; ++i) {
        for (int kappa = 1; kappa <= s; ++kappa) {
            labels.push_back("channel " + std::to_string(i + 1) + " kappa " + std::to_string(kappa));
        }
        labels.push_back("channel " + std::to_string(i + 1) + " feedthrough");
    }
    RowEval eval = [&](const Vector& x) {
        std::vector<LieValue> rows{detection_residual(plant, parity, lie, x)};
        const Vector p = embed_state(ext, x);
        for (std::size_t i = 0; i < m; ++i) {
            auto d = decoupling_residuals(ext, parity, i, lie, p);
            rows.insert(rows.end(), d.begin(), d.end());
        }
        return rows;
    };
    CheckReport rep = run_sampled("special:additive-sensor", labels, eval, setup.samples, setup.probes,
                                  options.tol * setup.scale, setup.scale, options.noise_safety);

    // Exo-side identity sum_k (v_k J + alpha_{s-k}) Q R^k = 0 with alpha_0 = 1,
    // held to rounding only.
    const Vector j = plant.J(plant.box.center());
    const Matrix& r = ext.exo().R();
    const Matrix& q = ext.exo().Q();
    RowVector acc = RowVector::Zero(q.cols());
    double magnitude = 0.0;
    Matrix rk = Matrix::Identity(r.rows(), r.cols());
    for (int k = 0; k <= s; ++k) {
        const double a = (k == s) ? 1.0 : alpha[static_cast<std::size_t>(s - k - 1)];
        const double vj = parity.row(static_cast<std::size_t>(k)).dot(j);
        const RowVector qrk = q * rk;
        acc += (vj + a) * qrk;
        magnitude += (std::abs(vj) + std::abs(a)) * qrk.cwiseAbs().sum();
        rk = rk * r;
    }
    const double exo_res = acc.cwiseAbs().maxCoeff();
    const double exo_floor = 16.0 * kEps * magnitude;
    rep.rows.push_back({"exo-side", exo_res, 0});
    if (exo_res > rep.max_residual) rep.max_residual = exo_res;
    rep.passed = rep.passed && exo_res <= exo_floor;
    std::ostringstream os;
    os << "exo-side identity residual " << exo_res << " (rounding floor " << exo_floor << ")";
    rep.notes.push_back(os.str());
    if (ext.exo().kind() == ExoKind::Step) {
        std::ostringstream st;
        st << "step fault: v_0 J + alpha_s = " << parity.row(0).dot(j) + alpha.back();
        rep.notes.push_back(st.str());
    }
    return rep;
}

CheckReport scalar_process_case(const ExtendedSystem& ext, const ParityMap& parity, std::span<const double> alpha,
                                const LieEngine& lie, const CheckOptions& options, const SamplingSetup& setup,
                                SpecialCase kind) {
    const NonlinearPlant& plant = ext.plant();
    const std::size_t m = plant.m();
    const Matrix& r = ext.exo().R();
    const Matrix& q = ext.exo().Q();
    const bool constant = parity.is_constant();
    const ScalarField v0h = parity.composed(0, plant.H);
    const ScalarField v1h = parity.composed(1, plant.H);
    const RowVector exo_term = q * (r + alpha[0] * Matrix::Identity(r.rows(), r.cols()));

    std::vector<std::string> labels{"drift", "fault-gain"};
    for (std::size_t i = 0; i < m; ++i) {
        labels.push_back("channel " + std::to_string(i + 1) + " process");
        labels.push_back("channel " + std::to_string(i + 1) + " feedthrough");
    }
    RowEval eval = [&](const Vector& x) {
        std::vector<LieValue> rows;
        LieValue drift = lie.derivative(v1h, plant.F, 1, x);
        const double base = v0h(x);
        drift.value += base;
        drift.noise += 4.0 * kEps * std::abs(base);
        rows.push_back(drift);

        const LieValue lg = lie.derivative(v1h, plant.G, 1, x);
        const RowVector gain = lg.value * q + exo_term;
        const double qn = q.cwiseAbs().maxCoeff();
        rows.push_back({gain.cwiseAbs().maxCoeff(), lg.truncation * qn, lg.noise * qn});

        for (std::size_t i = 0; i < m; ++i) {
            const Vector ki = plant.K[i](x);
            LieValue proc = lie.derivative(v1h, plant.E[i], 1, x);
            double feed = 0.0;
            if (constant) {
                proc.value += parity.row(0).dot(ki);
                feed = parity.row(1).dot(ki);
            }
            rows.push_back(proc);
            rows.push_back({feed, 0.0, 4.0 * kEps * std::abs(feed)});
        }
        return rows;
    };
    CheckReport rep = run_sampled(std::string("special:") + std::string(to_string(kind)), labels, eval, setup.samples,
                                  setup.probes, options.tol * setup.scale, setup.scale, options.noise_safety);
    return rep;
}

}  // namespace

CheckReport check_special_cases(const ExtendedSystem& ext, const ParityMap& parity, std::span<const double> alpha,
                                const LieEngine& lie, SpecialCase kind, const CheckOptions& options) {
    require_options(options);
    require_parity(ext, parity, alpha);
    const NonlinearPlant& plant = ext.plant();
    const SamplingSetup setup = plant_setup(ext, options);
    const int s = parity.order();

    const bool g_zero = field_vanishes(plant.G, setup.probes);
    const bool j_const = field_constant(plant.J, setup.probes);
    const bool j_zero = field_vanishes(plant.J, setup.probes);

    if (kind == SpecialCase::Auto) {
        if (!parity.is_constant()) {
            kind = SpecialCase::Injection;
        } else if (g_zero && j_const) {
            kind = SpecialCase::AdditiveSensor;
        } else if (s == 1 && j_zero) {
            kind = SpecialCase::ProcessFault;
        } else {
            throw InvalidSpec("no special structure applies (need G = 0 with constant J, or s = 1 with J = 0)");
        }
    }

    switch (kind) {
        case SpecialCase::AdditiveSensor:
            if (!g_zero || !j_const) throw InvalidSpec("additive-sensor case requires G = 0 and constant J");
            if (!parity.is_constant()) throw InvalidSpec("additive-sensor case requires constant parity vectors");
            lie.require_order(s, true);
            return additive_sensor_case(ext, parity, alpha, lie, options, setup);
        case SpecialCase::ProcessFault:
            if (s != 1 || !j_zero) throw InvalidSpec("process-fault case requires s = 1 and J = 0");
            if (!parity.is_constant()) throw InvalidSpec("process-fault case requires constant parity vectors");
            return scalar_process_case(ext, parity, alpha, lie, options, setup, kind);
        case SpecialCase::Injection:
            if (s != 1 || !j_zero) throw InvalidSpec("injection case requires s = 1 and J = 0");
            for (std::size_t i = 0; i < plant.m(); ++i) {
                if (!sensor_gain_vanishes(plant.K[i], setup.probes)) {
                    throw InvalidSpec("injection case supports only disturbance channels with K_i = 0");
                }
            }
            return scalar_process_case(ext, parity, alpha, lie, options, setup, kind);
        case SpecialCase::Auto: break;
    }
    throw InvalidSpec("unknown special case");
}

CheckReport check_special_cases(const ExtendedSystem& ext, const ParitySolution& sol, const LieEngine& lie,
                                SpecialCase kind, const CheckOptions& options) {
    return check_special_cases(ext, sol.map(), sol.alpha, lie, kind, options);
}

}  // namespace fdest
