#include "fdest/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace fdest {

namespace {

void require_alpha(std::span<const double> alpha, int s) {
    if (static_cast<int>(alpha.size()) != s) {
        std::ostringstream os;
        os << "alpha must have " << s << " coefficients, got " << alpha.size();
        throw DimensionError(os.str());
    }
    for (double a : alpha) {
        if (!std::isfinite(a)) throw InvalidMatrix("alpha has non-finite entries");
    }
}

void require_hurwitz(std::span<const double> alpha) {
    if (!companion_eigenvalues(alpha).hurwitz) {
        throw InvalidSpec("characteristic coefficients are not Hurwitz");
    }
}

// Block (k, j) = M_{k-j} for j <= k, with M_0 = d0 and M_i = H F^{i-1} e.
Matrix lower_toeplitz(const Matrix& h, const Matrix& f, const Matrix& e, const Matrix& d0, int s) {
    const Eigen::Index p = h.rows();
    const Eigen::Index w = e.cols();
    std::vector<Matrix> markov;
    markov.push_back(d0);
    Matrix hf = h;
    for (int i = 1; i <= s; ++i) {
        markov.push_back(hf * e);
        hf = hf * f;
    }
    Matrix out = Matrix::Zero((s + 1) * p, (s + 1) * w);
    for (int k = 0; k <= s; ++k) {
        for (int j = 0; j <= k; ++j) out.block(k * p, j * w, p, w) = markov[static_cast<std::size_t>(k - j)];
    }
    return out;
}

RowVector stack_rows(const std::vector<RowVector>& v) {
    Eigen::Index total = 0;
    for (const auto& r : v) total += r.size();
    RowVector out(total);
    Eigen::Index off = 0;
    for (const auto& r : v) {
        out.segment(off, r.size()) = r;
        off += r.size();
    }
    return out;
}

std::vector<RowVector> split_rows(const Vector& u, int s, Eigen::Index p) {
    std::vector<RowVector> v;
    for (int k = 0; k <= s; ++k) v.push_back(u.segment(k * p, p).transpose());
    return v;
}

Matrix hstack(std::initializer_list<const Matrix*> blocks) {
    Eigen::Index rows = -1;
    Eigen::Index cols = 0;
    for (const Matrix* b : blocks) {
        if (rows < 0) rows = b->rows();
        cols += b->cols();
    }
    Matrix out(rows, cols);
    Eigen::Index off = 0;
    for (const Matrix* b : blocks) {
        out.middleCols(off, b->cols()) = *b;
        off += b->cols();
    }
    return out;
}

SynthesisFailure invisible_failure() {
    return {SynthesisFailure::Reason::FaultInvisible, "fault channel outside output span", 0.0, 0};
}

// Solves v [blocks] = target for a fixed alpha.
ParityResult solve_fixed(const Matrix& lhs, const RowVector& target, int s, Eigen::Index p,
                         std::vector<double> alpha, const SynthesisOptions& options, std::string path) {
    const Matrix mt = lhs.transpose();
    const Vector b = target.transpose();
    const AffineResult res = solve_affine(mt, b, options.rank_tol);
    if (const auto* bad = std::get_if<Inconsistent>(&res)) {
        std::ostringstream os;
        os << "parity equation is inconsistent (least-squares residual " << bad->residual << " > " << bad->threshold
           << ")";
        return SynthesisFailure{SynthesisFailure::Reason::Inconsistent, os.str(), bad->residual, 1};
    }
    const auto& sol = std::get<AffineSolution>(res);
    ParitySolution out;
    out.s = s;
    out.v = split_rows(sol.particular, s, p);
    out.spectrum = companion_eigenvalues(alpha);
    out.alpha = std::move(alpha);
    out.mode = AlphaMode::Fixed;
    out.equation_residual = sol.residual;
    out.path = std::move(path);
    out.candidates_tried = 1;
    return out;
}

}  // namespace

ParityMap ParityMap::constant(std::vector<RowVector> rows) {
    if (rows.size() < 2) throw InvalidSpec("parity map needs at least v_0 and v_1");
    const Eigen::Index p = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != p) throw DimensionError("parity rows have different lengths");
        require_finite(r, "parity row");
    }
    ParityMap m;
    m.size_ = rows.size();
    m.p_ = static_cast<std::size_t>(p);
    m.rows_ = std::move(rows);
    return m;
}

ParityMap ParityMap::functions(std::vector<OutputFunction> fns, std::size_t p) {
    if (fns.size() < 2) throw InvalidSpec("parity map needs at least v_0 and v_1");
    for (const auto& f : fns) {
        if (!f) throw InvalidSpec("parity function is not set");
    }
    ParityMap m;
    m.size_ = fns.size();
    m.p_ = p;
    m.fns_ = std::move(fns);
    return m;
}

const RowVector& ParityMap::row(std::size_t j) const {
    if (!is_constant()) throw InvalidSpec("parity map holds functions, not constant rows");
    if (j >= size_) throw DimensionError("parity index out of range");
    return rows_[j];
}

double ParityMap::eval(std::size_t j, const Vector& y) const {
    if (j >= size_) throw DimensionError("parity index out of range");
    if (static_cast<std::size_t>(y.size()) != p_) throw DimensionError("parity map: output has the wrong length");
    const double v = is_constant() ? rows_[j].dot(y) : fns_[j](y);
    if (!std::isfinite(v)) throw EvaluationError("parity function returned a non-finite value");
    return v;
}

ScalarField ParityMap::composed(std::size_t j, const VectorField& output_map) const {
    if (output_map.dim_out != p_) throw DimensionError("parity map and output map disagree on p");
    ParityMap self = *this;
    return [self, j, output_map](const Vector& point) { return self.eval(j, output_map(point)); };
}

RowVector ParitySolution::stacked() const { return stack_rows(v); }

GammaBlocks build_gamma(const LinearPlant& plant, const ExoSystem& exo, int s) {
    if (s < 1) throw InvalidSpec("observer order s must be >= 1");
    plant.validate();
    if (exo.Q().rows() != 1) throw DimensionError("the fault channel must be scalar (Q has one row)");
    const Eigen::Index p = plant.p();
    const Eigen::Index n = plant.n();
    const Eigen::Index no = exo.order();

    GammaBlocks g;
    g.obs.resize((s + 1) * p, n);
    Matrix hf = plant.H;
    for (int k = 0; k <= s; ++k) {
        g.obs.middleRows(k * p, p) = hf;
        hf = hf * plant.F;
    }

    Matrix qr(s + 1, no);
    Matrix rk = Matrix::Identity(no, no);
    for (int k = 0; k <= s; ++k) {
        qr.row(k) = exo.Q() * rk;
        rk = rk * exo.R();
    }
    const Matrix tf = lower_toeplitz(plant.H, plant.F, plant.G, plant.J, s);
    g.fault = tf * qr;

    g.dist = lower_toeplitz(plant.H, plant.F, plant.E, plant.K, s);
    return g;
}

RowVector parity_fault_target(const ExoSystem& exo, std::span<const double> alpha) {
    return -(exo.Q() * apply_char_poly(exo, alpha));
}

double parity_equation_residual(const LinearPlant& plant, const ExoSystem& exo, const ParitySolution& sol) {
    const GammaBlocks g = build_gamma(plant, exo, sol.s);
    const RowVector v = sol.stacked();
    if (v.size() != g.obs.rows()) throw DimensionError("parity solution does not match the plant output dimension");
    const RowVector r_obs = v * g.obs;
    const RowVector r_fault = v * g.fault - parity_fault_target(exo, sol.alpha);
    const RowVector r_dist = v * g.dist;
    return std::sqrt(r_obs.squaredNorm() + r_fault.squaredNorm() + r_dist.squaredNorm());
}

ParityResult solve_parity_additive_sensor(const LinearPlant& plant, const ExoSystem& exo, int s,
                                          std::span<const double> alpha, const SynthesisOptions& options) {
    if (s < 1) throw InvalidSpec("observer order s must be >= 1");
    plant.validate();
    require_alpha(alpha, s);
    require_hurwitz(alpha);
    if (plant.G.norm() != 0.0) throw InvalidSpec("additive-sensor path requires G = 0");

    const Eigen::Index p = plant.p();
    const Eigen::Index no = exo.order();
    const GammaBlocks g = build_gamma(plant, exo, s);

    // Exo-side identity: sum_k v_k J Q R^k = -sum_k alpha_{s-k} Q R^k.
    Matrix exo_block = Matrix::Zero((s + 1) * p, no);
    RowVector target_exo = RowVector::Zero(no);
    Matrix rk = Matrix::Identity(no, no);
    for (int k = 0; k <= s; ++k) {
        const RowVector qrk = exo.Q() * rk;
        exo_block.middleRows(k * p, p) = plant.J * qrk;
        const double a = (k == s) ? 1.0 : alpha[static_cast<std::size_t>(s - k - 1)];
        target_exo -= a * qrk;
        rk = rk * exo.R();
    }
    if (exo_block.norm() == 0.0) return invisible_failure();

    const Matrix lhs = hstack({&g.obs, &exo_block, &g.dist});
    RowVector target = RowVector::Zero(lhs.cols());
    target.segment(g.obs.cols(), no) = target_exo;
    return solve_fixed(lhs, target, s, p, {alpha.begin(), alpha.end()}, options, "additive-sensor");
}

ParityResult solve_parity_linear(const LinearPlant& plant, const ExoSystem& exo, int s,
                                 std::optional<std::vector<double>> alpha, const SynthesisOptions& options) {
    if (s < 1) throw InvalidSpec("observer order s must be >= 1");
    if (!(options.rank_tol > 0.0)) throw InvalidSpec("rank_tol must be positive");
    plant.validate();
    const Eigen::Index p = plant.p();
    const Eigen::Index no = exo.order();

    if (alpha) {
        require_alpha(*alpha, s);
        require_hurwitz(*alpha);
        if (plant.G.norm() == 0.0) return solve_parity_additive_sensor(plant, exo, s, *alpha, options);
    }

    const GammaBlocks g = build_gamma(plant, exo, s);
    if (g.fault.norm() == 0.0) return invisible_failure();

    if (alpha) {
        const Matrix lhs = hstack({&g.obs, &g.fault, &g.dist});
        RowVector target = RowVector::Zero(lhs.cols());
        target.segment(g.obs.cols(), no) = parity_fault_target(exo, *alpha);
        return solve_fixed(lhs, target, s, p, *alpha, options, "general");
    }

    // Joint unknowns [v_0 .. v_s, alpha_1 .. alpha_s]; the alpha terms of
    // -Q P_A(R) move to the left, -Q R^s stays on the right.
    const Eigen::Index nv = (s + 1) * p;
    const Eigen::Index cols = g.obs.cols() + no + g.dist.cols();
    Matrix lhs = Matrix::Zero(nv + s, cols);
    lhs.topRows(nv) = hstack({&g.obs, &g.fault, &g.dist});
    for (int j = 1; j <= s; ++j) {
        lhs.block(nv + j - 1, g.obs.cols(), 1, no) = exo.Q() * matrix_power(exo.R(), s - j);
    }
    RowVector target = RowVector::Zero(cols);
    target.segment(g.obs.cols(), no) = -(exo.Q() * matrix_power(exo.R(), s));

    const AffineResult res = solve_affine(lhs.transpose(), target.transpose(), options.rank_tol);
    if (const auto* bad = std::get_if<Inconsistent>(&res)) {
        std::ostringstream os;
        os << "parity equation is inconsistent for every alpha (least-squares residual " << bad->residual << ")";
        return SynthesisFailure{SynthesisFailure::Reason::Inconsistent, os.str(), bad->residual, 0};
    }
    const auto& fam = std::get<AffineSolution>(res);
    const Vector alpha_p = fam.particular.tail(s);
    const Matrix n_alpha = fam.homogeneous_basis.bottomRows(s);

    // Orthonormal coordinates of the reachable alpha directions.
    Matrix basis(s, 0);
    if (n_alpha.cols() > 0 && n_alpha.norm() > 0.0) {
        Eigen::JacobiSVD<Matrix> svd(n_alpha, Eigen::ComputeFullU);
        const Vector sv = svd.singularValues();
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            if (sv(i) > options.rank_tol * sv(0)) ++r;
        }
        basis = svd.matrixU().leftCols(r);
    }
    const Eigen::Index dim = basis.cols();
    const double radius = options.search_radius > 0.0 ? options.search_radius : 10.0 * std::max(1.0, alpha_p.norm());

    std::size_t tried = 0;
    double best_margin = -std::numeric_limits<double>::infinity();
    std::optional<std::vector<double>> best;
    auto consider = [&](const Vector& c) {
        const Vector a = alpha_p + basis * c;
        std::vector<double> cand(a.data(), a.data() + a.size());
        ++tried;
        const Spectrum sp = companion_eigenvalues(cand);
        if (sp.hurwitz && sp.stability_margin > best_margin) {
            best_margin = sp.stability_margin;
            best = std::move(cand);
        }
    };

    consider(Vector::Zero(dim));
    if (dim > 0) {
        const std::size_t budget = std::max<std::size_t>(options.candidate_budget, 1);
        const std::size_t grid_budget = budget / 2;
        const auto per_axis = static_cast<std::size_t>(
            std::floor(std::pow(static_cast<double>(grid_budget), 1.0 / static_cast<double>(dim)) + 1e-9));
        if (per_axis >= 2) {
            std::vector<std::size_t> idx(static_cast<std::size_t>(dim), 0);
            while (tried < grid_budget) {
                Vector c(dim);
                for (Eigen::Index d = 0; d < dim; ++d) {
                    c(d) = -radius + 2.0 * radius * static_cast<double>(idx[static_cast<std::size_t>(d)]) /
                                         static_cast<double>(per_axis - 1);
                }
                consider(c);
                std::size_t d = 0;
                while (d < idx.size() && ++idx[d] == per_axis) idx[d++] = 0;
                if (d == idx.size()) break;
            }
        }
        std::mt19937_64 rng(options.seed);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        while (tried < budget) {
            Vector c(dim);
            for (Eigen::Index d = 0; d < dim; ++d) c(d) = radius * unit(rng);
            consider(c);
        }
    }

    if (!best) {
        std::ostringstream os;
        os << "no Hurwitz alpha in the solution family (" << tried << " candidates, family dimension " << dim << ")";
        return SynthesisFailure{SynthesisFailure::Reason::NoHurwitzAlpha, os.str(), fam.residual, tried};
    }

    const Matrix fixed_lhs = hstack({&g.obs, &g.fault, &g.dist});
    RowVector fixed_target = RowVector::Zero(fixed_lhs.cols());
    fixed_target.segment(g.obs.cols(), no) = parity_fault_target(exo, *best);
    ParityResult fixed = solve_fixed(fixed_lhs, fixed_target, s, p, *best, options, "general");
    if (auto* sol = std::get_if<ParitySolution>(&fixed)) {
        sol->mode = AlphaMode::Free;
        sol->candidates_tried = tried;
    }
    return fixed;
}

Vector ResidualGenerator::derivative(const Vector& z, const Vector& y) const {
    if (z.size() != A.rows()) throw DimensionError("observer state has the wrong length");
    if (injection()) return A * z + beta(y);
    if (y.size() != B.cols()) throw DimensionError("observer input has the wrong length");
    return A * z + B * y;
}

double ResidualGenerator::estimate(const Vector& z, const Vector& y) const {
    if (z.size() != A.rows()) throw DimensionError("observer state has the wrong length");
    const double cz = (C * z)(0);
    if (injection()) return cz + delta(y);
    if (y.size() != D.cols()) throw DimensionError("observer input has the wrong length");
    return cz + (D * y)(0);
}

void ResidualGenerator::validate() const {
    const Eigen::Index s = A.rows();
    if (s < 1 || A.cols() != s) throw DimensionError("A must be square with s >= 1");
    if (C.rows() != 1 || C.cols() != s) throw DimensionError("C must be 1 x s");
    for (Eigen::Index i = 0; i < s; ++i) {
        for (Eigen::Index j = 0; j + 1 < s; ++j) {
            const double expected = (i == j + 1) ? 1.0 : 0.0;
            if (A(i, j) != expected) throw InvalidSpec("A is not in left-companion form");
        }
        if (C(0, i) != (i + 1 == s ? 1.0 : 0.0)) throw InvalidSpec("C must be [0 ... 0 1]");
    }
    if (injection()) {
        if (!delta) throw InvalidSpec("injection observer needs both beta and delta");
    } else {
        if (B.rows() != s || D.rows() != 1 || B.cols() != D.cols()) throw DimensionError("B, D shapes are inconsistent");
    }
    Matrix obs(s, s);
    Matrix ca = C;
    for (Eigen::Index k = 0; k < s; ++k) {
        obs.row(k) = ca;
        ca = ca * A;
    }
    if (numerical_rank(obs) != static_cast<std::size_t>(s)) throw InvalidSpec("(C, A) is not observable");
    if (!spectrum(A).hurwitz) throw InvalidSpec("A is not Hurwitz");
}

ResidualGenerator build_observer(const ParitySolution& sol) {
    const int s = sol.s;
    if (s < 1 || static_cast<int>(sol.v.size()) != s + 1) throw InvalidSpec("parity solution needs s + 1 vectors");
    require_alpha(sol.alpha, s);
    const Eigen::Index p = sol.v.front().size();
    ResidualGenerator gen;
    gen.A = companion_matrix(sol.alpha);
    gen.B.resize(s, p);
    for (int i = 0; i < s; ++i) {
        gen.B.row(i) = sol.alpha[static_cast<std::size_t>(s - i - 1)] * sol.v[static_cast<std::size_t>(s)] -
                       sol.v[static_cast<std::size_t>(i)];
    }
    gen.C = Matrix::Zero(1, s);
    gen.C(0, s - 1) = 1.0;
    // Adding +0 turns -0 entries into 0.
    gen.D = (-sol.v[static_cast<std::size_t>(s)]).array() + 0.0;
    gen.validate();
    return gen;
}

ResidualGenerator build_observer_injection(std::vector<ParityMap::OutputFunction> v_fns, std::vector<double> alpha,
                                           std::size_t p) {
    const ParityMap map = ParityMap::functions(std::move(v_fns), p);
    const int s = map.order();
    require_alpha(alpha, s);
    require_hurwitz(alpha);
    ResidualGenerator gen;
    gen.A = companion_matrix(alpha);
    gen.C = Matrix::Zero(1, s);
    gen.C(0, s - 1) = 1.0;
    gen.beta = [map, alpha, s](const Vector& y) -> Vector {
        Vector out(s);
        const double vs = map.eval(static_cast<std::size_t>(s), y);
        for (int i = 0; i < s; ++i) {
            out(i) = alpha[static_cast<std::size_t>(s - i - 1)] * vs - map.eval(static_cast<std::size_t>(i), y);
        }
        return out;
    };
    gen.delta = [map, s](const Vector& y) { return -map.eval(static_cast<std::size_t>(s), y); };
    gen.validate();
    return gen;
}

TMap::TMap(ExtendedSystem ext, ParityMap parity, std::vector<double> alpha, LieEngine lie)
    : ext_(std::move(ext)), parity_(std::move(parity)), alpha_(std::move(alpha)), lie_(std::move(lie)) {}

std::vector<LieValue> TMap::evaluate(const Vector& point) const {
    if (static_cast<std::size_t>(point.size()) != ext_.dim()) throw DimensionError("T: point has the wrong length");
    const int s = order();
    const Vector xo = ext_.exo_part(point);
    const bool analytic = lie_.has_analytic() && parity_.is_constant();
    std::vector<LieValue> out(static_cast<std::size_t>(s));
    for (int k = 1; k <= s; ++k) {
        LieValue acc;
        for (int mu = k; mu <= s; ++mu) {
            const auto m = static_cast<std::size_t>(mu);
            if (analytic) {
                acc.value += parity_.row(m).dot(lie_.analytic().output(mu - k, point));
            } else {
                const LieValue lv = lie_.derivative(parity_.composed(m, ext_.He()), ext_.Fe(), mu - k, point);
                acc.value += lv.value;
                acc.truncation += lv.truncation;
                acc.noise += lv.noise;
            }
        }
        const Matrix pp = partial_char_poly(ext_.exo().R(), alpha_, s - k);
        acc.value += (ext_.exo().Q() * pp * xo)(0);
        out[static_cast<std::size_t>(k - 1)] = acc;
    }
    return out;
}

Vector TMap::operator()(const Vector& point) const {
    const auto vals = evaluate(point);
    Vector out(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) out(static_cast<Eigen::Index>(i)) = vals[i].value;
    return out;
}

TMap build_tmap(const ExtendedSystem& ext, const ParityMap& parity, std::vector<double> alpha, const LieEngine& lie) {
    const int s = parity.order();
    if (s < 1) throw InvalidSpec("parity map needs s >= 1");
    if (parity.outputs() != ext.p()) throw DimensionError("parity map and plant disagree on p");
    require_alpha(alpha, s);
    const bool numeric = !(lie.has_analytic() && parity.is_constant());
    lie.require_order(s, numeric);
    return TMap(ext, parity, std::move(alpha), lie);
}

TMap build_tmap(const ExtendedSystem& ext, const ParitySolution& sol, const LieEngine& lie) {
    return build_tmap(ext, sol.map(), sol.alpha, lie);
}

Matrix linear_tmap(const LinearPlant& plant, const ExoSystem& exo, const ParitySolution& sol) {
    plant.validate();
    const int s = sol.s;
    require_alpha(sol.alpha, s);
    const Eigen::Index n = plant.n();
    const Eigen::Index no = exo.order();
    Matrix phi = Matrix::Zero(n + no, n + no);
    phi.topLeftCorner(n, n) = plant.F;
    phi.topRightCorner(n, no) = plant.G * exo.Q();
    phi.bottomRightCorner(no, no) = exo.R();
    Matrix hbar(plant.p(), n + no);
    hbar << plant.H, plant.J * exo.Q();

    Matrix t = Matrix::Zero(s, n + no);
    for (int k = 1; k <= s; ++k) {
        RowVector row = RowVector::Zero(n + no);
        for (int mu = k; mu <= s; ++mu) {
            row += sol.v[static_cast<std::size_t>(mu)] * hbar * matrix_power(phi, mu - k);
        }
        row.tail(no) += exo.Q() * partial_char_poly(exo.R(), sol.alpha, s - k);
        t.row(k - 1) = row;
    }
    return t;
}

LinearDesignResiduals linear_design_residuals(const LinearPlant& plant, const ExoSystem& exo,
                                              const ParitySolution& sol, const ResidualGenerator& gen) {
    const Matrix t = linear_tmap(plant, exo, sol);
    const Eigen::Index n = plant.n();
    const Eigen::Index no = exo.order();
    Matrix phi = Matrix::Zero(n + no, n + no);
    phi.topLeftCorner(n, n) = plant.F;
    phi.topRightCorner(n, no) = plant.G * exo.Q();
    phi.bottomRightCorner(no, no) = exo.R();
    Matrix hbar(plant.p(), n + no);
    hbar << plant.H, plant.J * exo.Q();
    Matrix ebar = Matrix::Zero(n + no, plant.m());
    ebar.topRows(n) = plant.E;
    Matrix target = Matrix::Zero(1, n + no);
    target.rightCols(no) = exo.Q();

    LinearDesignResiduals r;
    r.invariance = (t * phi - gen.A * t - gen.B * hbar).norm();
    r.output = (gen.C * t + gen.D * hbar - target).norm();
    r.decoupling = plant.m() > 0 ? (t * ebar - gen.B * plant.K).norm() : 0.0;
    r.feedthrough = plant.m() > 0 ? (gen.D * plant.K).norm() : 0.0;
    return r;
}

std::vector<double> alpha_from_eigenvalues(std::span<const Complex> eigenvalues) {
    if (eigenvalues.empty()) throw InvalidSpec("at least one eigenvalue is required");
    std::vector<Complex> c{Complex(1.0, 0.0)};
    for (const Complex& l : eigenvalues) {
        if (!std::isfinite(l.real()) || !std::isfinite(l.imag())) throw InvalidMatrix("eigenvalue is not finite");
        std::vector<Complex> next(c.size() + 1, Complex(0.0, 0.0));
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= l * c[i];
        }
        c = std::move(next);
    }
    std::vector<double> alpha;
    for (std::size_t i = 1; i < c.size(); ++i) {
        if (std::abs(c[i].imag()) > 1e-9 * (1.0 + std::abs(c[i].real()))) {
            throw InvalidSpec("eigenvalues must be closed under complex conjugation");
        }
        alpha.push_back(c[i].real());
    }
    return alpha;
}

RampConstraintCheck check_ramp_constraint(std::span<const double> alpha, double rel_tol) {
    if (alpha.empty()) throw InvalidSpec("alpha must have at least one coefficient");
    const std::size_t s = alpha.size();
    const double as = alpha[s - 1];
    if (as == 0.0) throw InvalidSpec("alpha_s = 0 has a zero eigenvalue");
    const double as1 = s == 1 ? 1.0 : alpha[s - 2];
    const Spectrum sp = companion_eigenvalues(alpha);
    Complex sum(0.0, 0.0);
    double scale = 0.0;
    for (const Complex& l : sp.eigenvalues) {
        sum += 1.0 / l;
        scale += 1.0 / std::abs(l);
    }
    RampConstraintCheck out;
    out.reciprocal_sum = sum.real();
    out.ratio = -as1 / as;
    out.relative_error = std::abs(out.reciprocal_sum - out.ratio) / std::max(std::abs(out.ratio), scale);
    out.satisfied = out.relative_error <= rel_tol && std::abs(sum.imag()) <= rel_tol * scale;
    return out;
}

ParitySolution rescale_step_solution(const ParitySolution& sol, std::vector<double> new_alpha) {
    require_alpha(new_alpha, sol.s);
    require_alpha(sol.alpha, sol.s);
    require_hurwitz(new_alpha);
    const double as = sol.alpha.back();
    if (as == 0.0) throw InvalidSpec("alpha_s = 0 cannot be rescaled");
    const double factor = new_alpha.back() / as;
    ParitySolution out = sol;
    for (auto& row : out.v) row *= factor;
    out.spectrum = companion_eigenvalues(new_alpha);
    out.alpha = std::move(new_alpha);
    out.equation_residual = sol.equation_residual * std::abs(factor);
    return out;
}

}  // namespace fdest
