#include "fdest/plant_model.hpp"

#include <sstream>

namespace fdest {

namespace {

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << "matrix " << name << " must be " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
        throw DimensionError(os.str());
    }
    require_finite(m, name);
}

void require_field(const VectorField& f, std::size_t in, std::size_t out, const std::string& name) {
    if (!f.eval) throw InvalidSpec("vector field " + name + " is not set");
    if (f.dim_in != in || f.dim_out != out) {
        std::ostringstream os;
        os << "vector field " << name << " must map R^" << in << " -> R^" << out << ", declared R^" << f.dim_in
           << " -> R^" << f.dim_out;
        throw DimensionError(os.str());
    }
}

// Evaluates twice at the same point; a pure callback returns identical values.
void spot_check(const VectorField& f, const Vector& x, const std::string& name) {
    const Vector a = f(x);
    const Vector b = f(x);
    if (a != b) throw InvalidSpec("vector field " + name + " is not pure (repeated evaluation differs)");
}

std::vector<Vector> box_probe_points(const OperatingBox& box) {
    std::vector<Vector> pts{box.center(), box.lower, box.upper};
    Vector mixed = box.lower;
    for (Eigen::Index i = 1; i < mixed.size(); i += 2) mixed(i) = box.upper(i);
    pts.push_back(mixed);
    return pts;
}

}  // namespace

void OperatingBox::validate(std::size_t n) const {
    if (static_cast<std::size_t>(lower.size()) != n || static_cast<std::size_t>(upper.size()) != n) {
        throw DimensionError("operating box dimension does not match the state dimension");
    }
    require_finite(lower, "box lower bound");
    require_finite(upper, "box upper bound");
    if ((upper.array() < lower.array()).any()) throw InvalidSpec("operating box has upper < lower");
}

OperatingBox OperatingBox::symmetric(std::size_t n, double half_width) {
    const auto dim = static_cast<Eigen::Index>(n);
    return {Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width)};
}

void LinearPlant::validate() const {
    const Eigen::Index nn = F.rows();
    const Eigen::Index pp = H.rows();
    const Eigen::Index mm = E.cols();
    if (nn < 1) throw DimensionError("plant needs n >= 1");
    if (pp < 1) throw DimensionError("plant needs p >= 1");
    require_shape(F, nn, nn, "F");
    require_shape(G, nn, 1, "G");
    require_shape(E, nn, mm, "E");
    require_shape(H, pp, nn, "H");
    require_shape(J, pp, 1, "J");
    require_shape(K, pp, mm, "K");
}

void NonlinearPlant::validate() const {
    if (n < 1 || p < 1) throw DimensionError("plant needs n >= 1 and p >= 1");
    require_field(F, n, n, "F");
    require_field(G, n, n, "G");
    require_field(H, n, p, "H");
    require_field(J, n, p, "J");
    if (E.size() != K.size()) throw DimensionError("disturbance lists E and K differ in length");
    for (std::size_t i = 0; i < E.size(); ++i) {
        require_field(E[i], n, n, "E_" + std::to_string(i + 1));
        require_field(K[i], n, p, "K_" + std::to_string(i + 1));
    }
    box.validate(n);
    for (const Vector& x : box_probe_points(box)) {
        spot_check(F, x, "F");
        spot_check(G, x, "G");
        spot_check(H, x, "H");
        spot_check(J, x, "J");
        for (std::size_t i = 0; i < E.size(); ++i) {
            spot_check(E[i], x, "E_" + std::to_string(i + 1));
            spot_check(K[i], x, "K_" + std::to_string(i + 1));
        }
    }
}

VectorField constant_field(std::size_t dim_in, const Vector& value) {
    return {dim_in, static_cast<std::size_t>(value.size()), [value](const Vector&) { return value; }};
}

VectorField linear_field(const Matrix& m) {
    return {static_cast<std::size_t>(m.cols()), static_cast<std::size_t>(m.rows()),
            [m](const Vector& x) -> Vector { return m * x; }};
}

NonlinearPlant lift_linear(const LinearPlant& plant, std::optional<OperatingBox> box) {
    plant.validate();
    const auto n = static_cast<std::size_t>(plant.n());
    NonlinearPlant out;
    out.n = n;
    out.p = static_cast<std::size_t>(plant.p());
    out.F = linear_field(plant.F);
    out.G = constant_field(n, plant.G.col(0));
    out.H = linear_field(plant.H);
    out.J = constant_field(n, plant.J.col(0));
    for (Eigen::Index i = 0; i < plant.m(); ++i) {
        out.E.push_back(constant_field(n, plant.E.col(i)));
        out.K.push_back(constant_field(n, plant.K.col(i)));
    }
    out.box = box.value_or(OperatingBox::symmetric(n, 1.0));
    out.validate();
    return out;
}

ExtendedSystem::ExtendedSystem(NonlinearPlant plant, ExoSystem exo)
    : plant_(std::move(plant)), exo_(std::move(exo)) {
    const auto n = plant_.n;
    const auto no = static_cast<std::size_t>(exo_.order());
    const auto dim = n + no;
    const auto ni = static_cast<Eigen::Index>(n);
    const auto noi = static_cast<Eigen::Index>(no);
    const NonlinearPlant& pl = plant_;
    const Matrix r = exo_.R();
    const RowVector q = exo_.q_row();

    fe_ = {dim, dim, [pl, r, q, ni, noi](const Vector& z) -> Vector {
               const Vector x = z.head(ni);
               const Vector xo = z.tail(noi);
               const double f = q.dot(xo);
               Vector out(ni + noi);
               out.head(ni) = pl.F(x) + pl.G(x) * f;
               out.tail(noi) = r * xo;
               return out;
           }};
    he_ = {dim, pl.p, [pl, q, ni, noi](const Vector& z) -> Vector {
               const Vector x = z.head(ni);
               const double f = q.dot(z.tail(noi));
               return pl.H(x) + pl.J(x) * f;
           }};
}

Vector ExtendedSystem::stack(const Vector& x, const Vector& xo) const {
    if (static_cast<std::size_t>(x.size()) != n() || static_cast<std::size_t>(xo.size()) != n_o()) {
        throw DimensionError("stack: state or exo-state has the wrong length");
    }
    Vector z(x.size() + xo.size());
    z << x, xo;
    return z;
}

namespace {

VectorField lift_to_extended(const VectorField& field, std::size_t n, std::size_t no) {
    const auto ni = static_cast<Eigen::Index>(n);
    const auto noi = static_cast<Eigen::Index>(no);
    return {n + no, n + no, [field, ni, noi](const Vector& z) -> Vector {
                Vector out = Vector::Zero(ni + noi);
                out.head(ni) = field(z.head(ni));
                return out;
            }};
}

}  // namespace

VectorField ExtendedSystem::disturbance_direction(std::size_t i) const {
    if (i >= plant_.m()) throw DimensionError("disturbance index out of range");
    return lift_to_extended(plant_.E[i], n(), n_o());
}

VectorField ExtendedSystem::fault_direction() const { return lift_to_extended(plant_.G, n(), n_o()); }

VectorField ExtendedSystem::drift_direction() const { return lift_to_extended(plant_.F, n(), n_o()); }

ExtendedSystem extend(const NonlinearPlant& plant, const ExoSystem& exo) {
    plant.validate();
    if (exo.Q().rows() != 1) throw DimensionError("extend: the fault channel must be scalar (Q has one row)");
    ExtendedSystem ext(plant, exo);
    // F_e and H_e must reproduce the cascade at the box probes with zero and unit exo states.
    const RowVector q = exo.q_row();
    for (const Vector& x : box_probe_points(plant.box)) {
        for (double scale : {0.0, 1.0}) {
            const Vector xo = Vector::Constant(exo.order(), scale);
            const Vector z = ext.stack(x, xo);
            const double f = q.dot(xo);
            const Vector fe = ext.Fe()(z);
            const Vector he = ext.He()(z);
            const Vector fe_ref = plant.F(x) + plant.G(x) * f;
            const Vector he_ref = plant.H(x) + plant.J(x) * f;
            if ((fe.head(x.size()) - fe_ref).norm() > 1e-12 * (1.0 + fe_ref.norm()) ||
                (he - he_ref).norm() > 1e-12 * (1.0 + he_ref.norm())) {
                throw InvalidSpec("extended system does not match the cascade at a probe point");
            }
        }
    }
    return ext;
}

void ProcessModel::validate() const {
    if (n < 1 || p < 1) throw DimensionError("process model needs n >= 1 and p >= 1");
    require_field(F, n, n, "F");
    require_field(H, n, p, "H");
    for (const auto& ch : faults) {
        require_field(ch.process, n, n, "fault " + ch.name + " process direction");
        require_field(ch.sensor, n, p, "fault " + ch.name + " sensor feedthrough");
    }
    for (const auto& ch : disturbances) {
        require_field(ch.process, n, n, "disturbance " + ch.name + " process direction");
        require_field(ch.sensor, n, p, "disturbance " + ch.name + " sensor feedthrough");
    }
    box.validate(n);
}

NonlinearPlant ProcessModel::view_for_fault(std::size_t k) const {
    if (k >= faults.size()) throw DimensionError("fault channel index out of range");
    NonlinearPlant out;
    out.n = n;
    out.p = p;
    out.F = F;
    out.H = H;
    out.G = faults[k].process;
    out.J = faults[k].sensor;
    for (std::size_t j = 0; j < faults.size(); ++j) {
        if (j == k) continue;
        out.E.push_back(faults[j].process);
        out.K.push_back(faults[j].sensor);
    }
    for (const auto& d : disturbances) {
        out.E.push_back(d.process);
        out.K.push_back(d.sensor);
    }
    out.box = box;
    return out;
}

std::vector<std::string> ProcessModel::disturbance_names_for_fault(std::size_t k) const {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < faults.size(); ++j) {
        if (j != k) names.push_back(faults[j].name);
    }
    for (const auto& d : disturbances) names.push_back(d.name);
    return names;
}

ProcessModel process_from_linear(const LinearPlant& plant, std::optional<OperatingBox> box) {
    plant.validate();
    const auto n = static_cast<std::size_t>(plant.n());
    ProcessModel out;
    out.name = "linear";
    out.n = n;
    out.p = static_cast<std::size_t>(plant.p());
    out.F = linear_field(plant.F);
    out.H = linear_field(plant.H);
    out.faults.push_back({"f", constant_field(n, plant.G.col(0)), constant_field(n, plant.J.col(0))});
    for (Eigen::Index i = 0; i < plant.m(); ++i) {
        out.disturbances.push_back({"w" + std::to_string(i + 1), constant_field(n, plant.E.col(i)),
                                    constant_field(n, plant.K.col(i))});
    }
    out.box = box.value_or(OperatingBox::symmetric(n, 1.0));
    out.validate();
    return out;
}

}  // namespace fdest
