#pragma once

#include <random>

#include "fdest/plant_model.hpp"

namespace fdest::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

/// Random LTI plant with the requested shape; `sensor_fault` makes G = 0
/// and J nonzero, otherwise J = 0.
inline LinearPlant random_plant(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p, Eigen::Index m,
                                bool sensor_fault = false) {
    LinearPlant pl;
    pl.F = random_matrix(rng, n, n);
    pl.F -= 1.5 * Matrix::Identity(n, n);
    pl.G = sensor_fault ? Matrix::Zero(n, 1) : random_matrix(rng, n, 1);
    pl.E = random_matrix(rng, n, m);
    pl.H = random_matrix(rng, p, n);
    pl.J = sensor_fault ? random_matrix(rng, p, 1) : Matrix::Zero(p, 1);
    pl.K = Matrix::Zero(p, m);
    return pl;
}

/// Random plant built so that a step-fault design of order s exists: the
/// disturbances act along directions that leave the outputs untouched for
/// full state measurement, which keeps the decoupling rows solvable.
inline LinearPlant random_full_output_plant(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m) {
    LinearPlant pl;
    pl.F = random_matrix(rng, n, n) - 1.5 * Matrix::Identity(n, n);
    pl.G = random_matrix(rng, n, 1);
    pl.E = random_matrix(rng, n, m);
    pl.H = Matrix::Identity(n, n);
    pl.J = Matrix::Zero(n, 1);
    pl.K = Matrix::Zero(n, m);
    return pl;
}

}  // namespace fdest::testing
