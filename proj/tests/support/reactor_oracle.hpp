#pragma once

// Independent hand-coded CSTR balances used as an oracle. Parameters are
// written out literally rather than read from ReactorParams.

#include <cmath>

#include <Eigen/Dense>

namespace fdest::testing {

struct OracleReactor {
    bool per_second = true;

    double flow(double lpm) const { return per_second ? lpm / 60.0 : lpm; }
    double a() const { return flow(0.02) / 1.0; }
    double g() const { return flow(1.0) / 0.03; }
    double h() const { return 160.0 * 1000.0 / (1200.0 * 3.4); }
    double b() const { return 0.942 / (1200.0 * 3.4 * 1.0); }
    double cj() const { return 0.942 / (1200.0 * 3.4 * 0.03); }

    double rate(double ca, double cb, double th) const {
        const double k1 = std::exp(8.08) * std::exp(-3952.0 / th);
        const double k2 = std::exp(28.12) * std::exp(-7927.0 / th);
        const double k3 = std::exp(25.12) * std::exp(-12989.0 / th);
        return k1 * k2 * ca * cb * 0.0021 / (1.0 + k2 * cb) + k3 * ca * cb;
    }

    /// Absolute balances.
    Eigen::Vector4d rhs(const Eigen::Vector4d& s, double f2, double w) const {
        const double r = rate(s(0), s(1), s(2)) + w;
        Eigen::Vector4d d;
        d(0) = a() * (4.0 - s(0)) - r;
        d(1) = a() * (3.0 - s(1)) - r;
        d(2) = a() * (333.0 - s(2)) + h() * r - b() * (s(2) - s(3));
        d(3) = g() * (300.0 + f2 - s(3)) + cj() * (s(2) - s(3));
        return d;
    }

    /// Translated balances about `ss` (inlet terms cancel against the steady rate).
    Eigen::Vector4d deviation(const Eigen::Vector4d& dev, const Eigen::Vector4d& ss, double f2, double w) const {
        const double dr = rate(ss(0) + dev(0), ss(1) + dev(1), ss(2) + dev(2)) + w - rate(ss(0), ss(1), ss(2));
        Eigen::Vector4d d;
        d(0) = -a() * dev(0) - dr;
        d(1) = -a() * dev(1) - dr;
        d(2) = -a() * dev(2) + h() * dr - b() * (dev(2) - dev(3));
        d(3) = g() * (f2 - dev(3)) + cj() * (dev(2) - dev(3));
        return d;
    }
};

inline Eigen::Vector4d paper_steady() { return {1.211, 0.211, 386.20, 300.02}; }

}  // namespace fdest::testing
