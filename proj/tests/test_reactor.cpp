#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fdest/reactor.hpp"
#include "support/reactor_oracle.hpp"

using namespace fdest;
using namespace fdest::reactor;
using fdest::testing::OracleReactor;

namespace {

ReactorParams literal() {
    ReactorParams p;
    p.units = UnitConvention::PaperLiteral;
    return p;
}

Eigen::Vector4d as4(const Vector& v) { return Eigen::Vector4d(v(0), v(1), v(2), v(3)); }

}  // namespace

TEST(Reactor, DerivedCoefficients) {
    for (bool per_second : {true, false}) {
        const ReactorParams p = per_second ? ReactorParams{} : literal();
        const OracleReactor o{per_second};
        EXPECT_NEAR(p.flow_rate(), o.a(), 1e-12 * o.a());
        EXPECT_NEAR(p.jacket_flow_rate(), o.g(), 1e-12 * o.g());
        EXPECT_NEAR(p.heat_release(), o.h(), 1e-12 * o.h());
        EXPECT_NEAR(p.reactor_exchange(), o.b(), 1e-12 * o.b());
        EXPECT_NEAR(p.jacket_exchange(), o.cj(), 1e-12 * o.cj());
        EXPECT_NEAR(p.heat_capacity_ratio() * p.heat_release(), 1.0, 1e-14);
        EXPECT_NEAR(p.jacket_ratio(), o.cj() / o.g(), 1e-12 * o.cj() / o.g());
        EXPECT_NEAR(p.jacket_residence() * p.jacket_flow_rate() * p.V_J, p.V_J, 1e-15);
    }
    EXPECT_EQ(ReactorParams{}.A1, std::exp(8.08));
}

TEST(Reactor, RateMatchesOracle) {
    const ReactorParams p;
    const OracleReactor o;
    for (auto [ca, cb, th] : {std::array<double, 3>{1.211, 0.211, 386.2}, {4.0, 3.0, 333.0}, {0.5, 2.0, 410.0}}) {
        const double r = o.rate(ca, cb, th);
        EXPECT_NEAR(reaction_rate(ca, cb, th, 0.0, p), r, 1e-12 * std::abs(r));
        EXPECT_NEAR(reaction_rate(ca, cb, th, 2.5, p), r + 2.5, 1e-12 * (std::abs(r) + 2.5));
    }
    EXPECT_EQ(reaction_rate(0.0, 1.0, 350.0, 0.0, p), 0.0);
    EXPECT_THROW(reaction_rate(1.0, 1.0, 0.0, 0.0, p), InvalidState);
}

TEST(Reactor, RateGradientMatchesFiniteDifferences) {
    const ReactorParams p;
    const OracleReactor o;
    const double ca = 1.3, cb = 0.4, th = 380.0;
    const auto g = reaction_rate_gradient(ca, cb, th, p);
    const double hc = 1e-6, ht = 1e-4;
    const double d_ca = (o.rate(ca + hc, cb, th) - o.rate(ca - hc, cb, th)) / (2 * hc);
    const double d_cb = (o.rate(ca, cb + hc, th) - o.rate(ca, cb - hc, th)) / (2 * hc);
    const double d_th = (o.rate(ca, cb, th + ht) - o.rate(ca, cb, th - ht)) / (2 * ht);
    EXPECT_NEAR(g[0], d_ca, 1e-6 * std::abs(d_ca));
    EXPECT_NEAR(g[1], d_cb, 1e-6 * std::abs(d_cb));
    EXPECT_NEAR(g[2], d_th, 1e-6 * std::abs(d_th));
}

TEST(Reactor, BalancesMatchOracleProperty) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> c(0.05, 4.0), t(300.0, 420.0), f(-5.0, 5.0);
    for (bool per_second : {true, false}) {
        const ReactorParams p = per_second ? ReactorParams{} : literal();
        const OracleReactor o{per_second};
        for (int k = 0; k < 25; ++k) {
            const ReactorState s{c(rng), c(rng), t(rng), t(rng), false};
            const double f2 = f(rng), w = f(rng);
            const Eigen::Vector4d ref = o.rhs(as4(s.vec()), f2, w);
            EXPECT_LT((as4(reactor_rhs(s, f2, w, p)) - ref).norm(), 1e-11 * (1 + ref.norm()));
        }
    }
}

TEST(Reactor, DeviationFormMatchesOracle) {
    const ReactorParams p;
    const OracleReactor o;
    const Eigen::Vector4d ss = fdest::testing::paper_steady();
    const Vector dev = (Vector(4) << 0.1, -0.05, 3.0, -2.0).finished();
    const Eigen::Vector4d ref = o.deviation(as4(dev), ss, 1.5, 0.2);
    EXPECT_LT((as4(reactor_deviation_rhs(dev, 1.5, 0.2, p, paper_steady_state())) - ref).norm(), 1e-12 * ref.norm());
    EXPECT_EQ(reactor_deviation_rhs(Vector::Zero(4), 0.0, 0.0, p, paper_steady_state()), Vector::Zero(4));
}

TEST(Reactor, KineticsSeeClampedConcentrations) {
    const ReactorParams p;
    const ReactorState ss = paper_steady_state();
    Vector dev = Vector::Zero(4);
    dev(0) = -5.0;  // c_A = -3.789
    const Vector clamped = reactor_deviation_rhs(dev, 0.0, 0.0, p, ss);
    Vector at_zero = Vector::Zero(4);
    at_zero(0) = -ss.c_A;
    const Vector ref = reactor_deviation_rhs(at_zero, 0.0, 0.0, p, ss);
    // Only the dilution term differs between the two.
    EXPECT_NEAR(clamped(0) - ref(0), -p.flow_rate() * (dev(0) - at_zero(0)), 1e-15);
    EXPECT_EQ(clamped(1), ref(1));
    const Vector raw = reactor_deviation_rhs(dev, 0.0, 0.0, p, ss, false);
    EXPECT_NE(raw(1), clamped(1));
}

TEST(Reactor, StateVectorRoundTrip) {
    const ReactorState s{1, 2, 3, 4, true};
    const ReactorState r = ReactorState::from(s.vec(), true);
    EXPECT_EQ(r.vec(), s.vec());
    EXPECT_TRUE(r.deviation);
    EXPECT_THROW(ReactorState::from(Vector::Zero(3), false), DimensionError);
    EXPECT_THROW(reactor_rhs(s, 0, 0, ReactorParams{}), InvalidState);
}

TEST(SteadyState, SolutionIsAnEquilibriumOfTheOracle) {
    for (bool per_second : {true, false}) {
        const ReactorParams p = per_second ? ReactorParams{} : literal();
        const SteadyStateResult r = find_steady_state(p);
        const OracleReactor o{per_second};
        const Eigen::Vector4d res = o.rhs(as4(r.state.vec()), 0.0, 0.0);
        // Largest term in the balances is the jacket inflow g * theta_J,in.
        EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-11 * o.g() * 300.0) << (per_second ? "per-second" : "literal");
        EXPECT_LT(r.scaled_residual, 1e-10);
        EXPECT_GT(r.state.c_A, 0.0);
        EXPECT_LT(r.state.c_A, 4.0);
    }
}

TEST(SteadyState, NegligibleReactionKeepsInletConcentrations) {
    ReactorParams p;
    p.Z = 1e-300;
    p.A3 = 1e-300;
    const SteadyStateResult r = find_steady_state(p);
    EXPECT_NEAR(r.state.c_A, 4.0, 1e-9);
    EXPECT_NEAR(r.state.c_B, 3.0, 1e-9);
    // Two linear heat balances, solved by hand.
    const OracleReactor o;
    Eigen::Matrix2d m;
    m << -(o.a() + o.b()), o.b(), o.cj(), -(o.g() + o.cj());
    const Eigen::Vector2d rhs(-o.a() * 333.0, -o.g() * 300.0);
    const Eigen::Vector2d th = m.fullPivLu().solve(rhs);
    EXPECT_NEAR(r.state.theta, th(0), 1e-7);
    EXPECT_NEAR(r.state.theta_J, th(1), 1e-7);
}

TEST(SteadyState, InsulatedJacketStaysAtInletTemperature) {
    ReactorParams p;
    p.UA = 1e-12;
    const SteadyStateResult r = find_steady_state(p);
    EXPECT_NEAR(r.state.theta_J, 300.0, 1e-8);
}

TEST(Reactor, ProcessStructure) {
    const ReactorParams p;
    const ProcessModel m = reactor_process(p, paper_steady_state());
    EXPECT_EQ(m.n, 4u);
    EXPECT_EQ(m.p, 3u);
    ASSERT_EQ(m.faults.size(), 2u);
    EXPECT_EQ(m.faults[0].name, "f1");
    EXPECT_EQ(m.faults[1].name, "f2");
    const Vector x = (Vector(4) << 0.1, 0.2, 3.0, 4.0).finished();
    EXPECT_EQ(m.H(x), (Vector(3) << 0.1, 3.0, 4.0).finished());
    const Vector e = m.disturbances[0].process(x);
    EXPECT_EQ(e(0), -1.0);
    EXPECT_EQ(e(1), -1.0);
    EXPECT_NEAR(e(2), p.heat_release(), 1e-15);
    EXPECT_EQ(e(3), 0.0);
    const OperatingBox box = reactor_box();
    EXPECT_EQ(box.upper, (Vector(4) << 0.5, 0.2, 10, 10).finished());
}

TEST(Reactor, SubstepSelection) {
    EXPECT_EQ(stable_substeps(ReactorParams{}, paper_steady_state(), 0.1), 1);
    EXPECT_EQ(stable_substeps(literal(), paper_steady_state(), 0.1), 2);
    const int fine = stable_substeps(literal(), paper_steady_state(), 0.01);
    EXPECT_EQ(fine, 1);
    EXPECT_THROW(stable_substeps(ReactorParams{}, paper_steady_state(), 0.0), InvalidSpec);
}

TEST(Reactor, RoundoffFloorGrowsWithMagnitudeAndSteps) {
    EXPECT_GT(roundoff_floor(2.0, 1.0, 10), roundoff_floor(1.0, 1.0, 10));
    EXPECT_GT(roundoff_floor(1.0, 1.0, 100), roundoff_floor(1.0, 1.0, 10));
    EXPECT_EQ(roundoff_floor(0.0, 0.0, 5), 0.0);
}

TEST(Scenario, PerSecondRun) {
    const ScenarioResult r = run_paper_scenario();
    const ScenarioMetrics& m = r.metrics;
    EXPECT_TRUE(m.decay[0].passed) << m.decay[0].max_excess;
    EXPECT_TRUE(m.decay[1].passed) << m.decay[1].max_excess;
    EXPECT_TRUE(m.step_tracking.passed) << m.step_tracking.max_abs_error;
    EXPECT_TRUE(m.cross_decoupling.passed) << m.cross_decoupling.max_abs_error;
    // 7/alpha1 is longer than the run in these units.
    EXPECT_EQ(m.ramp_tracking.samples, 0u);
    EXPECT_EQ(r.config.substeps, 1);
    // Observer 1 settles over 5/alpha1 = 15000 s, so it is never armed here.
    EXPECT_NEAR(r.bank.rules[0].arm_time, 5.0 / r.metrics.alpha[0], 1e-9);
    EXPECT_FALSE(r.bank.first_flag[0].has_value());
    ASSERT_TRUE(r.bank.first_flag[1].has_value());
    EXPECT_GE(*r.bank.first_flag[1], 5000.0);
    EXPECT_TRUE(r.bank.isolation_at(4000.0).empty());
}

TEST(Scenario, LiteralUnitsRun) {
    ScenarioOptions o;
    o.params = literal();
    const ScenarioResult r = run_paper_scenario(o);
    const ScenarioMetrics& m = r.metrics;
    EXPECT_TRUE(m.decay[0].passed) << m.decay[0].max_excess;
    EXPECT_TRUE(m.decay[1].passed) << m.decay[1].max_excess;
    EXPECT_TRUE(m.step_tracking.passed) << m.step_tracking.max_abs_error;
    EXPECT_TRUE(m.ramp_tracking.passed) << m.ramp_tracking.max_abs_error;
    EXPECT_GT(m.ramp_tracking.samples, 0u);
    EXPECT_TRUE(m.cross_decoupling.passed) << m.cross_decoupling.max_abs_error;
    EXPECT_EQ(r.config.substeps, 2);
    EXPECT_EQ(r.bank.isolation_at(4000.0), std::vector<std::size_t>{0});
    const auto both = r.bank.isolation_at(7900.0);
    EXPECT_EQ(both, (std::vector<std::size_t>{0, 1}));
}

TEST(Scenario, DisturbanceDoesNotMoveTheEstimates) {
    ScenarioOptions on;
    on.t_end = 1000.0;
    ScenarioOptions off = on;
    off.disturbance = false;
    const Trajectory a = run_paper_scenario(on).bank.trajectory;
    const Trajectory b = run_paper_scenario(off).bank.trajectory;
    ASSERT_EQ(a.size(), b.size());
    const double scale = std::max(1.0, a.fhat.cwiseAbs().maxCoeff());
    EXPECT_LT((a.fhat - b.fhat).cwiseAbs().maxCoeff(), 1e-6 * scale);
    EXPECT_GT((a.x - b.x).cwiseAbs().maxCoeff(), 1.0);
}

TEST(Scenario, NotesDescribeTheRun) {
    ScenarioOptions o;
    o.t_end = 10.0;
    const ScenarioResult r = run_paper_scenario(o);
    ASSERT_FALSE(r.notes.empty());
    EXPECT_NE(r.notes[0].find("per-second"), std::string::npos);
    EXPECT_EQ(r.steady.theta, 386.20);
}
