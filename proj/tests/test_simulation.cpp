#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fdest/simulation.hpp"
#include "support/random_plants.hpp"

using namespace fdest;

namespace {

LinearPlant scalar_plant() {
    LinearPlant p;
    p.F = Matrix::Constant(1, 1, -1.0);
    p.G = Matrix::Ones(1, 1);
    p.E = Matrix(1, 0);
    p.H = Matrix::Ones(1, 1);
    p.J = Matrix::Zero(1, 1);
    p.K = Matrix(1, 0);
    return p;
}

LinearPlant two_state_plant() {
    LinearPlant p;
    p.F = (Matrix(2, 2) << -1, 0.5, 0, -2).finished();
    p.G = (Matrix(2, 1) << 1, 0).finished();
    p.E = (Matrix(2, 1) << 0, 1).finished();
    p.H = Matrix::Identity(2, 2);
    p.J = Matrix::Zero(2, 1);
    p.K = Matrix::Zero(2, 1);
    return p;
}

ParitySolution solve(const LinearPlant& p, const ExoSystem& exo, int s, std::vector<double> alpha) {
    const ParityResult r = solve_parity_linear(p, exo, s, std::move(alpha));
    if (const auto* f = std::get_if<SynthesisFailure>(&r)) {
        ADD_FAILURE() << f->message;
        return {};
    }
    return std::get<ParitySolution>(r);
}

// Observer started on the invariant manifold (x_o = 0 at t0) plus e0.
ObserverSpec on_manifold(const LinearPlant& p, const ExoSystem& exo, const ParitySolution& sol, const Vector& x0,
                         const Vector& e0) {
    const Matrix t = linear_tmap(p, exo, sol);
    Vector pt = Vector::Zero(t.cols());
    pt.head(x0.size()) = x0;
    return {"obs", build_observer(sol), t * pt + e0, 0};
}

SimulationConfig config(double t_end, double dt, Vector x0, int substeps = 1) {
    SimulationConfig c;
    c.t_end = t_end;
    c.dt = dt;
    c.x0 = std::move(x0);
    c.substeps = substeps;
    return c;
}

}  // namespace

TEST(Simulation, EstimateVanishesOnManifoldWithoutFault) {
    const LinearPlant p = scalar_plant();
    const ParitySolution sol = solve(p, ExoSystem::make_step(), 1, {2.0});
    const ProcessModel pm = process_from_linear(p);
    const Vector x0 = Vector::Constant(1, 0.5);
    const Trajectory tr = simulate_cascade(pm, {}, {}, {on_manifold(p, ExoSystem::make_step(), sol, x0, Vector::Zero(1))},
                                           config(10.0, 0.01, x0));
    ASSERT_EQ(tr.size(), 1001u);
    EXPECT_LT(tr.fhat.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Simulation, InitialErrorDecaysAnalytically) {
    const LinearPlant p = scalar_plant();
    const ParitySolution sol = solve(p, ExoSystem::make_step(), 1, {2.0});
    const ProcessModel pm = process_from_linear(p);
    const Vector x0 = Vector::Constant(1, 0.5);
    const Vector e0 = Vector::Constant(1, 1.0);
    const ObserverSpec obs = on_manifold(p, ExoSystem::make_step(), sol, x0, e0);
    const Trajectory tr = simulate_cascade(pm, {}, {}, {obs}, config(5.0, 0.01, x0));
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double exact = analytic_error(obs.generator, e0, tr.t[k]);
        EXPECT_NEAR(exact, std::exp(-2.0 * tr.t[k]), 1e-12);
        // RK4 local error bound with margin: dt^4 scale.
        EXPECT_NEAR(tr.fhat(static_cast<Eigen::Index>(k), 0), exact, 1e-8);
    }
}

TEST(Simulation, StepFaultTransientMatchesClosedForm) {
    const LinearPlant p = scalar_plant();
    const ParitySolution sol = solve(p, ExoSystem::make_step(), 1, {2.0});
    const ProcessModel pm = process_from_linear(p);
    const Vector x0 = Vector::Constant(1, 0.5);
    const FaultSchedule sched{{0, ExoSystem::make_step(), 2.0, Vector::Constant(1, 3.0)}};
    const Trajectory tr = simulate_cascade(pm, sched, {}, {on_manifold(p, ExoSystem::make_step(), sol, x0, Vector::Zero(1))},
                                           config(10.0, 0.01, x0));
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double t = tr.t[k];
        const double expect = t < 2.0 ? 0.0 : 3.0 * (1.0 - std::exp(-2.0 * (t - 2.0)));
        EXPECT_NEAR(tr.fhat(static_cast<Eigen::Index>(k), 0), expect, 1e-8) << "t = " << t;
        EXPECT_EQ(tr.f(static_cast<Eigen::Index>(k), 0), t < 2.0 ? 0.0 : 3.0);
    }
}

TEST(Simulation, OnsetBetweenGridPointsSplitsStep) {
    const LinearPlant p = scalar_plant();
    const ParitySolution sol = solve(p, ExoSystem::make_step(), 1, {2.0});
    const ProcessModel pm = process_from_linear(p);
    const Vector x0 = Vector::Zero(1);
    const FaultSchedule sched{{0, ExoSystem::make_step(), 1.005, Vector::Constant(1, 1.0)}};
    const Trajectory tr = simulate_cascade(pm, sched, {}, {on_manifold(p, ExoSystem::make_step(), sol, x0, Vector::Zero(1))},
                                           config(3.0, 0.01, x0));
    const auto k = static_cast<Eigen::Index>(tr.size() - 1);
    EXPECT_NEAR(tr.fhat(k, 0), 1.0 - std::exp(-2.0 * (3.0 - 1.005)), 1e-8);
    // Plant state: x' = -x + 1 after onset.
    EXPECT_NEAR(tr.x(k, 0), 1.0 - std::exp(-(3.0 - 1.005)), 1e-8);
}

TEST(Simulation, DecoupledDisturbanceLeavesEstimateUnchanged) {
    const LinearPlant p = two_state_plant();
    const ExoSystem exo = ExoSystem::make_ramp();
    const ParitySolution sol = solve(p, exo, 2, {3.0, 2.0});
    const ProcessModel pm = process_from_linear(p);
    const Vector x0 = (Vector(2) << 0.2, -0.1).finished();
    const ObserverSpec obs = on_manifold(p, exo, sol, x0, (Vector(2) << 0.0, 1.0).finished());
    const FaultSchedule sched{{0, exo, 1.0, (Vector(2) << 0.5, 0.2).finished()}};
    const auto on = {DisturbanceSignal::piecewise(0, {0, 5, 12}, {1.0, -2.0, 0.5})};
    const ProbeResult r = decoupling_probe(pm, sched, on, {}, obs, config(20.0, 0.01, x0));
    EXPECT_LT(r.max_difference, 1e-9);
}

TEST(Simulation, CoupledDisturbanceIsVisible) {
    // Design that ignores the disturbance channel.
    LinearPlant design_plant = two_state_plant();
    design_plant.E = Matrix(2, 0);
    design_plant.K = Matrix(2, 0);
    const ExoSystem exo = ExoSystem::make_step();
    const ParitySolution sol = solve(design_plant, exo, 1, {1.0});
    ASSERT_GT(std::abs(sol.v[1](1)), 1e-3);
    const LinearPlant p = two_state_plant();
    const ProcessModel pm = process_from_linear(p);
    const Vector x0 = Vector::Zero(2);
    const ObserverSpec obs{"obs", build_observer(sol), Vector::Zero(1), 0};
    const auto on = {DisturbanceSignal::constant(0, 1.0)};
    const ProbeResult r = decoupling_probe(pm, {}, on, {}, obs, config(10.0, 0.01, x0));
    EXPECT_GT(r.max_difference, 1e-3);
}

TEST(Simulation, PiecewiseDisturbanceValues) {
    const DisturbanceSignal d = DisturbanceSignal::piecewise(0, {1, 2}, {5, 7});
    EXPECT_EQ(d.value(0.5), 0.0);
    EXPECT_EQ(d.value(1.0), 5.0);
    EXPECT_EQ(d.value(1.99), 5.0);
    EXPECT_EQ(d.value(2.0), 7.0);
    EXPECT_EQ(d.value(100.0), 7.0);
    EXPECT_THROW(DisturbanceSignal::piecewise(0, {2, 1}, {1, 1}), InvalidSpec);
    EXPECT_THROW(DisturbanceSignal::piecewise(0, {}, {}), InvalidSpec);
}

TEST(Simulation, CsvHeaderAndRows) {
    const LinearPlant p = scalar_plant();
    const ParitySolution sol = solve(p, ExoSystem::make_step(), 1, {2.0});
    const ProcessModel pm = process_from_linear(p);
    const Vector x0 = Vector::Constant(1, 0.5);
    const FaultSchedule sched{{0, ExoSystem::make_step(), 0.5, Vector::Constant(1, 1.0)}};
    const Trajectory tr = simulate_cascade(pm, sched, {}, {on_manifold(p, ExoSystem::make_step(), sol, x0, Vector::Zero(1))},
                                           config(1.0, 0.25, x0));
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,x1,xo1,z1,y1,f1,fhat1");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 5u);
    std::ostringstream shifted;
    write_trajectory_csv(shifted, tr, Vector::Constant(1, 10.0));
    EXPECT_NE(shifted.str().find("\n0,10.5,"), std::string::npos);
}

TEST(Simulation, ZeroLengthRunIsEmpty) {
    const LinearPlant p = scalar_plant();
    const ProcessModel pm = process_from_linear(p);
    const Trajectory tr = simulate_cascade(pm, {}, {}, {}, config(0.0, 0.1, Vector::Zero(1)));
    EXPECT_EQ(tr.size(), 0u);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    EXPECT_EQ(os.str(), "t,x1,y1,f1\n");
}

TEST(Simulation, SubstepsMatchFinerGrid) {
    const LinearPlant p = two_state_plant();
    const ProcessModel pm = process_from_linear(p);
    const Vector x0 = (Vector(2) << 1.0, -1.0).finished();
    const Trajectory coarse = simulate_cascade(pm, {}, {}, {}, config(2.0, 0.1, x0, 4));
    const Trajectory fine = simulate_cascade(pm, {}, {}, {}, config(2.0, 0.025, x0));
    ASSERT_EQ(coarse.size(), 21u);
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        EXPECT_NEAR(coarse.t[k], fine.t[4 * k], 1e-12);
        EXPECT_LT((coarse.x.row(static_cast<Eigen::Index>(k)) - fine.x.row(static_cast<Eigen::Index>(4 * k))).norm(), 1e-12);
    }
    EXPECT_THROW(simulate_cascade(pm, {}, {}, {}, config(2.0, 0.1, x0, 0)), InvalidSpec);
}

TEST(Simulation, RungeKuttaOrderOnLinearPlantProperty) {
    std::mt19937_64 rng(91);
    for (int trial = 0; trial < 5; ++trial) {
        const LinearPlant p = fdest::testing::random_plant(rng, 3, 2, 1);
        const ProcessModel pm = process_from_linear(p);
        const Vector x0 = fdest::testing::random_matrix(rng, 3, 1);
        const double t_end = 1.0;
        const Vector exact = matrix_exponential(p.F, t_end) * x0;
        const auto err = [&](double dt) {
            const Trajectory tr = simulate_cascade(pm, {}, {}, {}, config(t_end, dt, x0));
            return (tr.x.row(tr.x.rows() - 1).transpose() - exact).norm();
        };
        const double ratio = err(0.05) / err(0.025);
        EXPECT_GT(ratio, 12.0);
        EXPECT_LT(ratio, 20.0);
    }
}

TEST(Simulation, DivergenceIsReported) {
    LinearPlant p = scalar_plant();
    p.F(0, 0) = 50.0;
    const ProcessModel pm = process_from_linear(p);
    try {
        simulate_cascade(pm, {}, {}, {}, config(100.0, 0.1, Vector::Ones(1)));
        FAIL() << "expected divergence";
    } catch (const DivergedSimulation& e) {
        EXPECT_GT(e.last_finite_time(), 0.0);
        EXPECT_LT(e.last_finite_time(), 100.0);
    }
}

TEST(Simulation, ScheduleValidation) {
    EXPECT_THROW(validate_schedule({{3, ExoSystem::make_step(), 0.0, Vector::Ones(1)}}, 2), InvalidSpec);
    EXPECT_THROW(validate_schedule({{0, ExoSystem::make_step(), -1.0, Vector::Ones(1)}}, 1), InvalidSpec);
    EXPECT_THROW(validate_schedule({{0, ExoSystem::make_ramp(), 0.0, Vector::Ones(1)}}, 1), DimensionError);
    EXPECT_THROW(validate_schedule({{0, ExoSystem::make_step(), 0.0, Vector::Ones(1)},
                                    {0, ExoSystem::make_step(), 1.0, Vector::Ones(1)}},
                                   1),
                 InvalidSpec);
}

TEST(Bank, FlagsFollowTheFaultedChannel) {
    // Two independent scalar channels measured separately; each observer
    // only sees its own fault.
    ProcessModel pm;
    pm.name = "pair";
    pm.n = 2;
    pm.p = 2;
    pm.F = linear_field(-Matrix::Identity(2, 2));
    pm.H = linear_field(Matrix::Identity(2, 2));
    pm.faults.push_back({"fa", constant_field(2, (Vector(2) << 1, 0).finished()), constant_field(2, Vector::Zero(2))});
    pm.faults.push_back({"fb", constant_field(2, (Vector(2) << 0, 1).finished()), constant_field(2, Vector::Zero(2))});
    pm.box = OperatingBox::symmetric(2, 1.0);

    auto design = [](Eigen::Index ch) {
        ParitySolution sol;
        sol.s = 1;
        RowVector e = RowVector::Zero(2);
        e(ch) = 1.0;
        sol.v = {-2.0 * e, -2.0 * e};
        sol.alpha = {2.0};
        return build_observer(sol);
    };
    const std::vector<ObserverSpec> bank{{"a", design(0), Vector::Zero(1), 0}, {"b", design(1), Vector::Zero(1), 1}};
    const FaultSchedule sched{{0, ExoSystem::make_step(), 10.0, Vector::Constant(1, 1.0)}};
    const BankResult res = run_bank(pm, sched, {}, bank, config(20.0, 0.01, Vector::Zero(2)));
    ASSERT_TRUE(res.first_flag[0].has_value());
    EXPECT_GE(*res.first_flag[0], 10.0);
    EXPECT_FALSE(res.first_flag[1].has_value());
    EXPECT_EQ(res.isolation_at(19.0), std::vector<std::size_t>{0});
    EXPECT_TRUE(res.isolation_at(9.0).empty());
    const auto est = res.estimates_at(19.0);
    ASSERT_EQ(est.size(), 1u);
    EXPECT_NEAR(est[0].second, 1.0, 1e-6);

    const std::vector<ObserverSpec> swapped{bank[1], bank[0]};
    const BankResult res2 = run_bank(pm, sched, {}, swapped, config(20.0, 0.01, Vector::Zero(2)));
    EXPECT_FALSE(res2.first_flag[0].has_value());
    EXPECT_EQ(res2.first_flag[1], res.first_flag[0]);
}

TEST(Bank, CalibratedRuleFloorsThreshold) {
    Trajectory tr;
    tr.t = {0.0, 1.0, 2.0};
    tr.fhat = Matrix::Zero(3, 1);
    const DetectionRule r = calibrate_rule(tr, 0, 0.5, 0.1);
    EXPECT_EQ(r.threshold, 1e-6);
    EXPECT_NEAR(r.dwell, 1.0, 1e-15);
    EXPECT_EQ(r.arm_time, 0.5);
}

TEST(Bank, DwellDelaysDetection) {
    Trajectory tr;
    for (int k = 0; k <= 10; ++k) tr.t.push_back(k);
    tr.fhat = Matrix::Zero(11, 1);
    for (int k = 3; k <= 10; ++k) tr.fhat(k, 0) = 2.0;
    tr.fhat(5, 0) = 0.0;
    const DetectionRule rule{1.0, 2.0, 0.0};
    EXPECT_EQ(first_detection(tr, 0, rule), 8.0);
    EXPECT_FALSE(flagged_at(tr, 0, rule, 7.0));
    EXPECT_TRUE(flagged_at(tr, 0, rule, 8.0));
}
