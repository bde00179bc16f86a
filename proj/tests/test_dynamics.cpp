#include <flownet/dynamics.hpp>

#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace flownet;
using namespace flownet::testing;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// Two dynamic nodes joined by two branches and nothing else.
NetworkEquations closed_pair(double C1, double C2) {
  NetworkDefinition d;
  d.nodes = {{"A", NodeKind::dynamic, CapacitiveLaw::linear(C1)},
             {"B", NodeKind::dynamic, CapacitiveLaw::linear(C2)},
             {"G", NodeKind::datum, std::nullopt}};
  d.branches = {{"AB", "A", "B", BranchKind::resistive, ResistiveLaw::linear(1.3), 0},
                {"BA", "B", "A", BranchKind::resistive, ResistiveLaw::tanh(2.0, 0.8), 0}};
  return NetworkEquations(ProcessNetwork::build(d), {});
}

}  // namespace

TEST(Dynamics, RhsAtEmptyTanks) {
  const auto eq = two_tank_equations();
  const Vector dZ = assemble_rhs(eq)(Vector::Zero(2));
  EXPECT_DOUBLE_EQ(dZ[0], 4.0);
  EXPECT_DOUBLE_EQ(dZ[1], 12.0);
}

TEST(Dynamics, RhsVanishesAtSteadyState) {
  const auto eq = two_tank_equations();
  const Vector dZ = assemble_rhs(eq)(eq.inventories(two_tank_w_star()));
  EXPECT_LT(dZ.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Dynamics, ClosedNetworkAtUniformPotentialIsAtRest) {
  const auto eq = closed_pair(1.0, 3.0);
  EXPECT_EQ(assemble_rhs(eq)(vec({2.0, 6.0})), Vector::Zero(2));
}

TEST(Dynamics, EulerStep) {
  const auto eq = two_tank_equations();
  const Vector Z = step_euler(Vector::Zero(2), assemble_rhs(eq), 0.02);
  EXPECT_NEAR(Z[0], 0.08, 1e-15);
  EXPECT_NEAR(Z[1], 0.24, 1e-15);
  const Vector w = eq.dynamic_potentials(Z);
  EXPECT_NEAR(w[0], 0.04, 1e-15);
  EXPECT_NEAR(w[1], 0.12, 1e-15);
}

TEST(Dynamics, FixedPointAndZeroStep) {
  const Rhs zero = [](const Vector& Z) { return Vector::Zero(Z.size()); };
  const Vector Z = vec({1.5, -2.0});
  EXPECT_EQ(step_euler(Z, zero, 0.3), Z);
  EXPECT_EQ(step_rk4(Z, zero, 0.3), Z);
  const auto eq = two_tank_equations();
  EXPECT_EQ(step_euler(Z, assemble_rhs(eq), 0.0), Z);
}

TEST(Dynamics, Rk4MatchesExponential) {
  const Rhs decay = [](const Vector& z) { return Vector(-z); };
  const double z = step_rk4(vec({1.0}), decay, 0.1)[0];
  EXPECT_NEAR(z, std::exp(-0.1), 1e-7);
  EXPECT_NEAR(z, 0.9048375, 1e-7);
}

TEST(Dynamics, Rk4OrderFour) {
  const Rhs decay = [](const Vector& z) { return Vector(-z); };
  const auto error = [&](int n) {
    Vector z = vec({1.0});
    for (int i = 0; i < n; ++i) z = step_rk4(z, decay, 1.0 / n);
    return std::abs(z[0] - std::exp(-1.0));
  };
  EXPECT_NEAR(std::log2(error(10) / error(20)), 4.0, 0.1);
}

TEST(Dynamics, Rk4TwoTankReachesSteadyState) {
  const auto eq = two_tank_equations();
  const auto rhs = assemble_rhs(eq);
  Vector Z = Vector::Zero(2);
  for (int i = 0; i < 2000; ++i) Z = step_rk4(Z, rhs, 0.02);
  EXPECT_LT((eq.dynamic_potentials(Z) - two_tank_w_star()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Dynamics, AdaptiveStepMatchesExponential) {
  const Rhs decay = [](const Vector& z) { return Vector(-3.0 * z); };
  const Vector z = step_adaptive(vec({1.0}), decay, 2.0, {1e-10, 1e-12, 1e-12});
  EXPECT_NEAR(z[0], std::exp(-6.0), 1e-9);
}

TEST(Dynamics, SimulateConvergesToSteadyState) {
  const auto eq = two_tank_equations();
  SimulationOptions opts;
  opts.dt = 0.02;
  opts.t_end = 40.0;
  const auto traj = simulate(eq, Vector::Zero(2), opts);
  ASSERT_EQ(traj.size(), 2001u);
  EXPECT_DOUBLE_EQ(traj.times.back(), 40.0);
  EXPECT_LT((traj.w.back() - two_tank_w_star()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(traj.dynamic_ids, (std::vector<std::string>{"P1", "P2"}));
  EXPECT_EQ(traj.boundary_ids, (std::vector<std::string>{"T1", "T2"}));
}

TEST(Dynamics, SimulateShortensLastStep) {
  SimulationOptions opts;
  opts.dt = 0.3;
  opts.t_end = 1.0;
  const auto traj = simulate(two_tank_equations(), Vector::Zero(2), opts);
  ASSERT_EQ(traj.size(), 5u);
  EXPECT_DOUBLE_EQ(traj.times.back(), 1.0);
}

TEST(Dynamics, SimulateZeroHorizon) {
  SimulationOptions opts;
  opts.t_end = 0.0;
  const Vector Z0 = vec({0.5, 0.25});
  const auto traj = simulate(two_tank_equations(), Z0, opts);
  ASSERT_EQ(traj.size(), 1u);
  EXPECT_EQ(traj.Z[0], Z0);
}

TEST(Dynamics, SteadyStateIsInvariant) {
  const auto eq = two_tank_equations();
  SimulationOptions opts;
  opts.t_end = 5.0;
  opts.method = Method::rk4;
  const auto traj = simulate(eq, eq.inventories(two_tank_w_star()), opts);
  for (const auto& w : traj.w) EXPECT_LT((w - two_tank_w_star()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Dynamics, ClosedPairConservesInventory) {
  const auto eq = closed_pair(2.0, 0.5);
  SimulationOptions opts;
  opts.dt = 0.01;
  opts.t_end = 20.0;
  const auto traj = simulate(eq, vec({3.0, 0.1}), opts);
  for (std::size_t k = 1; k < traj.size(); ++k) EXPECT_NEAR(traj.Z[k].sum(), traj.Z[k - 1].sum(), 1e-12);
  // Potentials equalise.
  EXPECT_NEAR(traj.w.back()[0], traj.w.back()[1], 1e-8);
}

TEST(Dynamics, TerminalOutputsAtSteadyState) {
  const auto eq = two_tank_equations();
  const auto out = terminal_outputs(eq, eq.inventories(two_tank_w_star()));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].id, "T1");
  EXPECT_NEAR(out[0].flow, 200.0 / 21.0, 1e-12);
  EXPECT_NEAR(out[1].flow, -200.0 / 21.0, 1e-12);
  EXPECT_TRUE(out[0].potential_specified);
}

TEST(Dynamics, TerminalOutputsAtEmptyTanks) {
  const auto out = terminal_outputs(two_tank_equations(), Vector::Zero(2));
  EXPECT_DOUBLE_EQ(out[0].flow, 16.0);
}

TEST(Dynamics, EqualPotentialsGiveNoTerminalFlow) {
  const auto eq = NetworkEquations(ProcessNetwork::build(two_tank()), {{{"T1", 0.0}, {"T2", 0.0}}, {}});
  for (const auto& t : terminal_outputs(eq, Vector::Zero(2))) EXPECT_EQ(t.flow, 0.0);
}

TEST(Dynamics, FlowTerminalInjectsPrescribedFlow) {
  auto d = two_tank();
  const auto eq = NetworkEquations(ProcessNetwork::build(d), {{{"T2", 0.0}}, {{"T1", 5.0}}});
  const Vector Z = vec({1.0, 2.0});
  const auto st = eq.state(Z);
  EXPECT_NEAR(st.flows[0] + st.flows[2], 5.0, 1e-10);
  // Steady state: total in = total out through the demand branches.
  SimulationOptions opts;
  opts.t_end = 60.0;
  opts.method = Method::rk4;
  const auto traj = simulate(eq, Z, opts);
  EXPECT_NEAR(traj.F.back()[1] + traj.F.back()[3], 5.0, 1e-8);
  EXPECT_FALSE(terminal_outputs(eq, traj.Z.back())[0].potential_specified);
}

TEST(Dynamics, BoundaryValidation) {
  const auto net = ProcessNetwork::build(two_tank());
  EXPECT_THROW(validate_boundary(net, {{{"T2", 0.0}}, {}}), ValidationError);  // T1 missing
  EXPECT_THROW(validate_boundary(net, {{{"T1", 1.0}}, {{"T1", 1.0}}}), ValidationError);
  EXPECT_THROW(validate_boundary(net, {{{"T1", 1.0}, {"P1", 0.0}}, {}}), ValidationError);
  EXPECT_THROW(validate_boundary(net, {{{"T1", 1.0}}, {{"T2", 1.0}}}), ValidationError);
  EXPECT_THROW(validate_boundary(net, {{{"T1", 1.0}, {"X", 0.0}}, {}}), ValidationError);
  EXPECT_NO_THROW(validate_boundary(net, {{{"T1", 1.0}}, {}}));  // datum defaults to 0
}

TEST(Dynamics, StabilityLimits) {
  const auto eq = two_tank_equations();
  const auto rhs = assemble_rhs(eq);
  // Eigenvalues -(K1+K2)/C1 = -1.5 and -(K3+K4)/C2 = -3.5.
  EXPECT_NEAR(stability_limit(rhs, Vector::Zero(2), Method::euler), 2.0 / 3.5, 1e-8);
  EXPECT_NEAR(stability_limit(rhs, Vector::Zero(2), Method::rk4), 2.785293563405 / 3.5, 1e-8);
  EXPECT_TRUE(std::isinf(stability_limit(rhs, Vector::Zero(2), Method::adaptive)));
}

TEST(Dynamics, NumericalJacobianOfLinearNetwork) {
  const auto eq = two_tank_equations();
  const Matrix J = numerical_jacobian(assemble_rhs(eq), vec({0.3, 0.7}));
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = -1.5;
  expected(1, 1) = -3.5;
  EXPECT_LT((J - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Dynamics, OversizedStepIsRejected) {
  SimulationOptions opts;
  opts.dt = 10.0;
  opts.t_end = 40.0;
  EXPECT_THROW(simulate(two_tank_equations(), Vector::Zero(2), opts), DivergenceError);
  opts.dt = 0.6;  // just above 4/7
  EXPECT_THROW(simulate(two_tank_equations(), Vector::Zero(2), opts), DivergenceError);
  opts.dt = 0.56;
  EXPECT_NO_THROW(simulate(two_tank_equations(), Vector::Zero(2), opts));
}

TEST(Dynamics, UncheckedBlowUpIsDetected) {
  SimulationOptions opts;
  opts.dt = 10.0;
  opts.t_end = 4000.0;
  opts.check_stability = false;
  EXPECT_THROW(simulate(two_tank_equations(), Vector::Zero(2), opts), DivergenceError);
}

TEST(Dynamics, RandomNetworksBalanceInjections) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto r = random_linear_network(seed);
    const auto eq = NetworkEquations(ProcessNetwork::build(r.definition()), r.bc());
    Vector Z(r.n_dyn);
    for (int i = 0; i < r.n_dyn; ++i) Z[i] = 0.3 * i - 0.4;
    const auto st = eq.state(Z);
    const Vector dZ = eq.inventory_rates(st.flows);
    double boundary = 0.0;
    for (const auto& t : terminal_outputs(eq, st)) boundary += t.flow;
    // Every branch column sums to zero, so the dynamic rates balance the
    // boundary injections.
    EXPECT_NEAR(dZ.sum(), boundary, 1e-12 * std::max(1.0, std::abs(boundary)));
  }
}

TEST(Dynamics, TabulatedCapacityOutOfRange) {
  auto d = two_tank();
  d.nodes[0].capacity = CapacitiveLaw::tabulated({{0, 0}, {10, 20}});
  const auto eq = NetworkEquations(ProcessNetwork::build(d), two_tank_bc());
  EXPECT_THROW(assemble_rhs(eq)(vec({30.0, 0.0})), DomainError);
}
