#pragma once

#include <flownet/dynamics.hpp>
#include <flownet/types.hpp>

#include <vector>

namespace flownet {

struct SteadyStateSolution {
  Vector w_star;      ///< dynamic-node potentials
  Vector potentials;  ///< every row, boundary values included
  Vector Z_star;
  Vector F_star;
  double G_star = 0.0;
  /// Infinity norm of the dynamic-node balances A_dyn F at the solution.
  double kkt_residual = 0.0;
  int iterations = 0;
  /// True when the network is all-linear and one symmetric positive definite
  /// solve was enough.
  bool direct = false;
};

struct SteadyOptions {
  int max_iterations = 200;
  double tolerance = 1e-11;
};

/// Extended co-content: sum over branches of the integral of F dW from 0 to
/// W_b, minus F_T w_T for flow-specified terminals. Terminal sources
/// contribute F_s W_b. The minimum over w is the steady state.
double cocontent(const NetworkEquations& eq, const Vector& w_dynamic);
/// Gradient of the co-content with respect to the dynamic potentials, which
/// is the node flow imbalance A_dyn F.
Vector cocontent_gradient(const NetworkEquations& eq, const Vector& w_dynamic);

/// Sum over branches of the integral of W dF from 0 to F_b.
double content(const ProcessNetwork& net, const Vector& flows);

double kkt_residual(const NetworkEquations& eq, const Vector& w_dynamic);

/// Minimises the co-content over the dynamic potentials. All-linear networks
/// take one direct solve; otherwise damped Newton with backtracking.
SteadyStateSolution solve_steady(const NetworkEquations& eq, const SteadyOptions& options = {});

/// Lyapunov potential P(Z): the line integral of the node imbalance along an
/// inventory path from 0 to Z plus the co-content at Z = 0. The imbalance is
/// the co-content gradient in w, so P(Z) = G(C^{-1}(Z)) on any path.
/// Trajectories obey dZ/dt = -C'(w) grad P, so P never increases.
double potential(const NetworkEquations& eq, const Vector& Z);

struct ConvexityReport {
  std::vector<Matrix> hessians;
  std::vector<double> min_eigenvalues;
  /// Every minimum eigenvalue is >= -tolerance.
  bool convex = true;
};

/// Finite-difference Hessian (h = 1e-5) of the co-content at each sample.
ConvexityReport convexity_check(const NetworkEquations& eq, const std::vector<Vector>& w_samples,
                                double tolerance = 1e-8);

}  // namespace flownet
