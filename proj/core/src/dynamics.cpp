#include <flownet/dynamics.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

namespace flownet {

namespace {

constexpr double kDivergenceBound = 1e12;
constexpr int kMaxBracketExpansions = 200;
constexpr int kMaxTerminalIterations = 200;

void check_finite_state(const Vector& Z, double t) {
  for (Eigen::Index i = 0; i < Z.size(); ++i) {
    if (!std::isfinite(Z[i]) || std::abs(Z[i]) > kDivergenceBound) {
      std::ostringstream os;
      os << "simulation diverged at t=" << t << " (|Z| exceeded " << kDivergenceBound << ")";
      throw DivergenceError(os.str());
    }
  }
}

}  // namespace

void validate_boundary(const ProcessNetwork& net, const BoundaryConditions& bc) {
  for (const auto& [id, value] : bc.potentials) {
    if (!net.has_node(id)) throw ValidationError("boundary condition for unknown node '" + id + "'");
    if (net.node_at_row(net.row_of(id)).kind == NodeKind::dynamic)
      throw ValidationError("dynamic node '" + id + "' cannot take a boundary potential");
    if (!std::isfinite(value)) throw ValidationError("non-finite boundary potential at '" + id + "'");
  }
  for (const auto& [id, value] : bc.flows) {
    if (!net.has_node(id)) throw ValidationError("boundary condition for unknown node '" + id + "'");
    const NodeKind kind = net.node_at_row(net.row_of(id)).kind;
    if (kind != NodeKind::terminal)
      throw ValidationError("only terminals can take a boundary flow ('" + id + "')");
    if (bc.potentials.count(id)) throw ValidationError("terminal '" + id + "' has both a potential and a flow");
    if (!std::isfinite(value)) throw ValidationError("non-finite boundary flow at '" + id + "'");
  }
  for (const auto& node : net.nodes()) {
    if (node.kind == NodeKind::terminal && !bc.potentials.count(node.id) && !bc.flows.count(node.id))
      throw ValidationError("terminal '" + node.id + "' has no boundary condition");
  }
  // Flow terminals are solved one at a time, so they may not touch each other.
  for (std::size_t j = 0; j < net.num_branches(); ++j) {
    const auto& b = net.branches()[j];
    if (bc.flows.count(b.from) && bc.flows.count(b.to))
      throw ValidationError("branch '" + b.id + "' joins two flow-specified terminals");
  }
}

// ---------------------------------------------------------------------------
// NetworkEquations

NetworkEquations::NetworkEquations(ProcessNetwork net, BoundaryConditions bc)
    : net_(std::move(net)), bc_(std::move(bc)) {
  validate_boundary(net_, bc_);
  const std::size_t n = net_.num_nodes();
  fixed_potentials_ = Vector::Zero(static_cast<Eigen::Index>(n));
  incident_.resize(n);
  for (std::size_t j = 0; j < net_.num_branches(); ++j) {
    incident_[net_.from_row(j)].push_back(j);
    incident_[net_.to_row(j)].push_back(j);
  }
  for (std::size_t r = net_.num_dynamic(); r < n; ++r) {
    const Node& node = net_.node_at_row(r);
    if (auto it = bc_.flows.find(node.id); it != bc_.flows.end()) {
      flow_rows_.push_back(r);
      flow_values_.push_back(it->second);
      bool invertible = false;
      for (std::size_t j : incident_[r]) {
        const Branch& b = net_.branches()[j];
        if (b.law) invertible = true;
      }
      if (!invertible)
        throw SingularError("flow-specified terminal '" + node.id + "' has no invertible incident law");
    } else if (auto p = bc_.potentials.find(node.id); p != bc_.potentials.end()) {
      fixed_potentials_[static_cast<Eigen::Index>(r)] = p->second;
    }
  }
}

bool NetworkEquations::is_flow_terminal(std::size_t row) const {
  return std::find(flow_rows_.begin(), flow_rows_.end(), row) != flow_rows_.end();
}

Vector NetworkEquations::dynamic_potentials(const Vector& Z) const {
  if (static_cast<std::size_t>(Z.size()) != net_.num_dynamic())
    throw ValidationError("inventory vector has wrong dimension");
  Vector w(Z.size());
  for (Eigen::Index i = 0; i < Z.size(); ++i) w[i] = net_.capacity(static_cast<std::size_t>(i)).potential(Z[i]);
  return w;
}

Vector NetworkEquations::inventories(const Vector& w_dynamic) const {
  Vector Z(w_dynamic.size());
  for (Eigen::Index i = 0; i < w_dynamic.size(); ++i)
    Z[i] = net_.capacity(static_cast<std::size_t>(i)).inventory(w_dynamic[i]);
  return Z;
}

double NetworkEquations::solve_flow_terminal(std::size_t row, double target, Vector& potentials) const {
  const auto r = static_cast<Eigen::Index>(row);
  // Injection A[row,:] F as a function of this row's potential; nondecreasing.
  const auto residual = [&](double x, double* derivative) {
    potentials[r] = x;
    double g = -target;
    double dg = 0.0;
    for (std::size_t j : incident_[row]) {
      const Branch& b = net_.branches()[j];
      const double sign = net_.from_row(j) == row ? 1.0 : -1.0;
      if (b.kind == BranchKind::terminal_source) {
        g += sign * b.source_flow;
        continue;
      }
      if (!b.law) throw SingularError("flow-specified terminal adjacent to a branch without a law");
      const double W = potentials[static_cast<Eigen::Index>(net_.from_row(j))] -
                       potentials[static_cast<Eigen::Index>(net_.to_row(j))];
      g += sign * b.law->flow(W);
      dg += b.law->slope(W);
    }
    if (derivative) *derivative = dg;
    return g;
  };

  double guess = 0.0;
  int neighbours = 0;
  for (std::size_t j : incident_[row]) {
    const std::size_t other = net_.from_row(j) == row ? net_.to_row(j) : net_.from_row(j);
    guess += potentials[static_cast<Eigen::Index>(other)];
    ++neighbours;
  }
  if (neighbours > 0) guess /= neighbours;

  // Bracket the root, then safeguarded Newton.
  double lo = guess - 1.0;
  double hi = guess + 1.0;
  double glo = residual(lo, nullptr);
  double ghi = residual(hi, nullptr);
  for (int k = 0; k < kMaxBracketExpansions && glo > 0.0; ++k) {
    const double width = hi - lo;
    hi = lo;
    ghi = glo;
    lo -= 2.0 * width;
    glo = residual(lo, nullptr);
  }
  for (int k = 0; k < kMaxBracketExpansions && ghi < 0.0; ++k) {
    const double width = hi - lo;
    lo = hi;
    glo = ghi;
    hi += 2.0 * width;
    ghi = residual(hi, nullptr);
  }
  if (glo > 0.0 || ghi < 0.0)
    throw SingularError("flow-specified terminal '" + net_.node_at_row(row).id +
                        "' cannot reach its prescribed flow");

  double x = glo == 0.0 ? lo : (ghi == 0.0 ? hi : 0.5 * (lo + hi));
  for (int it = 0; it < kMaxTerminalIterations; ++it) {
    double dg = 0.0;
    const double g = residual(x, &dg);
    if (std::abs(g) <= 1e-14 * (1.0 + std::abs(target))) break;
    if (g > 0.0) hi = x; else lo = x;
    double next = dg > 0.0 ? x - g / dg : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  potentials[r] = x;
  return x;
}

Vector NetworkEquations::node_potentials(const Vector& w_dynamic) const {
  const auto n_dyn = static_cast<Eigen::Index>(net_.num_dynamic());
  if (w_dynamic.size() != n_dyn) throw ValidationError("potential vector has wrong dimension");
  Vector w = fixed_potentials_;
  w.head(n_dyn) = w_dynamic;
  for (std::size_t k = 0; k < flow_rows_.size(); ++k) solve_flow_terminal(flow_rows_[k], flow_values_[k], w);
  return w;
}

Vector NetworkEquations::potential_differences(const Vector& potentials) const {
  return net_.incidence().cast<double>().transpose() * potentials;
}

Vector NetworkEquations::branch_flows(const Vector& potentials, bool include_controlled) const {
  Vector F(static_cast<Eigen::Index>(net_.num_branches()));
  for (std::size_t j = 0; j < net_.num_branches(); ++j) {
    const Branch& b = net_.branches()[j];
    const auto jj = static_cast<Eigen::Index>(j);
    if (b.kind == BranchKind::terminal_source) {
      F[jj] = b.source_flow;
      continue;
    }
    if (b.kind == BranchKind::controlled && !include_controlled) {
      F[jj] = 0.0;
      continue;
    }
    if (!b.law) throw ValidationError("controlled branch '" + b.id + "' has no open-loop law");
    const double W = potentials[static_cast<Eigen::Index>(net_.from_row(j))] -
                     potentials[static_cast<Eigen::Index>(net_.to_row(j))];
    F[jj] = b.law->flow(W);
  }
  return F;
}

NetworkState NetworkEquations::state(const Vector& Z) const {
  NetworkState s;
  s.potentials = node_potentials(dynamic_potentials(Z));
  s.flows = branch_flows(s.potentials);
  return s;
}

Vector NetworkEquations::node_injections(const Vector& flows) const {
  return net_.incidence().cast<double>() * flows;
}

Vector NetworkEquations::inventory_rates(const Vector& flows) const {
  return -(net_.dynamic_incidence() * flows);
}

// ---------------------------------------------------------------------------
// Right-hand sides and integrators

StateEvaluator open_loop_evaluator(const NetworkEquations& eq) {
  return [&eq](const Vector& Z) { return eq.state(Z); };
}

Rhs rhs_from_evaluator(const NetworkEquations& eq, StateEvaluator evaluator) {
  return [&eq, evaluator = std::move(evaluator)](const Vector& Z) {
    return eq.inventory_rates(evaluator(Z).flows);
  };
}

Rhs assemble_rhs(const NetworkEquations& eq) {
  return [&eq](const Vector& Z) { return eq.inventory_rates(eq.state(Z).flows); };
}

Vector step_euler(const Vector& Z, const Rhs& rhs, double dt) { return Z + dt * rhs(Z); }

Vector step_rk4(const Vector& Z, const Rhs& rhs, double dt) {
  const Vector k1 = rhs(Z);
  const Vector k2 = rhs(Z + 0.5 * dt * k1);
  const Vector k3 = rhs(Z + 0.5 * dt * k2);
  const Vector k4 = rhs(Z + dt * k3);
  return Z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector step_adaptive(const Vector& Z, const Rhs& rhs, double dt, const AdaptiveOptions& options) {
  Vector z = Z;
  double remaining = dt;
  double h = dt;
  while (remaining > 0.0) {
    h = std::min(h, remaining);
    const Vector full = step_rk4(z, rhs, h);
    const Vector half = step_rk4(step_rk4(z, rhs, 0.5 * h), rhs, 0.5 * h);
    const double tol_scale = options.atol + options.rtol * half.cwiseAbs().maxCoeff();
    const double err = (full - half).cwiseAbs().maxCoeff();
    if (err <= tol_scale || h <= options.min_step) {
      z = half;
      remaining -= h;
      // Grow again after an easy step.
      if (err < tol_scale / 64.0) h *= 2.0;
    } else {
      h *= 0.5;
    }
  }
  return z;
}

Matrix numerical_jacobian(const Rhs& rhs, const Vector& Z) {
  const Eigen::Index n = Z.size();
  Matrix J(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(Z[i]));
    Vector zp = Z;
    Vector zm = Z;
    zp[i] += h;
    zm[i] -= h;
    J.col(i) = (rhs(zp) - rhs(zm)) / (2.0 * h);
  }
  return J;
}

double stability_limit(const Rhs& rhs, const Vector& Z, Method method) {
  if (Z.size() == 0 || method == Method::adaptive) return std::numeric_limits<double>::infinity();
  const Matrix J = numerical_jacobian(rhs, Z);
  const Eigen::EigenSolver<Matrix> solver(J, false);
  const auto amplification = [method](std::complex<double> z) {
    if (method == Method::euler) return std::abs(1.0 + z);
    return std::abs(1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0);
  };
  double limit = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const std::complex<double> lambda = solver.eigenvalues()[i];
    if (lambda.real() >= -1e-12 * std::max(1.0, std::abs(lambda))) continue;
    // Expand then bisect on the boundary of the stability region along lambda.
    double lo = 0.0;
    double hi = 1.0 / std::abs(lambda);
    while (amplification(hi * lambda) <= 1.0) {
      lo = hi;
      hi *= 2.0;
    }
    for (int k = 0; k < 100; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (amplification(mid * lambda) <= 1.0) lo = mid; else hi = mid;
    }
    limit = std::min(limit, lo);
  }
  return limit;
}

// ---------------------------------------------------------------------------
// Simulation

std::vector<TerminalOutput> terminal_outputs(const NetworkEquations& eq, const NetworkState& state) {
  const ProcessNetwork& net = eq.network();
  const Vector injections = eq.node_injections(state.flows);
  std::vector<TerminalOutput> out;
  for (std::size_t r = net.num_dynamic(); r < net.num_nodes(); ++r) {
    TerminalOutput t;
    t.id = net.node_at_row(r).id;
    t.potential_specified = !eq.is_flow_terminal(r);
    t.flow = injections[static_cast<Eigen::Index>(r)];
    t.potential = state.potentials[static_cast<Eigen::Index>(r)];
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TerminalOutput> terminal_outputs(const NetworkEquations& eq, const Vector& Z) {
  return terminal_outputs(eq, eq.state(Z));
}

Trajectory simulate(const NetworkEquations& eq, const Vector& Z0, const SimulationOptions& options) {
  return simulate(eq, open_loop_evaluator(eq), Z0, options);
}

Trajectory simulate(const NetworkEquations& eq, const StateEvaluator& evaluator, const Vector& Z0,
                    const SimulationOptions& options) {
  const ProcessNetwork& net = eq.network();
  if (!(options.dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(options.t_end >= 0.0)) throw ValidationError("t_end must be nonnegative");
  if (static_cast<std::size_t>(Z0.size()) != net.num_dynamic())
    throw ValidationError("initial inventory has " + std::to_string(Z0.size()) + " entries, expected " +
                          std::to_string(net.num_dynamic()));

  const Rhs rhs = [&eq, &evaluator](const Vector& Z) { return eq.inventory_rates(evaluator(Z).flows); };

  if (options.check_stability && options.method != Method::adaptive) {
    const double limit = stability_limit(rhs, Z0, options.method);
    if (options.dt > limit * (1.0 + 1e-9)) {
      std::ostringstream os;
      os << "dt=" << options.dt << " exceeds the explicit stability bound " << limit;
      throw DivergenceError(os.str());
    }
  }

  // Whole steps, with a shortened last step when t_end is not a multiple of dt.
  const double ratio = options.t_end / options.dt;
  auto steps = static_cast<long long>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio))
    steps = static_cast<long long>(std::ceil(ratio));

  Trajectory traj;
  traj.dynamic_ids = net.dynamic_ids();
  traj.branch_ids = net.branch_ids();
  traj.boundary_ids = net.boundary_ids();
  const auto record = [&](double t, const Vector& Z) {
    const NetworkState s = evaluator(Z);
    traj.times.push_back(t);
    traj.Z.push_back(Z);
    traj.w.push_back(s.potentials.head(static_cast<Eigen::Index>(net.num_dynamic())));
    traj.F.push_back(s.flows);
    const auto outs = terminal_outputs(eq, s);
    Vector o(static_cast<Eigen::Index>(outs.size()));
    for (std::size_t i = 0; i < outs.size(); ++i)
      o[static_cast<Eigen::Index>(i)] = outs[i].potential_specified ? outs[i].flow : outs[i].potential;
    traj.terminal_outputs.push_back(std::move(o));
  };

  Vector Z = Z0;
  check_finite_state(Z, 0.0);
  record(0.0, Z);
  for (long long k = 1; k <= steps; ++k) {
    const double t_prev = static_cast<double>(k - 1) * options.dt;
    const double t = k == steps ? options.t_end : static_cast<double>(k) * options.dt;
    const double h = t - t_prev;
    switch (options.method) {
      case Method::euler: Z = step_euler(Z, rhs, h); break;
      case Method::rk4: Z = step_rk4(Z, rhs, h); break;
      case Method::adaptive: Z = step_adaptive(Z, rhs, h, options.adaptive); break;
    }
    check_finite_state(Z, t);
    record(t, Z);
  }
  return traj;
}

}  // namespace flownet
