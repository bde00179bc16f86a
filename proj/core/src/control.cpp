#include <flownet/control.hpp>
#include <flownet/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace flownet {

namespace {

double clamp_to(const ControllerSpec& c, double flow) {
  if (!c.bounds) return flow;
  return std::clamp(flow, c.bounds->lower, c.bounds->upper);
}

}  // namespace

void validate_controllers(const ProcessNetwork& net, const std::vector<ControllerSpec>& controllers) {
  std::set<std::string> nodes;
  std::set<std::string> branches;
  for (const auto& c : controllers) {
    if (!net.has_node(c.node)) throw ValidationError("controller on unknown node '" + c.node + "'");
    if (!net.has_branch(c.branch)) throw ValidationError("controller on unknown branch '" + c.branch + "'");
    const std::size_t row = net.row_of(c.node);
    const std::size_t col = net.branch_index(c.branch);
    if (net.node_at_row(row).kind != NodeKind::dynamic)
      throw ValidationError("controlled node '" + c.node + "' is not dynamic");
    if (net.branches()[col].kind != BranchKind::controlled)
      throw ValidationError("actuated branch '" + c.branch + "' is not of kind controlled");
    if (net.from_row(col) != row && net.to_row(col) != row)
      throw ValidationError("control of '" + c.node + "' is not direct: branch '" + c.branch + "' is not incident");
    if (!(c.gain > 0.0) || !std::isfinite(c.gain))
      throw ValidationError("controller gain on '" + c.node + "' must be positive");
    if (!std::isfinite(c.setpoint)) throw ValidationError("controller setpoint on '" + c.node + "' is not finite");
    if (c.bounds && !(c.bounds->lower <= c.bounds->upper))
      throw ValidationError("controller bounds on '" + c.node + "' have lower > upper");
    if (!nodes.insert(c.node).second) throw ValidationError("node '" + c.node + "' has more than one controller");
    if (!branches.insert(c.branch).second)
      throw ValidationError("branch '" + c.branch + "' is actuated by more than one controller");
  }
  for (const auto& b : net.branches()) {
    if (b.kind == BranchKind::controlled && !branches.count(b.id) && !controllers.empty())
      throw ValidationError("controlled branch '" + b.id + "' has no controller");
  }
  // A_K restricted to the controlled rows must be diagonal.
  for (const auto& c : controllers) {
    const std::size_t col = net.branch_index(c.branch);
    for (const auto& other : controllers) {
      if (other.node == c.node) continue;
      const std::size_t row = net.row_of(other.node);
      if (net.from_row(col) == row || net.to_row(col) == row)
        throw ValidationError("actuated branch '" + c.branch + "' also touches controlled node '" + other.node +
                              "'; A_K must be diagonal");
    }
  }
}

double control_flow(const ControllerSpec& controller, int actuated_sign, std::span<const MeasuredFlow> measured,
                    double inventory) {
  double inflow = 0.0;
  for (const auto& m : measured) inflow += m.sign * m.flow;
  const double correction = controller.gain * (inventory - controller.setpoint);
  // actuated_sign * F_K + inflow = -correction
  const double flow = actuated_sign * (-inflow - correction);
  return clamp_to(controller, flow);
}

Vector control_matrix_law(const ProcessNetwork& net, const std::vector<ControllerSpec>& controllers,
                          const Vector& resistive_flows, const Vector& Z) {
  validate_controllers(net, controllers);
  const BranchPartition& p = net.partition();
  if (static_cast<std::size_t>(resistive_flows.size()) != p.resistive.size())
    throw ValidationError("resistive flow vector has wrong dimension");
  const auto n = static_cast<Eigen::Index>(controllers.size());
  const Matrix A = net.incidence().cast<double>();

  Matrix A_K(n, n);
  Matrix A_R(n, static_cast<Eigen::Index>(p.resistive.size()));
  Matrix A_T(n, static_cast<Eigen::Index>(p.terminal.size()));
  Vector F_T(static_cast<Eigen::Index>(p.terminal.size()));
  Vector error(n);
  Matrix K_C = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = controllers[static_cast<std::size_t>(i)];
    const auto row = static_cast<Eigen::Index>(net.row_of(c.node));
    for (Eigen::Index k = 0; k < n; ++k)
      A_K(i, k) = A(row, static_cast<Eigen::Index>(net.branch_index(controllers[static_cast<std::size_t>(k)].branch)));
    for (std::size_t j = 0; j < p.resistive.size(); ++j)
      A_R(i, static_cast<Eigen::Index>(j)) = A(row, static_cast<Eigen::Index>(p.resistive[j]));
    for (std::size_t j = 0; j < p.terminal.size(); ++j)
      A_T(i, static_cast<Eigen::Index>(j)) = A(row, static_cast<Eigen::Index>(p.terminal[j]));
    K_C(i, i) = c.gain;
    error[i] = Z[row] - c.setpoint;
  }
  for (std::size_t j = 0; j < p.terminal.size(); ++j)
    F_T[static_cast<Eigen::Index>(j)] = net.branches()[p.terminal[j]].source_flow;

  // Directness makes A_K diagonal with +-1 entries, so its inverse is itself.
  const Vector d = A_K.diagonal();
  if (!(A_K - Matrix(d.asDiagonal())).isZero(0.0) || (d.array().abs() != 1.0).any())
    throw SingularError("A_K is not an invertible diagonal matrix; controllability violated");
  const Vector rhs = -(A_R * resistive_flows) - A_T * F_T + K_C * error;
  Vector F_K = d.cwiseProduct(rhs);
  for (Eigen::Index i = 0; i < n; ++i) F_K[i] = clamp_to(controllers[static_cast<std::size_t>(i)], F_K[i]);
  return F_K;
}

// ---------------------------------------------------------------------------
// InventoryControl

InventoryControl::InventoryControl(const NetworkEquations& eq, std::vector<ControllerSpec> controllers)
    : eq_(&eq), controllers_(std::move(controllers)) {
  const ProcessNetwork& net = eq.network();
  if (controllers_.empty()) throw ValidationError("no controllers given");
  validate_controllers(net, controllers_);
  for (const auto& c : controllers_) {
    node_rows_.push_back(net.row_of(c.node));
    branch_cols_.push_back(net.branch_index(c.branch));
    const std::size_t col = branch_cols_.back();
    if (eq.is_flow_terminal(net.from_row(col)) || eq.is_flow_terminal(net.to_row(col)))
      throw ValidationError("actuated branch '" + c.branch + "' touches a flow-specified terminal");
  }
}

NetworkState InventoryControl::state(const Vector& Z) const {
  const ProcessNetwork& net = eq_->network();
  NetworkState s;
  s.potentials = eq_->node_potentials(eq_->dynamic_potentials(Z));
  s.flows = eq_->branch_flows(s.potentials, false);
  const auto& resistive = net.partition().resistive;
  Vector F_R(static_cast<Eigen::Index>(resistive.size()));
  for (std::size_t j = 0; j < resistive.size(); ++j)
    F_R[static_cast<Eigen::Index>(j)] = s.flows[static_cast<Eigen::Index>(resistive[j])];
  const Vector F_K = control_matrix_law(net, controllers_, F_R, Z);
  for (std::size_t i = 0; i < controllers_.size(); ++i)
    s.flows[static_cast<Eigen::Index>(branch_cols_[i])] = F_K[static_cast<Eigen::Index>(i)];
  return s;
}

StateEvaluator InventoryControl::evaluator() const {
  return [this](const Vector& Z) { return state(Z); };
}

Rhs InventoryControl::rhs() const {
  return [this](const Vector& Z) { return eq_->inventory_rates(state(Z).flows); };
}

Vector InventoryControl::setpoints() const {
  Vector z(static_cast<Eigen::Index>(controllers_.size()));
  for (std::size_t i = 0; i < controllers_.size(); ++i) z[static_cast<Eigen::Index>(i)] = controllers_[i].setpoint;
  return z;
}

std::vector<bool> InventoryControl::saturated(const Vector& Z) const {
  const NetworkState s = state(Z);
  std::vector<bool> out;
  for (std::size_t i = 0; i < controllers_.size(); ++i) {
    const auto& c = controllers_[i];
    const double f = s.flows[static_cast<Eigen::Index>(branch_cols_[i])];
    out.push_back(c.bounds && (f <= c.bounds->lower || f >= c.bounds->upper));
  }
  return out;
}

double InventoryControl::potential(const Vector& Z) const {
  return control_potential(eq_->network(), controllers_, Z);
}

Rhs controlled_rhs(const InventoryControl& control) { return control.rhs(); }

double control_potential(const ProcessNetwork& net, const std::vector<ControllerSpec>& controllers, const Vector& Z) {
  double P = 0.0;
  for (const auto& c : controllers) {
    const std::size_t row = net.row_of(c.node);
    if (row >= net.num_dynamic()) throw ValidationError("controlled node '" + c.node + "' is not dynamic");
    const CapacitiveLaw& cap = net.capacity(row);
    const double z = Z[static_cast<Eigen::Index>(row)];
    if (cap.is_linear()) {
      const double e = z - c.setpoint;
      P += 0.5 * c.gain / cap.capacitance() * e * e;
    } else {
      const auto integrand = [&](double zeta) {
        return c.gain * (zeta - c.setpoint) / cap.slope(cap.potential(zeta));
      };
      // Piecewise-linear capacity: split at the inventory knots so every
      // piece has a polynomial integrand.
      std::vector<double> cuts{c.setpoint, z};
      for (const auto& [w, knot] : std::get<TabulatedCapacity>(cap.form()).curve.points())
        if ((knot - c.setpoint) * (knot - z) < 0.0) cuts.push_back(knot);
      std::sort(cuts.begin(), cuts.end());
      const double sign = z >= c.setpoint ? 1.0 : -1.0;
      for (std::size_t k = 1; k < cuts.size(); ++k)
        P += sign * gauss_legendre_32().integrate(integrand, cuts[k - 1], cuts[k]);
    }
  }
  return P;
}

}  // namespace flownet
