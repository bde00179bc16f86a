#pragma once

#include <flownet/topology.hpp>
#include <flownet/types.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace flownet {

/// Constant boundary values. Every terminal gets exactly one entry, either a
/// fixed potential or a fixed flow injected into the network. The datum may
/// carry a potential (default 0) but never a flow.
struct BoundaryConditions {
  std::map<std::string, double> potentials;
  std::map<std::string, double> flows;

  friend bool operator==(const BoundaryConditions&, const BoundaryConditions&) = default;
};

void validate_boundary(const ProcessNetwork& net, const BoundaryConditions& bc);

/// Potentials (all node rows) and branch flows at one instant.
struct NetworkState {
  Vector potentials;
  Vector flows;
};

/// Network equations under fixed boundary conditions: capacitive inversion,
/// potential differences W = A^T w, branch laws and node balances.
class NetworkEquations {
 public:
  NetworkEquations(ProcessNetwork net, BoundaryConditions bc);

  const ProcessNetwork& network() const { return net_; }
  const BoundaryConditions& boundary() const { return bc_; }
  std::size_t num_dynamic() const { return net_.num_dynamic(); }

  /// w = C^{-1}(Z) for the dynamic nodes.
  Vector dynamic_potentials(const Vector& Z) const;
  Vector inventories(const Vector& w_dynamic) const;

  /// Potentials on every row: dynamic values as given, boundary values from
  /// the boundary conditions, flow-specified terminals solved so that their
  /// injection matches the prescribed flow.
  Vector node_potentials(const Vector& w_dynamic) const;
  Vector potential_differences(const Vector& potentials) const;
  /// Flows from the branch laws. Controlled branches without an open-loop law
  /// throw unless include_controlled is false, in which case they read 0.
  Vector branch_flows(const Vector& potentials, bool include_controlled = true) const;
  NetworkState state(const Vector& Z) const;

  /// Net flow leaving each row into its branches, A_full F. Positive on a
  /// boundary row means the environment feeds the network there.
  Vector node_injections(const Vector& flows) const;
  /// dZ/dt = -A_dyn F.
  Vector inventory_rates(const Vector& flows) const;

  bool has_flow_terminals() const { return !flow_rows_.empty(); }
  /// Rows of flow-specified terminals and their prescribed injections.
  const std::vector<std::size_t>& flow_terminal_rows() const { return flow_rows_; }
  const std::vector<double>& flow_terminal_values() const { return flow_values_; }
  bool is_flow_terminal(std::size_t row) const;

 private:
  double solve_flow_terminal(std::size_t row, double target, Vector& potentials) const;

  ProcessNetwork net_;
  BoundaryConditions bc_;
  Vector fixed_potentials_;  // per boundary row; unused for flow terminals
  std::vector<std::size_t> flow_rows_;
  std::vector<double> flow_values_;
  std::vector<std::vector<std::size_t>> incident_;  // branches per row
};

using Rhs = std::function<Vector(const Vector&)>;
using StateEvaluator = std::function<NetworkState(const Vector&)>;

/// dZ/dt as a function of the inventories, using the branch laws. The
/// returned functions refer to eq, which must outlive them.
Rhs assemble_rhs(const NetworkEquations& eq);
StateEvaluator open_loop_evaluator(const NetworkEquations& eq);
Rhs rhs_from_evaluator(const NetworkEquations& eq, StateEvaluator evaluator);
Rhs assemble_rhs(NetworkEquations&&) = delete;
StateEvaluator open_loop_evaluator(NetworkEquations&&) = delete;
Rhs rhs_from_evaluator(NetworkEquations&&, StateEvaluator) = delete;

Vector step_euler(const Vector& Z, const Rhs& rhs, double dt);
Vector step_rk4(const Vector& Z, const Rhs& rhs, double dt);

struct AdaptiveOptions {
  double rtol = 1e-6;
  double atol = 1e-9;
  double min_step = 1e-12;
};

/// Advances by dt with RK4 step doubling: a sub-step is accepted once one
/// full step and two half steps agree within atol + rtol*|Z|.
Vector step_adaptive(const Vector& Z, const Rhs& rhs, double dt, const AdaptiveOptions& options = {});

enum class Method { euler, rk4, adaptive };

struct SimulationOptions {
  double dt = 0.02;
  double t_end = 0.0;
  Method method = Method::euler;
  /// Reject fixed-step runs whose dt lies outside the method's linear
  /// stability region at the initial state.
  bool check_stability = true;
  AdaptiveOptions adaptive{};
};

struct TerminalOutput {
  std::string id;
  bool potential_specified = true;
  /// Flow injected into the network through this node.
  double flow = 0.0;
  double potential = 0.0;
};

/// Time-indexed record of a run. Row k of every series belongs to times[k].
struct Trajectory {
  std::vector<std::string> dynamic_ids;
  std::vector<std::string> branch_ids;
  std::vector<std::string> boundary_ids;
  std::vector<double> times;
  std::vector<Vector> w;
  std::vector<Vector> Z;
  std::vector<Vector> F;
  /// Injected flows of the boundary rows (potential-specified) or their
  /// implied potentials (flow-specified).
  std::vector<Vector> terminal_outputs;

  std::size_t size() const { return times.size(); }
};

Trajectory simulate(const NetworkEquations& eq, const Vector& Z0, const SimulationOptions& options);
/// Same integrator loop with a caller-supplied flow evaluation, e.g. the
/// closed-loop flows of the control module.
Trajectory simulate(const NetworkEquations& eq, const StateEvaluator& evaluator, const Vector& Z0,
                    const SimulationOptions& options);

std::vector<TerminalOutput> terminal_outputs(const NetworkEquations& eq, const NetworkState& state);
std::vector<TerminalOutput> terminal_outputs(const NetworkEquations& eq, const Vector& Z);

/// Central finite-difference Jacobian of rhs at Z.
Matrix numerical_jacobian(const Rhs& rhs, const Vector& Z);

/// Largest dt for which the explicit method is linearly stable about Z (for
/// the real, non-positive spectra of passive networks).
double stability_limit(const Rhs& rhs, const Vector& Z, Method method);

}  // namespace flownet
