#pragma once

#include <flownet/dynamics.hpp>
#include <flownet/types.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flownet {

struct FlowBounds {
  double lower;
  double upper;
  friend bool operator==(const FlowBounds&, const FlowBounds&) = default;
};

/// Direct proportional inventory controller: the actuated branch is incident
/// to the controlled node and drives dZ/dt = -gain (Z - setpoint) while
/// unsaturated.
struct ControllerSpec {
  std::string node;
  std::string branch;
  double gain = 1.0;
  double setpoint = 0.0;
  std::optional<FlowBounds> bounds;

  friend bool operator==(const ControllerSpec&, const ControllerSpec&) = default;
};

void validate_controllers(const ProcessNetwork& net, const std::vector<ControllerSpec>& controllers);

/// A flow incident to the controlled node; sign is +1 when the flow (in its
/// branch orientation) enters the node and -1 when it leaves.
struct MeasuredFlow {
  double flow;
  int sign;
};

/// Flow to assign to the actuated branch, in that branch's orientation:
/// the value that cancels the measured net inflow and adds the proportional
/// correction, clamped to the bounds.
double control_flow(const ControllerSpec& controller, int actuated_sign, std::span<const MeasuredFlow> measured,
                    double inventory);

/// Vector form F_K = A_K^{-1} (-A_R F_R - A_T F_T + K_C (Z - Z_c)) on the
/// controlled rows, clamped to the bounds. F_R is ordered like the resistive
/// partition; terminal-source flows come from the network. Result is ordered
/// like the controllers.
Vector control_matrix_law(const ProcessNetwork& net, const std::vector<ControllerSpec>& controllers,
                          const Vector& resistive_flows, const Vector& Z);

/// Closed-loop network: branch laws on uncontrolled branches, controller
/// assignments on actuated ones.
class InventoryControl {
 public:
  InventoryControl(const NetworkEquations& eq, std::vector<ControllerSpec> controllers);

  const std::vector<ControllerSpec>& controllers() const { return controllers_; }
  NetworkState state(const Vector& Z) const;
  StateEvaluator evaluator() const;
  Rhs rhs() const;
  /// Controlled inventories reached at equilibrium, in controller order.
  Vector setpoints() const;
  /// Per controller, whether its actuated flow sits on a bound at Z.
  std::vector<bool> saturated(const Vector& Z) const;
  double potential(const Vector& Z) const;

 private:
  const NetworkEquations* eq_;
  std::vector<ControllerSpec> controllers_;
  std::vector<std::size_t> node_rows_;
  std::vector<std::size_t> branch_cols_;
};

Rhs controlled_rhs(const InventoryControl& control);

/// P^c(Z) = sum over controllers of the integral of gain (Z - Z_c) dw, i.e.
/// 1/2 gain/C (Z - Z_c)^2 for linear capacities.
double control_potential(const ProcessNetwork& net, const std::vector<ControllerSpec>& controllers, const Vector& Z);

}  // namespace flownet
