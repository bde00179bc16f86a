#pragma once

#include <flownet/dynamics.hpp>
#include <flownet/topology.hpp>
#include <flownet/types.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace flownet {

enum class Activation { identity, relu, tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Two-layer network whose connectivity is the incidence structure. Rows of
/// both weight matrices are node rows (dynamic first, then boundary rows),
/// columns are branches.
///
///   hidden  = act_h(H^T w)          one unit per branch (its flow)
///   inc     = act_o(O hidden)       one unit per node (its potential rate)
///   w_next  = w + dt inc
///
/// H(n,b) = A(n,b) theta_b and O(n,b) = -A(n,b) phi_n on dynamic rows, zero on
/// boundary rows, so theta_b plays the conductance and phi_n = 1/C_n.
class SparseNeuralOde {
 public:
  const std::vector<std::string>& node_ids() const { return node_ids_; }
  const std::vector<std::string>& branch_ids() const { return branch_ids_; }
  std::size_t num_nodes() const { return node_ids_.size(); }
  std::size_t num_dynamic() const { return num_dynamic_; }
  std::size_t num_branches() const { return branch_ids_.size(); }

  const Matrix& hidden_weights() const { return hidden_; }
  const Matrix& output_weights() const { return output_; }
  const BoolMatrix& mask_hidden() const { return mask_hidden_; }
  const BoolMatrix& mask_output() const { return mask_output_; }
  const IntMatrix& orientation() const { return sign_; }

  Activation act_hidden() const { return act_hidden_; }
  Activation act_output() const { return act_output_; }
  double dt() const { return dt_; }

  const Vector& conductances() const { return theta_; }
  const Vector& inverse_capacities() const { return phi_; }
  bool capacities_trainable() const { return train_capacities_; }

  void set_conductances(const Vector& theta);
  void set_inverse_capacities(const Vector& phi);
  void set_activations(Activation hidden, Activation output);
  void set_capacities_trainable(bool on) { train_capacities_ = on; }

  /// Trainable parameters: theta, followed by phi when capacities train.
  Vector parameters() const;
  void set_parameters(const Vector& p);
  std::size_t num_parameters() const;

  /// Rebuilds the weight matrices from the parameters; masked entries become
  /// exactly zero.
  void prune();
  bool masks_respected() const;

  static SparseNeuralOde from_parts(std::vector<std::string> node_ids, std::vector<std::string> branch_ids,
                                    std::size_t num_dynamic, IntMatrix orientation, Vector theta, Vector phi,
                                    Activation hidden, Activation output, double dt, bool train_capacities);

 private:
  std::vector<std::string> node_ids_;
  std::vector<std::string> branch_ids_;
  std::size_t num_dynamic_ = 0;
  IntMatrix sign_;
  BoolMatrix mask_hidden_;
  BoolMatrix mask_output_;
  Matrix hidden_;
  Matrix output_;
  Vector theta_;
  Vector phi_;
  Activation act_hidden_ = Activation::relu;
  Activation act_output_ = Activation::relu;
  double dt_ = 0.02;
  bool train_capacities_ = false;
};

/// Masks from the incidence, theta uniform in (0, 1], phi = 1/C. Rejects
/// terminal-source branches and nonlinear capacities.
SparseNeuralOde build_model(const ProcessNetwork& net, Activation hidden, Activation output, double dt,
                            std::uint64_t seed, bool train_capacities = false);

/// w covers every node row; boundary entries pass through unchanged.
Vector forward_step(const SparseNeuralOde& model, const Vector& w);
/// steps + 1 states including w0. Throws DivergenceError once |w| > 1e12.
std::vector<Vector> rollout(const SparseNeuralOde& model, const Vector& w0, std::size_t steps);

/// Mean over time and the listed rows of the squared error. An empty subset
/// means every row.
double loss_mse(const std::vector<Vector>& predicted, const std::vector<Vector>& observed,
                const std::vector<std::size_t>& rows = {});

struct ModelGradient {
  /// Window loss: mean squared error on the dynamic rows over steps 1..L-1.
  double loss = 0.0;
  Matrix hidden;   ///< dL/dH, zero where masked
  Matrix output;   ///< dL/dO, zero where masked
  Vector parameters;  ///< dL/dp in the order of SparseNeuralOde::parameters()
};

/// Exact reverse-mode gradient of the Euler rollout. observed holds the
/// dynamic-row values at each step of the window; observed[0] is unused.
ModelGradient grad_bptt(const SparseNeuralOde& model, const Vector& w0, const std::vector<Vector>& observed);

/// Continuous adjoint of the model ODE dw/dt = act_o(O act_h(H^T w)). The
/// predictions at the observation instants serve as checkpoints; state,
/// adjoint and parameter sensitivities are integrated backward with one RK4
/// step per interval, the adjoint jumping by dL/dw at each observation. The
/// continuous adjoint differs from the exact discrete gradient by O(dt).
ModelGradient grad_adjoint(const SparseNeuralOde& model, const Vector& w0, const std::vector<Vector>& observed);

struct Dataset {
  std::vector<std::string> dynamic_ids;
  std::vector<std::string> boundary_ids;
  std::vector<std::string> branch_ids;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Vector> observed;  ///< noisy dynamic potentials
  /// Simulator output; the loss never reads these. Z and F stay noiseless.
  std::vector<Vector> clean;
  std::vector<Vector> clean_Z;
  std::vector<Vector> clean_F;
  Vector boundary_potentials;
  double noise_frac = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return times.size(); }
};

/// Euler simulation for `steps` steps from the dynamic potentials w0, then
/// Gaussian noise with per-node standard deviation noise_frac times that
/// node's trajectory standard deviation.
Dataset generate_data(const NetworkEquations& eq, const Vector& w0, double dt, std::size_t steps, double noise_frac,
                      std::uint64_t seed);

enum class GradientMethod { bptt, adjoint };

std::string_view to_string(GradientMethod m);
GradientMethod parse_gradient_method(std::string_view name);

struct TrainingConfig {
  int iterations = 1000;
  int window_length = 50;
  int batch_size = 16;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  GradientMethod gradient_method = GradientMethod::bptt;
  /// Worker threads for the per-window gradients; the reduction order is
  /// fixed, so results do not depend on this.
  int threads = 1;
  /// Verify the masks after every iteration.
  bool check_masks = false;
};

void validate_config(const TrainingConfig& config);

struct TrainingReport {
  std::vector<double> loss_history;
  double final_loss = 0.0;
  Matrix hidden_weights;
  Matrix output_weights;
  Vector conductances;
  /// 1/phi per dynamic node.
  Vector capacitances;
  /// theta_b phi_n for every branch b incident to dynamic node n, i.e. the
  /// identifiable K/C ratios. Rows are dynamic nodes, columns branches.
  Matrix ratios;
  double wall_time_seconds = 0.0;
};

/// Adam on the model parameters over random windows of the dataset. Windows
/// start from the observed values with the boundary potentials fixed.
TrainingReport train(SparseNeuralOde& model, const Dataset& dataset, const TrainingConfig& config);

/// Model state vector (every node row) from dynamic values and boundary
/// potentials.
Vector full_state(const SparseNeuralOde& model, const Vector& dynamic, const Vector& boundary);

struct CheckpointInfo {
  std::uint64_t dataset_seed = 0;
  TrainingConfig config;
};

std::string checkpoint_json(const SparseNeuralOde& model, const CheckpointInfo& info);
SparseNeuralOde load_checkpoint(const std::string& text, CheckpointInfo* info = nullptr);

}  // namespace flownet
