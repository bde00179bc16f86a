#include <flownet/neuralode.hpp>
#include <flownet/rng.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace flownet {

namespace {

using json = nlohmann::json;

double act(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
  }
  return x;
}

// Right derivative at the relu kink.
double act_slope(Activation a, double x) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return x >= 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

Vector apply(Activation a, const Vector& x) { return x.unaryExpr([a](double v) { return act(a, v); }); }
Vector slope(Activation a, const Vector& x) { return x.unaryExpr([a](double v) { return act_slope(a, v); }); }

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw DivergenceError(std::string("non-finite ") + what + " in neural model");
}

Matrix masked(const Matrix& m, const BoolMatrix& mask) { return mask.select(m, Matrix::Zero(m.rows(), m.cols())); }

Vector reduce_parameters(const SparseNeuralOde& model, const Matrix& dH, const Matrix& dO) {
  const Matrix A = model.orientation().cast<double>();
  Vector g(static_cast<Eigen::Index>(model.num_parameters()));
  const auto nb = static_cast<Eigen::Index>(model.num_branches());
  g.head(nb) = A.cwiseProduct(dH).colwise().sum().transpose();
  if (model.capacities_trainable()) {
    const auto nd = static_cast<Eigen::Index>(model.num_dynamic());
    g.tail(nd) = -A.topRows(nd).cwiseProduct(dO.topRows(nd)).rowwise().sum();
  }
  return g;
}

void check_window(const SparseNeuralOde& model, const Vector& w0, const std::vector<Vector>& observed) {
  if (observed.size() < 2) throw ValidationError("gradient window needs at least two points");
  if (static_cast<std::size_t>(w0.size()) != model.num_nodes())
    throw ValidationError("initial state must cover every node row");
  for (const auto& o : observed)
    if (static_cast<std::size_t>(o.size()) != model.num_dynamic())
      throw ValidationError("observations must cover the dynamic rows");
}

// dL/dw_k on the dynamic rows for the window mean squared error.
Vector loss_jump(const SparseNeuralOde& model, const Vector& w, const Vector& obs, double scale) {
  Vector g = Vector::Zero(static_cast<Eigen::Index>(model.num_nodes()));
  const auto nd = static_cast<Eigen::Index>(model.num_dynamic());
  g.head(nd) = 2.0 * scale * (w.head(nd) - obs);
  return g;
}

double window_loss(const SparseNeuralOde& model, const std::vector<Vector>& ws, const std::vector<Vector>& observed) {
  const auto nd = static_cast<Eigen::Index>(model.num_dynamic());
  double sum = 0.0;
  for (std::size_t k = 1; k < observed.size(); ++k) sum += (ws[k].head(nd) - observed[k]).squaredNorm();
  return sum / static_cast<double>((observed.size() - 1) * model.num_dynamic());
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(GradientMethod m) { return m == GradientMethod::bptt ? "bptt" : "adjoint"; }

GradientMethod parse_gradient_method(std::string_view name) {
  if (name == "bptt") return GradientMethod::bptt;
  if (name == "adjoint") return GradientMethod::adjoint;
  throw ValidationError("unknown gradient method '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// SparseNeuralOde

void SparseNeuralOde::set_conductances(const Vector& theta) {
  if (theta.size() != theta_.size()) throw ValidationError("conductance vector has wrong dimension");
  theta_ = theta;
  prune();
}

void SparseNeuralOde::set_inverse_capacities(const Vector& phi) {
  if (phi.size() != phi_.size()) throw ValidationError("inverse capacity vector has wrong dimension");
  phi_ = phi;
  prune();
}

void SparseNeuralOde::set_activations(Activation hidden, Activation output) {
  act_hidden_ = hidden;
  act_output_ = output;
}

std::size_t SparseNeuralOde::num_parameters() const {
  return num_branches() + (train_capacities_ ? num_dynamic_ : 0);
}

Vector SparseNeuralOde::parameters() const {
  Vector p(static_cast<Eigen::Index>(num_parameters()));
  p.head(theta_.size()) = theta_;
  if (train_capacities_) p.tail(phi_.size()) = phi_;
  return p;
}

void SparseNeuralOde::set_parameters(const Vector& p) {
  if (static_cast<std::size_t>(p.size()) != num_parameters()) throw ValidationError("parameter vector has wrong size");
  theta_ = p.head(theta_.size());
  if (train_capacities_) phi_ = p.tail(phi_.size());
  prune();
}

void SparseNeuralOde::prune() {
  const Matrix A = sign_.cast<double>();
  hidden_ = A * theta_.asDiagonal();
  output_ = Matrix::Zero(A.rows(), A.cols());
  const auto nd = static_cast<Eigen::Index>(num_dynamic_);
  output_.topRows(nd) = -(phi_.asDiagonal() * A.topRows(nd));
  hidden_ = masked(hidden_, mask_hidden_);
  output_ = masked(output_, mask_output_);
}

bool SparseNeuralOde::masks_respected() const {
  for (Eigen::Index i = 0; i < hidden_.rows(); ++i)
    for (Eigen::Index j = 0; j < hidden_.cols(); ++j) {
      if (!mask_hidden_(i, j) && hidden_(i, j) != 0.0) return false;
      if (!mask_output_(i, j) && output_(i, j) != 0.0) return false;
    }
  return true;
}

SparseNeuralOde SparseNeuralOde::from_parts(std::vector<std::string> node_ids, std::vector<std::string> branch_ids,
                                            std::size_t num_dynamic, IntMatrix orientation, Vector theta, Vector phi,
                                            Activation hidden, Activation output, double dt, bool train_capacities) {
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (orientation.rows() != static_cast<Eigen::Index>(node_ids.size()) ||
      orientation.cols() != static_cast<Eigen::Index>(branch_ids.size()) ||
      theta.size() != static_cast<Eigen::Index>(branch_ids.size()) ||
      phi.size() != static_cast<Eigen::Index>(num_dynamic) || num_dynamic > node_ids.size())
    throw ValidationError("inconsistent neural model dimensions");
  SparseNeuralOde m;
  m.node_ids_ = std::move(node_ids);
  m.branch_ids_ = std::move(branch_ids);
  m.num_dynamic_ = num_dynamic;
  m.sign_ = std::move(orientation);
  m.mask_hidden_ = m.sign_.array() != 0;
  m.mask_output_ = BoolMatrix::Constant(m.sign_.rows(), m.sign_.cols(), false);
  m.mask_output_.topRows(static_cast<Eigen::Index>(num_dynamic)) =
      m.sign_.topRows(static_cast<Eigen::Index>(num_dynamic)).array() != 0;
  m.theta_ = std::move(theta);
  m.phi_ = std::move(phi);
  m.act_hidden_ = hidden;
  m.act_output_ = output;
  m.dt_ = dt;
  m.train_capacities_ = train_capacities;
  m.prune();
  return m;
}

SparseNeuralOde build_model(const ProcessNetwork& net, Activation hidden, Activation output, double dt,
                            std::uint64_t seed, bool train_capacities) {
  const auto nd = static_cast<Eigen::Index>(net.num_dynamic());
  for (const auto& b : net.branches())
    if (b.kind == BranchKind::terminal_source)
      throw ValidationError("terminal-source branch '" + b.id + "' has no learnable conductance");
  Vector phi(nd);
  for (Eigen::Index i = 0; i < nd; ++i) {
    const CapacitiveLaw& cap = net.capacity(static_cast<std::size_t>(i));
    if (!cap.is_linear()) throw ValidationError("neural model needs linear capacities");
    phi[i] = 1.0 / cap.capacitance();
  }
  const CounterRng rng(seed);
  Vector theta(static_cast<Eigen::Index>(net.num_branches()));
  for (Eigen::Index b = 0; b < theta.size(); ++b) theta[b] = 1.0 - rng.uniform(0, static_cast<std::uint64_t>(b));

  std::vector<std::string> nodes = net.dynamic_ids();
  for (auto& id : net.boundary_ids()) nodes.push_back(id);
  return SparseNeuralOde::from_parts(std::move(nodes), net.branch_ids(), net.num_dynamic(), net.incidence(),
                                     std::move(theta), std::move(phi), hidden, output, dt, train_capacities);
}

Vector forward_step(const SparseNeuralOde& model, const Vector& w) {
  if (static_cast<std::size_t>(w.size()) != model.num_nodes())
    throw ValidationError("state must cover every node row");
  const Vector h = apply(model.act_hidden(), model.hidden_weights().transpose() * w);
  require_finite(h, "hidden activation");
  const Vector inc = apply(model.act_output(), model.output_weights() * h);
  require_finite(inc, "increment");
  return w + model.dt() * inc;
}

std::vector<Vector> rollout(const SparseNeuralOde& model, const Vector& w0, std::size_t steps) {
  std::vector<Vector> ws;
  ws.reserve(steps + 1);
  ws.push_back(w0);
  for (std::size_t k = 0; k < steps; ++k) {
    ws.push_back(forward_step(model, ws.back()));
    if (ws.back().cwiseAbs().maxCoeff() > 1e12)
      throw DivergenceError("rollout diverged at step " + std::to_string(k + 1));
  }
  return ws;
}

double loss_mse(const std::vector<Vector>& predicted, const std::vector<Vector>& observed,
                const std::vector<std::size_t>& rows) {
  if (predicted.size() != observed.size()) throw ValidationError("prediction and observation lengths differ");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const Vector& p = predicted[k];
    const Vector& o = observed[k];
    if (rows.empty()) {
      if (p.size() != o.size()) throw ValidationError("prediction and observation widths differ");
      sum += (p - o).squaredNorm();
      count += static_cast<std::size_t>(p.size());
    } else {
      for (std::size_t r : rows) {
        const auto i = static_cast<Eigen::Index>(r);
        if (i >= p.size() || i >= o.size()) throw ValidationError("row index out of range");
        sum += (p[i] - o[i]) * (p[i] - o[i]);
      }
      count += rows.size();
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Gradients

ModelGradient grad_bptt(const SparseNeuralOde& model, const Vector& w0, const std::vector<Vector>& observed) {
  check_window(model, w0, observed);
  const std::size_t L = observed.size();
  const std::vector<Vector> ws = rollout(model, w0, L - 1);
  const double scale = 1.0 / static_cast<double>((L - 1) * model.num_dynamic());
  const Matrix& H = model.hidden_weights();
  const Matrix& O = model.output_weights();

  Matrix dH = Matrix::Zero(H.rows(), H.cols());
  Matrix dO = Matrix::Zero(O.rows(), O.cols());
  Vector lambda = Vector::Zero(w0.size());
  for (std::size_t k = L - 1; k >= 1; --k) {
    lambda += loss_jump(model, ws[k], observed[k], scale);
    const Vector& wp = ws[k - 1];
    const Vector pre = H.transpose() * wp;
    const Vector h = apply(model.act_hidden(), pre);
    const Vector q = O * h;
    const Vector dq = (model.dt() * lambda).cwiseProduct(slope(model.act_output(), q));
    dO += dq * h.transpose();
    const Vector dpre = (O.transpose() * dq).cwiseProduct(slope(model.act_hidden(), pre));
    dH += wp * dpre.transpose();
    lambda += H * dpre;
  }
  ModelGradient g;
  g.loss = window_loss(model, ws, observed);
  g.hidden = masked(dH, model.mask_hidden());
  g.output = masked(dO, model.mask_output());
  g.parameters = reduce_parameters(model, g.hidden, g.output);
  return g;
}

namespace {

struct Augmented {
  Vector z;
  Vector a;
  Matrix dH;
  Matrix dO;
};

// Time-reversed augmented dynamics: d/dtau of (z, a, gH, gO) with tau = -t.
Augmented reversed_rates(const SparseNeuralOde& model, const Vector& z, const Vector& a) {
  const Matrix& H = model.hidden_weights();
  const Matrix& O = model.output_weights();
  const Vector pre = H.transpose() * z;
  const Vector h = apply(model.act_hidden(), pre);
  const Vector q = O * h;
  const Vector dq = a.cwiseProduct(slope(model.act_output(), q));
  const Vector dpre = (O.transpose() * dq).cwiseProduct(slope(model.act_hidden(), pre));
  return {-apply(model.act_output(), q), H * dpre, z * dpre.transpose(), dq * h.transpose()};
}

}  // namespace

ModelGradient grad_adjoint(const SparseNeuralOde& model, const Vector& w0, const std::vector<Vector>& observed) {
  check_window(model, w0, observed);
  const std::size_t L = observed.size();
  // Checkpoints: the model's predictions at the observation instants.
  const std::vector<Vector> ws = rollout(model, w0, L - 1);
  const double scale = 1.0 / static_cast<double>((L - 1) * model.num_dynamic());
  const double h = model.dt();

  Matrix dH = Matrix::Zero(model.hidden_weights().rows(), model.hidden_weights().cols());
  Matrix dO = Matrix::Zero(dH.rows(), dH.cols());
  Vector a = Vector::Zero(w0.size());
  for (std::size_t k = L - 1; k >= 1; --k) {
    a += loss_jump(model, ws[k], observed[k], scale);
    const Vector& z = ws[k];
    const Augmented k1 = reversed_rates(model, z, a);
    const Augmented k2 = reversed_rates(model, z + 0.5 * h * k1.z, a + 0.5 * h * k1.a);
    const Augmented k3 = reversed_rates(model, z + 0.5 * h * k2.z, a + 0.5 * h * k2.a);
    const Augmented k4 = reversed_rates(model, z + h * k3.z, a + h * k3.a);
    a += h / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
    dH += h / 6.0 * (k1.dH + 2.0 * k2.dH + 2.0 * k3.dH + k4.dH);
    dO += h / 6.0 * (k1.dO + 2.0 * k2.dO + 2.0 * k3.dO + k4.dO);
    require_finite(a, "adjoint state");
  }
  ModelGradient g;
  g.loss = window_loss(model, ws, observed);
  g.hidden = masked(dH, model.mask_hidden());
  g.output = masked(dO, model.mask_output());
  g.parameters = reduce_parameters(model, g.hidden, g.output);
  return g;
}

// ---------------------------------------------------------------------------
// Data and training

Dataset generate_data(const NetworkEquations& eq, const Vector& w0, double dt, std::size_t steps, double noise_frac,
                      std::uint64_t seed) {
  if (!(noise_frac >= 0.0)) throw ValidationError("noise fraction must be nonnegative");
  if (eq.has_flow_terminals()) throw ValidationError("datasets need potential-specified terminals");
  const ProcessNetwork& net = eq.network();
  SimulationOptions opts;
  opts.dt = dt;
  opts.t_end = static_cast<double>(steps) * dt;
  opts.method = Method::euler;
  const Trajectory traj = simulate(eq, eq.inventories(w0), opts);

  Dataset d;
  d.dynamic_ids = net.dynamic_ids();
  d.boundary_ids = net.boundary_ids();
  d.branch_ids = net.branch_ids();
  d.dt = dt;
  d.noise_frac = noise_frac;
  d.seed = seed;
  for (std::size_t k = 0; k < traj.size(); ++k) d.times.push_back(static_cast<double>(k) * dt);
  d.clean = traj.w;
  d.clean_Z = traj.Z;
  d.clean_F = traj.F;
  const auto nd = static_cast<Eigen::Index>(net.num_dynamic());
  d.boundary_potentials = eq.node_potentials(w0).tail(static_cast<Eigen::Index>(net.num_nodes()) - nd);

  Vector mean = Vector::Zero(nd);
  for (const auto& w : d.clean) mean += w;
  mean /= static_cast<double>(d.clean.size());
  Vector var = Vector::Zero(nd);
  for (const auto& w : d.clean) var += (w - mean).cwiseAbs2();
  const Vector sigma = noise_frac * (var / static_cast<double>(d.clean.size())).cwiseSqrt();

  const CounterRng rng(seed);
  d.observed = d.clean;
  for (std::size_t k = 0; k < d.observed.size(); ++k)
    for (Eigen::Index i = 0; i < nd; ++i)
      if (sigma[i] > 0.0) d.observed[k][i] += sigma[i] * rng.normal(static_cast<std::uint64_t>(i), k);
  return d;
}

void validate_config(const TrainingConfig& c) {
  if (c.iterations < 1) throw ValidationError("iterations must be at least 1");
  if (c.window_length < 2) throw ValidationError("window length must be at least 2");
  if (c.batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (!(c.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0) || !(c.beta2 > 0.0 && c.beta2 < 1.0))
    throw ValidationError("moment decay rates must lie in (0, 1)");
  if (!(c.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (c.threads < 1) throw ValidationError("threads must be at least 1");
}

Vector full_state(const SparseNeuralOde& model, const Vector& dynamic, const Vector& boundary) {
  if (static_cast<std::size_t>(dynamic.size()) != model.num_dynamic() ||
      static_cast<std::size_t>(dynamic.size() + boundary.size()) != model.num_nodes())
    throw ValidationError("state dimensions do not match the model");
  Vector w(static_cast<Eigen::Index>(model.num_nodes()));
  w << dynamic, boundary;
  return w;
}

TrainingReport train(SparseNeuralOde& model, const Dataset& data, const TrainingConfig& config) {
  validate_config(config);
  if (data.dynamic_ids != std::vector<std::string>(model.node_ids().begin(),
                                                   model.node_ids().begin() +
                                                       static_cast<std::ptrdiff_t>(model.num_dynamic())))
    throw ValidationError("dataset nodes do not match the model");
  if (std::abs(data.dt - model.dt()) > 1e-12 * std::max(1.0, model.dt()))
    throw ValidationError("dataset spacing differs from the model dt");
  const auto L = static_cast<std::size_t>(config.window_length);
  if (data.size() < L) throw ValidationError("dataset is shorter than one window");

  const auto start = std::chrono::steady_clock::now();
  const CounterRng rng(config.seed);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::uint64_t starts = data.size() - L + 1;

  Vector p = model.parameters();
  Vector m1 = Vector::Zero(p.size());
  Vector m2 = Vector::Zero(p.size());
  TrainingReport report;
  report.loss_history.reserve(static_cast<std::size_t>(config.iterations));
  std::vector<ModelGradient> grads(batch);

  for (int it = 1; it <= config.iterations; ++it) {
    const auto eval = [&](std::size_t b) {
      const auto s = static_cast<std::size_t>(rng.below(starts, static_cast<std::uint64_t>(it), b));
      const std::vector<Vector> obs(data.observed.begin() + static_cast<std::ptrdiff_t>(s),
                                    data.observed.begin() + static_cast<std::ptrdiff_t>(s + L));
      const Vector w0 = full_state(model, obs.front(), data.boundary_potentials);
      grads[b] = config.gradient_method == GradientMethod::bptt ? grad_bptt(model, w0, obs)
                                                                : grad_adjoint(model, w0, obs);
    };
    try {
      if (config.threads == 1) {
        for (std::size_t b = 0; b < batch; ++b) eval(b);
      } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.threads));
        for (int t = 0; t < config.threads; ++t)
          pool.emplace_back([&, t] {
            try {
              for (auto b = static_cast<std::size_t>(t); b < batch; b += static_cast<std::size_t>(config.threads))
                eval(b);
            } catch (...) {
              errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
          });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
          if (e) std::rethrow_exception(e);
      }
    } catch (const DivergenceError& e) {
      throw DivergenceError("training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }

    Vector g = Vector::Zero(p.size());
    double loss = 0.0;
    for (const auto& gr : grads) {
      g += gr.parameters;
      loss += gr.loss;
    }
    g /= static_cast<double>(batch);
    loss /= static_cast<double>(batch);
    if (!std::isfinite(loss) || !g.allFinite())
      throw DivergenceError("training diverged at iteration " + std::to_string(it) + ": non-finite loss");
    report.loss_history.push_back(loss);

    m1 = config.beta1 * m1 + (1.0 - config.beta1) * g;
    m2 = config.beta2 * m2 + (1.0 - config.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config.beta1, it);
    const double c2 = 1.0 - std::pow(config.beta2, it);
    p -= config.learning_rate * ((m1 / c1).array() / ((m2 / c2).array().sqrt() + config.epsilon)).matrix();
    model.set_parameters(p);
    if (config.check_masks && !model.masks_respected())
      throw Error("mask violated after iteration " + std::to_string(it));
  }

  report.final_loss = report.loss_history.back();
  report.hidden_weights = model.hidden_weights();
  report.output_weights = model.output_weights();
  report.conductances = model.conductances().cwiseAbs();
  report.capacitances = model.inverse_capacities().cwiseInverse();
  const auto nd = static_cast<Eigen::Index>(model.num_dynamic());
  report.ratios = Matrix::Zero(nd, static_cast<Eigen::Index>(model.num_branches()));
  for (Eigen::Index n = 0; n < nd; ++n)
    for (Eigen::Index b = 0; b < report.ratios.cols(); ++b)
      if (model.orientation()(n, b) != 0)
        report.ratios(n, b) = model.conductances()[b] * model.inverse_capacities()[n];
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json mask_json(const BoolMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j) ? 1 : 0);
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string checkpoint_json(const SparseNeuralOde& model, const CheckpointInfo& info) {
  json j;
  j["format_version"] = 1;
  j["nodes"] = model.node_ids();
  j["num_dynamic"] = model.num_dynamic();
  j["branches"] = model.branch_ids();
  j["orientation"] = matrix_json(model.orientation().cast<double>());
  j["mask_hidden"] = mask_json(model.mask_hidden());
  j["mask_output"] = mask_json(model.mask_output());
  j["hidden_weights"] = matrix_json(model.hidden_weights());
  j["output_weights"] = matrix_json(model.output_weights());
  j["conductances"] = vector_json(model.conductances());
  j["inverse_capacities"] = vector_json(model.inverse_capacities());
  j["train_capacities"] = model.capacities_trainable();
  j["act_hidden"] = std::string(to_string(model.act_hidden()));
  j["act_output"] = std::string(to_string(model.act_output()));
  j["dt"] = model.dt();
  const TrainingConfig& c = info.config;
  j["provenance"] = {{"dataset_seed", info.dataset_seed},
                     {"config",
                      {{"iterations", c.iterations},
                       {"window_length", c.window_length},
                       {"batch_size", c.batch_size},
                       {"learning_rate", c.learning_rate},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"epsilon", c.epsilon},
                       {"seed", c.seed},
                       {"gradient_method", std::string(to_string(c.gradient_method))}}}};
  return j.dump(2) + "\n";
}

SparseNeuralOde load_checkpoint(const std::string& text, CheckpointInfo* info) {
  try {
    const json j = json::parse(text);
    if (j.at("format_version").get<int>() != 1) throw ParseError("unsupported checkpoint format_version");
    const auto nodes = j.at("nodes").get<std::vector<std::string>>();
    const auto branches = j.at("branches").get<std::vector<std::string>>();
    const json& orient = j.at("orientation");
    IntMatrix sign(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(branches.size()));
    if (orient.size() != nodes.size()) throw ParseError("orientation has wrong row count");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (orient[i].size() != branches.size()) throw ParseError("orientation has wrong column count");
      for (std::size_t b = 0; b < branches.size(); ++b)
        sign(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) =
            static_cast<int>(orient[i][b].get<double>());
    }
    SparseNeuralOde m = SparseNeuralOde::from_parts(
        nodes, branches, j.at("num_dynamic").get<std::size_t>(), sign, vector_from(j.at("conductances")),
        vector_from(j.at("inverse_capacities")), parse_activation(j.at("act_hidden").get<std::string>()),
        parse_activation(j.at("act_output").get<std::string>()), j.at("dt").get<double>(),
        j.at("train_capacities").get<bool>());
    if (info) {
      const json& p = j.at("provenance");
      const json& c = p.at("config");
      info->dataset_seed = p.at("dataset_seed").get<std::uint64_t>();
      info->config.iterations = c.at("iterations").get<int>();
      info->config.window_length = c.at("window_length").get<int>();
      info->config.batch_size = c.at("batch_size").get<int>();
      info->config.learning_rate = c.at("learning_rate").get<double>();
      info->config.beta1 = c.at("beta1").get<double>();
      info->config.beta2 = c.at("beta2").get<double>();
      info->config.epsilon = c.at("epsilon").get<double>();
      info->config.seed = c.at("seed").get<std::uint64_t>();
      info->config.gradient_method = parse_gradient_method(c.at("gradient_method").get<std::string>());
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ValidationError& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace flownet
