#include "commands.hpp"

#include <flownet/control.hpp>
#include <flownet/csv.hpp>
#include <flownet/neuralode.hpp>
#include <flownet/variational.hpp>
#include <flownet/version.hpp>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdlib>
#include <memory>
#include <ostream>
#include <sstream>

namespace flownet::cli {

namespace {

std::string join(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += v[i];
  }
  return s;
}

Vector parse_list(const std::string& text, std::size_t expected, const char* flag) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw ValidationError(std::string(flag) + ": '" + item + "' is not a number");
    values.push_back(v);
    pos = comma + 1;
  }
  if (values.size() != expected)
    throw ValidationError(std::string(flag) + " needs " + std::to_string(expected) + " values, got " +
                          std::to_string(values.size()));
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

struct Loaded {
  NetworkDocument doc;
  ProcessNetwork net;
};

Loaded load(const std::string& path, BuildOptions options = {}) {
  NetworkDocument doc = load_document(path);
  ProcessNetwork net = build_network(doc, options);
  return {std::move(doc), std::move(net)};
}

Method parse_method(const std::string& s) {
  if (s == "euler") return Method::euler;
  if (s == "rk4") return Method::rk4;
  if (s == "adaptive") return Method::adaptive;
  throw ValidationError("unknown method '" + s + "'");
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string network, z0, method = "euler", out;
  double dt = 0.02, t_end = 0.0;
  bool open_loop = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const Loaded l = load(a.network);
  const NetworkEquations eq(l.net, l.doc.boundary);
  const Vector Z0 = parse_list(a.z0, l.net.num_dynamic(), "--z0");
  SimulationOptions opts;
  opts.dt = a.dt;
  opts.t_end = a.t_end;
  opts.method = parse_method(a.method);

  const bool closed = !l.doc.controllers.empty() && !a.open_loop;
  std::unique_ptr<InventoryControl> control;
  if (closed) control = std::make_unique<InventoryControl>(eq, l.doc.controllers);
  const Trajectory traj = closed ? simulate(eq, control->evaluator(), Z0, opts) : simulate(eq, Z0, opts);
  if (!a.out.empty()) write_trajectory(traj, a.out);

  const Vector& w = traj.w.back();
  const Vector& Z = traj.Z.back();
  const Vector rate = eq.inventory_rates(traj.F.back());
  out << "nodes=" << join(traj.dynamic_ids) << "\n";
  out << "steps=" << traj.size() - 1 << "\n";
  out << "t_final=" << format_double(traj.times.back()) << "\n";
  out << "w_final=" << join(w) << "\n";
  out << "Z_final=" << join(Z) << "\n";
  if (closed) {
    out << "control_potential_final=" << format_double(control->potential(Z)) << "\n";
  } else {
    out << "cocontent_final=" << format_double(cocontent(eq, w)) << "\n";
  }
  const double max_rate = rate.size() ? rate.cwiseAbs().maxCoeff() : 0.0;
  out << "max_abs_rate=" << format_double(max_rate) << "\n";
  out << "steady=" << (max_rate < 1e-6 ? "true" : "false") << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct SteadyArgs {
  std::string network, out;
};

int cmd_steady(const SteadyArgs& a, std::ostream& out) {
  const Loaded l = load(a.network);
  const NetworkEquations eq(l.net, l.doc.boundary);
  const SteadyStateSolution s = solve_steady(eq);
  std::ostringstream r;
  r << "nodes=" << join(l.net.dynamic_ids()) << "\n";
  r << "branches=" << join(l.net.branch_ids()) << "\n";
  r << "w_star=" << join(s.w_star) << "\n";
  r << "Z_star=" << join(s.Z_star) << "\n";
  r << "F_star=" << join(s.F_star) << "\n";
  r << "G_star=" << format_double(s.G_star) << "\n";
  r << "kkt_residual=" << format_double(s.kkt_residual) << "\n";
  r << "iterations=" << s.iterations << "\n";
  r << "direct=" << (s.direct ? "true" : "false") << "\n";
  const bool ok = s.kkt_residual < 1e-9;
  r << "converged=" << (ok ? "true" : "false") << "\n";
  out << r.str();
  if (!a.out.empty()) write_text(a.out, r.str());
  return ok ? kOk : kNumerical;
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string network, w0, out;
  double dt = 0.02, noise = 0.05;
  std::size_t steps = 150;
  std::uint64_t seed = 0;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  const Loaded l = load(a.network);
  const NetworkEquations eq(l.net, l.doc.boundary);
  const Vector w0 = parse_list(a.w0, l.net.num_dynamic(), "--w0");
  const Dataset d = generate_data(eq, w0, a.dt, a.steps, a.noise, a.seed);
  write_dataset(d, a.out);
  out << "rows=" << d.size() << "\n";
  out << "seed=" << d.seed << "\n";
  out << "noise_frac=" << format_double(d.noise_frac) << "\n";
  out << "dt=" << format_double(d.dt) << "\n";
  out << "out=" << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string network, data, out, report, grad = "bptt", activation = "relu";
  TrainingConfig config;
  bool train_capacities = false;
};

std::string report_json(const SparseNeuralOde& m, const TrainingReport& r, const TrainingConfig& c) {
  nlohmann::ordered_json j;
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["gradient_method"] = std::string(to_string(c.gradient_method));
  j["activations"] = {std::string(to_string(m.act_hidden())), std::string(to_string(m.act_output()))};
  j["final_loss"] = r.final_loss;
  j["wall_time_seconds"] = r.wall_time_seconds;
  for (std::size_t b = 0; b < m.num_branches(); ++b)
    j["conductances"][m.branch_ids()[b]] = r.conductances[static_cast<Eigen::Index>(b)];
  for (std::size_t n = 0; n < m.num_dynamic(); ++n)
    j["capacitances"][m.node_ids()[n]] = r.capacitances[static_cast<Eigen::Index>(n)];
  j["loss_history"] = r.loss_history;
  return j.dump(2) + "\n";
}

int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  const Loaded l = load(a.network);
  const Dataset data = read_dataset(a.data);
  if (data.boundary_ids != l.net.boundary_ids())
    throw ValidationError("dataset boundary nodes do not match the network");
  a.config.gradient_method = parse_gradient_method(a.grad);
  const Activation act = parse_activation(a.activation);
  SparseNeuralOde model = build_model(l.net, act, act, data.dt, a.config.seed, a.train_capacities);
  TrainingReport r;
  try {
    r = train(model, data, a.config);
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kTrainingDivergence;
  }
  write_text(a.out, checkpoint_json(model, {data.seed, a.config}));
  if (!a.report.empty()) write_text(a.report, report_json(model, r, a.config));

  out << "iterations=" << r.loss_history.size() << "\n";
  out << "final_loss=" << format_double(r.final_loss) << "\n";
  for (std::size_t b = 0; b < model.num_branches(); ++b)
    out << "K_" << model.branch_ids()[b] << "=" << format_double(r.conductances[static_cast<Eigen::Index>(b)]) << "\n";
  for (std::size_t n = 0; n < model.num_dynamic(); ++n)
    out << "C_" << model.node_ids()[n] << "=" << format_double(r.capacitances[static_cast<Eigen::Index>(n)]) << "\n";
  if (a.train_capacities)
    for (Eigen::Index n = 0; n < r.ratios.rows(); ++n)
      for (Eigen::Index b = 0; b < r.ratios.cols(); ++b)
        if (r.ratios(n, b) != 0.0)
          out << "ratio_" << model.branch_ids()[static_cast<std::size_t>(b)] << "_"
              << model.node_ids()[static_cast<std::size_t>(n)] << "=" << format_double(r.ratios(n, b)) << "\n";
  out << "wall_time_seconds=" << format_double(r.wall_time_seconds) << "\n";
  out << "checkpoint=" << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct CheckArgs {
  std::string network, checks;
  std::uint64_t seed = 0;
};

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_check(const CheckArgs& a, std::ostream& out) {
  BuildOptions opts;
  opts.validate_laws = false;
  const Loaded l = load(a.network, opts);
  const auto names = a.checks.empty() ? kAllChecks : split_names(a.checks);
  const auto results = run_checks(l.doc, names, {a.seed});
  bool ok = true;
  for (const auto& r : results) {
    const char* status = r.status == CheckResult::Status::pass ? "pass"
                         : r.status == CheckResult::Status::fail ? "fail"
                                                                  : "skip";
    if (r.status == CheckResult::Status::fail) ok = false;
    out << "check." << r.name << "=" << status << "\n";
    if (!r.detail.empty()) out << "check." << r.name << ".detail=" << r.detail << "\n";
  }
  out << "all_passed=" << (ok ? "true" : "false") << "\n";
  return ok ? kOk : kChecksFailed;
}

}  // namespace

std::uint64_t default_seed() {
  if (const char* env = std::getenv("FLOWNET_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::logic_error&) {
    }
    throw ValidationError(std::string("FLOWNET_SEED='") + env + "' is not an unsigned integer");
  }
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Process network modelling, steady states, inventory control and neural ODE training",
               "flownet"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::uint64_t seed_default = 0;
  try {
    seed_default = default_seed();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kParse;
  }

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Integrate the network and write a trajectory CSV");
  s->add_option("--network", sim.network, "Network document")->required();
  s->add_option("--z0", sim.z0, "Initial inventories, comma separated")->required();
  s->add_option("--dt", sim.dt, "Step size")->capture_default_str();
  s->add_option("--t-end", sim.t_end, "Final time")->required();
  s->add_option("--method", sim.method, "euler, rk4 or adaptive")->capture_default_str();
  s->add_option("--out", sim.out, "Trajectory CSV");
  s->add_flag("--open-loop", sim.open_loop, "Ignore controllers");

  SteadyArgs st;
  auto* y = app.add_subcommand("steady", "Minimise the co-content and report the steady state");
  y->add_option("--network", st.network, "Network document")->required();
  y->add_option("--out", st.out, "Report file");

  GenDataArgs gd;
  gd.seed = seed_default;
  auto* g = app.add_subcommand("gen-data", "Simulate and add Gaussian measurement noise");
  g->add_option("--network", gd.network, "Network document")->required();
  g->add_option("--w0", gd.w0, "Initial dynamic potentials, comma separated")->required();
  g->add_option("--dt", gd.dt, "Step size")->capture_default_str();
  g->add_option("--steps", gd.steps, "Number of Euler steps")->capture_default_str();
  g->add_option("--noise", gd.noise, "Noise std as a fraction of each node's trajectory std")->capture_default_str();
  g->add_option("--seed", gd.seed, "Noise seed (default FLOWNET_SEED or 0)");
  g->add_option("--out", gd.out, "Dataset CSV")->required();

  TrainArgs tr;
  tr.config.seed = seed_default;
  auto* t = app.add_subcommand("train", "Fit the topology-masked neural ODE to a dataset");
  t->add_option("--network", tr.network, "Network document")->required();
  t->add_option("--data", tr.data, "Dataset CSV")->required();
  t->add_option("--iters", tr.config.iterations, "Iterations")->capture_default_str();
  t->add_option("--lr", tr.config.learning_rate, "Learning rate")->capture_default_str();
  t->add_option("--window", tr.config.window_length, "Window length in steps")->capture_default_str();
  t->add_option("--batch", tr.config.batch_size, "Windows per batch")->capture_default_str();
  t->add_option("--seed", tr.config.seed, "Initialisation and sampling seed (default FLOWNET_SEED or 0)");
  t->add_option("--grad", tr.grad, "bptt or adjoint")->capture_default_str();
  t->add_option("--activation", tr.activation, "identity, relu or tanh")->capture_default_str();
  t->add_option("--threads", tr.config.threads, "Worker threads")->capture_default_str();
  t->add_flag("--train-capacities", tr.train_capacities, "Train 1/C as well; report K/C ratios");
  t->add_option("--out", tr.out, "Checkpoint file")->required();
  t->add_option("--report", tr.report, "Report file with the loss history");

  CheckArgs ck;
  ck.seed = seed_default;
  auto* c = app.add_subcommand("check", "Run invariant suites and report pass/fail");
  c->add_option("--network", ck.network, "Network document")->required();
  c->add_option("--checks", ck.checks, "Comma separated subset of " + join(kAllChecks));
  c->add_option("--seed", ck.seed, "Seed for sampled points (default FLOWNET_SEED or 0)");

  std::vector<std::string> argv_store;
  argv_store.push_back("flownet");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kParse;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, out);
    if (y->parsed()) return cmd_steady(st, out);
    if (g->parsed()) return cmd_gen_data(gd, out);
    if (t->parsed()) return cmd_train(tr, out, err);
    if (c->parsed()) return cmd_check(ck, out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kParse;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const SingularError& e) {
    err << "singular: " << e.what() << "\n";
    return kNumerical;
  } catch (const ConvergenceError& e) {
    err << "no convergence: " << e.what() << "\n";
    return kNumerical;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kParse;
}

}  // namespace flownet::cli
