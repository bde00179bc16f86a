#include "commands.hpp"

#include <flownet/control.hpp>
#include <flownet/csv.hpp>
#include <flownet/neuralode.hpp>
#include <flownet/rng.hpp>
#include <flownet/variational.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>

namespace flownet::cli {

namespace {

using Status = CheckResult::Status;

struct Context {
  const NetworkDocument& doc;
  ProcessNetwork net;
  NetworkEquations eq;
  CounterRng rng;
};

bool open_loop_evaluable(const ProcessNetwork& net) {
  return std::all_of(net.branches().begin(), net.branches().end(),
                     [](const Branch& b) { return b.kind == BranchKind::terminal_source || b.law.has_value(); });
}

bool touches_boundary(const ProcessNetwork& net) {
  for (std::size_t b = 0; b < net.num_branches(); ++b)
    if (net.from_row(b) >= net.num_dynamic() || net.to_row(b) >= net.num_dynamic()) return true;
  return false;
}

std::pair<double, double> potential_range(const Context& c) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& [id, v] : c.doc.boundary.potentials) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (hi - lo < 1.0) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

/// Dynamic potentials drawn inside every capacity's domain.
Vector sample_w(const Context& c, std::uint64_t stream) {
  const auto [lo, hi] = potential_range(c);
  Vector w(static_cast<Eigen::Index>(c.net.num_dynamic()));
  for (std::size_t r = 0; r < c.net.num_dynamic(); ++r) {
    double a = lo;
    double b = hi;
    if (const auto* t = std::get_if<TabulatedCapacity>(&c.net.capacity(r).form())) {
      a = t->curve.x_min() + 0.1 * (t->curve.x_max() - t->curve.x_min());
      b = t->curve.x_max() - 0.1 * (t->curve.x_max() - t->curve.x_min());
    }
    w[static_cast<Eigen::Index>(r)] = a + (b - a) * c.rng.uniform(stream, r);
  }
  return w;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

double euler_dt(const Rhs& rhs, const Vector& Z, double fraction, double cap) {
  const double limit = stability_limit(rhs, Z, Method::euler);
  return std::isfinite(limit) ? std::min(fraction * limit, cap) : cap;
}

// ---------------------------------------------------------------------------

CheckResult conservation(Context& c) {
  StateEvaluator ev;
  std::unique_ptr<InventoryControl> ctl;
  if (!c.doc.controllers.empty()) {
    ctl = std::make_unique<InventoryControl>(c.eq, c.doc.controllers);
    ev = ctl->evaluator();
  } else if (open_loop_evaluable(c.net)) {
    ev = open_loop_evaluator(c.eq);
  } else {
    return {"conservation", Status::skip, "controlled branches have neither laws nor controllers"};
  }
  const Rhs rhs = rhs_from_evaluator(c.eq, ev);
  Vector Z = c.eq.inventories(sample_w(c, 1));
  const double dt = euler_dt(rhs, Z, 0.5, 1.0);
  double worst = 0.0;
  double worst_kcl = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const NetworkState s = ev(Z);
    const Vector inj = c.eq.node_injections(s.flows);
    const double inflow = inj.tail(inj.size() - static_cast<Eigen::Index>(c.net.num_dynamic())).sum();
    const double scale = s.flows.size() ? std::max(1.0, s.flows.cwiseAbs().maxCoeff()) : 1.0;
    worst_kcl = std::max(worst_kcl, std::abs(inj.sum()) / scale);
    const Vector Zn = Z + dt * c.eq.inventory_rates(s.flows);
    const double change = Zn.sum() - Z.sum();
    worst = std::max(worst, std::abs(change - dt * inflow) / std::max(1.0, Z.cwiseAbs().sum()));
    Z = Zn;
  }
  const bool ok = worst <= 1e-12 && worst_kcl <= 1e-12;
  return {"conservation", ok ? Status::pass : Status::fail,
          "max_step_imbalance=" + fmt(worst) + " max_kcl_residual=" + fmt(worst_kcl)};
}

CheckResult kkt(Context& c) {
  if (!open_loop_evaluable(c.net)) return {"kkt", Status::skip, "controlled branches have no open-loop law"};
  if (!touches_boundary(c.net)) return {"kkt", Status::skip, "closed network: steady state is not unique"};
  try {
    const SteadyStateSolution s = solve_steady(c.eq);
    const bool ok = s.kkt_residual < 1e-9;
    return {"kkt", ok ? Status::pass : Status::fail, "residual=" + fmt(s.kkt_residual)};
  } catch (const Error& e) {
    return {"kkt", Status::fail, e.what()};
  }
}

CheckResult lyapunov(Context& c) {
  if (!open_loop_evaluable(c.net)) return {"lyapunov", Status::skip, "controlled branches have no open-loop law"};
  const Rhs rhs = assemble_rhs(c.eq);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    Vector Z = c.eq.inventories(sample_w(c, 10 + trial));
    const double dt = euler_dt(rhs, Z, 0.25, 1.0);
    double P = potential(c.eq, Z);
    for (int k = 0; k < 2000; ++k) {
      Z = step_euler(Z, rhs, dt);
      const double next = potential(c.eq, Z);
      worst = std::max(worst, (next - P) / std::max(1.0, std::abs(P)));
      P = next;
    }
  }
  const bool ok = worst <= 1e-9;
  return {"lyapunov", ok ? Status::pass : Status::fail, "max_relative_increase=" + fmt(std::max(worst, 0.0))};
}

CheckResult gradcheck(Context& c) {
  if (!open_loop_evaluable(c.net)) return {"gradcheck", Status::skip, "controlled branches have no open-loop law"};
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Vector w = sample_w(c, 20 + trial);
    const Vector g = cocontent_gradient(c.eq, w);
    Vector fd(g.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(w[i]));
      Vector p = w, m = w;
      p[i] += h;
      m[i] -= h;
      fd[i] = (cocontent(c.eq, p) - cocontent(c.eq, m)) / (2 * h);
    }
    worst = std::max(worst, (fd - g).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff()));
  }
  std::string detail = "cocontent_max_error=" + fmt(worst);
  bool ok = worst < 1e-5;

  // The neural model exists only for potential-specified, linear-capacity networks.
  if (!c.eq.has_flow_terminals()) {
    try {
      SparseNeuralOde model = build_model(c.net, Activation::identity, Activation::identity, 0.01, 7);
      Vector theta = model.conductances();
      SparseNeuralOde target = model;
      target.set_conductances(1.3 * theta);
      const Vector w0 = full_state(model, sample_w(c, 30), c.eq.node_potentials(sample_w(c, 30)).tail(
                                                              static_cast<Eigen::Index>(c.net.num_nodes() - c.net.num_dynamic())));
      std::vector<Vector> obs;
      for (const auto& w : rollout(target, w0, 9)) obs.push_back(w.head(static_cast<Eigen::Index>(c.net.num_dynamic())));
      const Vector g = grad_bptt(model, w0, obs).parameters;
      Vector fd(g.size());
      for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
        SparseNeuralOde mp = model, mm = model;
        Vector tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        mp.set_conductances(tp);
        mm.set_conductances(tm);
        fd[i] = (grad_bptt(mp, w0, obs).loss - grad_bptt(mm, w0, obs).loss) / (2 * h);
      }
      const double err = (fd - g).cwiseAbs().maxCoeff() / std::max(1e-300, g.cwiseAbs().maxCoeff());
      detail += " neural_bptt_max_error=" + fmt(err);
      ok = ok && err < 1e-5;
    } catch (const ValidationError&) {
      detail += " neural=skipped";
    }
  }
  return {"gradcheck", ok ? Status::pass : Status::fail, detail};
}

CheckResult control(Context& c) {
  if (c.doc.controllers.empty()) return {"control", Status::skip, "no controllers"};
  try {
    const InventoryControl ctl(c.eq, c.doc.controllers);
    const Rhs rhs = ctl.rhs();
    double min_gain = std::numeric_limits<double>::infinity();
    double max_gain = 0.0;
    for (const auto& s : ctl.controllers()) {
      min_gain = std::min(min_gain, s.gain);
      max_gain = std::max(max_gain, s.gain);
    }
    Vector Z = c.eq.inventories(sample_w(c, 40));
    const double dt = euler_dt(rhs, Z, 0.25, 0.1 / max_gain);
    const auto steps = static_cast<long>(std::min(2e5, std::ceil(30.0 / (min_gain * dt))));
    double P = ctl.potential(Z);
    double worst_increase = 0.0;
    double worst_bound = 0.0;
    for (long k = 0; k < steps; ++k) {
      const NetworkState s = ctl.state(Z);
      for (const auto& spec : ctl.controllers()) {
        if (!spec.bounds) continue;
        const double f = s.flows[static_cast<Eigen::Index>(c.net.branch_index(spec.branch))];
        worst_bound = std::max({worst_bound, spec.bounds->lower - f, f - spec.bounds->upper});
      }
      const auto sat = ctl.saturated(Z);
      Z = Z + dt * c.eq.inventory_rates(s.flows);
      const double next = ctl.potential(Z);
      if (std::none_of(sat.begin(), sat.end(), [](bool b) { return b; }))
        worst_increase = std::max(worst_increase, (next - P) / std::max(1.0, std::abs(P)));
      P = next;
    }
    double worst_error = 0.0;
    for (const auto& spec : ctl.controllers())
      worst_error = std::max(worst_error, std::abs(Z[static_cast<Eigen::Index>(c.net.row_of(spec.node))] - spec.setpoint));
    const auto sat = ctl.saturated(Z);
    const bool saturated = std::any_of(sat.begin(), sat.end(), [](bool b) { return b; });
    const bool ok = worst_error < 1e-6 && worst_increase <= 1e-9 && worst_bound <= 0.0 && !saturated;
    return {"control", ok ? Status::pass : Status::fail,
            "max_setpoint_error=" + fmt(worst_error) + " max_potential_increase=" + fmt(worst_increase) +
                " max_bound_violation=" + fmt(std::max(worst_bound, 0.0)) +
                (saturated ? " saturated_at_end=true" : "")};
  } catch (const Error& e) {
    return {"control", Status::fail, e.what()};
  }
}

CheckResult passivity(Context& c) {
  std::vector<std::string> bad;
  for (const auto& b : c.net.branches()) {
    if (!b.law) continue;
    try {
      b.law->validate();
    } catch (const ValidationError& e) {
      bad.push_back(b.id + " (" + e.what() + ")");
      continue;
    }
    double lo = -10.0;
    double hi = 10.0;
    if (const auto* t = std::get_if<TabulatedResistance>(&b.law->form())) {
      lo = t->curve.x_min();
      hi = t->curve.x_max();
    }
    for (int i = 0; i <= 200; ++i) {
      const double W = lo + (hi - lo) * i / 200.0;
      if (W * b.law->flow(W) < -1e-12 || b.law->slope(W) < 0.0) {
        bad.push_back(b.id + " (W*F < 0 or decreasing at W=" + fmt(W) + ")");
        break;
      }
    }
  }
  for (const auto& n : c.net.nodes()) {
    if (!n.capacity) continue;
    try {
      n.capacity->validate();
    } catch (const ValidationError& e) {
      bad.push_back(n.id + " (" + e.what() + ")");
    }
  }
  if (bad.empty()) return {"passivity", Status::pass, ""};
  std::string detail = "non-passive:";
  for (const auto& s : bad) detail += " " + s;
  return {"passivity", Status::fail, detail};
}

}  // namespace

std::vector<CheckResult> run_checks(const NetworkDocument& doc, const std::vector<std::string>& names,
                                    const CheckOptions& options) {
  const std::map<std::string, std::function<CheckResult(Context&)>> suites = {
      {"conservation", conservation}, {"kkt", kkt},         {"lyapunov", lyapunov},
      {"gradcheck", gradcheck},       {"control", control}, {"passivity", passivity}};
  for (const auto& n : names)
    if (!suites.count(n)) throw ValidationError("unknown check '" + n + "'");

  BuildOptions opts;
  opts.validate_laws = false;
  ProcessNetwork net = build_network(doc, opts);
  Context ctx{doc, net, NetworkEquations(net, doc.boundary), CounterRng(options.seed)};
  std::vector<CheckResult> results;
  for (const auto& n : names) {
    try {
      results.push_back(suites.at(n)(ctx));
    } catch (const Error& e) {
      results.push_back({n, Status::fail, e.what()});
    }
  }
  return results;
}

}  // namespace flownet::cli
