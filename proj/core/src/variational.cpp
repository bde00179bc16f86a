#include <flownet/variational.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace flownet {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kKktTolerance = 1e-9;

double branch_cocontent(const Branch& b, double W) {
  if (b.kind == BranchKind::terminal_source) return b.source_flow * W;
  if (!b.law) throw ValidationError("branch '" + b.id + "' has no law for the co-content");
  return b.law->cocontent(W);
}

double branch_slope(const Branch& b, double W) {
  if (b.kind == BranchKind::terminal_source) return 0.0;
  return b.law->slope(W);
}

/// The co-content as a function of the free rows: dynamic nodes plus
/// flow-specified terminals, whose prescribed injection enters linearly.
class FreeProblem {
 public:
  explicit FreeProblem(const NetworkEquations& eq) : eq_(eq), net_(eq.network()) {
    for (std::size_t r = 0; r < net_.num_dynamic(); ++r) free_rows_.push_back(r);
    for (std::size_t k = 0; k < eq.flow_terminal_rows().size(); ++k) {
      free_rows_.push_back(eq.flow_terminal_rows()[k]);
      injection_.push_back(eq.flow_terminal_values()[k]);
    }
    base_ = Vector::Zero(static_cast<Eigen::Index>(net_.num_nodes()));
    for (std::size_t r = net_.num_dynamic(); r < net_.num_nodes(); ++r) {
      const auto& bc = eq.boundary().potentials;
      if (auto it = bc.find(net_.node_at_row(r).id); it != bc.end())
        base_[static_cast<Eigen::Index>(r)] = it->second;
    }
    A_free_ = Matrix(static_cast<Eigen::Index>(free_rows_.size()), static_cast<Eigen::Index>(net_.num_branches()));
    const Matrix A = net_.incidence().cast<double>();
    for (std::size_t i = 0; i < free_rows_.size(); ++i)
      A_free_.row(static_cast<Eigen::Index>(i)) = A.row(static_cast<Eigen::Index>(free_rows_[i]));
  }

  std::size_t size() const { return free_rows_.size(); }
  std::size_t num_dynamic() const { return net_.num_dynamic(); }

  Vector potentials(const Vector& x) const {
    Vector w = base_;
    for (std::size_t i = 0; i < free_rows_.size(); ++i)
      w[static_cast<Eigen::Index>(free_rows_[i])] = x[static_cast<Eigen::Index>(i)];
    return w;
  }

  Vector initial_guess() const {
    double mean = 0.0;
    int count = 0;
    for (std::size_t r = net_.num_dynamic(); r < net_.num_nodes(); ++r) {
      if (eq_.is_flow_terminal(r)) continue;
      mean += base_[static_cast<Eigen::Index>(r)];
      ++count;
    }
    if (count > 0) mean /= count;
    return Vector::Constant(static_cast<Eigen::Index>(size()), mean);
  }

  double objective(const Vector& x) const {
    const Vector W = eq_.potential_differences(potentials(x));
    double J = 0.0;
    for (std::size_t j = 0; j < net_.num_branches(); ++j)
      J += branch_cocontent(net_.branches()[j], W[static_cast<Eigen::Index>(j)]);
    for (std::size_t k = 0; k < injection_.size(); ++k)
      J -= injection_[k] * x[static_cast<Eigen::Index>(net_.num_dynamic() + k)];
    return J;
  }

  Vector gradient(const Vector& x) const {
    const Vector F = eq_.branch_flows(potentials(x));
    Vector g = A_free_ * F;
    for (std::size_t k = 0; k < injection_.size(); ++k) g[static_cast<Eigen::Index>(net_.num_dynamic() + k)] -= injection_[k];
    return g;
  }

  Matrix hessian(const Vector& x) const {
    const Vector W = eq_.potential_differences(potentials(x));
    Vector s(W.size());
    for (std::size_t j = 0; j < net_.num_branches(); ++j)
      s[static_cast<Eigen::Index>(j)] = branch_slope(net_.branches()[j], W[static_cast<Eigen::Index>(j)]);
    return A_free_ * s.asDiagonal() * A_free_.transpose();
  }

  bool all_linear() const {
    for (const auto& b : net_.branches()) {
      if (b.kind == BranchKind::terminal_source) continue;
      if (!b.law || !b.law->is_linear()) return false;
    }
    return true;
  }

  /// Every free row must reach a fixed-potential row through law-bearing
  /// branches, otherwise the Hessian is singular for any law.
  void require_grounded() const {
    const std::size_t n = net_.num_nodes();
    std::vector<bool> reached(n, false);
    std::deque<std::size_t> queue;
    for (std::size_t r = net_.num_dynamic(); r < n; ++r) {
      if (!eq_.is_flow_terminal(r)) {
        reached[r] = true;
        queue.push_back(r);
      }
    }
    while (!queue.empty()) {
      const std::size_t r = queue.front();
      queue.pop_front();
      for (std::size_t j = 0; j < net_.num_branches(); ++j) {
        const Branch& b = net_.branches()[j];
        if (b.kind == BranchKind::terminal_source) continue;
        std::size_t other = n;
        if (net_.from_row(j) == r) other = net_.to_row(j);
        if (net_.to_row(j) == r) other = net_.from_row(j);
        if (other < n && !reached[other]) {
          reached[other] = true;
          queue.push_back(other);
        }
      }
    }
    for (std::size_t r : free_rows_) {
      if (!reached[r])
        throw SingularError("singular Hessian: node '" + net_.node_at_row(r).id +
                            "' is not connected to any fixed-potential node");
    }
  }

 private:
  const NetworkEquations& eq_;
  const ProcessNetwork& net_;
  std::vector<std::size_t> free_rows_;
  std::vector<double> injection_;
  Vector base_;
  Matrix A_free_;
};

Vector newton_direction(const Matrix& H, const Vector& g) {
  const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
  double mu = 0.0;
  for (int attempt = 0; attempt < 30; ++attempt) {
    Matrix Hm = H;
    Hm.diagonal().array() += mu;
    Eigen::LDLT<Matrix> ldlt(Hm);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
        ldlt.vectorD().minCoeff() > 1e-13 * scale) {
      Vector d = ldlt.solve(-g);
      if (d.allFinite()) return d;
    }
    mu = mu == 0.0 ? 1e-10 * scale : mu * 10.0;
  }
  return -g;
}

}  // namespace

double cocontent(const NetworkEquations& eq, const Vector& w_dynamic) {
  const ProcessNetwork& net = eq.network();
  const Vector w = eq.node_potentials(w_dynamic);
  const Vector W = eq.potential_differences(w);
  double G = 0.0;
  for (std::size_t j = 0; j < net.num_branches(); ++j)
    G += branch_cocontent(net.branches()[j], W[static_cast<Eigen::Index>(j)]);
  for (std::size_t k = 0; k < eq.flow_terminal_rows().size(); ++k)
    G -= eq.flow_terminal_values()[k] * w[static_cast<Eigen::Index>(eq.flow_terminal_rows()[k])];
  return G;
}

Vector cocontent_gradient(const NetworkEquations& eq, const Vector& w_dynamic) {
  const Vector F = eq.branch_flows(eq.node_potentials(w_dynamic));
  return eq.network().dynamic_incidence() * F;
}

double content(const ProcessNetwork& net, const Vector& flows) {
  if (static_cast<std::size_t>(flows.size()) != net.num_branches())
    throw ValidationError("flow vector has wrong dimension");
  double G = 0.0;
  for (std::size_t j = 0; j < net.num_branches(); ++j) {
    const Branch& b = net.branches()[j];
    if (b.kind == BranchKind::terminal_source) continue;
    if (!b.law) throw ValidationError("branch '" + b.id + "' has no law for the content");
    G += b.law->content(flows[static_cast<Eigen::Index>(j)]);
  }
  return G;
}

double kkt_residual(const NetworkEquations& eq, const Vector& w_dynamic) {
  if (eq.num_dynamic() == 0) return 0.0;
  return cocontent_gradient(eq, w_dynamic).cwiseAbs().maxCoeff();
}

SteadyStateSolution solve_steady(const NetworkEquations& eq, const SteadyOptions& options) {
  const FreeProblem problem(eq);
  problem.require_grounded();

  SteadyStateSolution sol;
  Vector x = problem.initial_guess();
  if (problem.size() > 0) {
    if (problem.all_linear()) {
      // Quadratic objective: one exact Newton step from any point.
      const Matrix H = problem.hessian(x);
      Eigen::LDLT<Matrix> ldlt(H);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
          ldlt.vectorD().minCoeff() <= 1e-13 * std::max(1.0, H.diagonal().maxCoeff()))
        throw SingularError("singular Hessian in the linear steady-state solve");
      x += ldlt.solve(-problem.gradient(x));
      sol.iterations = 1;
      sol.direct = true;
    } else {
      double J = problem.objective(x);
      bool converged = false;
      for (int it = 0; it < options.max_iterations; ++it) {
        const Vector g = problem.gradient(x);
        sol.iterations = it;
        if (g.cwiseAbs().maxCoeff() <= options.tolerance) {
          converged = true;
          break;
        }
        Vector d = newton_direction(problem.hessian(x), g);
        double slope = g.dot(d);
        if (slope >= 0.0) {
          d = -g;
          slope = -g.squaredNorm();
        }
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
          const Vector trial = x + alpha * d;
          double Jt = std::numeric_limits<double>::infinity();
          try {
            Jt = problem.objective(trial);
          } catch (const DomainError&) {
          }
          if (std::isfinite(Jt) && Jt <= J + kArmijo * alpha * slope) {
            x = trial;
            J = Jt;
            accepted = true;
            break;
          }
          alpha *= 0.5;
        }
        if (!accepted) {
          // No further decrease representable; accept if already stationary.
          converged = g.cwiseAbs().maxCoeff() <= kKktTolerance;
          break;
        }
        sol.iterations = it + 1;
      }
      if (!converged && problem.gradient(x).cwiseAbs().maxCoeff() > kKktTolerance) {
        std::ostringstream os;
        os << "steady-state Newton did not converge in " << options.max_iterations << " iterations";
        throw ConvergenceError(os.str());
      }
    }
  }

  sol.w_star = x.head(static_cast<Eigen::Index>(problem.num_dynamic()));
  sol.potentials = eq.node_potentials(sol.w_star);
  sol.F_star = eq.branch_flows(sol.potentials);
  sol.Z_star = eq.inventories(sol.w_star);
  sol.G_star = cocontent(eq, sol.w_star);
  sol.kkt_residual = kkt_residual(eq, sol.w_star);
  return sol;
}

double potential(const NetworkEquations& eq, const Vector& Z) {
  const auto n = static_cast<Eigen::Index>(eq.num_dynamic());
  if (Z.size() != n) throw ValidationError("inventory vector has wrong dimension");
  // The imbalance is the gradient of the co-content in w, so the line
  // integral along any inventory path telescopes to the end point value.
  return cocontent(eq, eq.dynamic_potentials(Z));
}

ConvexityReport convexity_check(const NetworkEquations& eq, const std::vector<Vector>& w_samples,
                                double tolerance) {
  if (w_samples.empty()) throw ValidationError("convexity check needs at least one sample");
  constexpr double h = 1e-5;
  ConvexityReport report;
  for (const Vector& w : w_samples) {
    const Eigen::Index n = w.size();
    Matrix H(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Vector wp = w;
      Vector wm = w;
      wp[j] += h;
      wm[j] -= h;
      H.col(j) = (cocontent_gradient(eq, wp) - cocontent_gradient(eq, wm)) / (2.0 * h);
    }
    const Matrix sym = 0.5 * (H + H.transpose());
    double min_eig = 0.0;
    if (n > 0) {
      const Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
      min_eig = solver.eigenvalues().minCoeff();
    }
    report.hessians.push_back(sym);
    report.min_eigenvalues.push_back(min_eig);
    if (min_eig < -tolerance) report.convex = false;
  }
  return report;
}

}  // namespace flownet
