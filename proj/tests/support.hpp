#pragma once

#include <flownet/dynamics.hpp>
#include <flownet/topology.hpp>

#include <Eigen/LU>

#include <random>
#include <string>
#include <vector>

namespace flownet::testing {

inline NetworkDefinition two_tank(bool controlled = false) {
  const BranchKind demand = controlled ? BranchKind::controlled : BranchKind::resistive;
  NetworkDefinition d;
  d.nodes = {{"P1", NodeKind::dynamic, CapacitiveLaw::linear(2.0)},
             {"P2", NodeKind::dynamic, CapacitiveLaw::linear(2.0)},
             {"T1", NodeKind::terminal, std::nullopt},
             {"T2", NodeKind::datum, std::nullopt}};
  d.branches = {{"F1", "T1", "P1", BranchKind::resistive, ResistiveLaw::linear(1.0), 0.0},
                {"F2", "P1", "T2", demand, ResistiveLaw::linear(2.0), 0.0},
                {"F3", "T1", "P2", BranchKind::resistive, ResistiveLaw::linear(3.0), 0.0},
                {"F4", "P2", "T2", demand, ResistiveLaw::linear(4.0), 0.0}};
  return d;
}

inline BoundaryConditions two_tank_bc() { return {{{"T1", 4.0}, {"T2", 0.0}}, {}}; }

inline NetworkEquations two_tank_equations() {
  return NetworkEquations(ProcessNetwork::build(two_tank()), two_tank_bc());
}

/// Hand-derived steady state of the two-tank network: node balances
/// K1 (wT1 - w1) = K2 w1 and K3 (wT1 - w2) = K4 w2.
inline Vector two_tank_w_star() {
  Vector w(2);
  w << 4.0 * 1.0 / (1.0 + 2.0), 4.0 * 3.0 / (3.0 + 4.0);
  return w;
}

struct Edge {
  int from;
  int to;
  double K;
};

/// Random linear network with every node index < n_dyn dynamic, then
/// terminals, then the datum (last index). Connected, every dynamic node
/// reaches a boundary node.
struct RandomLinear {
  int n_dyn = 0;
  int n_bnd = 0;
  std::vector<double> C;
  std::vector<double> boundary;  // potentials of the boundary nodes
  std::vector<Edge> edges;

  std::string id(int i) const { return i < n_dyn ? "D" + std::to_string(i) : "B" + std::to_string(i - n_dyn); }

  NetworkDefinition definition() const {
    NetworkDefinition d;
    for (int i = 0; i < n_dyn; ++i) d.nodes.push_back({id(i), NodeKind::dynamic, CapacitiveLaw::linear(C[static_cast<std::size_t>(i)])});
    for (int j = 0; j < n_bnd; ++j)
      d.nodes.push_back({id(n_dyn + j), j + 1 == n_bnd ? NodeKind::datum : NodeKind::terminal, std::nullopt});
    for (std::size_t e = 0; e < edges.size(); ++e)
      d.branches.push_back({"E" + std::to_string(e), id(edges[e].from), id(edges[e].to), BranchKind::resistive,
                            ResistiveLaw::linear(edges[e].K), 0.0});
    return d;
  }

  BoundaryConditions bc() const {
    BoundaryConditions b;
    for (int j = 0; j < n_bnd; ++j) b.potentials[id(n_dyn + j)] = boundary[static_cast<std::size_t>(j)];
    return b;
  }

  /// Weighted-Laplacian solve assembled straight from the edge list.
  Vector oracle_w_star() const {
    Matrix L = Matrix::Zero(n_dyn, n_dyn);
    Vector rhs = Vector::Zero(n_dyn);
    for (const auto& e : edges) {
      const auto add = [&](int a, int b) {
        if (a >= n_dyn) return;
        L(a, a) += e.K;
        if (b < n_dyn)
          L(a, b) -= e.K;
        else
          rhs[a] += e.K * boundary[static_cast<std::size_t>(b - n_dyn)];
      };
      add(e.from, e.to);
      add(e.to, e.from);
    }
    return L.fullPivLu().solve(rhs);
  }
};

inline RandomLinear random_linear_network(std::uint64_t seed, int max_dynamic = 6) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> K(0.2, 5.0), C(0.5, 4.0), pot(-5.0, 10.0), unit(0.0, 1.0);
  RandomLinear r;
  r.n_dyn = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(max_dynamic));
  r.n_bnd = 2 + static_cast<int>(gen() % 2);
  for (int i = 0; i < r.n_dyn; ++i) r.C.push_back(C(gen));
  for (int j = 0; j < r.n_bnd; ++j) r.boundary.push_back(j + 1 == r.n_bnd ? 0.0 : pot(gen));
  const auto orient = [&](int a, int b) { return unit(gen) < 0.5 ? Edge{a, b, K(gen)} : Edge{b, a, K(gen)}; };
  // Spanning tree over the dynamic nodes rooted at a boundary node.
  for (int i = 0; i < r.n_dyn; ++i) {
    const int parent = i == 0 ? r.n_dyn + static_cast<int>(gen() % static_cast<std::uint64_t>(r.n_bnd))
                              : static_cast<int>(gen() % static_cast<std::uint64_t>(i));
    r.edges.push_back(orient(i, parent));
  }
  const int n = r.n_dyn + r.n_bnd;
  const int extra = static_cast<int>(gen() % 5);
  for (int k = 0; k < extra; ++k) {
    const int a = static_cast<int>(gen() % static_cast<std::uint64_t>(r.n_dyn));
    int b = static_cast<int>(gen() % static_cast<std::uint64_t>(n));
    if (b == a) b = r.n_dyn + r.n_bnd - 1;
    r.edges.push_back(orient(a, b));
  }
  return r;
}

}  // namespace flownet::testing
