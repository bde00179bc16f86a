#pragma once

#include <flownet/constitutive.hpp>
#include <flownet/types.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace flownet {

enum class NodeKind { dynamic, terminal, datum };
enum class BranchKind { resistive, controlled, terminal_source, production };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::dynamic;
  /// Required for dynamic nodes, absent otherwise.
  std::optional<CapacitiveLaw> capacity;

  friend bool operator==(const Node&, const Node&) = default;
};

/// Directed branch from -> to. Flow is positive along the arrow and the
/// potential difference is W = w(from) - w(to).
struct Branch {
  std::string id;
  std::string from;
  std::string to;
  BranchKind kind = BranchKind::resistive;
  /// Resistive and production branches carry a law; controlled branches may
  /// carry one for open-loop operation; terminal sources never do.
  std::optional<ResistiveLaw> law;
  /// Fixed flow of a terminal-source branch.
  double source_flow = 0.0;

  friend bool operator==(const Branch&, const Branch&) = default;
};

struct NetworkDefinition {
  std::vector<Node> nodes;
  std::vector<Branch> branches;

  friend bool operator==(const NetworkDefinition&, const NetworkDefinition&) = default;
};

struct BuildOptions {
  /// Check law parameters (K > 0, monotone tables). Diagnostics that need to
  /// inspect non-passive laws turn this off.
  bool validate_laws = true;
};

/// Column slices of the reduced incidence matrix by branch role.
struct BranchPartition {
  std::vector<std::size_t> resistive;   ///< R: resistive and production branches
  std::vector<std::size_t> controlled;  ///< K
  std::vector<std::size_t> terminal;    ///< T: terminal sources
  IntMatrix A_R;
  IntMatrix A_K;
  IntMatrix A_T;
};

/// Validated, immutable process network graph.
///
/// Node rows are ordered dynamic nodes first (declaration order), followed by
/// terminals and the datum in declaration order. The reduced incidence matrix
/// drops the datum row. Branch columns follow declaration order.
class ProcessNetwork {
 public:
  static ProcessNetwork build(NetworkDefinition definition, BuildOptions options = {});

  const std::vector<Node>& nodes() const { return definition_.nodes; }
  const std::vector<Branch>& branches() const { return definition_.branches; }
  const NetworkDefinition& definition() const { return definition_; }

  std::size_t num_nodes() const { return row_to_node_.size(); }
  std::size_t num_dynamic() const { return num_dynamic_; }
  std::size_t num_branches() const { return definition_.branches.size(); }

  /// Row of a node in the full incidence matrix.
  std::size_t row_of(const std::string& node_id) const;
  std::size_t branch_index(const std::string& branch_id) const;
  bool has_node(const std::string& node_id) const { return node_row_.count(node_id) > 0; }
  bool has_branch(const std::string& id) const { return branch_column_.count(id) > 0; }
  const Node& node_at_row(std::size_t row) const { return definition_.nodes[row_to_node_[row]]; }
  std::size_t datum_row() const { return datum_row_; }
  /// Dynamic node ids in row order.
  std::vector<std::string> dynamic_ids() const;
  /// Terminal and datum ids in row order.
  std::vector<std::string> boundary_ids() const;
  std::vector<std::string> branch_ids() const;

  const IntMatrix& incidence() const { return full_; }
  const IntMatrix& reduced_incidence() const { return reduced_; }
  /// Incidence restricted to the dynamic rows, as a real matrix.
  const Matrix& dynamic_incidence() const { return dynamic_; }
  const BranchPartition& partition() const { return partition_; }

  /// Capacitive law of the dynamic node at a dynamic row.
  const CapacitiveLaw& capacity(std::size_t dynamic_row) const;
  std::size_t from_row(std::size_t branch) const { return from_row_[branch]; }
  std::size_t to_row(std::size_t branch) const { return to_row_[branch]; }

 private:
  ProcessNetwork() = default;

  NetworkDefinition definition_;
  std::vector<std::size_t> row_to_node_;
  std::unordered_map<std::string, std::size_t> node_row_;
  std::unordered_map<std::string, std::size_t> branch_column_;
  std::vector<std::size_t> from_row_;
  std::vector<std::size_t> to_row_;
  std::size_t num_dynamic_ = 0;
  std::size_t datum_row_ = 0;
  IntMatrix full_;
  IntMatrix reduced_;
  Matrix dynamic_;
  BranchPartition partition_;
};

/// A_full with the datum row deleted.
IntMatrix reduced_incidence(const ProcessNetwork& net);
BranchPartition partition_branches(const ProcessNetwork& net);

std::string_view to_string(NodeKind kind);
std::string_view to_string(BranchKind kind);

}  // namespace flownet
