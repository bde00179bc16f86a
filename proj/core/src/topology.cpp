#include <flownet/topology.hpp>

#include <unordered_set>

namespace flownet {

namespace {

IntMatrix select_columns(const IntMatrix& m, const std::vector<std::size_t>& cols) {
  IntMatrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::dynamic: return "dynamic";
    case NodeKind::terminal: return "terminal";
    case NodeKind::datum: return "datum";
  }
  return "unknown";
}

std::string_view to_string(BranchKind kind) {
  switch (kind) {
    case BranchKind::resistive: return "resistive";
    case BranchKind::controlled: return "controlled";
    case BranchKind::terminal_source: return "terminal-source";
    case BranchKind::production: return "production";
  }
  return "unknown";
}

ProcessNetwork ProcessNetwork::build(NetworkDefinition definition, BuildOptions options) {
  ProcessNetwork net;
  net.definition_ = std::move(definition);
  const auto& nodes = net.definition_.nodes;
  const auto& branches = net.definition_.branches;

  std::unordered_set<std::string> seen;
  std::size_t datum_count = 0;
  for (const auto& node : nodes) {
    if (node.id.empty()) throw ValidationError("node with empty id");
    if (!seen.insert(node.id).second) throw ValidationError("duplicate node id '" + node.id + "'");
    if (node.kind == NodeKind::datum) ++datum_count;
    if (node.kind == NodeKind::dynamic) {
      if (!node.capacity) throw ValidationError("dynamic node '" + node.id + "' has no capacitive law");
      if (options.validate_laws) node.capacity->validate();
    } else if (node.capacity) {
      throw ValidationError("node '" + node.id + "' is not dynamic and cannot carry a capacitive law");
    }
  }
  if (datum_count != 1)
    throw ValidationError("network needs exactly one datum node, found " + std::to_string(datum_count));

  // Dynamic rows first, then boundary nodes, each in declaration order.
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].kind == NodeKind::dynamic) net.row_to_node_.push_back(i);
  net.num_dynamic_ = net.row_to_node_.size();
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].kind != NodeKind::dynamic) net.row_to_node_.push_back(i);
  for (std::size_t r = 0; r < net.row_to_node_.size(); ++r) {
    const Node& node = nodes[net.row_to_node_[r]];
    net.node_row_.emplace(node.id, r);
    if (node.kind == NodeKind::datum) net.datum_row_ = r;
  }

  seen.clear();
  const auto n_rows = static_cast<Eigen::Index>(net.row_to_node_.size());
  const auto n_cols = static_cast<Eigen::Index>(branches.size());
  net.full_ = IntMatrix::Zero(n_rows, n_cols);
  for (std::size_t j = 0; j < branches.size(); ++j) {
    const Branch& b = branches[j];
    if (b.id.empty()) throw ValidationError("branch with empty id");
    if (!seen.insert(b.id).second) throw ValidationError("duplicate branch id '" + b.id + "'");
    auto from = net.node_row_.find(b.from);
    auto to = net.node_row_.find(b.to);
    if (from == net.node_row_.end())
      throw ValidationError("branch '" + b.id + "' references unknown node '" + b.from + "'");
    if (to == net.node_row_.end())
      throw ValidationError("branch '" + b.id + "' references unknown node '" + b.to + "'");
    if (b.from == b.to) throw ValidationError("branch '" + b.id + "' is a self-loop");

    switch (b.kind) {
      case BranchKind::resistive:
        if (!b.law) throw ValidationError("resistive branch '" + b.id + "' has no law");
        break;
      case BranchKind::production: {
        if (!b.law) throw ValidationError("production branch '" + b.id + "' has no law");
        const NodeKind a = net.node_at_row(from->second).kind;
        const NodeKind c = net.node_at_row(to->second).kind;
        const bool ok = (a == NodeKind::dynamic && c == NodeKind::datum) ||
                        (a == NodeKind::datum && c == NodeKind::dynamic);
        if (!ok)
          throw ValidationError("production branch '" + b.id + "' must connect a dynamic node to the datum");
        break;
      }
      case BranchKind::terminal_source:
        if (b.law) throw ValidationError("terminal-source branch '" + b.id + "' cannot carry a law");
        break;
      case BranchKind::controlled:
        break;
    }
    if (options.validate_laws && b.law) b.law->validate();

    net.branch_column_.emplace(b.id, j);
    net.from_row_.push_back(from->second);
    net.to_row_.push_back(to->second);
    net.full_(static_cast<Eigen::Index>(from->second), static_cast<Eigen::Index>(j)) = 1;
    net.full_(static_cast<Eigen::Index>(to->second), static_cast<Eigen::Index>(j)) = -1;
  }

  net.reduced_ = IntMatrix(n_rows - 1, n_cols);
  const auto datum = static_cast<Eigen::Index>(net.datum_row_);
  net.reduced_.topRows(datum) = net.full_.topRows(datum);
  net.reduced_.bottomRows(n_rows - 1 - datum) = net.full_.bottomRows(n_rows - 1 - datum);
  net.dynamic_ = net.full_.topRows(static_cast<Eigen::Index>(net.num_dynamic_)).cast<double>();

  BranchPartition& p = net.partition_;
  for (std::size_t j = 0; j < branches.size(); ++j) {
    switch (branches[j].kind) {
      case BranchKind::resistive:
      case BranchKind::production: p.resistive.push_back(j); break;
      case BranchKind::controlled: p.controlled.push_back(j); break;
      case BranchKind::terminal_source: p.terminal.push_back(j); break;
    }
  }
  p.A_R = select_columns(net.reduced_, p.resistive);
  p.A_K = select_columns(net.reduced_, p.controlled);
  p.A_T = select_columns(net.reduced_, p.terminal);
  return net;
}

std::size_t ProcessNetwork::row_of(const std::string& node_id) const {
  auto it = node_row_.find(node_id);
  if (it == node_row_.end()) throw ValidationError("unknown node '" + node_id + "'");
  return it->second;
}

std::size_t ProcessNetwork::branch_index(const std::string& branch_id) const {
  auto it = branch_column_.find(branch_id);
  if (it == branch_column_.end()) throw ValidationError("unknown branch '" + branch_id + "'");
  return it->second;
}

std::vector<std::string> ProcessNetwork::dynamic_ids() const {
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < num_dynamic_; ++r) ids.push_back(node_at_row(r).id);
  return ids;
}

std::vector<std::string> ProcessNetwork::boundary_ids() const {
  std::vector<std::string> ids;
  for (std::size_t r = num_dynamic_; r < num_nodes(); ++r) ids.push_back(node_at_row(r).id);
  return ids;
}

std::vector<std::string> ProcessNetwork::branch_ids() const {
  std::vector<std::string> ids;
  for (const auto& b : definition_.branches) ids.push_back(b.id);
  return ids;
}

const CapacitiveLaw& ProcessNetwork::capacity(std::size_t dynamic_row) const {
  return *node_at_row(dynamic_row).capacity;
}

IntMatrix reduced_incidence(const ProcessNetwork& net) { return net.reduced_incidence(); }

BranchPartition partition_branches(const ProcessNetwork& net) { return net.partition(); }

}  // namespace flownet
