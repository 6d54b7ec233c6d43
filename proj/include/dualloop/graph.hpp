#pragma once

#include "dualloop/linear.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dualloop {

using NodeId = std::string;

enum class NodeKind {
  Input,
  Activity,
  Output,
  OutcomeShort,
  OutcomeMid,
  OutcomeLong,
  Impact,
  IntermediateOutcome,
  ValueSoc,
  ValueEnv,
  ValueEco,
};

std::string_view to_string(NodeKind kind) noexcept;
std::optional<NodeKind> node_kind_from_string(std::string_view text) noexcept;

// Impact and value nodes may not have outgoing edges.
bool is_sink_kind(NodeKind kind) noexcept;

struct Node {
  std::string label;
  NodeKind kind = NodeKind::Activity;

  bool operator==(const Node&) const = default;
};

struct Edge {
  NodeId from;
  NodeId to;
  double weight = 0.0;

  bool operator==(const Edge&) const = default;
};

// Plain container for a weighted directed graph. Structural rules are not
// enforced on mutation; `validate_graph` reports violations and every
// computation validates before running.
struct WeightedGraph {
  std::map<NodeId, Node> nodes;
  std::vector<Edge> edges;

  bool operator==(const WeightedGraph&) const = default;

  bool has_node(const NodeId& id) const { return nodes.count(id) != 0; }
  std::vector<NodeId> nodes_of_kind(NodeKind kind) const;
  // Index into `edges` of the (from, to) edge, if present.
  std::optional<std::size_t> find_edge(const NodeId& from, const NodeId& to) const;
};

// Multi-agent graphs restrict weights to [-1, +1]; logic models do not.
enum class WeightPolicy { AnyFinite, UnitInterval };

enum class FindingKind {
  Cycle,
  DanglingEdge,
  DuplicateEdge,
  SourceHasIncoming,
  SinkHasOutgoing,
  NonFiniteWeight,
  WeightOutOfRange,
  EmptyId,
};

std::string_view to_string(FindingKind kind) noexcept;

struct Finding {
  FindingKind kind;
  std::vector<NodeId> nodes;
  std::optional<std::size_t> edge;  // index into WeightedGraph::edges
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const noexcept { return findings.empty(); }
  std::size_t count(FindingKind kind) const;
  std::string summary() const;
};

ValidationReport validate_graph(const WeightedGraph& graph,
                                WeightPolicy policy = WeightPolicy::AnyFinite);

struct InputAssignment {
  std::map<NodeId, double> values;
  // When set, Input nodes missing from `values` evaluate as 0.
  bool default_missing_to_zero = false;

  bool operator==(const InputAssignment&) const = default;
};

// A validated graph lowered to dense form: nodes in deterministic
// topological order (Kahn's algorithm, smallest id first) and the strictly
// lower-triangular weight matrix consumed by `propagate`.
class CompiledGraph {
 public:
  explicit CompiledGraph(const WeightedGraph& graph, WeightPolicy policy = WeightPolicy::AnyFinite);

  const std::vector<NodeId>& order() const noexcept { return order_; }
  const MatrixXd& weights() const noexcept { return weights_; }
  std::size_t index_of(const NodeId& id) const;  // throws UnknownNode
  const std::vector<NodeId>& inputs() const noexcept { return inputs_; }

  VectorXd source_vector(const InputAssignment& inputs) const;
  VectorXd propagate(const InputAssignment& inputs) const;
  // (I - W)^{-1}; column j holds the sensitivities of every node to node j.
  MatrixXd total_effect() const;

 private:
  std::vector<NodeId> order_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<NodeId> inputs_;
  MatrixXd weights_;
};

std::map<NodeId, double> evaluate(const WeightedGraph& graph, const InputAssignment& inputs,
                                  WeightPolicy policy = WeightPolicy::AnyFinite);

// d target / d input under linear propagation: the sum over all directed
// paths input -> target of the products of edge weights.
double sensitivity(const WeightedGraph& graph, const NodeId& input, const NodeId& target,
                   WeightPolicy policy = WeightPolicy::AnyFinite);

// Central difference around `baseline` (other inputs held at their baseline
// values; inputs absent from the baseline are held at 0).
double finite_diff_sensitivity(const WeightedGraph& graph, const NodeId& input,
                               const NodeId& target, double step,
                               const InputAssignment& baseline = {},
                               WeightPolicy policy = WeightPolicy::AnyFinite);

void to_json(nlohmann::json& j, const WeightedGraph& graph);
void from_json(const nlohmann::json& j, WeightedGraph& graph);

}  // namespace dualloop
