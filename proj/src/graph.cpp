#include "dualloop/graph.hpp"

#include "dualloop/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace dualloop {

namespace {

constexpr std::array<std::pair<NodeKind, std::string_view>, 11> kKindNames{{
    {NodeKind::Input, "Input"},
    {NodeKind::Activity, "Activity"},
    {NodeKind::Output, "Output"},
    {NodeKind::OutcomeShort, "OutcomeShort"},
    {NodeKind::OutcomeMid, "OutcomeMid"},
    {NodeKind::OutcomeLong, "OutcomeLong"},
    {NodeKind::Impact, "Impact"},
    {NodeKind::IntermediateOutcome, "IntermediateOutcome"},
    {NodeKind::ValueSoc, "ValueSoc"},
    {NodeKind::ValueEnv, "ValueEnv"},
    {NodeKind::ValueEco, "ValueEco"},
}};

std::string describe_edge(const Edge& e) { return e.from + " -> " + e.to; }

// Strongly connected components that contain a cycle (size > 1 or a
// self-loop), each sorted by id, in order of their smallest member.
std::vector<std::vector<NodeId>> cyclic_components(const WeightedGraph& graph) {
  std::map<NodeId, std::vector<NodeId>> succ;
  std::set<NodeId> self_loops;
  for (const auto& e : graph.edges) {
    if (!graph.has_node(e.from) || !graph.has_node(e.to)) continue;
    succ[e.from].push_back(e.to);
    if (e.from == e.to) self_loops.insert(e.from);
  }
  for (auto& [id, next] : succ) std::sort(next.begin(), next.end());

  std::map<NodeId, int> index, low;
  std::set<NodeId> on_stack;
  std::vector<NodeId> stack;
  std::vector<std::vector<NodeId>> result;
  int counter = 0;

  // Iterative Tarjan so deep chains cannot overflow the call stack.
  for (const auto& [root, node] : graph.nodes) {
    if (index.count(root)) continue;
    std::vector<std::pair<NodeId, std::size_t>> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack.insert(root);
    while (!frames.empty()) {
      auto& [v, child] = frames.back();
      const auto& next = succ[v];
      if (child < next.size()) {
        const NodeId w = next[child++];
        if (!index.count(w)) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack.insert(w);
          frames.emplace_back(w, 0);
        } else if (on_stack.count(w)) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::vector<NodeId> component;
        NodeId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack.erase(w);
          component.push_back(w);
        } while (w != v);
        if (component.size() > 1 || self_loops.count(v)) {
          std::sort(component.begin(), component.end());
          result.push_back(std::move(component));
        }
      }
      const NodeId finished = v;
      frames.pop_back();
      if (!frames.empty()) {
        auto& parent = frames.back().first;
        low[parent] = std::min(low[parent], low[finished]);
      }
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

}  // namespace

std::string_view to_string(NodeKind kind) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "Unknown";
}

std::optional<NodeKind> node_kind_from_string(std::string_view text) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

bool is_sink_kind(NodeKind kind) noexcept {
  return kind == NodeKind::Impact || kind == NodeKind::ValueSoc || kind == NodeKind::ValueEnv ||
         kind == NodeKind::ValueEco;
}

std::string_view to_string(FindingKind kind) noexcept {
  switch (kind) {
    case FindingKind::Cycle: return "cycle";
    case FindingKind::DanglingEdge: return "dangling-edge";
    case FindingKind::DuplicateEdge: return "duplicate-edge";
    case FindingKind::SourceHasIncoming: return "source-has-incoming";
    case FindingKind::SinkHasOutgoing: return "sink-has-outgoing";
    case FindingKind::NonFiniteWeight: return "non-finite-weight";
    case FindingKind::WeightOutOfRange: return "weight-out-of-range";
    case FindingKind::EmptyId: return "empty-id";
  }
  return "unknown";
}

std::vector<NodeId> WeightedGraph::nodes_of_kind(NodeKind kind) const {
  std::vector<NodeId> out;
  for (const auto& [id, node] : nodes) {
    if (node.kind == kind) out.push_back(id);
  }
  return out;
}

std::optional<std::size_t> WeightedGraph::find_edge(const NodeId& from, const NodeId& to) const {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].from == from && edges[i].to == to) return i;
  }
  return std::nullopt;
}

std::size_t ValidationReport::count(FindingKind kind) const {
  return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(),
                                                [kind](const Finding& f) { return f.kind == kind; }));
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < findings.size(); ++i) {
    if (i) out << "; ";
    out << to_string(findings[i].kind) << ": " << findings[i].message;
  }
  return out.str();
}

ValidationReport validate_graph(const WeightedGraph& graph, WeightPolicy policy) {
  ValidationReport report;
  auto add = [&report](FindingKind kind, std::vector<NodeId> nodes, std::optional<std::size_t> edge,
                       std::string message) {
    report.findings.push_back({kind, std::move(nodes), edge, std::move(message)});
  };

  for (const auto& [id, node] : graph.nodes) {
    if (id.empty()) add(FindingKind::EmptyId, {id}, std::nullopt, "node with empty id");
  }

  std::set<std::pair<NodeId, NodeId>> seen;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const Edge& e = graph.edges[i];
    if (!std::isfinite(e.weight)) {
      add(FindingKind::NonFiniteWeight, {e.from, e.to}, i, "edge " + describe_edge(e) + " has a non-finite weight");
    } else if (policy == WeightPolicy::UnitInterval && (e.weight < -1.0 || e.weight > 1.0)) {
      std::ostringstream msg;
      msg << "edge " << describe_edge(e) << " weight " << e.weight << " outside [-1, 1]";
      add(FindingKind::WeightOutOfRange, {e.from, e.to}, i, msg.str());
    }

    const auto from = graph.nodes.find(e.from);
    const auto to = graph.nodes.find(e.to);
    if (from == graph.nodes.end() || to == graph.nodes.end()) {
      std::vector<NodeId> missing;
      if (from == graph.nodes.end()) missing.push_back(e.from);
      if (to == graph.nodes.end()) missing.push_back(e.to);
      add(FindingKind::DanglingEdge, missing, i, "edge " + describe_edge(e) + " references an unknown node");
      continue;
    }
    if (!seen.emplace(e.from, e.to).second) {
      add(FindingKind::DuplicateEdge, {e.from, e.to}, i, "more than one edge " + describe_edge(e));
    }
    if (to->second.kind == NodeKind::Input) {
      add(FindingKind::SourceHasIncoming, {e.to}, i, "input node " + e.to + " has an incoming edge");
    }
    if (is_sink_kind(from->second.kind)) {
      add(FindingKind::SinkHasOutgoing, {e.from}, i,
          std::string(to_string(from->second.kind)) + " node " + e.from + " has an outgoing edge");
    }
  }

  for (auto& component : cyclic_components(graph)) {
    std::string msg = "cycle among";
    for (const auto& id : component) msg += " " + id;
    add(FindingKind::Cycle, std::move(component), std::nullopt, std::move(msg));
  }
  return report;
}

CompiledGraph::CompiledGraph(const WeightedGraph& graph, WeightPolicy policy) {
  if (const auto report = validate_graph(graph, policy); !report.ok()) {
    throw Error(ErrorCode::InvalidGraph, "invalid graph: " + report.summary());
  }

  std::map<NodeId, std::size_t> indegree;
  std::map<NodeId, std::vector<NodeId>> succ;
  for (const auto& [id, node] : graph.nodes) indegree[id] = 0;
  for (const auto& e : graph.edges) {
    ++indegree[e.to];
    succ[e.from].push_back(e.to);
  }
  std::set<NodeId> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.insert(id);
  }
  order_.reserve(graph.nodes.size());
  while (!ready.empty()) {
    const NodeId next = *ready.begin();
    ready.erase(ready.begin());
    order_.push_back(next);
    for (const auto& w : succ[next]) {
      if (--indegree[w] == 0) ready.insert(w);
    }
  }

  for (std::size_t i = 0; i < order_.size(); ++i) index_.emplace(order_[i], i);
  inputs_ = graph.nodes_of_kind(NodeKind::Input);

  const auto n = static_cast<Eigen::Index>(order_.size());
  weights_ = MatrixXd::Zero(n, n);
  for (const auto& e : graph.edges) {
    weights_(static_cast<Eigen::Index>(index_.at(e.to)), static_cast<Eigen::Index>(index_.at(e.from))) = e.weight;
  }
}

std::size_t CompiledGraph::index_of(const NodeId& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownNode, "unknown node '" + id + "'", id);
  return it->second;
}

VectorXd CompiledGraph::source_vector(const InputAssignment& inputs) const {
  VectorXd x = VectorXd::Zero(static_cast<Eigen::Index>(order_.size()));
  for (const auto& [id, value] : inputs.values) {
    const auto idx = index_of(id);
    if (!std::binary_search(inputs_.begin(), inputs_.end(), id)) {
      throw Error(ErrorCode::UnknownNode, "node '" + id + "' is not an Input node", id);
    }
    x(static_cast<Eigen::Index>(idx)) = value;
  }
  if (!inputs.default_missing_to_zero) {
    for (const auto& id : inputs_) {
      if (!inputs.values.count(id)) {
        throw Error(ErrorCode::MissingInput, "no value for input node '" + id + "'", id);
      }
    }
  }
  return x;
}

VectorXd CompiledGraph::propagate(const InputAssignment& inputs) const {
  return dualloop::propagate(weights_, source_vector(inputs));
}

MatrixXd CompiledGraph::total_effect() const { return dualloop::total_effect(weights_); }

std::map<NodeId, double> evaluate(const WeightedGraph& graph, const InputAssignment& inputs,
                                  WeightPolicy policy) {
  const CompiledGraph compiled(graph, policy);
  const VectorXd values = compiled.propagate(inputs);
  std::map<NodeId, double> out;
  for (std::size_t i = 0; i < compiled.order().size(); ++i) {
    out.emplace(compiled.order()[i], values(static_cast<Eigen::Index>(i)));
  }
  return out;
}

double sensitivity(const WeightedGraph& graph, const NodeId& input, const NodeId& target,
                   WeightPolicy policy) {
  const CompiledGraph compiled(graph, policy);
  const auto source = compiled.index_of(input);
  const auto sink = compiled.index_of(target);
  if (graph.nodes.at(input).kind != NodeKind::Input) {
    throw Error(ErrorCode::UnknownNode, "node '" + input + "' is not an Input node", input);
  }
  VectorXd unit = VectorXd::Zero(compiled.weights().rows());
  unit(static_cast<Eigen::Index>(source)) = 1.0;
  return dualloop::propagate(compiled.weights(), unit)(static_cast<Eigen::Index>(sink));
}

double finite_diff_sensitivity(const WeightedGraph& graph, const NodeId& input,
                               const NodeId& target, double step, const InputAssignment& baseline,
                               WeightPolicy policy) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw Error(ErrorCode::RangeError, "finite-difference step must be positive");
  }
  const CompiledGraph compiled(graph, policy);
  const auto t = static_cast<Eigen::Index>(compiled.index_of(target));
  compiled.index_of(input);
  if (graph.nodes.at(input).kind != NodeKind::Input) {
    throw Error(ErrorCode::UnknownNode, "node '" + input + "' is not an Input node", input);
  }
  InputAssignment plus = baseline;
  plus.default_missing_to_zero = true;
  InputAssignment minus = plus;
  const double x0 = baseline.values.count(input) ? baseline.values.at(input) : 0.0;
  plus.values[input] = x0 + step;
  minus.values[input] = x0 - step;
  return (compiled.propagate(plus)(t) - compiled.propagate(minus)(t)) / (2.0 * step);
}

void to_json(nlohmann::json& j, const WeightedGraph& graph) {
  j = nlohmann::json::object();
  auto& nodes = j["nodes"] = nlohmann::json::object();
  for (const auto& [id, node] : graph.nodes) {
    nodes[id] = {{"label", node.label}, {"kind", std::string(to_string(node.kind))}};
  }
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"from", e.from}, {"to", e.to}, {"weight", e.weight}});
  }
}

void from_json(const nlohmann::json& j, WeightedGraph& graph) {
  graph = {};
  for (const auto& [id, node] : j.at("nodes").items()) {
    const auto kind_text = node.at("kind").get<std::string>();
    const auto kind = node_kind_from_string(kind_text);
    if (!kind) throw Error(ErrorCode::MalformedPayload, "unknown node kind '" + kind_text + "'", id);
    graph.nodes.emplace(id, Node{node.value("label", std::string{}), *kind});
  }
  for (const auto& e : j.at("edges")) {
    graph.edges.push_back({e.at("from").get<NodeId>(), e.at("to").get<NodeId>(), e.at("weight").get<double>()});
  }
}

}  // namespace dualloop
