#include "dualloop/impact.hpp"

#include "dualloop/csv.hpp"
#include "dualloop/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

namespace dualloop::impact {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void reject(const std::string& reason, const std::string& message) {
  throw Error(ErrorCode::EditRejected, "edit rejected: " + message, reason);
}

std::set<NodeId> ancestors_of(const WeightedGraph& graph, const NodeId& target) {
  std::map<NodeId, std::vector<NodeId>> pred;
  for (const auto& e : graph.edges) pred[e.to].push_back(e.from);
  std::set<NodeId> seen{target};
  std::deque<NodeId> queue{target};
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (const auto& u : pred[v]) {
      if (seen.insert(u).second) queue.push_back(u);
    }
  }
  return seen;
}

void check_settings(const LogicModel& model, const AdvancedSettings& settings) {
  if (settings.horizon < 1) {
    throw Error(ErrorCode::InvalidSettings, "horizon must be at least 1 period", "horizon");
  }
  for (const auto& [id, pulse] : settings.inputs) {
    const auto it = model.graph.nodes.find(id);
    if (it == model.graph.nodes.end() || it->second.kind != NodeKind::Input) {
      throw Error(ErrorCode::InvalidSettings, "settings reference '" + id + "', which is not an Input node", id);
    }
    if (pulse.frequency < 1) throw Error(ErrorCode::InvalidSettings, "frequency must be >= 1 for " + id, id);
    if (pulse.start < 0) throw Error(ErrorCode::InvalidSettings, "start must be >= 0 for " + id, id);
    if (!(pulse.attenuation >= 0.0) || !std::isfinite(pulse.attenuation)) {
      throw Error(ErrorCode::InvalidSettings, "attenuation must be finite and >= 0 for " + id, id);
    }
    if (!std::isfinite(pulse.effect)) throw Error(ErrorCode::InvalidSettings, "effect must be finite for " + id, id);
  }
}

CompiledGraph compile_valid(const LogicModel& model) {
  if (const auto report = validate_model(model); !report.ok()) {
    throw Error(ErrorCode::InvalidGraph, "invalid logic model: " + report.summary());
  }
  return CompiledGraph(model.graph);
}

}  // namespace

std::string ModelReport::summary() const {
  std::ostringstream out;
  out << graph.summary();
  for (const auto& e : errors) out << (out.tellp() > 0 ? "; " : "") << e;
  return out.str();
}

ModelReport validate_model(const LogicModel& model) {
  ModelReport report;
  report.graph = validate_graph(model.graph, WeightPolicy::AnyFinite);

  const auto impacts = model.graph.nodes_of_kind(NodeKind::Impact);
  if (impacts.size() != 1) {
    report.errors.push_back("exactly one Impact node required, found " + std::to_string(impacts.size()));
  }
  const auto it = model.graph.nodes.find(model.impact_node);
  if (it == model.graph.nodes.end()) {
    report.errors.push_back("impact_node '" + model.impact_node + "' does not exist");
  } else if (it->second.kind != NodeKind::Impact) {
    report.errors.push_back("impact_node '" + model.impact_node + "' is not of kind Impact");
  }

  if (report.ok()) {
    const auto reach = ancestors_of(model.graph, model.impact_node);
    for (const auto& id : model.graph.nodes_of_kind(NodeKind::Input)) {
      if (!reach.count(id)) report.warnings.push_back("input '" + id + "' has no path to the impact node");
    }
  }
  return report;
}

LogicModel apply_edit(const LogicModel& model, const Edit& e) {
  LogicModel next = model;
  auto& g = next.graph;
  auto require_node = [&g](const NodeId& id) {
    if (!g.has_node(id)) reject("unknown-node", "unknown node '" + id + "'");
  };
  auto require_edge = [&g](const NodeId& from, const NodeId& to) {
    const auto idx = g.find_edge(from, to);
    if (!idx) reject("unknown-edge", "no edge " + from + " -> " + to);
    return *idx;
  };

  std::visit(overloaded{
                 [&](const edit::AddNode& a) {
                   if (a.id.empty()) reject("structure", "node id must not be empty");
                   if (g.has_node(a.id)) reject("duplicate-node", "node '" + a.id + "' already exists");
                   if (a.node.kind == NodeKind::Impact && !g.nodes_of_kind(NodeKind::Impact).empty()) {
                     reject("second-impact", "the model already has an Impact node");
                   }
                   g.nodes.emplace(a.id, a.node);
                 },
                 [&](const edit::RemoveNode& r) {
                   require_node(r.id);
                   if (r.id == next.impact_node) reject("removes-impact", "cannot remove the impact node");
                   g.nodes.erase(r.id);
                   std::erase_if(g.edges, [&](const Edge& edge) { return edge.from == r.id || edge.to == r.id; });
                   if (next.advanced) next.advanced->inputs.erase(r.id);
                 },
                 [&](const edit::AddEdge& a) {
                   require_node(a.edge.from);
                   require_node(a.edge.to);
                   if (g.find_edge(a.edge.from, a.edge.to)) {
                     reject("duplicate-edge", "edge " + a.edge.from + " -> " + a.edge.to + " already exists");
                   }
                   g.edges.push_back(a.edge);
                 },
                 [&](const edit::RemoveEdge& r) {
                   g.edges.erase(g.edges.begin() + static_cast<std::ptrdiff_t>(require_edge(r.from, r.to)));
                 },
                 [&](const edit::SetWeight& s) { g.edges[require_edge(s.from, s.to)].weight = s.weight; },
             },
             e);

  const auto report = validate_graph(g, WeightPolicy::AnyFinite);
  if (report.count(FindingKind::Cycle)) reject("cycle", report.summary());
  if (!report.ok()) reject("structure", report.summary());
  return next;
}

std::vector<InputSensitivity> rank_inputs(const LogicModel& model) {
  const CompiledGraph compiled = compile_valid(model);
  const MatrixXd effect = compiled.total_effect();
  const auto target = static_cast<Eigen::Index>(compiled.index_of(model.impact_node));

  std::vector<InputSensitivity> ranking;
  for (const auto& id : compiled.inputs()) {
    const auto source = static_cast<Eigen::Index>(compiled.index_of(id));
    ranking.push_back({id, model.graph.nodes.at(id).label, effect(target, source)});
  }
  std::sort(ranking.begin(), ranking.end(), [](const InputSensitivity& a, const InputSensitivity& b) {
    if (a.sensitivity != b.sensitivity) return a.sensitivity > b.sensitivity;
    return a.input < b.input;
  });
  return ranking;
}

std::vector<double> input_series(const PulseSettings& pulse, int horizon) {
  std::vector<double> series(static_cast<std::size_t>(std::max(horizon, 0)), 0.0);
  const int interval = std::max(1, (horizon + pulse.frequency - 1) / pulse.frequency);
  for (int k = 0; k < pulse.frequency; ++k) {
    const int emitted = pulse.start + k * interval;
    for (int t = emitted; t < horizon; ++t) {
      series[static_cast<std::size_t>(t)] += pulse.effect * std::exp(-pulse.attenuation * (t - emitted));
    }
  }
  return series;
}

std::vector<double> advanced_trajectory(const LogicModel& model, const AdvancedSettings& settings) {
  const CompiledGraph compiled = compile_valid(model);
  check_settings(model, settings);

  std::map<NodeId, std::vector<double>> series;
  for (const auto& [id, pulse] : settings.inputs) series.emplace(id, input_series(pulse, settings.horizon));

  const auto target = static_cast<Eigen::Index>(compiled.index_of(model.impact_node));
  std::vector<double> trajectory;
  trajectory.reserve(static_cast<std::size_t>(settings.horizon));
  for (int t = 0; t < settings.horizon; ++t) {
    InputAssignment at_t;
    at_t.default_missing_to_zero = true;
    for (const auto& [id, values] : series) at_t.values[id] = values[static_cast<std::size_t>(t)];
    trajectory.push_back(compiled.propagate(at_t)(target));
  }
  return trajectory;
}

std::vector<PolicyChoiceRef> export_choices(const LogicModel& model, std::size_t top_k) {
  const auto ranking = rank_inputs(model);
  if (top_k < 1 || top_k > ranking.size()) {
    throw Error(ErrorCode::RangeError,
                "top_k must be between 1 and " + std::to_string(ranking.size()) + ", got " + std::to_string(top_k));
  }
  std::vector<PolicyChoiceRef> out;
  for (std::size_t i = 0; i < top_k; ++i) {
    out.push_back({ranking[i].input, ranking[i].label, ranking[i].sensitivity, i + 1});
  }
  return out;
}

std::string sensitivity_csv(const std::vector<InputSensitivity>& ranking) {
  std::string out = "input_id,label,sensitivity\n";
  for (const auto& r : ranking) {
    out += csv::field(r.input) + ',' + csv::field(r.label) + ',' + csv::number(r.sensitivity) + '\n';
  }
  return out;
}

void to_json(nlohmann::json& j, const PulseSettings& s) {
  j = {{"frequency", s.frequency}, {"start", s.start}, {"effect", s.effect}, {"attenuation", s.attenuation}};
}

void from_json(const nlohmann::json& j, PulseSettings& s) {
  s.frequency = j.value("frequency", 1);
  s.start = j.value("start", 0);
  s.effect = j.value("effect", 1.0);
  s.attenuation = j.value("attenuation", 0.0);
}

void to_json(nlohmann::json& j, const AdvancedSettings& s) {
  j = {{"horizon", s.horizon}, {"inputs", s.inputs}};
}

void from_json(const nlohmann::json& j, AdvancedSettings& s) {
  s.horizon = j.at("horizon").get<int>();
  s.inputs = j.value("inputs", std::map<NodeId, PulseSettings>{});
}

void to_json(nlohmann::json& j, const LogicModel& m) {
  j = m.graph;
  j["impact_node"] = m.impact_node;
  if (m.advanced) j["advanced_settings"] = *m.advanced;
}

void from_json(const nlohmann::json& j, LogicModel& m) {
  m.graph = j.get<WeightedGraph>();
  m.impact_node = j.at("impact_node").get<NodeId>();
  m.advanced.reset();
  if (j.contains("advanced_settings") && !j["advanced_settings"].is_null()) {
    m.advanced = j["advanced_settings"].get<AdvancedSettings>();
  }
}

void to_json(nlohmann::json& j, const InputSensitivity& s) {
  j = {{"input_id", s.input}, {"label", s.label}, {"sensitivity", s.sensitivity}};
}

void to_json(nlohmann::json& j, const PolicyChoiceRef& c) {
  j = {{"id", c.id}, {"label", c.label}, {"sensitivity", c.sensitivity}, {"rank", c.rank}};
}

Edit edit_from_json(const nlohmann::json& j) {
  const auto op = j.at("op").get<std::string>();
  if (op == "add-node") {
    const auto kind_text = j.at("kind").get<std::string>();
    const auto kind = node_kind_from_string(kind_text);
    if (!kind) throw Error(ErrorCode::MalformedPayload, "unknown node kind '" + kind_text + "'");
    return edit::AddNode{j.at("id").get<NodeId>(), Node{j.value("label", std::string{}), *kind}};
  }
  if (op == "remove-node") return edit::RemoveNode{j.at("id").get<NodeId>()};
  if (op == "add-edge") {
    return edit::AddEdge{Edge{j.at("from").get<NodeId>(), j.at("to").get<NodeId>(), j.at("weight").get<double>()}};
  }
  if (op == "remove-edge") return edit::RemoveEdge{j.at("from").get<NodeId>(), j.at("to").get<NodeId>()};
  if (op == "set-weight") {
    return edit::SetWeight{j.at("from").get<NodeId>(), j.at("to").get<NodeId>(), j.at("weight").get<double>()};
  }
  throw Error(ErrorCode::MalformedPayload, "unknown edit op '" + op + "'");
}

nlohmann::json to_json(const Edit& e) {
  return std::visit(
      overloaded{
          [](const edit::AddNode& a) -> nlohmann::json {
            return {{"op", "add-node"}, {"id", a.id}, {"label", a.node.label}, {"kind", std::string(to_string(a.node.kind))}};
          },
          [](const edit::RemoveNode& r) -> nlohmann::json { return {{"op", "remove-node"}, {"id", r.id}}; },
          [](const edit::AddEdge& a) -> nlohmann::json {
            return {{"op", "add-edge"}, {"from", a.edge.from}, {"to", a.edge.to}, {"weight", a.edge.weight}};
          },
          [](const edit::RemoveEdge& r) -> nlohmann::json {
            return {{"op", "remove-edge"}, {"from", r.from}, {"to", r.to}};
          },
          [](const edit::SetWeight& s) -> nlohmann::json {
            return {{"op", "set-weight"}, {"from", s.from}, {"to", s.to}, {"weight", s.weight}};
          },
      },
      e);
}

}  // namespace dualloop::impact
