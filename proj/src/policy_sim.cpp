#include "dualloop/policy_sim.hpp"

#include "dualloop/csv.hpp"
#include "dualloop/error.hpp"

#include <cmath>
#include <set>

namespace dualloop::sim {

namespace {

constexpr std::array<NodeKind, 3> kValueKinds{NodeKind::ValueSoc, NodeKind::ValueEnv, NodeKind::ValueEco};

std::size_t dim_index(ValueDimension d) { return static_cast<std::size_t>(d); }

CompiledGraph compile_valid(const MultiAgentModel& model) {
  if (const auto problems = validate_model(model); !problems.empty()) {
    std::string msg = "invalid multi-agent model:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(ErrorCode::InvalidGraph, msg);
  }
  return CompiledGraph(model.graph, WeightPolicy::UnitInterval);
}

void require_valid(const PolicyScenario& scenario) {
  if (const auto problems = validate_scenario(scenario); !problems.empty()) {
    throw Error(ErrorCode::InvalidScenario, "scenario '" + scenario.id + "': " + problems.front(), scenario.id);
  }
}

TernaryRows<double> to_matrix(const std::vector<RawPoint>& points) {
  TernaryRows<double> raw(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t k = 0; k < points.size(); ++k) {
    for (std::size_t j = 0; j < 3; ++j) {
      raw(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = points[k].values[j];
    }
  }
  return raw;
}

std::vector<ValueDimension> degenerate_dimensions(const TernaryRows<double>& raw) {
  std::vector<ValueDimension> out;
  const auto ranges = column_ranges(raw);
  for (const auto d : kDimensions) {
    if (!(ranges(static_cast<Eigen::Index>(dim_index(d))) != 0.0)) out.push_back(d);
  }
  return out;
}

}  // namespace

std::string_view to_string(ValueDimension d) noexcept {
  switch (d) {
    case ValueDimension::Soc: return "soc";
    case ValueDimension::Env: return "env";
    case ValueDimension::Eco: return "eco";
  }
  return "?";
}

std::optional<ValueDimension> dimension_from_string(std::string_view text) noexcept {
  for (const auto d : kDimensions) {
    if (to_string(d) == text) return d;
  }
  return std::nullopt;
}

std::string_view to_string(PointStatus s) noexcept {
  switch (s) {
    case PointStatus::Ok: return "ok";
    case PointStatus::NegativeSum: return "NonPositiveSumWarning";
    case PointStatus::ZeroSum: return "ZeroSum";
  }
  return "?";
}

std::vector<std::string> validate_model(const MultiAgentModel& model) {
  std::vector<std::string> problems;
  for (const auto& f : validate_graph(model.graph, WeightPolicy::UnitInterval).findings) {
    problems.push_back(std::string(to_string(f.kind)) + ": " + f.message);
  }
  std::set<NodeId> distinct;
  for (const auto d : kDimensions) {
    const auto& id = model.value_node(d);
    const auto it = model.graph.nodes.find(id);
    if (it == model.graph.nodes.end()) {
      problems.push_back(std::string("value node for ") + std::string(to_string(d)) + " ('" + id + "') does not exist");
      continue;
    }
    if (it->second.kind != kValueKinds[dim_index(d)]) {
      problems.push_back("value node '" + id + "' has kind " + std::string(to_string(it->second.kind)) +
                         ", expected " + std::string(to_string(kValueKinds[dim_index(d)])));
    }
    distinct.insert(id);
  }
  if (distinct.size() != 3 && problems.empty()) problems.push_back("value nodes must be three distinct nodes");
  return problems;
}

std::vector<std::string> validate_scenario(const PolicyScenario& scenario) {
  std::vector<std::string> problems;
  double sum = 0.0;
  for (const auto& [id, value] : scenario.inputs.values) {
    if (!std::isfinite(value) || value < 0.0) problems.push_back("input '" + id + "' must be a finite value >= 0");
    sum += value;
  }
  if (scenario.allocation && std::abs(sum - 1.0) > kAllocationTolerance) {
    problems.push_back("allocation inputs sum to " + csv::number(sum) + ", expected 1");
  }
  return problems;
}

TernaryValues evaluate_policy(const MultiAgentModel& model, const PolicyScenario& scenario) {
  const CompiledGraph compiled = compile_valid(model);
  require_valid(scenario);
  const VectorXd values = compiled.propagate(scenario.inputs);
  TernaryValues out{};
  for (const auto d : kDimensions) {
    out[dim_index(d)] = values(static_cast<Eigen::Index>(compiled.index_of(model.value_node(d))));
  }
  return out;
}

std::vector<std::pair<std::string, TernaryPoint>> normalize_ternary(const std::vector<RawPoint>& points,
                                                                    RangeScaling mode) {
  if (points.empty()) throw Error(ErrorCode::RangeError, "no policies to normalize");
  const TernaryRows<double> raw = to_matrix(points);
  if (const auto degenerate = degenerate_dimensions(raw); !degenerate.empty()) {
    std::string dims;
    for (const auto d : degenerate) dims += (dims.empty() ? "" : ",") + std::string(to_string(d));
    throw Error(ErrorCode::DegenerateRange, "max equals min across policies in dimension(s) " + dims, dims);
  }

  const TernaryRows<double> scaled = scale_by_range(raw, mode);
  const TernaryRows<double> simplex = divide_by_row_sum(scaled);

  std::vector<std::pair<std::string, TernaryPoint>> out;
  out.reserve(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    TernaryPoint p;
    p.raw = points[k].values;
    for (std::size_t j = 0; j < 3; ++j) p.scaled[j] = scaled(row, static_cast<Eigen::Index>(j));
    const double sum = scaled.row(row).sum();
    if (sum == 0.0) {
      p.status = PointStatus::ZeroSum;
    } else {
      p.simplex = TernaryValues{simplex(row, 0), simplex(row, 1), simplex(row, 2)};
      p.status = sum < 0.0 ? PointStatus::NegativeSum : PointStatus::Ok;
    }
    out.emplace_back(points[k].policy, p);
  }
  return out;
}

double SensitivityBlock::at(const NodeId& input, ValueDimension d) const {
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i] == input) return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(dim_index(d)));
  }
  throw Error(ErrorCode::UnknownNode, "no sensitivity row for '" + input + "'", input);
}

SensitivityBlock policy_sensitivity(const MultiAgentModel& model, const PolicyScenario& scenario) {
  const CompiledGraph compiled = compile_valid(model);
  const MatrixXd effect = compiled.total_effect();

  SensitivityBlock block;
  block.scenario = scenario.id;
  block.inputs = compiled.inputs();
  block.values.resize(static_cast<Eigen::Index>(block.inputs.size()), 3);
  for (std::size_t i = 0; i < block.inputs.size(); ++i) {
    const auto source = static_cast<Eigen::Index>(compiled.index_of(block.inputs[i]));
    for (const auto d : kDimensions) {
      const auto target = static_cast<Eigen::Index>(compiled.index_of(model.value_node(d)));
      block.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(dim_index(d))) = effect(target, source);
    }
  }
  return block;
}

ComparisonTable compare_policies(const MultiAgentModel& model, const std::vector<PolicyScenario>& scenarios,
                                 std::size_t selected, RangeScaling mode) {
  if (scenarios.size() < 2) throw Error(ErrorCode::RangeError, "comparison needs at least two scenarios");
  if (selected >= scenarios.size()) throw Error(ErrorCode::RangeError, "selected scenario index out of range");
  const CompiledGraph compiled = compile_valid(model);

  ComparisonTable table;
  table.input_ids = compiled.inputs();
  std::vector<RawPoint> points;
  for (const auto& s : scenarios) {
    require_valid(s);
    const VectorXd values = compiled.propagate(s.inputs);
    ComparisonRow row;
    row.scenario = s.id;
    row.label = s.label;
    for (const auto& id : table.input_ids) {
      const auto it = s.inputs.values.find(id);
      row.inputs.push_back(it == s.inputs.values.end() ? 0.0 : it->second);
    }
    for (const auto d : kDimensions) {
      row.raw[dim_index(d)] = values(static_cast<Eigen::Index>(compiled.index_of(model.value_node(d))));
    }
    points.push_back({s.id, row.raw});
    table.rows.push_back(std::move(row));
  }

  table.degenerate = degenerate_dimensions(to_matrix(points));
  if (table.degenerate.empty()) {
    const auto normalized = normalize_ternary(points, mode);
    for (std::size_t k = 0; k < normalized.size(); ++k) {
      table.rows[k].scaled = normalized[k].second.scaled;
      table.rows[k].simplex = normalized[k].second.simplex;
      table.rows[k].status = normalized[k].second.status;
    }
  }
  table.sensitivity = policy_sensitivity(model, scenarios[selected]);
  return table;
}

std::string ternary_csv(const std::vector<std::pair<std::string, TernaryPoint>>& points) {
  std::string out = "policy_id,soc,env,eco\n";
  for (const auto& [id, p] : points) {
    out += csv::field(id);
    for (std::size_t j = 0; j < 3; ++j) {
      out += ',';
      if (p.simplex) out += csv::number((*p.simplex)[j]);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json values_to_json(const TernaryValues& v) {
  return {{"soc", v[0]}, {"env", v[1]}, {"eco", v[2]}};
}

void to_json(nlohmann::json& j, const MultiAgentModel& m) {
  j = m.graph;
  j["value_nodes"] = {{"soc", m.value_nodes[0]}, {"env", m.value_nodes[1]}, {"eco", m.value_nodes[2]}};
}

void from_json(const nlohmann::json& j, MultiAgentModel& m) {
  m.graph = j.get<WeightedGraph>();
  const auto& v = j.at("value_nodes");
  m.value_nodes = {v.at("soc").get<NodeId>(), v.at("env").get<NodeId>(), v.at("eco").get<NodeId>()};
}

void to_json(nlohmann::json& j, const PolicyScenario& s) {
  j = {{"id", s.id}, {"label", s.label}, {"inputs", s.inputs.values}, {"allocation", s.allocation}};
}

void from_json(const nlohmann::json& j, PolicyScenario& s) {
  s.id = j.at("id").get<std::string>();
  s.label = j.value("label", std::string{});
  s.inputs = {};
  s.inputs.values = j.at("inputs").get<std::map<NodeId, double>>();
  s.allocation = j.value("allocation", false);
}

void to_json(nlohmann::json& j, const TernaryPoint& p) {
  j = {{"raw", values_to_json(p.raw)},
       {"scaled", values_to_json(p.scaled)},
       {"simplex", p.simplex ? values_to_json(*p.simplex) : nlohmann::json(nullptr)},
       {"status", std::string(to_string(p.status))}};
}

void to_json(nlohmann::json& j, const SensitivityBlock& b) {
  j = {{"scenario", b.scenario}, {"rows", nlohmann::json::array()}};
  for (std::size_t i = 0; i < b.inputs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    j["rows"].push_back({{"input_id", b.inputs[i]},
                         {"soc", b.values(r, 0)},
                         {"env", b.values(r, 1)},
                         {"eco", b.values(r, 2)}});
  }
}

void to_json(nlohmann::json& j, const ComparisonTable& t) {
  j = {{"input_ids", t.input_ids}, {"rows", nlohmann::json::array()}, {"degenerate", nlohmann::json::array()}};
  for (const auto d : t.degenerate) j["degenerate"].push_back(std::string(to_string(d)));
  for (const auto& r : t.rows) {
    j["rows"].push_back({{"scenario", r.scenario},
                         {"label", r.label},
                         {"inputs", r.inputs},
                         {"raw", values_to_json(r.raw)},
                         {"scaled", r.scaled ? values_to_json(*r.scaled) : nlohmann::json(nullptr)},
                         {"simplex", r.simplex ? values_to_json(*r.simplex) : nlohmann::json(nullptr)},
                         {"status", std::string(to_string(r.status))}});
  }
  j["sensitivity"] = t.sensitivity;
}

}  // namespace dualloop::sim
