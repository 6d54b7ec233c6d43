#pragma once

#include "dualloop/graph.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dualloop::impact {

// Pulse-train parameters for one input in the temporal analysis.
struct PulseSettings {
  int frequency = 1;        // pulses over the horizon, >= 1
  int start = 0;            // first pulse period, >= 0
  double effect = 1.0;      // amplitude of each pulse
  double attenuation = 0.0; // exponential decay rate per period, >= 0

  bool operator==(const PulseSettings&) const = default;
};

struct AdvancedSettings {
  std::map<NodeId, PulseSettings> inputs;
  int horizon = 1;  // number of periods, t = 0 .. horizon-1

  bool operator==(const AdvancedSettings&) const = default;
};

struct LogicModel {
  WeightedGraph graph;
  NodeId impact_node;
  std::optional<AdvancedSettings> advanced;

  bool operator==(const LogicModel&) const = default;
};

struct ModelReport {
  ValidationReport graph;
  std::vector<std::string> errors;    // model-level structural errors
  std::vector<std::string> warnings;  // e.g. an input with no path to the impact

  bool ok() const noexcept { return graph.ok() && errors.empty(); }
  std::string summary() const;
};

ModelReport validate_model(const LogicModel& model);

namespace edit {
struct AddNode {
  NodeId id;
  Node node;
};
struct RemoveNode {
  NodeId id;
};
struct AddEdge {
  Edge edge;
};
struct RemoveEdge {
  NodeId from;
  NodeId to;
};
struct SetWeight {
  NodeId from;
  NodeId to;
  double weight = 0.0;
};
}  // namespace edit

using Edit = std::variant<edit::AddNode, edit::RemoveNode, edit::AddEdge, edit::RemoveEdge, edit::SetWeight>;

// Returns a new model with `e` applied. Throws EditRejected with the reason
// in `detail()`: cycle, duplicate-edge, duplicate-node, unknown-node,
// unknown-edge, second-impact, removes-impact or structure.
LogicModel apply_edit(const LogicModel& model, const Edit& e);

struct InputSensitivity {
  NodeId input;
  std::string label;
  double sensitivity = 0.0;
};

// Every Input node with its sensitivity to the impact node, descending,
// ties by ascending id.
std::vector<InputSensitivity> rank_inputs(const LogicModel& model);

std::vector<double> input_series(const PulseSettings& pulse, int horizon);
// Impact value for each period t = 0 .. horizon-1.
std::vector<double> advanced_trajectory(const LogicModel& model, const AdvancedSettings& settings);

struct PolicyChoiceRef {
  NodeId id;
  std::string label;
  double sensitivity = 0.0;
  std::size_t rank = 0;  // 1-based
};

std::vector<PolicyChoiceRef> export_choices(const LogicModel& model, std::size_t top_k);

// CSV with header input_id,label,sensitivity.
std::string sensitivity_csv(const std::vector<InputSensitivity>& ranking);

void to_json(nlohmann::json& j, const PulseSettings& s);
void from_json(const nlohmann::json& j, PulseSettings& s);
void to_json(nlohmann::json& j, const AdvancedSettings& s);
void from_json(const nlohmann::json& j, AdvancedSettings& s);
void to_json(nlohmann::json& j, const LogicModel& m);
void from_json(const nlohmann::json& j, LogicModel& m);
void to_json(nlohmann::json& j, const InputSensitivity& s);
void to_json(nlohmann::json& j, const PolicyChoiceRef& c);
Edit edit_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Edit& e);

}  // namespace dualloop::impact
