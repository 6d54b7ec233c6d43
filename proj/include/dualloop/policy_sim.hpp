#pragma once

#include "dualloop/graph.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dualloop::sim {

enum class ValueDimension { Soc = 0, Env = 1, Eco = 2 };

inline constexpr std::array<ValueDimension, 3> kDimensions{ValueDimension::Soc, ValueDimension::Env,
                                                           ValueDimension::Eco};

std::string_view to_string(ValueDimension d) noexcept;
std::optional<ValueDimension> dimension_from_string(std::string_view text) noexcept;

using TernaryValues = std::array<double, 3>;  // indexed by ValueDimension

struct MultiAgentModel {
  WeightedGraph graph;
  std::array<NodeId, 3> value_nodes;  // indexed by ValueDimension

  bool operator==(const MultiAgentModel&) const = default;
  const NodeId& value_node(ValueDimension d) const { return value_nodes[static_cast<std::size_t>(d)]; }
};

// Graph findings plus model-level problems (value-node mapping).
std::vector<std::string> validate_model(const MultiAgentModel& model);

struct PolicyScenario {
  std::string id;
  std::string label;
  InputAssignment inputs;
  bool allocation = false;  // inputs are fund shares summing to 1

  bool operator==(const PolicyScenario&) const = default;
};

inline constexpr double kAllocationTolerance = 1e-9;

// Empty when the scenario is valid on its own terms (non-negative values,
// unit sum when flagged as an allocation).
std::vector<std::string> validate_scenario(const PolicyScenario& scenario);

TernaryValues evaluate_policy(const MultiAgentModel& model, const PolicyScenario& scenario);

enum class PointStatus {
  Ok,
  NegativeSum,  // simplex computed but the point is not plottable
  ZeroSum,      // simplex undefined
};

std::string_view to_string(PointStatus s) noexcept;

struct TernaryPoint {
  TernaryValues raw{};
  TernaryValues scaled{};
  std::optional<TernaryValues> simplex;
  PointStatus status = PointStatus::Ok;
};

struct RawPoint {
  std::string policy;
  TernaryValues values{};
};

// Two-step normalization: per-dimension division by the range across
// policies, then division by the per-policy sum. Throws DegenerateRange
// (detail = dimension) when a dimension has max == min. Per-policy sum
// problems are reported through TernaryPoint::status.
std::vector<std::pair<std::string, TernaryPoint>> normalize_ternary(const std::vector<RawPoint>& points,
                                                                    RangeScaling mode = RangeScaling::Verbatim);

// Dense sensitivity block: rows follow `inputs`, columns follow ValueDimension.
struct SensitivityBlock {
  std::string scenario;
  std::vector<NodeId> inputs;
  TernaryRows<double> values;

  double at(const NodeId& input, ValueDimension d) const;
};

// Independent of the scenario under linear propagation; the scenario is kept
// for labeling.
SensitivityBlock policy_sensitivity(const MultiAgentModel& model, const PolicyScenario& scenario);

struct ComparisonRow {
  std::string scenario;
  std::string label;
  std::vector<double> inputs;  // follows ComparisonTable::input_ids
  TernaryValues raw{};
  std::optional<TernaryValues> scaled;
  std::optional<TernaryValues> simplex;
  PointStatus status = PointStatus::Ok;
};

struct ComparisonTable {
  std::vector<NodeId> input_ids;
  std::vector<ComparisonRow> rows;
  std::vector<ValueDimension> degenerate;  // dimensions with zero range
  SensitivityBlock sensitivity;            // for the selected scenario
};

ComparisonTable compare_policies(const MultiAgentModel& model, const std::vector<PolicyScenario>& scenarios,
                                 std::size_t selected = 0, RangeScaling mode = RangeScaling::Verbatim);

// CSV with header policy_id,soc,env,eco (simplex coordinates). Points
// without a simplex are written with empty fields.
std::string ternary_csv(const std::vector<std::pair<std::string, TernaryPoint>>& points);

void to_json(nlohmann::json& j, const MultiAgentModel& m);
void from_json(const nlohmann::json& j, MultiAgentModel& m);
void to_json(nlohmann::json& j, const PolicyScenario& s);
void from_json(const nlohmann::json& j, PolicyScenario& s);
void to_json(nlohmann::json& j, const TernaryPoint& p);
void to_json(nlohmann::json& j, const SensitivityBlock& b);
void to_json(nlohmann::json& j, const ComparisonTable& t);
nlohmann::json values_to_json(const TernaryValues& v);

}  // namespace dualloop::sim
