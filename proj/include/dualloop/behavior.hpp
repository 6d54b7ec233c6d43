#pragma once

#include "dualloop/svo.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dualloop::behavior {

enum class FeatureKind { Binary, Ordinal, Continuous, Categorical };

std::string_view to_string(FeatureKind k) noexcept;
std::optional<FeatureKind> feature_kind_from_string(std::string_view text) noexcept;

// Numbers for binary/ordinal/continuous, level names for categorical.
using FeatureValue = std::variant<double, std::string>;

// Fixed encoding, so that any model sees the same inputs:
//   binary      -> {0, 1}
//   ordinal     -> (x - mean) / scale, x an integer in [min, max]
//   continuous  -> (x - mean) / scale
//   categorical -> one-hot, one column per level named "<id>=<level>"
struct FeatureSpec {
  std::string id;
  std::string label;
  std::string category;
  int table_ref = 0;  // row of the reference parameter table, 0 if none
  FeatureKind kind = FeatureKind::Continuous;
  FeatureValue default_value = 0.0;
  std::vector<std::string> levels;  // categorical
  double min = 0.0;                 // ordinal
  double max = 1.0;                 // ordinal
  double mean = 0.0;                // ordinal, continuous
  double scale = 1.0;               // ordinal, continuous

  bool operator==(const FeatureSpec&) const = default;
};

struct FeatureCatalog {
  std::vector<FeatureSpec> features;

  const FeatureSpec* find(std::string_view id) const;
  // Names of all encoded columns, in catalog order.
  std::vector<std::string> columns() const;
};

std::vector<std::string> validate_catalog(const FeatureCatalog& catalog);
FeatureCatalog default_catalog();

using FeatureVector = std::map<std::string, FeatureValue>;
using EncodedVector = std::map<std::string, double>;

// Throws UnknownFeature or EncodingError.
void check_value(const FeatureSpec& spec, const FeatureValue& value);
void check_vector(const FeatureCatalog& catalog, const FeatureVector& values);

// Fills missing ids from defaults; ids that were filled are appended to
// `filled` when given.
FeatureVector complete(const FeatureCatalog& catalog, const FeatureVector& values,
                       std::vector<std::string>* filled = nullptr);
EncodedVector encode(const FeatureCatalog& catalog, const FeatureVector& values);

enum class ModelKind { LogisticReference, External };

struct CooperationModel {
  ModelKind kind = ModelKind::LogisticReference;
  double intercept = 0.0;
  std::map<std::string, double> coefficients;  // keyed by encoded column
  // External models map the encoded vector to a rate in (0, 1).
  std::function<double(const EncodedVector&)> external;

  double rate(const EncodedVector& x) const;
};

std::vector<std::string> validate_model(const CooperationModel& model, const FeatureCatalog& catalog);

struct Prediction {
  double rate = 0.0;
  std::vector<std::string> defaulted;
};

Prediction predict(const CooperationModel& model, const FeatureCatalog& catalog, const FeatureVector& features);

// Derivative of the rate with respect to each feature's raw value for
// ordinal/continuous features, the 1-vs-0 difference for binary features,
// and one "<id>=<level>" entry per categorical level holding the change from
// the current level to that level.
std::map<std::string, double> feature_sensitivity(const CooperationModel& model, const FeatureCatalog& catalog,
                                                  const FeatureVector& features);

struct InterventionPlan {
  std::string id;
  std::string label;
  FeatureVector deltas;  // feature-id -> new value
};

FeatureVector apply_plan(const FeatureCatalog& catalog, const FeatureVector& baseline, const InterventionPlan& plan);

struct PlanOutcome {
  std::string plan;
  std::string label;
  double rate = 0.0;
  double delta = 0.0;
};

struct PlanFailure {
  std::string plan;
  std::string code;
  std::string message;
};

struct SimulationReport {
  double baseline_rate = 0.0;
  std::vector<PlanOutcome> ranked;  // delta descending, then plan id
  std::vector<PlanFailure> failures;
};

SimulationReport simulate_interventions(const CooperationModel& model, const FeatureCatalog& catalog,
                                        const FeatureVector& baseline, std::span<const InterventionPlan> plans);

struct SustainabilityConfig {
  double decay = 0.0;  // mu >= 0
  int horizon = 10;    // curve covers t = 0..horizon
};

struct Contribution {
  std::string feature;
  FeatureValue before;
  FeatureValue after;
  double contribution = 0.0;  // rate change from this feature alone
};

struct SuggestionReport {
  std::string plan;
  double baseline_rate = 0.0;
  double rate = 0.0;
  double delta = 0.0;
  std::vector<Contribution> contributions;
  std::vector<double> sustainability;  // baseline + delta * exp(-mu t)
};

SuggestionReport suggest(const CooperationModel& model, const FeatureCatalog& catalog, const FeatureVector& baseline,
                         const InterventionPlan& plan, const SustainabilityConfig& config = {});

struct MonitoringRecord {
  std::string subject;
  int period = 0;
  double observed = 0.0;
  double threshold = 0.0;
  bool flagged = false;  // observed below threshold: revisit the behavior target
};

// Append-only observation log per subject.
class Monitor {
 public:
  explicit Monitor(double threshold) : threshold_(threshold) {}

  const MonitoringRecord& record(const std::string& subject, int period, double observed);
  const std::vector<MonitoringRecord>& records(const std::string& subject) const;
  bool needs_retargeting(const std::string& subject) const;
  double threshold() const noexcept { return threshold_; }

 private:
  double threshold_;
  std::map<std::string, std::vector<MonitoringRecord>> records_;
};

struct SubjectChange {
  std::string subject;
  std::optional<std::string> previous;
  std::string current;
};

struct ImportReport {
  std::vector<std::string> updated;
  std::vector<SubjectChange> changes;
};

// Sets the categorical "svo_type" of each subject from its SVO result.
ImportReport import_subjects(const FeatureCatalog& catalog, std::map<std::string, FeatureVector>& subjects,
                             std::span<const svo::SvoResult> results);

inline constexpr std::string_view kSvoFeature = "svo_type";

// Bundled model + baseline + intervention menu.
struct BehaviorConfig {
  std::string name;
  CooperationModel model;
  FeatureVector baseline;
  std::vector<InterventionPlan> plans;
  SustainabilityConfig sustainability;
  double monitor_threshold = 0.5;
};

BehaviorConfig load_config(const std::filesystem::path& path);
BehaviorConfig unused_stock_owners();

std::string ranking_csv(const SimulationReport& report);

nlohmann::json value_to_json(const FeatureValue& v);
FeatureValue value_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const FeatureSpec& s);
void from_json(const nlohmann::json& j, FeatureSpec& s);
void to_json(nlohmann::json& j, const FeatureCatalog& c);
void from_json(const nlohmann::json& j, FeatureCatalog& c);
nlohmann::json vector_to_json(const FeatureVector& v);
FeatureVector vector_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const CooperationModel& m);
void from_json(const nlohmann::json& j, CooperationModel& m);
void to_json(nlohmann::json& j, const InterventionPlan& p);
void from_json(const nlohmann::json& j, InterventionPlan& p);
void to_json(nlohmann::json& j, const Prediction& p);
void to_json(nlohmann::json& j, const SimulationReport& r);
void to_json(nlohmann::json& j, const SuggestionReport& r);
void to_json(nlohmann::json& j, const MonitoringRecord& r);
void to_json(nlohmann::json& j, const ImportReport& r);
void to_json(nlohmann::json& j, const BehaviorConfig& c);
void from_json(const nlohmann::json& j, BehaviorConfig& c);

}  // namespace dualloop::behavior
