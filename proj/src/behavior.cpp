#include "dualloop/behavior.hpp"

#include "dualloop/csv.hpp"
#include "dualloop/error.hpp"
#include "dualloop/linear.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace dualloop::behavior {

namespace {

constexpr std::pair<FeatureKind, std::string_view> kKindNames[] = {
    {FeatureKind::Binary, "binary"},
    {FeatureKind::Ordinal, "ordinal"},
    {FeatureKind::Continuous, "continuous"},
    {FeatureKind::Categorical, "categorical"},
};

[[noreturn]] void encoding_error(const std::string& id, const std::string& why) {
  throw Error(ErrorCode::EncodingError, "feature '" + id + "': " + why, id);
}

const FeatureSpec& require(const FeatureCatalog& catalog, const std::string& id) {
  const auto* spec = catalog.find(id);
  if (!spec) throw Error(ErrorCode::UnknownFeature, "unknown feature '" + id + "'", id);
  return *spec;
}

std::string column(const std::string& id, const std::string& level) { return id + "=" + level; }

// Keeps the rate strictly inside (0, 1) even where exp() saturates.
double open_unit(double y) {
  return std::clamp(y, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

}  // namespace

std::string_view to_string(FeatureKind k) noexcept {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "?";
}

std::optional<FeatureKind> feature_kind_from_string(std::string_view text) noexcept {
  for (const auto& [kind, name] : kKindNames) {
    if (name == text) return kind;
  }
  return std::nullopt;
}

const FeatureSpec* FeatureCatalog::find(std::string_view id) const {
  for (const auto& f : features) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

std::vector<std::string> FeatureCatalog::columns() const {
  std::vector<std::string> out;
  for (const auto& f : features) {
    if (f.kind == FeatureKind::Categorical) {
      for (const auto& level : f.levels) out.push_back(column(f.id, level));
    } else {
      out.push_back(f.id);
    }
  }
  return out;
}

void check_value(const FeatureSpec& spec, const FeatureValue& value) {
  if (spec.kind == FeatureKind::Categorical) {
    const auto* level = std::get_if<std::string>(&value);
    if (!level) encoding_error(spec.id, "expects a level name");
    if (std::find(spec.levels.begin(), spec.levels.end(), *level) == spec.levels.end()) {
      encoding_error(spec.id, "unknown level '" + *level + "'");
    }
    return;
  }
  const auto* x = std::get_if<double>(&value);
  if (!x) encoding_error(spec.id, "expects a number");
  if (!std::isfinite(*x)) encoding_error(spec.id, "value is not finite");
  switch (spec.kind) {
    case FeatureKind::Binary:
      if (*x != 0.0 && *x != 1.0) encoding_error(spec.id, "binary value must be 0 or 1");
      break;
    case FeatureKind::Ordinal:
      if (*x != std::round(*x) || *x < spec.min || *x > spec.max) {
        encoding_error(spec.id, "ordinal value must be an integer in [" + csv::number(spec.min) + ", " +
                                    csv::number(spec.max) + "]");
      }
      break;
    default:
      break;
  }
}

void check_vector(const FeatureCatalog& catalog, const FeatureVector& values) {
  for (const auto& [id, value] : values) check_value(require(catalog, id), value);
}

std::vector<std::string> validate_catalog(const FeatureCatalog& catalog) {
  std::vector<std::string> problems;
  std::set<std::string> ids;
  for (const auto& f : catalog.features) {
    if (f.id.empty()) problems.push_back("feature with empty id");
    if (!ids.insert(f.id).second) problems.push_back("duplicate feature id '" + f.id + "'");
    if (f.kind == FeatureKind::Categorical) {
      if (f.levels.empty()) problems.push_back("categorical feature '" + f.id + "' has no levels");
      if (std::set<std::string>(f.levels.begin(), f.levels.end()).size() != f.levels.size()) {
        problems.push_back("categorical feature '" + f.id + "' repeats a level");
      }
    }
    if ((f.kind == FeatureKind::Ordinal || f.kind == FeatureKind::Continuous) &&
        !(std::isfinite(f.scale) && f.scale > 0.0 && std::isfinite(f.mean))) {
      problems.push_back("feature '" + f.id + "' needs a finite mean and a positive scale");
    }
    if (f.kind == FeatureKind::Ordinal && !(f.min <= f.max)) {
      problems.push_back("ordinal feature '" + f.id + "' has min > max");
    }
    try {
      check_value(f, f.default_value);
    } catch (const Error& e) {
      problems.push_back("default of '" + f.id + "' does not type-check: " + e.what());
    }
  }
  return problems;
}

FeatureCatalog default_catalog() {
  const auto path = std::filesystem::path(DUALLOOP_DATA_DIR) / "features.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open feature catalog " + path.string());
  return nlohmann::json::parse(in).get<FeatureCatalog>();
}

FeatureVector complete(const FeatureCatalog& catalog, const FeatureVector& values, std::vector<std::string>* filled) {
  check_vector(catalog, values);
  FeatureVector out = values;
  for (const auto& f : catalog.features) {
    if (out.emplace(f.id, f.default_value).second && filled) filled->push_back(f.id);
  }
  return out;
}

EncodedVector encode(const FeatureCatalog& catalog, const FeatureVector& values) {
  const FeatureVector full = complete(catalog, values);
  EncodedVector x;
  for (const auto& f : catalog.features) {
    const auto& v = full.at(f.id);
    switch (f.kind) {
      case FeatureKind::Binary: x[f.id] = std::get<double>(v); break;
      case FeatureKind::Ordinal:
      case FeatureKind::Continuous: x[f.id] = (std::get<double>(v) - f.mean) / f.scale; break;
      case FeatureKind::Categorical:
        for (const auto& level : f.levels) x[column(f.id, level)] = level == std::get<std::string>(v) ? 1.0 : 0.0;
        break;
    }
  }
  return x;
}

double CooperationModel::rate(const EncodedVector& x) const {
  if (kind == ModelKind::External) {
    if (!external) throw Error(ErrorCode::InvalidSettings, "external model has no implementation attached");
    const double y = external(x);
    if (!(y > 0.0 && y < 1.0)) throw Error(ErrorCode::RangeError, "external model returned a rate outside (0, 1)");
    return y;
  }
  double z = intercept;
  for (const auto& [col, beta] : coefficients) {
    if (const auto it = x.find(col); it != x.end()) z += beta * it->second;
  }
  return open_unit(logistic(z));
}

std::vector<std::string> validate_model(const CooperationModel& model, const FeatureCatalog& catalog) {
  std::vector<std::string> problems;
  if (!std::isfinite(model.intercept)) problems.push_back("intercept is not finite");
  const auto cols = catalog.columns();
  const std::set<std::string> known(cols.begin(), cols.end());
  for (const auto& [col, beta] : model.coefficients) {
    if (!std::isfinite(beta)) problems.push_back("coefficient '" + col + "' is not finite");
    if (!known.count(col)) problems.push_back("coefficient '" + col + "' names no catalog column");
  }
  if (model.kind == ModelKind::External && !model.external) problems.push_back("external model not attached");
  return problems;
}

namespace {

void require_model(const CooperationModel& model, const FeatureCatalog& catalog) {
  const auto cols = catalog.columns();
  for (const auto& [col, beta] : model.coefficients) {
    if (std::find(cols.begin(), cols.end(), col) == cols.end()) {
      throw Error(ErrorCode::UnknownFeature, "coefficient '" + col + "' names no catalog column", col);
    }
    if (!std::isfinite(beta)) throw Error(ErrorCode::InvalidSettings, "coefficient '" + col + "' is not finite", col);
  }
  if (!std::isfinite(model.intercept)) throw Error(ErrorCode::InvalidSettings, "intercept is not finite");
}

}  // namespace

Prediction predict(const CooperationModel& model, const FeatureCatalog& catalog, const FeatureVector& features) {
  require_model(model, catalog);
  Prediction p;
  const FeatureVector full = complete(catalog, features, &p.defaulted);
  p.rate = model.rate(encode(catalog, full));
  return p;
}

std::map<std::string, double> feature_sensitivity(const CooperationModel& model, const FeatureCatalog& catalog,
                                                  const FeatureVector& features) {
  require_model(model, catalog);
  const FeatureVector full = complete(catalog, features);
  const double y = model.rate(encode(catalog, full));
  const auto rate_with = [&](const std::string& id, FeatureValue v) {
    FeatureVector changed = full;
    changed[id] = std::move(v);
    return model.rate(encode(catalog, changed));
  };

  std::map<std::string, double> out;
  for (const auto& f : catalog.features) {
    switch (f.kind) {
      case FeatureKind::Binary: out[f.id] = rate_with(f.id, 1.0) - rate_with(f.id, 0.0); break;
      case FeatureKind::Ordinal:
      case FeatureKind::Continuous: {
        if (model.kind == ModelKind::LogisticReference) {
          const auto it = model.coefficients.find(f.id);
          const double beta = it == model.coefficients.end() ? 0.0 : it->second;
          out[f.id] = beta / f.scale * y * (1.0 - y);
        } else {
          // Ordinal grid points are bypassed so the derivative is taken on the
          // encoded line the model actually sees.
          const double h = 1e-5 * f.scale;
          EncodedVector x = encode(catalog, full);
          const double x0 = x.at(f.id);
          x[f.id] = x0 + h / f.scale;
          const double up = model.rate(x);
          x[f.id] = x0 - h / f.scale;
          const double down = model.rate(x);
          out[f.id] = (up - down) / (2.0 * h);
        }
        break;
      }
      case FeatureKind::Categorical:
        for (const auto& level : f.levels) out[column(f.id, level)] = rate_with(f.id, level) - y;
        break;
    }
  }
  return out;
}

FeatureVector apply_plan(const FeatureCatalog& catalog, const FeatureVector& baseline, const InterventionPlan& plan) {
  check_vector(catalog, plan.deltas);
  FeatureVector out = baseline;
  for (const auto& [id, value] : plan.deltas) out[id] = value;
  return out;
}

SimulationReport simulate_interventions(const CooperationModel& model, const FeatureCatalog& catalog,
                                        const FeatureVector& baseline, std::span<const InterventionPlan> plans) {
  if (plans.empty()) throw Error(ErrorCode::RangeError, "no intervention plans to simulate");
  SimulationReport report;
  report.baseline_rate = predict(model, catalog, baseline).rate;
  for (const auto& plan : plans) {
    try {
      const double rate = predict(model, catalog, apply_plan(catalog, baseline, plan)).rate;
      report.ranked.push_back({plan.id, plan.label, rate, rate - report.baseline_rate});
    } catch (const Error& e) {
      report.failures.push_back({plan.id, std::string(to_string(e.code())), e.what()});
    }
  }
  std::sort(report.ranked.begin(), report.ranked.end(), [](const PlanOutcome& a, const PlanOutcome& b) {
    if (a.delta != b.delta) return a.delta > b.delta;
    return a.plan < b.plan;
  });
  return report;
}

SuggestionReport suggest(const CooperationModel& model, const FeatureCatalog& catalog, const FeatureVector& baseline,
                         const InterventionPlan& plan, const SustainabilityConfig& config) {
  if (!(std::isfinite(config.decay) && config.decay >= 0.0)) {
    throw Error(ErrorCode::InvalidSettings, "decay must be finite and non-negative");
  }
  if (config.horizon < 0) throw Error(ErrorCode::InvalidSettings, "horizon must be non-negative");

  require_model(model, catalog);
  const FeatureVector base = complete(catalog, baseline);
  SuggestionReport r;
  r.plan = plan.id;
  r.baseline_rate = model.rate(encode(catalog, base));
  r.rate = model.rate(encode(catalog, apply_plan(catalog, base, plan)));
  r.delta = r.rate - r.baseline_rate;
  for (const auto& [id, value] : plan.deltas) {
    FeatureVector single = base;
    single[id] = value;
    r.contributions.push_back({id, base.at(id), value, model.rate(encode(catalog, single)) - r.baseline_rate});
  }
  for (int t = 0; t <= config.horizon; ++t) {
    r.sustainability.push_back(r.baseline_rate + r.delta * std::exp(-config.decay * t));
  }
  return r;
}

const MonitoringRecord& Monitor::record(const std::string& subject, int period, double observed) {
  if (!std::isfinite(observed)) throw Error(ErrorCode::RangeError, "observed rate is not finite");
  auto& log = records_[subject];
  log.push_back({subject, period, observed, threshold_, observed < threshold_});
  return log.back();
}

const std::vector<MonitoringRecord>& Monitor::records(const std::string& subject) const {
  static const std::vector<MonitoringRecord> empty;
  const auto it = records_.find(subject);
  return it == records_.end() ? empty : it->second;
}

bool Monitor::needs_retargeting(const std::string& subject) const {
  const auto& log = records(subject);
  return !log.empty() && log.back().flagged;
}

ImportReport import_subjects(const FeatureCatalog& catalog, std::map<std::string, FeatureVector>& subjects,
                             std::span<const svo::SvoResult> results) {
  const auto& spec = require(catalog, std::string(kSvoFeature));
  ImportReport report;
  for (const auto& r : results) {
    if (r.participant.empty()) throw Error(ErrorCode::MalformedPayload, "SVO result without participant id");
    const std::string level(svo::to_string(r.category));
    check_value(spec, level);
    auto [it, created] = subjects.try_emplace(r.participant, complete(catalog, {}));
    auto& slot = it->second[spec.id];
    std::optional<std::string> previous;
    if (!created) {
      if (const auto* s = std::get_if<std::string>(&slot)) previous = *s;
    }
    slot = level;
    report.updated.push_back(r.participant);
    report.changes.push_back({r.participant, previous, level});
  }
  return report;
}

BehaviorConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open behavior config " + path.string());
  return nlohmann::json::parse(in).get<BehaviorConfig>();
}

BehaviorConfig unused_stock_owners() {
  return load_config(std::filesystem::path(DUALLOOP_DATA_DIR) / "behavior" / "unused_stock_owners.json");
}

std::string ranking_csv(const SimulationReport& report) {
  std::string out = "plan_id,rate,delta\n";
  for (const auto& o : report.ranked) {
    out += csv::field(o.plan) + "," + csv::number(o.rate) + "," + csv::number(o.delta) + "\n";
  }
  return out;
}

nlohmann::json value_to_json(const FeatureValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<double>(v);
}

FeatureValue value_from_json(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? 1.0 : 0.0;
  if (j.is_number()) return j.get<double>();
  throw Error(ErrorCode::EncodingError, "feature value must be a number, boolean or level name");
}

void to_json(nlohmann::json& j, const FeatureSpec& s) {
  j = {{"id", s.id},
       {"label", s.label},
       {"category", s.category},
       {"table_ref", s.table_ref},
       {"kind", std::string(to_string(s.kind))},
       {"default", value_to_json(s.default_value)}};
  switch (s.kind) {
    case FeatureKind::Categorical: j["levels"] = s.levels; break;
    case FeatureKind::Ordinal:
      j["min"] = s.min;
      j["max"] = s.max;
      j["mean"] = s.mean;
      j["scale"] = s.scale;
      break;
    case FeatureKind::Continuous:
      j["mean"] = s.mean;
      j["scale"] = s.scale;
      break;
    case FeatureKind::Binary: break;
  }
}

void from_json(const nlohmann::json& j, FeatureSpec& s) {
  s = FeatureSpec{};
  s.id = j.at("id").get<std::string>();
  s.label = j.value("label", s.id);
  s.category = j.value("category", std::string{});
  s.table_ref = j.value("table_ref", 0);
  const auto kind = feature_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::MalformedPayload, "unknown feature kind", s.id);
  s.kind = *kind;
  s.default_value = value_from_json(j.at("default"));
  s.levels = j.value("levels", std::vector<std::string>{});
  s.min = j.value("min", 0.0);
  s.max = j.value("max", 1.0);
  s.mean = j.value("mean", 0.0);
  s.scale = j.value("scale", 1.0);
}

void to_json(nlohmann::json& j, const FeatureCatalog& c) {
  j = nlohmann::json::array();
  for (const auto& f : c.features) j.push_back(f);
}

void from_json(const nlohmann::json& j, FeatureCatalog& c) {
  c.features = j.get<std::vector<FeatureSpec>>();
  if (const auto problems = validate_catalog(c); !problems.empty()) {
    throw Error(ErrorCode::ValidationFailure, "invalid feature catalog: " + problems.front());
  }
}

nlohmann::json vector_to_json(const FeatureVector& v) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, value] : v) j[id] = value_to_json(value);
  return j;
}

FeatureVector vector_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedPayload, "feature vector must be an object");
  FeatureVector v;
  for (const auto& [id, value] : j.items()) v[id] = value_from_json(value);
  return v;
}

void to_json(nlohmann::json& j, const CooperationModel& m) {
  j = {{"kind", m.kind == ModelKind::External ? "external" : "logistic-reference"},
       {"intercept", m.intercept},
       {"coefficients", m.coefficients}};
}

void from_json(const nlohmann::json& j, CooperationModel& m) {
  m = CooperationModel{};
  const auto kind = j.value("kind", std::string("logistic-reference"));
  if (kind == "external") {
    m.kind = ModelKind::External;
  } else if (kind != "logistic-reference") {
    throw Error(ErrorCode::MalformedPayload, "model kind must be logistic-reference or external");
  }
  m.intercept = j.value("intercept", 0.0);
  m.coefficients = j.value("coefficients", std::map<std::string, double>{});
}

void to_json(nlohmann::json& j, const InterventionPlan& p) {
  j = {{"id", p.id}, {"label", p.label}, {"deltas", vector_to_json(p.deltas)}};
}

void from_json(const nlohmann::json& j, InterventionPlan& p) {
  p.id = j.at("id").get<std::string>();
  p.label = j.value("label", p.id);
  p.deltas = vector_from_json(j.value("deltas", nlohmann::json::object()));
}

void to_json(nlohmann::json& j, const Prediction& p) { j = {{"rate", p.rate}, {"defaulted", p.defaulted}}; }

void to_json(nlohmann::json& j, const SimulationReport& r) {
  j = {{"baseline_rate", r.baseline_rate}, {"ranked", nlohmann::json::array()}, {"failures", nlohmann::json::array()}};
  for (const auto& o : r.ranked) {
    j["ranked"].push_back({{"plan", o.plan}, {"label", o.label}, {"rate", o.rate}, {"delta", o.delta}});
  }
  for (const auto& f : r.failures) {
    j["failures"].push_back({{"plan", f.plan}, {"code", f.code}, {"message", f.message}});
  }
}

void to_json(nlohmann::json& j, const SuggestionReport& r) {
  j = {{"plan", r.plan},
       {"baseline_rate", r.baseline_rate},
       {"rate", r.rate},
       {"delta", r.delta},
       {"contributions", nlohmann::json::array()},
       {"sustainability", r.sustainability}};
  for (const auto& c : r.contributions) {
    j["contributions"].push_back({{"feature", c.feature},
                                  {"before", value_to_json(c.before)},
                                  {"after", value_to_json(c.after)},
                                  {"contribution", c.contribution}});
  }
}

void to_json(nlohmann::json& j, const MonitoringRecord& r) {
  j = {{"subject", r.subject},
       {"period", r.period},
       {"observed", r.observed},
       {"threshold", r.threshold},
       {"flagged", r.flagged}};
  if (r.flagged) j["action"] = "return to behavior target setting";
}

void to_json(nlohmann::json& j, const ImportReport& r) {
  j = {{"updated", r.updated}, {"changes", nlohmann::json::array()}};
  for (const auto& c : r.changes) {
    j["changes"].push_back({{"subject", c.subject},
                            {"previous", c.previous ? nlohmann::json(*c.previous) : nlohmann::json(nullptr)},
                            {"current", c.current}});
  }
}

void to_json(nlohmann::json& j, const BehaviorConfig& c) {
  j = {{"name", c.name},
       {"model", c.model},
       {"baseline", vector_to_json(c.baseline)},
       {"plans", c.plans},
       {"sustainability", {{"decay", c.sustainability.decay}, {"horizon", c.sustainability.horizon}}},
       {"monitor_threshold", c.monitor_threshold}};
}

void from_json(const nlohmann::json& j, BehaviorConfig& c) {
  c = BehaviorConfig{};
  c.name = j.value("name", std::string{});
  c.model = j.at("model").get<CooperationModel>();
  c.baseline = vector_from_json(j.value("baseline", nlohmann::json::object()));
  c.plans = j.value("plans", std::vector<InterventionPlan>{});
  if (j.contains("sustainability")) {
    c.sustainability.decay = j["sustainability"].value("decay", 0.0);
    c.sustainability.horizon = j["sustainability"].value("horizon", 10);
  }
  c.monitor_threshold = j.value("monitor_threshold", 0.5);
}

}  // namespace dualloop::behavior
