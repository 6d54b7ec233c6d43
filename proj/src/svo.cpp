#include "dualloop/svo.hpp"

#include "dualloop/csv.hpp"
#include "dualloop/error.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numbers>
#include <set>

namespace dualloop::svo {

namespace {

constexpr double kReference = 50.0;

double distance(const Payoff& p, const Payoff& q) { return std::hypot(p.self - q.self, p.other - q.other); }

double distance_to_segment(const Payoff& p, const Payoff& a, const Payoff& b) {
  const double ds = b.self - a.self;
  const double dother = b.other - a.other;
  const double len2 = ds * ds + dother * dother;
  const double t = len2 == 0.0 ? 0.0 : std::clamp(((p.self - a.self) * ds + (p.other - a.other) * dother) / len2, 0.0, 1.0);
  return distance(p, Payoff{a.self + t * ds, a.other + t * dother});
}

Payoff payoff_from_json(const nlohmann::json& j) { return {j.at("self").get<double>(), j.at("other").get<double>()}; }

nlohmann::json payoff_to_json(const Payoff& p) { return {{"self", p.self}, {"other", p.other}}; }

// One finite position in [0, 1] per requested item; responses to other
// items of the instrument are ignored.
std::map<std::string, double> collect(const Instrument& instrument, std::span<const SliderResponse> responses,
                                      ItemKind kind) {
  std::map<std::string, double> by_item;
  for (const auto& r : responses) {
    const auto* item = instrument.find(r.item);
    if (!item) throw Error(ErrorCode::MalformedPayload, "response to unknown item '" + r.item + "'", r.item);
    if (item->kind != kind) continue;
    if (!std::isfinite(r.position) || r.position < 0.0 || r.position > 1.0) {
      throw Error(ErrorCode::OutOfRange, "position for '" + r.item + "' must lie in [0, 1]", r.item);
    }
    if (!by_item.emplace(r.item, r.position).second) {
      throw Error(ErrorCode::DuplicateItem, "more than one response to '" + r.item + "'", r.item);
    }
  }
  for (const auto* item : instrument.of_kind(kind)) {
    if (!by_item.count(item->id)) {
      throw Error(ErrorCode::MissingItem, "no response to '" + item->id + "'", item->id);
    }
  }
  return by_item;
}

}  // namespace

Payoff SliderItem::at(double t) const { return {a.self + t * (b.self - a.self), a.other + t * (b.other - a.other)}; }

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::Altruistic: return "altruistic";
    case Category::Prosocial: return "prosocial";
    case Category::Individualistic: return "individualistic";
    case Category::Competitive: return "competitive";
  }
  return "?";
}

std::optional<Category> category_from_string(std::string_view text) noexcept {
  for (const auto c : {Category::Altruistic, Category::Prosocial, Category::Individualistic, Category::Competitive}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

std::vector<const SliderItem*> Instrument::of_kind(ItemKind kind) const {
  std::vector<const SliderItem*> out;
  for (const auto& item : items) {
    if (item.kind == kind) out.push_back(&item);
  }
  return out;
}

const SliderItem* Instrument::find(std::string_view id) const {
  for (const auto& item : items) {
    if (item.id == id) return &item;
  }
  return nullptr;
}

std::vector<std::string> validate_instrument(const Instrument& instrument) {
  std::vector<std::string> problems;
  std::set<std::string> ids;
  for (const auto& item : instrument.items) {
    if (!ids.insert(item.id).second) problems.push_back("duplicate item id '" + item.id + "'");
    if (item.a == item.b) problems.push_back("item '" + item.id + "' has identical endpoints");
    if (item.kind == ItemKind::Secondary) {
      if (!item.ideal_equality || !item.ideal_jointgain) {
        problems.push_back("secondary item '" + item.id + "' lacks ideal points");
        continue;
      }
      for (const auto* ideal : {&*item.ideal_equality, &*item.ideal_jointgain}) {
        if (distance_to_segment(*ideal, item.a, item.b) > 1e-6) {
          problems.push_back("ideal point of '" + item.id + "' is off the slider segment");
        }
      }
    }
  }
  if (instrument.of_kind(ItemKind::Primary).empty()) problems.push_back("instrument has no primary items");
  const auto& t = instrument.thresholds;
  if (!(t.altruistic > t.prosocial && t.prosocial > t.individualistic)) {
    problems.push_back("category thresholds must be strictly decreasing");
  }
  return problems;
}

Instrument instrument_from_json(const nlohmann::json& j) {
  Instrument instrument;
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    instrument.thresholds = {t.at("altruistic").get<double>(), t.at("prosocial").get<double>(),
                             t.at("individualistic").get<double>()};
  }
  for (const auto& it : j.at("items")) {
    SliderItem item;
    item.id = it.at("id").get<std::string>();
    const auto kind = it.at("kind").get<std::string>();
    if (kind != "primary" && kind != "secondary") {
      throw Error(ErrorCode::MalformedPayload, "item kind must be primary or secondary", item.id);
    }
    item.kind = kind == "primary" ? ItemKind::Primary : ItemKind::Secondary;
    item.a = payoff_from_json(it.at("a"));
    item.b = payoff_from_json(it.at("b"));
    if (it.contains("ideal_equality")) item.ideal_equality = payoff_from_json(it["ideal_equality"]);
    if (it.contains("ideal_jointgain")) item.ideal_jointgain = payoff_from_json(it["ideal_jointgain"]);
    instrument.items.push_back(std::move(item));
  }
  if (const auto problems = validate_instrument(instrument); !problems.empty()) {
    throw Error(ErrorCode::ValidationFailure, "invalid SVO instrument: " + problems.front());
  }
  return instrument;
}

Instrument load_instrument(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open item catalog " + path.string());
  return instrument_from_json(nlohmann::json::parse(in));
}

Instrument default_instrument() { return load_instrument(std::filesystem::path(DUALLOOP_DATA_DIR) / "svo_items.json"); }

double angle_from_means(double mean_self, double mean_other) {
  double degrees = std::atan2(mean_other - kReference, mean_self - kReference) * 180.0 / std::numbers::pi;
  if (degrees <= -180.0) degrees += 360.0;
  return degrees;
}

PrimaryScore score_primary(const Instrument& instrument, std::span<const SliderResponse> responses) {
  const auto by_item = collect(instrument, responses, ItemKind::Primary);
  PrimaryScore score;
  for (const auto& [id, position] : by_item) {
    const Payoff p = instrument.find(id)->at(position);
    score.mean_self += p.self;
    score.mean_other += p.other;
  }
  score.mean_self /= static_cast<double>(by_item.size());
  score.mean_other /= static_cast<double>(by_item.size());
  score.angle = angle_from_means(score.mean_self, score.mean_other);
  return score;
}

Category classify(double angle, const Thresholds& thresholds) {
  if (angle > thresholds.altruistic) return Category::Altruistic;
  if (angle > thresholds.prosocial) return Category::Prosocial;
  if (angle > thresholds.individualistic) return Category::Individualistic;
  return Category::Competitive;
}

double score_secondary(const Instrument& instrument, std::span<const SliderResponse> responses) {
  const auto by_item = collect(instrument, responses, ItemKind::Secondary);
  if (by_item.empty()) throw Error(ErrorCode::MissingItem, "instrument has no secondary items");
  double to_equality = 0.0;
  double to_jointgain = 0.0;
  for (const auto& [id, position] : by_item) {
    const auto* item = instrument.find(id);
    const Payoff chosen = item->at(position);
    to_equality += distance(chosen, *item->ideal_equality);
    to_jointgain += distance(chosen, *item->ideal_jointgain);
  }
  if (to_equality + to_jointgain == 0.0) {
    throw Error(ErrorCode::DegenerateItem, "equality index undefined: both distance sums are zero");
  }
  return to_jointgain / (to_equality + to_jointgain);
}

SvoResult score(const Instrument& instrument, const std::string& participant,
                std::span<const SliderResponse> responses) {
  const auto primary = score_primary(instrument, responses);
  SvoResult result;
  result.participant = participant;
  result.mean_self = primary.mean_self;
  result.mean_other = primary.mean_other;
  result.angle = primary.angle;
  result.category = classify(primary.angle, instrument.thresholds);
  const bool any_secondary = std::any_of(responses.begin(), responses.end(), [&](const SliderResponse& r) {
    const auto* item = instrument.find(r.item);
    return item && item->kind == ItemKind::Secondary;
  });
  if (any_secondary) result.equality_index = score_secondary(instrument, responses);
  return result;
}

Questionnaire::Questionnaire(Instrument instrument, std::string participant)
    : instrument_(std::move(instrument)), participant_(std::move(participant)) {}

void Questionnaire::require_consent() const {
  if (!consent_at_) throw Error(ErrorCode::ConsentMissing, "consent has not been recorded for " + participant_);
}

void Questionnaire::record_consent(std::string timestamp) {
  consent_at_ = timestamp.empty() ? utc_timestamp() : std::move(timestamp);
}

void Questionnaire::complete_practice(std::span<const SliderResponse> practice) {
  require_consent();
  for (const auto& r : practice) {
    if (!std::isfinite(r.position) || r.position < 0.0 || r.position > 1.0) {
      throw Error(ErrorCode::OutOfRange, "practice position must lie in [0, 1]");
    }
  }
  practice_done_ = true;
}

std::vector<SliderItem> Questionnaire::items() const {
  require_consent();
  return instrument_.items;
}

void Questionnaire::respond(const SliderResponse& response) {
  require_consent();
  if (!practice_done_) {
    throw Error(ErrorCode::IllegalTransition, "practice must be completed before responses are accepted");
  }
  if (!instrument_.find(response.item)) {
    throw Error(ErrorCode::MalformedPayload, "unknown item '" + response.item + "'", response.item);
  }
  if (!std::isfinite(response.position) || response.position < 0.0 || response.position > 1.0) {
    throw Error(ErrorCode::OutOfRange, "position for '" + response.item + "' must lie in [0, 1]", response.item);
  }
  responses_[response.item] = response.position;
}

SvoResult Questionnaire::finish(std::string timestamp) {
  require_consent();
  std::vector<SliderResponse> all;
  for (const auto& item : instrument_.items) {
    const auto it = responses_.find(item.id);
    if (it == responses_.end()) {
      throw Error(ErrorCode::IncompleteResponses,
                  std::to_string(instrument_.items.size() - responses_.size()) + " item(s) unanswered, first '" +
                      item.id + "'",
                  item.id);
    }
    all.push_back({item.id, it->second});
  }
  SvoResult result = score(instrument_, participant_, all);
  result.started_at = *consent_at_;
  result.completed_at = timestamp.empty() ? utc_timestamp() : std::move(timestamp);
  return result;
}

void ResultStore::put(const SvoResult& result) { results_[result.participant] = result; }

const SvoResult& ResultStore::get(const std::string& participant) const {
  const auto it = results_.find(participant);
  if (it == results_.end()) throw Error(ErrorCode::NotFound, "no SVO result for '" + participant + "'", participant);
  return it->second;
}

std::map<std::string, std::vector<SliderResponse>> responses_from_csv(std::string_view text) {
  std::map<std::string, std::vector<SliderResponse>> out;
  bool first = true;
  for (const auto& row : csv::parse(text)) {
    if (first && !row.empty() && row[0] == "participant") {
      first = false;
      continue;
    }
    first = false;
    if (row.size() != 3) throw Error(ErrorCode::MalformedPayload, "expected participant,item_id,position");
    double position = 0.0;
    try {
      std::size_t used = 0;
      position = std::stod(row[2], &used);
      if (used != row[2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedPayload, "position '" + row[2] + "' is not a number");
    }
    out[row[0]].push_back({row[1], position});
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void to_json(nlohmann::json& j, const SliderItem& item) {
  j = {{"id", item.id},
       {"kind", item.kind == ItemKind::Primary ? "primary" : "secondary"},
       {"a", payoff_to_json(item.a)},
       {"b", payoff_to_json(item.b)}};
  if (item.ideal_equality) j["ideal_equality"] = payoff_to_json(*item.ideal_equality);
  if (item.ideal_jointgain) j["ideal_jointgain"] = payoff_to_json(*item.ideal_jointgain);
}

void to_json(nlohmann::json& j, const SvoResult& r) {
  j = {{"participant", r.participant},
       {"mean_self", r.mean_self},
       {"mean_other", r.mean_other},
       {"angle", r.angle},
       {"category", std::string(to_string(r.category))},
       {"equality_index", r.equality_index ? nlohmann::json(*r.equality_index) : nlohmann::json(nullptr)},
       {"equality_index_orientation", "1 = equality-oriented, 0 = joint-gain-oriented"},
       {"started_at", r.started_at},
       {"completed_at", r.completed_at}};
}

void from_json(const nlohmann::json& j, SvoResult& r) {
  r.participant = j.at("participant").get<std::string>();
  r.mean_self = j.at("mean_self").get<double>();
  r.mean_other = j.at("mean_other").get<double>();
  r.angle = j.at("angle").get<double>();
  const auto category = category_from_string(j.at("category").get<std::string>());
  if (!category) throw Error(ErrorCode::MalformedPayload, "unknown SVO category");
  r.category = *category;
  r.equality_index.reset();
  if (j.contains("equality_index") && !j["equality_index"].is_null()) {
    r.equality_index = j["equality_index"].get<double>();
  }
  r.started_at = j.value("started_at", std::string{});
  r.completed_at = j.value("completed_at", std::string{});
}

}  // namespace dualloop::svo
