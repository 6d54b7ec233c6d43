#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dualloop::svo {

struct Payoff {
  double self = 0.0;
  double other = 0.0;

  bool operator==(const Payoff&) const = default;
};

enum class ItemKind { Primary, Secondary };

struct SliderItem {
  std::string id;
  ItemKind kind = ItemKind::Primary;
  Payoff a;
  Payoff b;
  std::optional<Payoff> ideal_equality;   // secondary items only
  std::optional<Payoff> ideal_jointgain;  // secondary items only

  // Allocation at slider position t in [0, 1], linear between a and b.
  Payoff at(double t) const;
};

struct SliderResponse {
  std::string item;
  double position = 0.0;
};

enum class Category { Altruistic, Prosocial, Individualistic, Competitive };

std::string_view to_string(Category c) noexcept;
std::optional<Category> category_from_string(std::string_view text) noexcept;

// Lower bounds (exclusive) of each band, in degrees.
struct Thresholds {
  double altruistic = 57.15;
  double prosocial = 22.45;
  double individualistic = -12.04;
};

struct Instrument {
  std::vector<SliderItem> items;
  Thresholds thresholds;

  std::vector<const SliderItem*> of_kind(ItemKind kind) const;
  const SliderItem* find(std::string_view id) const;
};

std::vector<std::string> validate_instrument(const Instrument& instrument);
Instrument instrument_from_json(const nlohmann::json& j);
Instrument load_instrument(const std::filesystem::path& path);
// The shipped item catalog under the data directory.
Instrument default_instrument();

struct PrimaryScore {
  double mean_self = 0.0;
  double mean_other = 0.0;
  double angle = 0.0;  // degrees, in (-180, 180]
};

// atan2(other - 50, self - 50) in degrees.
double angle_from_means(double mean_self, double mean_other);

PrimaryScore score_primary(const Instrument& instrument, std::span<const SliderResponse> responses);
Category classify(double angle, const Thresholds& thresholds = {});
double score_secondary(const Instrument& instrument, std::span<const SliderResponse> responses);

struct SvoResult {
  std::string participant;
  double mean_self = 0.0;
  double mean_other = 0.0;
  double angle = 0.0;
  Category category = Category::Individualistic;
  std::optional<double> equality_index;
  std::string started_at;
  std::string completed_at;
};

// Scores a full response set. Secondary scoring runs only when at least one
// secondary item was answered, and then requires all of them.
SvoResult score(const Instrument& instrument, const std::string& participant,
                std::span<const SliderResponse> responses);

// Consent -> practice -> responses -> result.
class Questionnaire {
 public:
  Questionnaire(Instrument instrument, std::string participant);

  void record_consent(std::string timestamp = {});
  bool has_consent() const noexcept { return consent_at_.has_value(); }
  // Practice answers are checked for shape and then discarded.
  void complete_practice(std::span<const SliderResponse> practice = {});
  bool practice_done() const noexcept { return practice_done_; }

  // Items to serve; throws ConsentMissing before consent.
  std::vector<SliderItem> items() const;
  void respond(const SliderResponse& response);
  std::size_t answered() const noexcept { return responses_.size(); }

  // Throws IncompleteResponses unless every item has an answer.
  SvoResult finish(std::string timestamp = {});

  const std::string& participant() const noexcept { return participant_; }

 private:
  void require_consent() const;

  Instrument instrument_;
  std::string participant_;
  std::optional<std::string> consent_at_;
  bool practice_done_ = false;
  std::map<std::string, double> responses_;
};

class ResultStore {
 public:
  void put(const SvoResult& result);
  const SvoResult& get(const std::string& participant) const;  // throws NotFound
  bool contains(const std::string& participant) const { return results_.count(participant) != 0; }
  const std::map<std::string, SvoResult>& all() const noexcept { return results_; }

 private:
  std::map<std::string, SvoResult> results_;
};

// Parses batch CSV rows `participant,item_id,position` (header optional).
std::map<std::string, std::vector<SliderResponse>> responses_from_csv(std::string_view text);

std::string utc_timestamp();

void to_json(nlohmann::json& j, const SliderItem& item);
void to_json(nlohmann::json& j, const SvoResult& r);
void from_json(const nlohmann::json& j, SvoResult& r);

}  // namespace dualloop::svo
