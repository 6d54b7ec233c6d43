#pragma once

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dualloop::consensus {

using ChoiceId = std::string;
using FactorId = std::string;
using Ranking = std::vector<ChoiceId>;

struct Choice {
  ChoiceId id;
  std::string label;
  std::set<FactorId> factors;

  bool operator==(const Choice&) const = default;
};

struct ChoiceSet {
  std::vector<Choice> choices;
  std::map<FactorId, std::string> factors;

  bool operator==(const ChoiceSet&) const = default;
  std::set<ChoiceId> ids() const;
  const Choice* find(const ChoiceId& id) const;
};

std::vector<std::string> validate_choice_set(const ChoiceSet& set);

struct PreferenceProfile {
  std::string participant;
  Ranking order;                                   // most preferred first
  std::size_t permissible_k = 1;                   // acceptable top-k prefix
  std::map<FactorId, double> factor_importance;    // each in [0, 1]

  bool operator==(const PreferenceProfile&) const = default;
};

// Empty when `profile` is a well-formed profile over `choices`.
std::vector<std::string> validate_profile(const PreferenceProfile& profile, const ChoiceSet& choices);

// Number of discordant pairs, i.e. the minimum number of adjacent
// transpositions turning `a` into `b`. Throws MismatchedDomains.
std::size_t kendall_tau(const Ranking& a, const Ranking& b);

struct PermissibleResult {
  ChoiceId choice;
  std::size_t widening_cost = 0;
  std::map<ChoiceId, std::size_t> costs;
  std::map<ChoiceId, std::size_t> rank_sums;
};

// Choice needing the fewest total widenings of the participants' top-k
// permissible prefixes. Ties: lower rank sum, then ascending id.
PermissibleResult permissible_meeting(const std::vector<PreferenceProfile>& profiles);

inline constexpr std::size_t kDefaultExhaustiveLimit = 8;

struct CompromiseResult {
  Ranking ranking;
  ChoiceId top;
  std::map<std::string, std::size_t> distances;  // per participant
  std::size_t total = 0;
  std::size_t max = 0;
  bool approximate = false;
};

// Ranking minimizing (total Kendall distance, max per-participant distance,
// lexicographic order). Exact enumeration for up to `exhaustive_limit`
// choices; beyond that an insertion local search flagged approximate.
CompromiseResult compromise_exploration(const std::vector<PreferenceProfile>& profiles,
                                        std::size_t exhaustive_limit = kDefaultExhaustiveLimit);

enum class FactorSelection { TopK, AboveMean };

std::string_view to_string(FactorSelection s) noexcept;
std::optional<FactorSelection> factor_selection_from_string(std::string_view text) noexcept;

struct SublatedResult {
  std::map<FactorId, double> factor_scores;
  std::vector<FactorId> selected;  // by descending score, ties by id
  std::string label;
  std::size_t k = 0;               // used by TopK
};

// Borda weight of a rank (1-based) among m choices: m - rank + 1.
inline double borda_weight(std::size_t m, std::size_t rank) { return static_cast<double>(m - rank + 1); }

SublatedResult sublated_creation(const std::vector<PreferenceProfile>& profiles, const ChoiceSet& choices,
                                 FactorSelection selection = FactorSelection::TopK);

struct ConsensusProposals {
  PermissibleResult permissible;
  CompromiseResult compromise;
  SublatedResult sublated;
};

struct AnalysisOptions {
  std::size_t exhaustive_limit = kDefaultExhaustiveLimit;
  FactorSelection selection = FactorSelection::TopK;
};

ConsensusProposals analyze(const std::vector<PreferenceProfile>& profiles, const ChoiceSet& choices,
                           const AnalysisOptions& options = {});

// Mean pairwise Kendall distance divided by its maximum m(m-1)/2; 0 when
// fewer than two profiles.
double dispersion(const std::vector<PreferenceProfile>& profiles);

void to_json(nlohmann::json& j, const Choice& c);
void from_json(const nlohmann::json& j, Choice& c);
void to_json(nlohmann::json& j, const ChoiceSet& s);
void from_json(const nlohmann::json& j, ChoiceSet& s);
void to_json(nlohmann::json& j, const PreferenceProfile& p);
void from_json(const nlohmann::json& j, PreferenceProfile& p);
void to_json(nlohmann::json& j, const PermissibleResult& r);
void from_json(const nlohmann::json& j, PermissibleResult& r);
void to_json(nlohmann::json& j, const CompromiseResult& r);
void from_json(const nlohmann::json& j, CompromiseResult& r);
void to_json(nlohmann::json& j, const SublatedResult& r);
void from_json(const nlohmann::json& j, SublatedResult& r);
void to_json(nlohmann::json& j, const ConsensusProposals& p);
void from_json(const nlohmann::json& j, ConsensusProposals& p);

}  // namespace dualloop::consensus
