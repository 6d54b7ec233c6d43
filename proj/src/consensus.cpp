#include "dualloop/consensus.hpp"

#include "dualloop/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace dualloop::consensus {

namespace {

// Rankings as index permutations over the sorted choice ids.
struct IndexedProfiles {
  std::vector<ChoiceId> ids;                        // sorted
  std::vector<std::vector<std::size_t>> positions;  // positions[p][choice] = 0-based rank
};

std::set<ChoiceId> as_domain(const Ranking& r, const char* what) {
  std::set<ChoiceId> domain(r.begin(), r.end());
  if (domain.size() != r.size()) {
    throw Error(ErrorCode::MismatchedDomains, std::string(what) + " contains a repeated choice");
  }
  return domain;
}

IndexedProfiles index_profiles(const std::vector<PreferenceProfile>& profiles) {
  if (profiles.empty()) throw Error(ErrorCode::EmptyProfiles, "no preference profiles");
  const auto domain = as_domain(profiles.front().order, "preference order");
  IndexedProfiles out;
  out.ids.assign(domain.begin(), domain.end());
  for (const auto& p : profiles) {
    if (as_domain(p.order, "preference order") != domain) {
      throw Error(ErrorCode::MismatchedDomains,
                  "profile of '" + p.participant + "' ranks a different set of choices", p.participant);
    }
    std::vector<std::size_t> pos(out.ids.size());
    for (std::size_t r = 0; r < p.order.size(); ++r) {
      const auto idx = static_cast<std::size_t>(
          std::lower_bound(out.ids.begin(), out.ids.end(), p.order[r]) - out.ids.begin());
      pos[idx] = r;
    }
    out.positions.push_back(std::move(pos));
  }
  return out;
}

std::size_t discordant(const std::vector<std::size_t>& ranking, const std::vector<std::size_t>& positions) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    for (std::size_t j = i + 1; j < ranking.size(); ++j) {
      if (positions[ranking[i]] > positions[ranking[j]]) ++count;
    }
  }
  return count;
}

struct Objective {
  std::size_t total = 0;
  std::size_t max = 0;
  std::vector<std::size_t> per_participant;
};

Objective score_ranking(const std::vector<std::size_t>& ranking, const IndexedProfiles& idx) {
  Objective o;
  for (const auto& pos : idx.positions) {
    const auto d = discordant(ranking, pos);
    o.per_participant.push_back(d);
    o.total += d;
    o.max = std::max(o.max, d);
  }
  return o;
}

// Lexicographic (total, max, ranking); rankings of indices into sorted ids
// compare in the same order as the id sequences they denote.
bool better(const Objective& a, const std::vector<std::size_t>& ra, const Objective& b,
            const std::vector<std::size_t>& rb) {
  return std::tie(a.total, a.max, ra) < std::tie(b.total, b.max, rb);
}

std::pair<std::vector<std::size_t>, Objective> exact_compromise(const IndexedProfiles& idx) {
  std::vector<std::size_t> perm(idx.ids.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  Objective best_obj = score_ranking(perm, idx);
  // next_permutation walks rankings in lexicographic order, so only a
  // strictly smaller (total, max) displaces the incumbent.
  while (std::next_permutation(perm.begin(), perm.end())) {
    std::size_t total = 0;
    std::size_t max = 0;
    bool pruned = false;
    for (const auto& pos : idx.positions) {
      const auto d = discordant(perm, pos);
      total += d;
      max = std::max(max, d);
      if (total > best_obj.total) {
        pruned = true;
        break;
      }
    }
    if (pruned) continue;
    if (std::tie(total, max) < std::tie(best_obj.total, best_obj.max)) {
      best = perm;
      best_obj = score_ranking(perm, idx);
    }
  }
  return {best, best_obj};
}

std::pair<std::vector<std::size_t>, Objective> local_search(std::vector<std::size_t> start,
                                                            const IndexedProfiles& idx) {
  Objective current = score_ranking(start, idx);
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t from = 0; from < start.size() && !improved; ++from) {
      for (std::size_t to = 0; to < start.size() && !improved; ++to) {
        if (from == to) continue;
        auto candidate = start;
        const auto moved = candidate[from];
        candidate.erase(candidate.begin() + static_cast<std::ptrdiff_t>(from));
        candidate.insert(candidate.begin() + static_cast<std::ptrdiff_t>(to), moved);
        auto obj = score_ranking(candidate, idx);
        if (better(obj, candidate, current, start)) {
          start = std::move(candidate);
          current = std::move(obj);
          improved = true;
        }
      }
    }
  }
  return {start, current};
}

std::pair<std::vector<std::size_t>, Objective> heuristic_compromise(const IndexedProfiles& idx) {
  const std::size_t m = idx.ids.size();
  std::vector<std::vector<std::size_t>> starts;

  std::vector<std::size_t> borda(m);
  std::iota(borda.begin(), borda.end(), 0);
  std::vector<std::size_t> rank_sum(m, 0);
  for (const auto& pos : idx.positions) {
    for (std::size_t c = 0; c < m; ++c) rank_sum[c] += pos[c];
  }
  std::stable_sort(borda.begin(), borda.end(), [&](auto a, auto b) { return rank_sum[a] < rank_sum[b]; });
  starts.push_back(borda);
  for (const auto& pos : idx.positions) {
    std::vector<std::size_t> order(m);
    for (std::size_t c = 0; c < m; ++c) order[pos[c]] = c;
    starts.push_back(std::move(order));
  }

  std::optional<std::pair<std::vector<std::size_t>, Objective>> best;
  for (auto& s : starts) {
    auto result = local_search(std::move(s), idx);
    if (!best || better(result.second, result.first, best->second, best->first)) best = std::move(result);
  }
  return *best;
}

std::size_t median_factor_count(const ChoiceSet& choices) {
  std::vector<std::size_t> counts;
  for (const auto& c : choices.choices) counts.push_back(c.factors.size());
  if (counts.empty()) return 1;
  std::sort(counts.begin(), counts.end());
  const std::size_t n = counts.size();
  if (n % 2 == 1) return counts[n / 2];
  // Even count: mean of the two middle values, rounded half up.
  return (counts[n / 2 - 1] + counts[n / 2] + 1) / 2;
}

}  // namespace

std::set<ChoiceId> ChoiceSet::ids() const {
  std::set<ChoiceId> out;
  for (const auto& c : choices) out.insert(c.id);
  return out;
}

const Choice* ChoiceSet::find(const ChoiceId& id) const {
  for (const auto& c : choices) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::vector<std::string> validate_choice_set(const ChoiceSet& set) {
  std::vector<std::string> problems;
  std::set<ChoiceId> seen;
  if (set.choices.empty()) problems.push_back("choice set is empty");
  for (const auto& c : set.choices) {
    if (c.id.empty()) problems.push_back("choice with empty id");
    if (!seen.insert(c.id).second) problems.push_back("duplicate choice id '" + c.id + "'");
    for (const auto& f : c.factors) {
      if (!set.factors.count(f)) problems.push_back("choice '" + c.id + "' references unknown factor '" + f + "'");
    }
  }
  return problems;
}

std::vector<std::string> validate_profile(const PreferenceProfile& profile, const ChoiceSet& choices) {
  std::vector<std::string> problems;
  if (profile.participant.empty()) problems.push_back("participant id is empty");
  const std::set<ChoiceId> order(profile.order.begin(), profile.order.end());
  if (order.size() != profile.order.size() || order != choices.ids()) {
    problems.push_back("order must be a permutation of the choice set");
  }
  if (profile.permissible_k < 1 || profile.permissible_k > choices.choices.size()) {
    problems.push_back("permissible_k must be between 1 and the number of choices");
  }
  for (const auto& [f, h] : profile.factor_importance) {
    if (!choices.factors.count(f)) problems.push_back("importance given for unknown factor '" + f + "'");
    if (!(h >= 0.0 && h <= 1.0)) problems.push_back("importance of '" + f + "' must lie in [0, 1]");
  }
  for (const auto& [f, label] : choices.factors) {
    if (!profile.factor_importance.count(f)) problems.push_back("missing importance for factor '" + f + "'");
  }
  return problems;
}

std::size_t kendall_tau(const Ranking& a, const Ranking& b) {
  if (as_domain(a, "ranking") != as_domain(b, "ranking")) {
    throw Error(ErrorCode::MismatchedDomains, "rankings are over different choices");
  }
  std::map<ChoiceId, std::size_t> pos_b;
  for (std::size_t i = 0; i < b.size(); ++i) pos_b[b[i]] = i;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (pos_b[a[i]] > pos_b[a[j]]) ++count;
    }
  }
  return count;
}

PermissibleResult permissible_meeting(const std::vector<PreferenceProfile>& profiles) {
  const auto idx = index_profiles(profiles);
  const std::size_t m = idx.ids.size();
  for (const auto& p : profiles) {
    if (p.permissible_k < 1 || p.permissible_k > m) {
      throw Error(ErrorCode::RangeError, "permissible_k of '" + p.participant + "' is out of range", p.participant);
    }
  }

  PermissibleResult result;
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t cost = 0;
    std::size_t rank_sum = 0;
    for (std::size_t p = 0; p < profiles.size(); ++p) {
      const std::size_t rank = idx.positions[p][c] + 1;
      rank_sum += rank;
      if (rank > profiles[p].permissible_k) cost += rank - profiles[p].permissible_k;
    }
    result.costs[idx.ids[c]] = cost;
    result.rank_sums[idx.ids[c]] = rank_sum;
    // Ids are visited in ascending order, so strict comparison keeps the
    // smallest id among full ties.
    if (!best || std::tie(cost, rank_sum) < std::tie(result.costs[idx.ids[*best]], result.rank_sums[idx.ids[*best]])) {
      best = c;
    }
  }
  result.choice = idx.ids[*best];
  result.widening_cost = result.costs[result.choice];
  return result;
}

CompromiseResult compromise_exploration(const std::vector<PreferenceProfile>& profiles,
                                        std::size_t exhaustive_limit) {
  const auto idx = index_profiles(profiles);
  const bool exact = idx.ids.size() <= exhaustive_limit;
  const auto [ranking, objective] = exact ? exact_compromise(idx) : heuristic_compromise(idx);

  CompromiseResult out;
  for (const auto c : ranking) out.ranking.push_back(idx.ids[c]);
  out.top = out.ranking.front();
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    out.distances[profiles[p].participant] = objective.per_participant[p];
  }
  out.total = objective.total;
  out.max = objective.max;
  out.approximate = !exact;
  return out;
}

std::string_view to_string(FactorSelection s) noexcept {
  return s == FactorSelection::TopK ? "top-k" : "above-mean";
}

std::optional<FactorSelection> factor_selection_from_string(std::string_view text) noexcept {
  if (text == "top-k") return FactorSelection::TopK;
  if (text == "above-mean") return FactorSelection::AboveMean;
  return std::nullopt;
}

SublatedResult sublated_creation(const std::vector<PreferenceProfile>& profiles, const ChoiceSet& choices,
                                 FactorSelection selection) {
  if (choices.factors.empty()) throw Error(ErrorCode::EmptyCatalog, "factor catalog is empty");
  if (const auto problems = validate_choice_set(choices); !problems.empty()) {
    throw Error(ErrorCode::MismatchedDomains, "invalid choice set: " + problems.front());
  }
  const auto idx = index_profiles(profiles);
  if (std::set<ChoiceId>(idx.ids.begin(), idx.ids.end()) != choices.ids()) {
    throw Error(ErrorCode::MismatchedDomains, "profiles rank a different set of choices than the issue");
  }
  for (const auto& p : profiles) {
    for (const auto& [f, label] : choices.factors) {
      if (!p.factor_importance.count(f)) {
        throw Error(ErrorCode::MismatchedDomains, "profile of '" + p.participant + "' has no importance for '" + f + "'",
                    p.participant);
      }
    }
    for (const auto& [f, h] : p.factor_importance) {
      if (!choices.factors.count(f)) {
        throw Error(ErrorCode::MismatchedDomains, "profile of '" + p.participant + "' rates unknown factor '" + f + "'",
                    p.participant);
      }
      if (!(h >= 0.0 && h <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, "importance of '" + f + "' for '" + p.participant + "' outside [0, 1]",
                    p.participant);
      }
    }
  }

  const std::size_t m = choices.choices.size();
  SublatedResult out;
  for (const auto& [f, label] : choices.factors) out.factor_scores[f] = 0.0;
  for (const auto& p : profiles) {
    for (std::size_t r = 0; r < p.order.size(); ++r) {
      const double weight = borda_weight(m, r + 1);
      for (const auto& f : choices.find(p.order[r])->factors) {
        out.factor_scores[f] += p.factor_importance.at(f) * weight;
      }
    }
  }

  std::vector<FactorId> ordered;
  for (const auto& [f, s] : out.factor_scores) ordered.push_back(f);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [&](const FactorId& a, const FactorId& b) { return out.factor_scores[a] > out.factor_scores[b]; });

  if (selection == FactorSelection::TopK) {
    out.k = std::clamp<std::size_t>(median_factor_count(choices), 1, ordered.size());
    out.selected.assign(ordered.begin(), ordered.begin() + static_cast<std::ptrdiff_t>(out.k));
  } else {
    double mean = 0.0;
    for (const auto& [f, s] : out.factor_scores) mean += s;
    mean /= static_cast<double>(out.factor_scores.size());
    for (const auto& f : ordered) {
      if (out.factor_scores[f] > mean) out.selected.push_back(f);
    }
  }
  for (const auto& f : out.selected) {
    out.label += (out.label.empty() ? "" : " + ") + choices.factors.at(f);
  }
  return out;
}

ConsensusProposals analyze(const std::vector<PreferenceProfile>& profiles, const ChoiceSet& choices,
                           const AnalysisOptions& options) {
  for (const auto& p : profiles) {
    if (const auto problems = validate_profile(p, choices); !problems.empty()) {
      throw Error(ErrorCode::MismatchedDomains, "profile of '" + p.participant + "': " + problems.front(),
                  p.participant);
    }
  }
  return {permissible_meeting(profiles), compromise_exploration(profiles, options.exhaustive_limit),
          sublated_creation(profiles, choices, options.selection)};
}

double dispersion(const std::vector<PreferenceProfile>& profiles) {
  if (profiles.size() < 2) return 0.0;
  const double m = static_cast<double>(profiles.front().order.size());
  const double max_distance = m * (m - 1.0) / 2.0;
  if (max_distance == 0.0) return 0.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      sum += static_cast<double>(kendall_tau(profiles[i].order, profiles[j].order));
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs) / max_distance;
}

void to_json(nlohmann::json& j, const Choice& c) {
  j = {{"id", c.id}, {"label", c.label}, {"factors", c.factors}};
}

void from_json(const nlohmann::json& j, Choice& c) {
  c.id = j.at("id").get<ChoiceId>();
  c.label = j.value("label", std::string{});
  c.factors = j.value("factors", std::set<FactorId>{});
}

void to_json(nlohmann::json& j, const ChoiceSet& s) { j = {{"choices", s.choices}, {"factors", s.factors}}; }

void from_json(const nlohmann::json& j, ChoiceSet& s) {
  s.choices = j.at("choices").get<std::vector<Choice>>();
  s.factors = j.value("factors", std::map<FactorId, std::string>{});
}

void to_json(nlohmann::json& j, const PreferenceProfile& p) {
  j = {{"participant", p.participant},
       {"order", p.order},
       {"permissible_k", p.permissible_k},
       {"factor_importance", p.factor_importance}};
}

void from_json(const nlohmann::json& j, PreferenceProfile& p) {
  p.participant = j.at("participant").get<std::string>();
  p.order = j.at("order").get<Ranking>();
  const auto k = j.at("permissible_k").get<long long>();
  if (k < 1) throw Error(ErrorCode::MalformedPayload, "permissible_k must be a positive integer");
  p.permissible_k = static_cast<std::size_t>(k);
  p.factor_importance = j.value("factor_importance", std::map<FactorId, double>{});
}

void to_json(nlohmann::json& j, const PermissibleResult& r) {
  j = {{"choice", r.choice}, {"widening_cost", r.widening_cost}, {"costs", r.costs}, {"rank_sums", r.rank_sums}};
}

void from_json(const nlohmann::json& j, PermissibleResult& r) {
  r.choice = j.at("choice").get<ChoiceId>();
  r.widening_cost = j.at("widening_cost").get<std::size_t>();
  r.costs = j.at("costs").get<std::map<ChoiceId, std::size_t>>();
  r.rank_sums = j.at("rank_sums").get<std::map<ChoiceId, std::size_t>>();
}

void to_json(nlohmann::json& j, const CompromiseResult& r) {
  j = {{"ranking", r.ranking}, {"top", r.top},         {"distances", r.distances},
       {"total", r.total},     {"max", r.max},         {"approximate", r.approximate}};
}

void from_json(const nlohmann::json& j, CompromiseResult& r) {
  r.ranking = j.at("ranking").get<Ranking>();
  r.top = j.at("top").get<ChoiceId>();
  r.distances = j.at("distances").get<std::map<std::string, std::size_t>>();
  r.total = j.at("total").get<std::size_t>();
  r.max = j.at("max").get<std::size_t>();
  r.approximate = j.at("approximate").get<bool>();
}

void to_json(nlohmann::json& j, const SublatedResult& r) {
  j = {{"factor_scores", r.factor_scores}, {"selected", r.selected}, {"label", r.label}, {"k", r.k}};
}

void from_json(const nlohmann::json& j, SublatedResult& r) {
  r.factor_scores = j.at("factor_scores").get<std::map<FactorId, double>>();
  r.selected = j.at("selected").get<std::vector<FactorId>>();
  r.label = j.at("label").get<std::string>();
  r.k = j.at("k").get<std::size_t>();
}

void to_json(nlohmann::json& j, const ConsensusProposals& p) {
  j = {{"permissible", p.permissible}, {"compromise", p.compromise}, {"sublated", p.sublated}};
}

void from_json(const nlohmann::json& j, ConsensusProposals& p) {
  p.permissible = j.at("permissible").get<PermissibleResult>();
  p.compromise = j.at("compromise").get<CompromiseResult>();
  p.sublated = j.at("sublated").get<SublatedResult>();
}

}  // namespace dualloop::consensus
