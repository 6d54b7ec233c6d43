#include "dualloop/session.hpp"

#include "dualloop/error.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace dualloop::consensus {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::array<std::pair<Phase, std::string_view>, 7> kPhaseNames{{
    {Phase::IssueSetting, "IssueSetting"},
    {Phase::PreferenceCollection, "PreferenceCollection"},
    {Phase::Analysis, "Analysis"},
    {Phase::Facilitation, "Facilitation"},
    {Phase::ApprovalRound, "ApprovalRound"},
    {Phase::Consensus, "Consensus"},
    {Phase::Modified, "Modified"},
}};

[[noreturn]] void illegal(Phase phase, const SessionEvent& e, const std::string& why = {}) {
  std::string msg = std::string(event_name(e)) + " is not allowed in phase " + std::string(to_string(phase));
  if (!why.empty()) msg += " (" + why + ")";
  throw Error(ErrorCode::IllegalTransition, msg, std::string(to_string(phase)) + ":" + std::string(event_name(e)));
}

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ValidationFailure, msg); }

void require_phase(const SessionState& s, Phase expected, const SessionEvent& e) {
  if (s.phase != expected) illegal(s.phase, e);
}

void check_choices(const ChoiceSet& choices) {
  if (const auto problems = validate_choice_set(choices); !problems.empty()) {
    invalid("invalid choice set: " + problems.front());
  }
}

bool is_participant(const SessionState& s, const std::string& id) {
  return std::find(s.participants.begin(), s.participants.end(), id) != s.participants.end();
}

}  // namespace

std::string_view to_string(Phase p) noexcept {
  for (const auto& [phase, name] : kPhaseNames) {
    if (phase == p) return name;
  }
  return "?";
}

std::optional<Phase> phase_from_string(std::string_view text) noexcept {
  for (const auto& [phase, name] : kPhaseNames) {
    if (name == text) return phase;
  }
  return std::nullopt;
}

std::string_view to_string(Approval a) noexcept { return a == Approval::Approve ? "Approve" : "Reject"; }

std::string_view event_name(const SessionEvent& e) noexcept {
  return std::visit(overloaded{
                        [](const event::FinalizeIssue&) { return std::string_view("finalize_issue"); },
                        [](const event::SubmitProfile&) { return std::string_view("submit_profile"); },
                        [](const event::BeginAnalysis&) { return std::string_view("begin_analysis"); },
                        [](const event::ComputeProposals&) { return std::string_view("compute_proposals"); },
                        [](const event::CallQuestion&) { return std::string_view("call_question"); },
                        [](const event::CastApproval&) { return std::string_view("cast_approval"); },
                        [](const event::ReviseChoices&) { return std::string_view("revise_choices"); },
                        [](const event::PostMessage&) { return std::string_view("post_message"); },
                    },
                    e);
}

std::vector<PreferenceProfile> SessionState::profile_list() const {
  std::vector<PreferenceProfile> out;
  for (const auto& id : participants) {
    if (const auto it = profiles.find(id); it != profiles.end()) out.push_back(it->second);
  }
  return out;
}

SessionState session_step(const SessionState& state, const SessionEvent& e) {
  SessionState next = state;
  std::visit(
      overloaded{
          [&](const event::FinalizeIssue& ev) {
            require_phase(state, Phase::IssueSetting, e);
            check_choices(ev.choices);
            if (ev.participants.empty()) invalid("an issue needs at least one participant");
            if (std::set<std::string>(ev.participants.begin(), ev.participants.end()).size() !=
                ev.participants.size()) {
              invalid("participant ids must be unique");
            }
            next.title = ev.title;
            next.choices = ev.choices;
            next.participants = ev.participants;
            next.phase = Phase::PreferenceCollection;
          },
          [&](const event::SubmitProfile& ev) {
            require_phase(state, Phase::PreferenceCollection, e);
            if (!is_participant(state, ev.profile.participant)) {
              invalid("'" + ev.profile.participant + "' is not a participant of this session");
            }
            if (const auto problems = validate_profile(ev.profile, state.choices); !problems.empty()) {
              invalid("profile of '" + ev.profile.participant + "': " + problems.front());
            }
            next.profiles[ev.profile.participant] = ev.profile;
          },
          [&](const event::BeginAnalysis& ev) {
            require_phase(state, Phase::PreferenceCollection, e);
            const bool complete = state.profiles.size() == state.participants.size();
            if (!complete && !ev.facilitator_close) illegal(state.phase, e, "profiles outstanding");
            if (state.profiles.empty()) illegal(state.phase, e, "no profiles submitted");
            next.phase = Phase::Analysis;
          },
          [&](const event::ComputeProposals& ev) {
            require_phase(state, Phase::Analysis, e);
            next.proposals = analyze(state.profile_list(), state.choices, ev.options);
            next.phase = Phase::Facilitation;
          },
          [&](const event::CallQuestion& ev) {
            require_phase(state, Phase::Facilitation, e);
            if (!state.choices.find(ev.choice)) invalid("unknown choice '" + ev.choice + "'");
            next.question = ev.choice;
            next.approvals.clear();
            next.phase = Phase::ApprovalRound;
          },
          [&](const event::CastApproval& ev) {
            require_phase(state, Phase::ApprovalRound, e);
            if (!is_participant(state, ev.participant)) {
              invalid("'" + ev.participant + "' is not a participant of this session");
            }
            next.approvals[ev.participant] = ev.decision;
            if (next.approvals.size() == next.participants.size()) {
              const bool any_reject = std::any_of(next.approvals.begin(), next.approvals.end(),
                                                  [](const auto& kv) { return kv.second == Approval::Reject; });
              next.phase = any_reject ? Phase::Modified : Phase::Consensus;
            }
          },
          [&](const event::ReviseChoices& ev) {
            require_phase(state, Phase::Modified, e);
            check_choices(ev.choices);
            next.choices = ev.choices;
            next.profiles.clear();
            next.proposals.reset();
            next.question.reset();
            next.approvals.clear();
            next.phase = Phase::PreferenceCollection;
          },
          [&](const event::PostMessage& ev) {
            if (ev.text.empty()) invalid("message text is empty");
          },
      },
      e);
  next.history.push_back(e);
  return next;
}

SessionState replay(const std::vector<SessionEvent>& events) {
  SessionState state;
  for (const auto& e : events) state = session_step(state, e);
  return state;
}

nlohmann::json to_json(const SessionEvent& e) {
  nlohmann::json j = std::visit(
      overloaded{
          [](const event::FinalizeIssue& ev) -> nlohmann::json {
            return {{"title", ev.title}, {"choices", ev.choices}, {"participants", ev.participants}};
          },
          [](const event::SubmitProfile& ev) -> nlohmann::json { return {{"profile", ev.profile}}; },
          [](const event::BeginAnalysis& ev) -> nlohmann::json {
            return {{"facilitator_close", ev.facilitator_close}};
          },
          [](const event::ComputeProposals& ev) -> nlohmann::json {
            return {{"exhaustive_limit", ev.options.exhaustive_limit},
                    {"selection", std::string(to_string(ev.options.selection))}};
          },
          [](const event::CallQuestion& ev) -> nlohmann::json { return {{"choice", ev.choice}}; },
          [](const event::CastApproval& ev) -> nlohmann::json {
            return {{"participant", ev.participant}, {"decision", std::string(to_string(ev.decision))}};
          },
          [](const event::ReviseChoices& ev) -> nlohmann::json { return {{"choices", ev.choices}}; },
          [](const event::PostMessage& ev) -> nlohmann::json {
            return {{"author", ev.author}, {"text", ev.text}};
          },
      },
      e);
  j["type"] = std::string(event_name(e));
  return j;
}

SessionEvent event_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "finalize_issue") {
    return event::FinalizeIssue{j.value("title", std::string{}), j.at("choices").get<ChoiceSet>(),
                                j.at("participants").get<std::vector<std::string>>()};
  }
  if (type == "submit_profile") return event::SubmitProfile{j.at("profile").get<PreferenceProfile>()};
  if (type == "begin_analysis") return event::BeginAnalysis{j.value("facilitator_close", false)};
  if (type == "compute_proposals") {
    AnalysisOptions options;
    options.exhaustive_limit = j.value("exhaustive_limit", kDefaultExhaustiveLimit);
    const auto sel = factor_selection_from_string(j.value("selection", std::string("top-k")));
    if (!sel) throw Error(ErrorCode::MalformedPayload, "unknown factor selection mode");
    options.selection = *sel;
    return event::ComputeProposals{options};
  }
  if (type == "call_question") return event::CallQuestion{j.at("choice").get<ChoiceId>()};
  if (type == "cast_approval") {
    const auto decision = j.at("decision").get<std::string>();
    if (decision != "Approve" && decision != "Reject") {
      throw Error(ErrorCode::MalformedPayload, "decision must be Approve or Reject");
    }
    return event::CastApproval{j.at("participant").get<std::string>(),
                               decision == "Approve" ? Approval::Approve : Approval::Reject};
  }
  if (type == "revise_choices") return event::ReviseChoices{j.at("choices").get<ChoiceSet>()};
  if (type == "post_message") {
    return event::PostMessage{j.value("author", std::string{}), j.at("text").get<std::string>()};
  }
  throw Error(ErrorCode::MalformedPayload, "unknown session event type '" + type + "'");
}

nlohmann::json to_json(const SessionState& s, bool with_history) {
  nlohmann::json j = {{"phase", std::string(to_string(s.phase))},
                      {"title", s.title},
                      {"choices", s.choices},
                      {"participants", s.participants},
                      {"profiles", nlohmann::json::object()},
                      {"proposals", s.proposals ? nlohmann::json(*s.proposals) : nlohmann::json(nullptr)},
                      {"question", s.question ? nlohmann::json(*s.question) : nlohmann::json(nullptr)},
                      {"approvals", nlohmann::json::object()},
                      {"version", s.version()}};
  for (const auto& [id, p] : s.profiles) j["profiles"][id] = p;
  for (const auto& [id, a] : s.approvals) j["approvals"][id] = std::string(to_string(a));
  if (with_history) {
    j["history"] = nlohmann::json::array();
    for (const auto& e : s.history) j["history"].push_back(to_json(e));
  }
  return j;
}

nlohmann::json results_json(const SessionState& s) {
  nlohmann::json j = to_json(s, true);
  j["dispersion"] = dispersion(s.profile_list());
  return j;
}

}  // namespace dualloop::consensus
