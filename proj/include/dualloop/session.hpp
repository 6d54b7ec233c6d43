#pragma once

#include "dualloop/consensus.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dualloop::consensus {

// Facilitation loop:
//   IssueSetting -> PreferenceCollection -> Analysis -> Facilitation
//   -> ApprovalRound -> Consensus | Modified -> PreferenceCollection ...
enum class Phase { IssueSetting, PreferenceCollection, Analysis, Facilitation, ApprovalRound, Consensus, Modified };

std::string_view to_string(Phase p) noexcept;
std::optional<Phase> phase_from_string(std::string_view text) noexcept;

enum class Approval { Approve, Reject };

std::string_view to_string(Approval a) noexcept;

namespace event {
struct FinalizeIssue {
  std::string title;
  ChoiceSet choices;
  std::vector<std::string> participants;
};
struct SubmitProfile {
  PreferenceProfile profile;
};
// Moves to analysis once every participant has submitted, or earlier when
// the facilitator closes collection.
struct BeginAnalysis {
  bool facilitator_close = false;
};
struct ComputeProposals {
  AnalysisOptions options;
};
// The facilitator presents a single choice for approval.
struct CallQuestion {
  ChoiceId choice;
};
struct CastApproval {
  std::string participant;
  Approval decision = Approval::Approve;
};
struct ReviseChoices {
  ChoiceSet choices;
};
struct PostMessage {
  std::string author;
  std::string text;
};
}  // namespace event

using SessionEvent = std::variant<event::FinalizeIssue, event::SubmitProfile, event::BeginAnalysis,
                                  event::ComputeProposals, event::CallQuestion, event::CastApproval,
                                  event::ReviseChoices, event::PostMessage>;

std::string_view event_name(const SessionEvent& e) noexcept;

struct SessionState {
  Phase phase = Phase::IssueSetting;
  std::string title;
  ChoiceSet choices;
  std::vector<std::string> participants;
  std::map<std::string, PreferenceProfile> profiles;
  std::optional<ConsensusProposals> proposals;
  std::optional<ChoiceId> question;
  std::map<std::string, Approval> approvals;
  std::vector<SessionEvent> history;  // append-only

  std::size_t version() const noexcept { return history.size(); }
  std::vector<PreferenceProfile> profile_list() const;
};

// Pure transition function. Throws IllegalTransition (detail
// "<phase>:<event>") for events the current phase does not accept and
// ValidationFailure for malformed payloads of legal events.
SessionState session_step(const SessionState& state, const SessionEvent& e);

// Folds `events` from a fresh session.
SessionState replay(const std::vector<SessionEvent>& events);

nlohmann::json to_json(const SessionEvent& e);
SessionEvent event_from_json(const nlohmann::json& j);

// Snapshot without history unless `with_history`.
nlohmann::json to_json(const SessionState& s, bool with_history = false);

// Export of preferences, the three proposals and the full event log.
nlohmann::json results_json(const SessionState& s);

}  // namespace dualloop::consensus
