#include "dualloop/error.hpp"
#include "dualloop/mediator.hpp"

#include "motion_table.hpp"

#include <doctest.h>

using namespace dualloop;
using namespace dualloop::mediator;
using consensus::Phase;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::NotFound;
}

consensus::ChoiceSet choices() { return {{{"A", "A", {"f"}}, {"B", "B", {"f"}}, {"C", "C", {"f"}}}, {{"f", "F"}}}; }

consensus::PreferenceProfile prof(std::string who, consensus::Ranking order) {
  return {std::move(who), std::move(order), 1, {{"f", 1.0}}};
}

consensus::SessionState collecting(std::vector<consensus::PreferenceProfile> profiles) {
  auto s = consensus::session_step({}, consensus::event::FinalizeIssue{"t", choices(), {"p", "q", "r"}});
  for (auto& p : profiles) s = consensus::session_step(s, consensus::event::SubmitProfile{std::move(p)});
  return s;
}

}  // namespace

TEST_SUITE("mediator") {
  TEST_CASE("all 51 cells agree with the table") {
    const auto& table = default_motion_table();
    REQUIRE(table.rows.size() == 17);
    int defined = 0;
    for (int n = 1; n <= 17; ++n) {
      for (std::size_t r = 0; r < 3; ++r) {
        const auto role = kRoles[r];
        const std::string expected = fixture::kMotionTable[static_cast<std::size_t>(n - 1)][r];
        CAPTURE(n);
        CAPTURE(r);
        CHECK(table.defined(role, n) == !expected.empty());
        if (expected.empty()) {
          CHECK(code_of([&] { table.motion_for(role, n); }) == ErrorCode::UndefinedMotion);
        } else {
          ++defined;
          const auto m = table.motion_for(role, n);
          CHECK(m.name == expected);
          CHECK(m.number == n);
          CHECK(table.motion_for(role, expected).number == n);
        }
      }
    }
    CHECK(defined == 27);
  }

  TEST_CASE("lookup examples") {
    const auto& t = default_motion_table();
    CHECK(t.motion_for(Role::Facilitator, "Proposal").number == 3);
    CHECK(t.motion_for(Role::ParticipantGroup, "Scattered").number == 13);
    try {
      t.motion_for(Role::Facilitator, "Approval");
      FAIL("expected UndefinedMotion");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UndefinedMotion);
      CHECK(e.detail() == "Facilitator:Approval");
    }
    CHECK(code_of([&] { t.motion_for(Role::Facilitator, "Dance"); }) == ErrorCode::UnknownMotion);
    // Row 16 pairs Compromise with Consensus.
    CHECK(t.motion_for(Role::ParticipantGroup, "Compromise").name == "Consensus");
    CHECK(t.motion_for(Role::Participant, "Consensus").name == "Compromise");
  }

  TEST_CASE("default avatar styles") {
    const auto& t = default_motion_table();
    CHECK(t.motion_for(Role::Facilitator, 3).style == AvatarStyle::Chick);
    CHECK(t.motion_for(Role::Participant, 5).style == AvatarStyle::Humanoid);
    CHECK(t.motion_for(Role::ParticipantGroup, 13).style == AvatarStyle::Geometry);
  }

  TEST_CASE("fresh session shows the introduction") {
    const auto m = session_motions({});
    CHECK(m.at(Role::Facilitator).number == 2);
    CHECK(m.at(Role::Facilitator).name == "Introduction");
  }

  TEST_CASE("identical profiles are not scattered") {
    const auto s = collecting({prof("p", {"A", "B", "C"}), prof("q", {"A", "B", "C"}), prof("r", {"A", "B", "C"})});
    const auto m = session_motions(s);
    CHECK(m.count(Role::ParticipantGroup) == 0);
    CHECK(m.at(Role::Participant).number == 6);
  }

  TEST_CASE("opposed profiles are scattered") {
    const auto s = collecting({prof("p", {"A", "B", "C"}), prof("q", {"C", "B", "A"})});
    const auto m = session_motions(s);
    CHECK(m.at(Role::ParticipantGroup).number == 13);
    CHECK(m.at(Role::Participant).number == 5);
  }

  TEST_CASE("approval round and its outcomes") {
    auto s = collecting({prof("p", {"A", "B", "C"}), prof("q", {"A", "C", "B"}), prof("r", {"B", "A", "C"})});
    s = consensus::session_step(s, consensus::event::BeginAnalysis{});
    s = consensus::session_step(s, consensus::event::ComputeProposals{});
    s = consensus::session_step(s, consensus::event::CallQuestion{"A"});
    CHECK(session_motions(s).at(Role::Facilitator).number == 10);
    CHECK(session_motions(s).at(Role::Participant).number == 10);
    auto all_yes = s;
    for (const char* p : {"p", "q", "r"}) {
      all_yes = consensus::session_step(all_yes, consensus::event::CastApproval{p, consensus::Approval::Approve});
    }
    CHECK(all_yes.phase == Phase::Consensus);
    CHECK(session_motions(all_yes).at(Role::ParticipantGroup).number == 16);
    CHECK(session_motions(all_yes).at(Role::ParticipantGroup).name == "Consensus");

    auto split = s;
    split = consensus::session_step(split, consensus::event::CastApproval{"p", consensus::Approval::Reject});
    CHECK(session_motions(split).at(Role::Participant).number == 12);
    split = consensus::session_step(split, consensus::event::CastApproval{"q", consensus::Approval::Reject});
    split = consensus::session_step(split, consensus::event::CastApproval{"r", consensus::Approval::Approve});
    CHECK(split.phase == Phase::Modified);
    CHECK(session_motions(split).at(Role::ParticipantGroup).number == 15);
  }

  TEST_CASE("json shape") {
    const auto j = to_json(default_motion_table().motion_for(Role::ParticipantGroup, 16));
    CHECK(j.at("number") == 16);
    CHECK(j.at("name") == "Consensus");
    CHECK(j.at("role") == "ParticipantGroup");
    CHECK(j.at("avatar_style") == "Geometry");
  }
}
