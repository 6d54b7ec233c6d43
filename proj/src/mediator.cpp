#include "dualloop/mediator.hpp"

#include "dualloop/error.hpp"

#include <algorithm>
#include <fstream>

namespace dualloop::mediator {

namespace {

using consensus::Approval;
using consensus::Phase;

constexpr std::array<std::string_view, 3> kRoleNames{"Facilitator", "Participant", "ParticipantGroup"};
constexpr std::array<std::string_view, 3> kRoleKeys{"facilitator", "participant", "group"};
constexpr std::array<std::string_view, 3> kStyleNames{"Geometry", "Humanoid", "Chick"};

std::size_t index(Role r) { return static_cast<std::size_t>(r); }

std::optional<std::string> cell(const nlohmann::json& row, std::string_view key) {
  const auto it = row.find(std::string(key));
  if (it == row.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Role r) noexcept { return kRoleNames[index(r)]; }

std::optional<Role> role_from_string(std::string_view text) noexcept {
  for (const auto r : kRoles) {
    if (to_string(r) == text || kRoleKeys[index(r)] == text) return r;
  }
  return std::nullopt;
}

std::string_view to_string(AvatarStyle s) noexcept { return kStyleNames[static_cast<std::size_t>(s)]; }

std::optional<AvatarStyle> style_from_string(std::string_view text) noexcept {
  for (std::size_t i = 0; i < kStyleNames.size(); ++i) {
    if (kStyleNames[i] == text) return static_cast<AvatarStyle>(i);
  }
  return std::nullopt;
}

MotionCode MotionTable::motion_for(Role role, std::string_view name) const {
  for (const auto& row : rows) {
    const bool named = std::any_of(row.names.begin(), row.names.end(),
                                   [&](const std::optional<std::string>& n) { return n && *n == name; });
    if (!named) continue;
    const auto& own = row.names[index(role)];
    if (!own) {
      throw Error(ErrorCode::UndefinedMotion,
                  "motion '" + std::string(name) + "' is not defined for " + std::string(to_string(role)),
                  std::string(to_string(role)) + ":" + std::string(name));
    }
    return {row.number, *own, role, styles[index(role)]};
  }
  throw Error(ErrorCode::UnknownMotion, "unknown motion '" + std::string(name) + "'", std::string(name));
}

MotionCode MotionTable::motion_for(Role role, int number) const {
  for (const auto& row : rows) {
    if (row.number != number) continue;
    const auto& own = row.names[index(role)];
    if (!own) {
      throw Error(ErrorCode::UndefinedMotion,
                  "motion #" + std::to_string(number) + " is not defined for " + std::string(to_string(role)),
                  std::string(to_string(role)) + ":#" + std::to_string(number));
    }
    return {row.number, *own, role, styles[index(role)]};
  }
  throw Error(ErrorCode::UnknownMotion, "unknown motion #" + std::to_string(number));
}

bool MotionTable::defined(Role role, int number) const {
  return std::any_of(rows.begin(), rows.end(),
                     [&](const MotionRow& r) { return r.number == number && r.names[index(role)].has_value(); });
}

MotionTable motion_table_from_json(const nlohmann::json& j) {
  MotionTable table;
  if (j.contains("default_styles")) {
    for (const auto r : kRoles) {
      const auto style = style_from_string(j["default_styles"].at(std::string(kRoleKeys[index(r)])).get<std::string>());
      if (!style) throw Error(ErrorCode::MalformedPayload, "unknown avatar style");
      table.styles[index(r)] = *style;
    }
  }
  for (const auto& row : j.at("rows")) {
    MotionRow r;
    r.number = row.at("number").get<int>();
    for (const auto role : kRoles) r.names[index(role)] = cell(row, kRoleKeys[index(role)]);
    table.rows.push_back(std::move(r));
  }
  return table;
}

const MotionTable& default_motion_table() {
  static const MotionTable table = [] {
    const auto path = std::filesystem::path(DUALLOOP_DATA_DIR) / "motions.json";
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::NotFound, "cannot open motion table " + path.string());
    return motion_table_from_json(nlohmann::json::parse(in));
  }();
  return table;
}

std::map<Role, MotionCode> session_motions(const consensus::SessionState& state, const MotionSettings& settings,
                                           const MotionTable& table) {
  std::map<Role, MotionCode> out;
  const auto put = [&](Role role, int number) { out[role] = table.motion_for(role, number); };

  const auto profiles = state.profile_list();
  const double spread = consensus::dispersion(profiles);
  const bool scattered = profiles.size() >= 2 && spread > settings.dispersion_threshold;
  const auto rejects = static_cast<std::size_t>(std::count_if(
      state.approvals.begin(), state.approvals.end(), [](const auto& kv) { return kv.second == Approval::Reject; }));

  switch (state.phase) {
    case Phase::IssueSetting: put(Role::Facilitator, 2); break;
    case Phase::PreferenceCollection: put(Role::Facilitator, 1); break;
    case Phase::Analysis: put(Role::Facilitator, 4); break;
    case Phase::Facilitation: put(Role::Facilitator, 3); break;
    case Phase::ApprovalRound: put(Role::Facilitator, 10); break;
    case Phase::Modified: put(Role::Facilitator, 8); break;
    case Phase::Consensus: put(Role::Facilitator, 4); break;
  }

  switch (state.phase) {
    case Phase::ApprovalRound:
      put(Role::Participant, rejects > 0 ? 12 : state.approvals.empty() ? 10 : 11);
      put(Role::ParticipantGroup, 10);
      break;
    case Phase::Consensus:
      put(Role::Participant, 16);
      put(Role::ParticipantGroup, 16);
      break;
    case Phase::Modified:
      put(Role::Participant, 12);
      // Rejected by at least half the group reads as confrontation.
      put(Role::ParticipantGroup, 2 * rejects >= state.participants.size() ? 15 : 14);
      break;
    default:
      if (profiles.empty()) {
        put(Role::Participant, 4);
      } else {
        put(Role::Participant, scattered ? 5 : 6);
      }
      if (scattered) put(Role::ParticipantGroup, 13);
      break;
  }
  return out;
}

nlohmann::json to_json(const MotionCode& m) {
  return {{"number", m.number},
          {"name", m.name},
          {"role", std::string(to_string(m.role))},
          {"avatar_style", std::string(to_string(m.style))}};
}

nlohmann::json to_json(const std::map<Role, MotionCode>& motions) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [role, m] : motions) j[std::string(to_string(role))] = to_json(m);
  return j;
}

}  // namespace dualloop::mediator
