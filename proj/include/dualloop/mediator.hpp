#pragma once

#include "dualloop/session.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dualloop::mediator {

enum class Role { Facilitator, Participant, ParticipantGroup };
enum class AvatarStyle { Geometry, Humanoid, Chick };

inline constexpr std::array<Role, 3> kRoles{Role::Facilitator, Role::Participant, Role::ParticipantGroup};

std::string_view to_string(Role r) noexcept;
std::optional<Role> role_from_string(std::string_view text) noexcept;
std::string_view to_string(AvatarStyle s) noexcept;
std::optional<AvatarStyle> style_from_string(std::string_view text) noexcept;

struct MotionCode {
  int number = 0;
  std::string name;
  Role role = Role::Facilitator;
  AvatarStyle style = AvatarStyle::Geometry;

  bool operator==(const MotionCode&) const = default;
};

// One row per motion number; an empty cell is a dash.
struct MotionRow {
  int number = 0;
  std::array<std::optional<std::string>, 3> names;  // indexed by Role
};

struct MotionTable {
  std::vector<MotionRow> rows;
  std::array<AvatarStyle, 3> styles{AvatarStyle::Chick, AvatarStyle::Humanoid, AvatarStyle::Geometry};

  // Throws UnknownMotion for names absent from every column and
  // UndefinedMotion where the row has a dash for `role`. Names that share a
  // row (e.g. "Compromise" / "Consensus") resolve for either role.
  MotionCode motion_for(Role role, std::string_view name) const;
  MotionCode motion_for(Role role, int number) const;
  bool defined(Role role, int number) const;
};

MotionTable motion_table_from_json(const nlohmann::json& j);
const MotionTable& default_motion_table();

struct MotionSettings {
  double dispersion_threshold = 0.5;  // fraction of the maximum Kendall distance
};

// Pure mapping from session state to the motion each avatar should show.
// Roles with nothing to express are absent.
std::map<Role, MotionCode> session_motions(const consensus::SessionState& state, const MotionSettings& settings = {},
                                           const MotionTable& table = default_motion_table());

nlohmann::json to_json(const MotionCode& m);
nlohmann::json to_json(const std::map<Role, MotionCode>& motions);

}  // namespace dualloop::mediator
