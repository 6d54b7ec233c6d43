#pragma once

#include "dualloop/behavior.hpp"
#include "dualloop/impact.hpp"
#include "dualloop/policy_sim.hpp"
#include "dualloop/session.hpp"
#include "dualloop/svo.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dualloop {

inline constexpr int kSchemaVersion = 1;

struct Project {
  int schema_version = kSchemaVersion;
  std::string id;
  std::string name;
  std::optional<std::string> template_name;

  std::optional<impact::LogicModel> logic_model;
  std::optional<sim::MultiAgentModel> multi_agent;
  std::vector<sim::PolicyScenario> scenarios;
  std::optional<consensus::ChoiceSet> choices;
  // Event logs; session state is always derived by replay.
  std::map<std::string, std::vector<consensus::SessionEvent>> sessions;
  std::map<std::string, svo::SvoResult> svo_results;
  std::optional<behavior::BehaviorConfig> behavior;
  // Subject attributes for the behavior promoter, keyed by subject id.
  std::map<std::string, behavior::FeatureVector> subjects;
};

// Path-addressed problems ("/artifacts/logic_model: ..."); empty when valid.
std::vector<std::string> validate_project(const Project& p);

nlohmann::json project_to_json(const Project& p);
// Throws UnsupportedSchema or ValidationFailure (detail lists every problem).
Project project_from_json(const nlohmann::json& j);

// Sorted keys, two-space indent, trailing newline.
std::string canonical_dump(const nlohmann::json& j);
std::string save_project(const Project& p);
Project load_project_text(const std::string& text);

void save_project_file(const Project& p, const std::filesystem::path& path);
Project load_project_file(const std::filesystem::path& path);

std::filesystem::path template_dir();
std::vector<std::string> template_names();
// Fresh project seeded from a template; the id is replaced.
Project project_from_template(const std::string& template_name, const std::string& id);

}  // namespace dualloop
