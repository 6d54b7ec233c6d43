#include "dualloop/project.hpp"

#include "dualloop/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dualloop {

namespace {

using nlohmann::json;

void add_all(std::vector<std::string>& out, const std::string& path, const std::vector<std::string>& problems) {
  for (const auto& p : problems) out.push_back(path + ": " + p);
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += "\n";
    out += l;
  }
  return out;
}

// Parses one artifact; shape errors are recorded under `path` rather than
// aborting, so a single load reports every broken artifact.
template <class T, class Fn>
std::optional<T> parse_at(const std::string& path, std::vector<std::string>& problems, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    problems.push_back(path + ": " + e.what());
  } catch (const json::exception& e) {
    problems.push_back(path + ": " + e.what());
  }
  return std::nullopt;
}

std::vector<std::string> logic_model_problems(const impact::LogicModel& m) {
  const auto report = impact::validate_model(m);
  std::vector<std::string> out;
  for (const auto& f : report.graph.findings) out.push_back(std::string(to_string(f.kind)) + ": " + f.message);
  out.insert(out.end(), report.errors.begin(), report.errors.end());
  return out;
}

}  // namespace

std::vector<std::string> validate_project(const Project& p) {
  std::vector<std::string> out;
  if (p.schema_version != kSchemaVersion) out.push_back("/schema_version: unsupported version");
  if (p.id.empty()) out.push_back("/id: must not be empty");

  if (p.logic_model) add_all(out, "/artifacts/logic_model", logic_model_problems(*p.logic_model));
  if (p.multi_agent) add_all(out, "/artifacts/multi_agent_model", sim::validate_model(*p.multi_agent));

  for (std::size_t i = 0; i < p.scenarios.size(); ++i) {
    const auto& s = p.scenarios[i];
    const std::string path = "/artifacts/scenarios/" + std::to_string(i);
    add_all(out, path, sim::validate_scenario(s));
    if (!p.multi_agent) {
      out.push_back(path + ": scenarios need a multi-agent model");
      continue;
    }
    for (const auto& [id, value] : s.inputs.values) {
      const auto it = p.multi_agent->graph.nodes.find(id);
      if (it == p.multi_agent->graph.nodes.end() || it->second.kind != NodeKind::Input) {
        out.push_back(path + "/inputs/" + id + ": not an input of the multi-agent model");
      }
    }
  }

  if (p.choices) add_all(out, "/artifacts/choices", consensus::validate_choice_set(*p.choices));

  for (const auto& [id, events] : p.sessions) {
    try {
      consensus::replay(events);
    } catch (const Error& e) {
      out.push_back("/artifacts/sessions/" + id + ": replay failed: " + e.what());
    }
  }

  for (const auto& [key, r] : p.svo_results) {
    if (key != r.participant) out.push_back("/artifacts/svo_results/" + key + ": participant id mismatch");
  }

  if (p.behavior) {
    const std::string path = "/artifacts/behavior";
    try {
      const auto catalog = behavior::default_catalog();
      auto problems = behavior::validate_model(p.behavior->model, catalog);
      // External implementations are attached at run time, never stored.
      std::erase(problems, std::string("external model not attached"));
      add_all(out, path + "/model", problems);
      behavior::check_vector(catalog, p.behavior->baseline);
      for (std::size_t i = 0; i < p.behavior->plans.size(); ++i) {
        try {
          behavior::check_vector(catalog, p.behavior->plans[i].deltas);
        } catch (const Error& e) {
          out.push_back(path + "/plans/" + std::to_string(i) + ": " + e.what());
        }
      }
    } catch (const Error& e) {
      out.push_back(path + ": " + e.what());
    }
  }

  if (!p.subjects.empty()) {
    try {
      const auto catalog = behavior::default_catalog();
      for (const auto& [id, v] : p.subjects) {
        try {
          behavior::check_vector(catalog, v);
        } catch (const Error& e) {
          out.push_back("/artifacts/subjects/" + id + ": " + e.what());
        }
      }
    } catch (const Error& e) {
      out.push_back(std::string("/artifacts/subjects: ") + e.what());
    }
  }
  return out;
}

json project_to_json(const Project& p) {
  json artifacts = json::object();
  if (p.logic_model) artifacts["logic_model"] = *p.logic_model;
  if (p.multi_agent) artifacts["multi_agent_model"] = *p.multi_agent;
  if (!p.scenarios.empty()) artifacts["scenarios"] = p.scenarios;
  if (p.choices) artifacts["choices"] = *p.choices;
  if (!p.sessions.empty()) {
    json sessions = json::object();
    for (const auto& [id, events] : p.sessions) {
      json log = json::array();
      for (const auto& e : events) log.push_back(consensus::to_json(e));
      sessions[id] = std::move(log);
    }
    artifacts["sessions"] = std::move(sessions);
  }
  if (!p.svo_results.empty()) artifacts["svo_results"] = p.svo_results;
  if (p.behavior) artifacts["behavior"] = *p.behavior;
  if (!p.subjects.empty()) {
    json subjects = json::object();
    for (const auto& [id, v] : p.subjects) subjects[id] = behavior::vector_to_json(v);
    artifacts["subjects"] = std::move(subjects);
  }

  json j = {{"schema_version", p.schema_version}, {"id", p.id}, {"name", p.name}, {"artifacts", std::move(artifacts)}};
  j["template"] = p.template_name ? json(*p.template_name) : json(nullptr);
  return j;
}

Project project_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ValidationFailure, "project must be a JSON object", "/");
  const auto version = j.find("schema_version");
  if (version == j.end() || !version->is_number_integer()) {
    throw Error(ErrorCode::UnsupportedSchema, "project has no integer schema_version");
  }
  if (version->get<long long>() != kSchemaVersion) {
    throw Error(ErrorCode::UnsupportedSchema,
                "schema_version " + std::to_string(version->get<long long>()) + " is not supported (expected " +
                    std::to_string(kSchemaVersion) + ")",
                std::to_string(version->get<long long>()));
  }

  Project p;
  std::vector<std::string> problems;
  p.id = j.value("id", std::string{});
  p.name = j.value("name", std::string{});
  if (j.contains("template") && j["template"].is_string()) p.template_name = j["template"].get<std::string>();

  const json artifacts = j.value("artifacts", json::object());
  if (artifacts.contains("logic_model")) {
    p.logic_model = parse_at<impact::LogicModel>("/artifacts/logic_model", problems,
                                                 [&] { return artifacts["logic_model"].get<impact::LogicModel>(); });
  }
  if (artifacts.contains("multi_agent_model")) {
    p.multi_agent = parse_at<sim::MultiAgentModel>(
        "/artifacts/multi_agent_model", problems, [&] { return artifacts["multi_agent_model"].get<sim::MultiAgentModel>(); });
  }
  if (artifacts.contains("scenarios")) {
    const auto& list = artifacts["scenarios"];
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (auto s = parse_at<sim::PolicyScenario>("/artifacts/scenarios/" + std::to_string(i), problems,
                                                 [&] { return list[i].get<sim::PolicyScenario>(); })) {
        p.scenarios.push_back(std::move(*s));
      }
    }
  }
  if (artifacts.contains("choices")) {
    p.choices = parse_at<consensus::ChoiceSet>("/artifacts/choices", problems,
                                               [&] { return artifacts["choices"].get<consensus::ChoiceSet>(); });
  }
  if (artifacts.contains("sessions")) {
    for (const auto& [id, log] : artifacts["sessions"].items()) {
      std::vector<consensus::SessionEvent> events;
      for (std::size_t i = 0; i < log.size(); ++i) {
        if (auto e = parse_at<consensus::SessionEvent>("/artifacts/sessions/" + id + "/" + std::to_string(i), problems,
                                                       [&] { return consensus::event_from_json(log[i]); })) {
          events.push_back(std::move(*e));
        }
      }
      p.sessions[id] = std::move(events);
    }
  }
  if (artifacts.contains("svo_results")) {
    for (const auto& [key, r] : artifacts["svo_results"].items()) {
      if (auto result = parse_at<svo::SvoResult>("/artifacts/svo_results/" + key, problems,
                                                 [&] { return r.get<svo::SvoResult>(); })) {
        p.svo_results[key] = std::move(*result);
      }
    }
  }
  if (artifacts.contains("behavior")) {
    p.behavior = parse_at<behavior::BehaviorConfig>(
        "/artifacts/behavior", problems, [&] { return artifacts["behavior"].get<behavior::BehaviorConfig>(); });
  }

  if (artifacts.contains("subjects")) {
    for (const auto& [id, v] : artifacts["subjects"].items()) {
      if (auto values = parse_at<behavior::FeatureVector>("/artifacts/subjects/" + id, problems,
                                                          [&] { return behavior::vector_from_json(v); })) {
        p.subjects[id] = std::move(*values);
      }
    }
  }

  if (problems.empty()) problems = validate_project(p);
  if (!problems.empty()) {
    throw Error(ErrorCode::ValidationFailure, "invalid project: " + problems.front(), join(problems));
  }
  return p;
}

std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

std::string save_project(const Project& p) {
  if (const auto problems = validate_project(p); !problems.empty()) {
    throw Error(ErrorCode::ValidationFailure, "invalid project: " + problems.front(), join(problems));
  }
  return canonical_dump(project_to_json(p));
}

Project load_project_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ValidationFailure, std::string("project is not valid JSON: ") + e.what(), "/");
  }
  return project_from_json(j);
}

void save_project_file(const Project& p, const std::filesystem::path& path) {
  const std::string text = save_project(p);
  // Write-then-rename so readers never observe a partial file.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::NotFound, "cannot write " + tmp);
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

Project load_project_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open project " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_project_text(buf.str());
}

std::filesystem::path template_dir() { return std::filesystem::path(DUALLOOP_DATA_DIR) / "templates"; }

std::vector<std::string> template_names() {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(template_dir())) {
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

Project project_from_template(const std::string& template_name, const std::string& id) {
  const auto names = template_names();
  if (std::find(names.begin(), names.end(), template_name) == names.end()) {
    throw Error(ErrorCode::NotFound, "unknown template '" + template_name + "'", template_name);
  }
  Project p = load_project_file(template_dir() / (template_name + ".json"));
  p.id = id;
  p.template_name = template_name;
  return p;
}

}  // namespace dualloop
