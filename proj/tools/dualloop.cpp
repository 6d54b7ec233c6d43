// Command-line front end. Exit status: 0 success, 2 invalid input, 1 other
// failures.

#include "dualloop/error.hpp"
#include "dualloop/project.hpp"
#include "dualloop/service.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using nlohmann::json;
namespace dl = dualloop;

constexpr int kInvalid = 2;
constexpr int kFailure = 1;

// Codes that mean "the input you gave me is wrong".
bool is_validation(dl::ErrorCode c) {
  switch (c) {
    case dl::ErrorCode::ValidationFailure:
    case dl::ErrorCode::UnsupportedSchema:
    case dl::ErrorCode::MalformedPayload:
    case dl::ErrorCode::InvalidGraph:
    case dl::ErrorCode::InvalidScenario:
    case dl::ErrorCode::InvalidSettings:
    case dl::ErrorCode::MismatchedDomains:
    case dl::ErrorCode::UnknownFeature:
    case dl::ErrorCode::EncodingError:
      return true;
    default:
      return false;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

dl::RangeScaling scaling(const std::string& mode) {
  if (mode == "minmax") return dl::RangeScaling::MinMax;
  if (mode == "verbatim") return dl::RangeScaling::Verbatim;
  throw dl::Error(dl::ErrorCode::MalformedPayload, "--mode must be verbatim or minmax");
}

dl::sim::PolicyScenario scenario_by_id(const dl::Project& p, const std::string& id) {
  for (const auto& s : p.scenarios) {
    if (s.id == id) return s;
  }
  throw dl::Error(dl::ErrorCode::InvalidScenario, "no scenario '" + id + "' in project");
}

template <class T>
const T& need(const std::optional<T>& v, const char* what) {
  if (!v) throw dl::Error(dl::ErrorCode::ValidationFailure, std::string("project has no ") + what);
  return *v;
}

dl::Service* g_service = nullptr;
extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualloop: policy evaluation, consensus and behavior tools"};
  app.require_subcommand(1);

  std::string project_file;
  std::string out_file;
  const auto with_project = [&](CLI::App* cmd) {
    cmd->add_option("--project", project_file, "project JSON file")->required()->check(CLI::ExistingFile);
  };
  const auto with_out = [&](CLI::App* cmd) { cmd->add_option("-o,--out", out_file, "output file (default stdout)"); };

  // project
  auto* project = app.add_subcommand("project", "create, load and validate project files");
  project->require_subcommand(1);
  std::string template_name;
  std::string new_id;
  auto* project_new = project->add_subcommand("new", "new project, optionally from a bundled template");
  project_new->add_option("--template", template_name, "template name");
  project_new->add_option("--id", new_id, "project id")->required();
  with_out(project_new);
  auto* project_templates = project->add_subcommand("templates", "list bundled templates");
  auto* project_load = project->add_subcommand("load", "load and print in canonical form");
  with_project(project_load);
  with_out(project_load);
  auto* project_validate = project->add_subcommand("validate", "report every problem in a project file");
  with_project(project_validate);

  // impact
  auto* impact = app.add_subcommand("impact", "social impact evaluation on the logic model");
  impact->require_subcommand(1);
  std::string format = "csv";
  auto* impact_rank = impact->add_subcommand("rank", "input sensitivities to the impact, descending");
  with_project(impact_rank);
  with_out(impact_rank);
  impact_rank->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  auto* impact_trajectory = impact->add_subcommand("trajectory", "impact per period under the advanced settings");
  with_project(impact_trajectory);
  with_out(impact_trajectory);

  // sim
  auto* sim = app.add_subcommand("sim", "pluralistic policy simulation");
  sim->require_subcommand(1);
  std::string scenario_id;
  std::string mode = "verbatim";
  std::size_t selected = 0;
  auto* sim_evaluate = sim->add_subcommand("evaluate", "raw soc/env/eco values per scenario");
  with_project(sim_evaluate);
  with_out(sim_evaluate);
  sim_evaluate->add_option("--scenario", scenario_id, "only this scenario");
  auto* sim_ternary = sim->add_subcommand("ternary", "simplex coordinates as CSV");
  with_project(sim_ternary);
  with_out(sim_ternary);
  sim_ternary->add_option("--mode", mode, "verbatim or minmax");
  auto* sim_compare = sim->add_subcommand("compare", "comparison table with the sensitivity block of one scenario");
  with_project(sim_compare);
  with_out(sim_compare);
  sim_compare->add_option("--mode", mode, "verbatim or minmax");
  sim_compare->add_option("--selected", selected, "index of the scenario whose sensitivities are shown");

  // consensus
  auto* cons = app.add_subcommand("consensus", "consensus building analysis");
  cons->require_subcommand(1);
  std::string session_id;
  std::string input_file;
  std::string selection = "top-k";
  auto* cons_analyze = cons->add_subcommand("analyze", "permissible, compromise and sublated proposals");
  cons_analyze->add_option("--project", project_file, "project JSON file")->check(CLI::ExistingFile);
  cons_analyze->add_option("--session", session_id, "session whose profiles are analyzed");
  cons_analyze->add_option("--input", input_file, "JSON {choices, profiles} instead of a project session")
      ->check(CLI::ExistingFile);
  cons_analyze->add_option("--selection", selection, "top-k or above-mean");
  with_out(cons_analyze);
  std::size_t instances = 200;
  std::uint64_t seed = 1;
  auto* cons_oracle = cons->add_subcommand("oracle-check", "compare the solvers with exhaustive search");
  cons_oracle->add_option("--instances", instances, "random instances");
  cons_oracle->add_option("--seed", seed, "generator seed");

  // svo
  auto* svo = app.add_subcommand("svo", "social value orientation");
  svo->require_subcommand(1);
  std::string responses_file;
  std::string instrument_file;
  auto* svo_score = svo->add_subcommand("score", "score batch responses (participant,item_id,position)");
  svo_score->add_option("--responses", responses_file, "CSV file")->required()->check(CLI::ExistingFile);
  svo_score->add_option("--instrument", instrument_file, "item catalog (default: bundled)")
      ->check(CLI::ExistingFile);
  with_out(svo_score);

  // behavior
  auto* beh = app.add_subcommand("behavior", "behavior change promotion");
  beh->require_subcommand(1);
  std::string subject;
  std::string features_file;
  auto* beh_predict = beh->add_subcommand("predict", "cooperation rate and per-feature sensitivity");
  with_project(beh_predict);
  with_out(beh_predict);
  beh_predict->add_option("--subject", subject, "subject stored in the project");
  beh_predict->add_option("--features", features_file, "JSON feature vector")->check(CLI::ExistingFile);
  auto* beh_rank = beh->add_subcommand("rank", "rank the configured interventions as CSV");
  with_project(beh_rank);
  with_out(beh_rank);

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP JSON API");
  dl::ServiceConfig config;
  std::string data_dir = config.data_dir.string();
  bool closed = false;
  serve->add_option("--host", config.host, "bind address");
  serve->add_option("--port", config.port, "port, 0 for any free port");
  serve->add_option("--data", data_dir, "data directory");
  serve->add_flag("--closed-registration", closed, "reject self-registration");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto load = [&] { return dl::load_project_file(project_file); };

    if (project_new->parsed()) {
      dl::Project p;
      if (!template_name.empty()) {
        p = dl::project_from_template(template_name, new_id);
      } else {
        p.id = new_id;
        p.name = new_id;
      }
      write_output(out_file, dl::save_project(p));
    } else if (project_templates->parsed()) {
      for (const auto& name : dl::template_names()) std::cout << name << "\n";
    } else if (project_load->parsed()) {
      write_output(out_file, dl::save_project(load()));
    } else if (project_validate->parsed()) {
      try {
        const auto p = load();
        std::cout << project_file << ": ok\n";
      } catch (const dl::Error& e) {
        std::cerr << project_file << ": " << e.what() << "\n";
        if (!e.detail().empty()) std::cerr << e.detail() << "\n";
        return is_validation(e.code()) ? kInvalid : kFailure;
      }
    } else if (impact_rank->parsed()) {
      const auto ranking = dl::impact::rank_inputs(need(load().logic_model, "logic model"));
      write_output(out_file, format == "csv" ? dl::impact::sensitivity_csv(ranking) : pretty(json(ranking)));
    } else if (impact_trajectory->parsed()) {
      const auto p = load();
      const auto& model = need(p.logic_model, "logic model");
      const auto& settings = need(model.advanced, "advanced settings");
      write_output(out_file, pretty({{"trajectory", dl::impact::advanced_trajectory(model, settings)}}));
    } else if (sim_evaluate->parsed()) {
      const auto p = load();
      const auto& model = need(p.multi_agent, "multi-agent model");
      json out = json::array();
      for (const auto& s : p.scenarios) {
        if (!scenario_id.empty() && s.id != scenario_id) continue;
        out.push_back({{"scenario", s.id}, {"values", dl::sim::values_to_json(dl::sim::evaluate_policy(model, s))}});
      }
      if (!scenario_id.empty() && out.empty()) scenario_by_id(p, scenario_id);
      write_output(out_file, pretty(out));
    } else if (sim_ternary->parsed()) {
      const auto p = load();
      const auto& model = need(p.multi_agent, "multi-agent model");
      std::vector<dl::sim::RawPoint> points;
      for (const auto& s : p.scenarios) points.push_back({s.id, dl::sim::evaluate_policy(model, s)});
      write_output(out_file, dl::sim::ternary_csv(dl::sim::normalize_ternary(points, scaling(mode))));
    } else if (sim_compare->parsed()) {
      const auto p = load();
      write_output(out_file, pretty(json(dl::sim::compare_policies(need(p.multi_agent, "multi-agent model"),
                                                                   p.scenarios, selected, scaling(mode)))));
    } else if (cons_analyze->parsed()) {
      dl::consensus::ChoiceSet choices;
      std::vector<dl::consensus::PreferenceProfile> profiles;
      if (!input_file.empty()) {
        const auto j = json::parse(read_file(input_file));
        choices = j.at("choices").get<dl::consensus::ChoiceSet>();
        profiles = j.at("profiles").get<std::vector<dl::consensus::PreferenceProfile>>();
      } else if (!project_file.empty() && !session_id.empty()) {
        const auto p = load();
        const auto it = p.sessions.find(session_id);
        if (it == p.sessions.end()) throw dl::Error(dl::ErrorCode::NotFound, "no session '" + session_id + "'");
        const auto state = dl::consensus::replay(it->second);
        choices = state.choices;
        profiles = state.profile_list();
      } else {
        throw dl::Error(dl::ErrorCode::MalformedPayload, "give --input, or --project with --session");
      }
      const auto sel = dl::consensus::factor_selection_from_string(selection);
      if (!sel) throw dl::Error(dl::ErrorCode::MalformedPayload, "--selection must be top-k or above-mean");
      json out = dl::consensus::analyze(profiles, choices, {dl::consensus::kDefaultExhaustiveLimit, *sel});
      out["dispersion"] = dl::consensus::dispersion(profiles);
      write_output(out_file, pretty(out));
    } else if (cons_oracle->parsed()) {
      std::mt19937_64 rng(seed);
      std::size_t permissible_ok = 0;
      std::size_t compromise_ok = 0;
      for (std::size_t i = 0; i < instances; ++i) {
        const auto profiles = oracle::random_profiles(rng, 5, 6);
        const auto pm = dl::consensus::permissible_meeting(profiles);
        const auto po = oracle::permissible(profiles);
        if (pm.choice == po.choice && pm.widening_cost == po.cost) ++permissible_ok;
        const auto cm = dl::consensus::compromise_exploration(profiles);
        const auto co = oracle::compromise(profiles);
        if (cm.ranking == co.ranking && cm.total == co.total && cm.max == co.max) ++compromise_ok;
      }
      std::cout << "permissible " << permissible_ok << "/" << instances << "\n"
                << "compromise " << compromise_ok << "/" << instances << "\n";
      return permissible_ok == instances && compromise_ok == instances ? 0 : kFailure;
    } else if (svo_score->parsed()) {
      const auto instrument =
          instrument_file.empty() ? dl::svo::default_instrument() : dl::svo::load_instrument(instrument_file);
      json out = json::array();
      for (const auto& [participant, responses] : dl::svo::responses_from_csv(read_file(responses_file))) {
        out.push_back(dl::svo::score(instrument, participant, responses));
      }
      write_output(out_file, pretty(out));
    } else if (beh_predict->parsed()) {
      const auto p = load();
      const auto& config = need(p.behavior, "behavior configuration");
      auto features = config.baseline;
      if (!subject.empty()) {
        const auto it = p.subjects.find(subject);
        if (it == p.subjects.end()) throw dl::Error(dl::ErrorCode::NotFound, "no subject '" + subject + "'");
        features = it->second;
      } else if (!features_file.empty()) {
        features = dl::behavior::vector_from_json(json::parse(read_file(features_file)));
      }
      const auto catalog = dl::behavior::default_catalog();
      json out = dl::behavior::predict(config.model, catalog, features);
      out["sensitivity"] = dl::behavior::feature_sensitivity(config.model, catalog, features);
      write_output(out_file, pretty(out));
    } else if (beh_rank->parsed()) {
      const auto p = load();
      const auto& config = need(p.behavior, "behavior configuration");
      const auto report = dl::behavior::simulate_interventions(config.model, dl::behavior::default_catalog(),
                                                               config.baseline, config.plans);
      for (const auto& f : report.failures) std::cerr << "plan " << f.plan << ": " << f.message << "\n";
      write_output(out_file, dl::behavior::ranking_csv(report));
    } else if (serve->parsed()) {
      config.data_dir = data_dir;
      config.open_registration = !closed;
      dl::Service service(config);
      const int port = service.bind();
      std::cout << "listening on " << config.host << ":" << port << std::endl;
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.listen();
      g_service = nullptr;
    }
  } catch (const dl::Error& e) {
    std::cerr << "error: " << dl::to_string(e.code()) << ": " << e.what() << "\n";
    if (!e.detail().empty()) std::cerr << e.detail() << "\n";
    return is_validation(e.code()) ? kInvalid : kFailure;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return 0;
}
