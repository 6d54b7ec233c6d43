#include "dualloop/service.hpp"

#include "dualloop/error.hpp"
#include "dualloop/impact.hpp"
#include "dualloop/mediator.hpp"
#include "dualloop/policy_sim.hpp"
#include "dualloop/session.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <functional>
#include <initializer_list>

namespace dualloop {

namespace {

using nlohmann::json;
using consensus::SessionEvent;

struct Ctx {
  const httplib::Request& req;
  httplib::Response& res;
  std::optional<UserAccount> user;
  int status = 200;

  json body() const {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::MalformedPayload, std::string("request body is not valid JSON: ") + e.what());
    }
  }
  std::string param(const std::string& name) const { return req.path_params.at(name); }
  const UserAccount& who() const { return *user; }
};

using Handler = std::function<json(Ctx&)>;

json error_body(ErrorCode code, const std::string& message, const std::string& detail) {
  return {{"error", {{"code", std::string(to_string(code))}, {"message", message}, {"detail", detail}}}};
}

void require_role(const Ctx& ctx, std::initializer_list<UserRole> roles) {
  if (std::find(roles.begin(), roles.end(), ctx.who().role) != roles.end()) return;
  throw Error(ErrorCode::Forbidden,
              "role " + std::string(to_string(ctx.who().role)) + " may not call " + ctx.req.method + " " + ctx.req.path);
}

RangeScaling scaling_from(const json& body) {
  const auto mode = body.value("mode", std::string("verbatim"));
  if (mode == "verbatim") return RangeScaling::Verbatim;
  if (mode == "minmax") return RangeScaling::MinMax;
  throw Error(ErrorCode::MalformedPayload, "mode must be verbatim or minmax");
}

sim::TernaryValues values_from(const json& j) {
  return {j.at("soc").get<double>(), j.at("env").get<double>(), j.at("eco").get<double>()};
}

const impact::LogicModel& logic_model_of(const Project& p) {
  if (!p.logic_model) throw Error(ErrorCode::NotFound, "project '" + p.id + "' has no logic model");
  return *p.logic_model;
}

const sim::MultiAgentModel& multi_agent_of(const Project& p) {
  if (!p.multi_agent) throw Error(ErrorCode::NotFound, "project '" + p.id + "' has no multi-agent model");
  return *p.multi_agent;
}

const behavior::BehaviorConfig& behavior_of(const Project& p) {
  if (!p.behavior) throw Error(ErrorCode::NotFound, "project '" + p.id + "' has no behavior configuration");
  return *p.behavior;
}

const sim::PolicyScenario& scenario_of(const Project& p, const std::string& id) {
  for (const auto& s : p.scenarios) {
    if (s.id == id) return s;
  }
  throw Error(ErrorCode::NotFound, "no scenario '" + id + "'", id);
}

json project_summary(const Project& p) {
  return {{"id", p.id}, {"name", p.name}, {"template", p.template_name ? json(*p.template_name) : json(nullptr)}};
}

json user_json(const UserAccount& u) {
  return {{"id", u.id}, {"display_name", u.display_name}, {"role", std::string(to_string(u.role))}};
}

// Facilitator events belong to the convener; participants act for
// themselves only.
void authorize_event(const Ctx& ctx, SessionEvent& e) {
  const auto& u = ctx.who();
  const bool convener = u.role == UserRole::Convener;
  std::visit(
      [&](auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, consensus::event::SubmitProfile>) {
          if (!convener && !(u.role == UserRole::Participant && ev.profile.participant == u.id)) {
            throw Error(ErrorCode::Forbidden, "only the participant or the convener may submit this profile");
          }
        } else if constexpr (std::is_same_v<T, consensus::event::CastApproval>) {
          if (!convener && !(u.role == UserRole::Participant && ev.participant == u.id)) {
            throw Error(ErrorCode::Forbidden, "only the participant or the convener may cast this approval");
          }
        } else if constexpr (std::is_same_v<T, consensus::event::PostMessage>) {
          if (u.role == UserRole::Subject) throw Error(ErrorCode::Forbidden, "subjects do not take part in sessions");
          ev.author = u.id;
        } else {
          if (!convener) {
            throw Error(ErrorCode::Forbidden,
                        std::string(consensus::event_name(SessionEvent(ev))) + " is a facilitator action");
          }
        }
      },
      e);
}

json session_json(const std::string& sid, const consensus::SessionState& s) {
  json j = consensus::to_json(s, false);
  j["id"] = sid;
  j["motions"] = mediator::to_json(mediator::session_motions(s));
  return j;
}

std::vector<svo::SliderResponse> responses_from(const json& j) {
  std::vector<svo::SliderResponse> out;
  for (const auto& r : j) out.push_back({r.at("item").get<std::string>(), r.at("position").get<double>()});
  return out;
}

}  // namespace

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedPayload: return 400;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::Forbidden: return 403;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::IllegalTransition:
    case ErrorCode::Conflict:
    case ErrorCode::ConsentMissing: return 409;
    default: return 422;
  }
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      store_(config_.data_dir),
      users_(config_.data_dir / "users.json"),
      server_(std::make_unique<httplib::Server>()) {
  routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  if (config_.port == 0) {
    config_.port = server_->bind_to_any_port(config_.host);
  } else if (!server_->bind_to_port(config_.host, config_.port)) {
    config_.port = -1;
  }
  if (config_.port < 0) throw std::runtime_error("cannot bind " + config_.host);
  return config_.port;
}

void Service::listen() { server_->listen_after_bind(); }
void Service::stop() {
  if (server_ && server_->is_running()) server_->stop();
}
void Service::wait_until_ready() const { server_->wait_until_ready(); }

void Service::routes() {
  auto& srv = *server_;

  const auto wrap = [this](Handler h, bool authenticated = true) {
    return [this, h, authenticated](const httplib::Request& req, httplib::Response& res) {
      Ctx ctx{req, res, std::nullopt};
      json out;
      try {
        if (authenticated) {
          const auto header = req.get_header_value("Authorization");
          const std::string prefix = "Bearer ";
          if (header.rfind(prefix, 0) != 0) throw Error(ErrorCode::Unauthorized, "missing bearer token");
          ctx.user = users_.authenticate(header.substr(prefix.size()));
        }
        out = h(ctx);
        res.status = ctx.status;
      } catch (const Error& e) {
        res.status = http_status(e.code());
        out = error_body(e.code(), e.what(), e.detail());
      } catch (const json::exception& e) {
        res.status = 400;
        out = error_body(ErrorCode::MalformedPayload, e.what(), "");
      } catch (const std::exception& e) {
        res.status = 500;
        out = {{"error", {{"code", "Internal"}, {"message", e.what()}, {"detail", ""}}}};
      }
      res.set_content(out.dump(), "application/json");
    };
  };

  // Routes that read or mutate one project share this lookup.
  const auto project_id = [](const Ctx& ctx) { return ctx.param("id"); };

  // ---- auth ----
  srv.Post("/api/auth/register", wrap(
                                     [this](Ctx& ctx) {
                                       if (!config_.open_registration) {
                                         throw Error(ErrorCode::Forbidden, "registration is closed");
                                       }
                                       const auto b = ctx.body();
                                       const auto role = user_role_from_string(b.at("role").get<std::string>());
                                       if (!role) throw Error(ErrorCode::ValidationFailure, "unknown role", "/role");
                                       const auto u = users_.register_user(b.at("id").get<std::string>(),
                                                                           b.value("display_name", std::string{}),
                                                                           *role, b.at("password").get<std::string>());
                                       ctx.status = 201;
                                       return user_json(u);
                                     },
                                     false));
  srv.Post("/api/auth/login", wrap(
                                  [this](Ctx& ctx) {
                                    const auto b = ctx.body();
                                    const auto id = b.at("id").get<std::string>();
                                    const auto token = users_.login(id, b.at("password").get<std::string>());
                                    return json{{"token", token}, {"user", user_json(*users_.find(id))}};
                                  },
                                  false));
  srv.Get("/api/auth/me", wrap([](Ctx& ctx) { return user_json(ctx.who()); }));

  // ---- catalogs ----
  srv.Get("/api/templates", wrap([](Ctx&) { return json(template_names()); }));
  srv.Get("/api/motions", wrap([](Ctx&) {
            json rows = json::array();
            const auto& table = mediator::default_motion_table();
            for (const auto& row : table.rows) {
              json r = {{"number", row.number}};
              for (const auto role : mediator::kRoles) {
                const auto& n = row.names[static_cast<std::size_t>(role)];
                r[std::string(mediator::to_string(role))] = n ? json(*n) : json(nullptr);
              }
              rows.push_back(std::move(r));
            }
            return rows;
          }));
  srv.Get("/api/behavior/catalog", wrap([](Ctx&) { return json(behavior::default_catalog()); }));
  srv.Get("/api/svo/items", wrap([](Ctx&) { return json(svo::default_instrument().items); }));

  // ---- projects ----
  srv.Get("/api/projects", wrap([this](Ctx&) {
            json out = json::array();
            for (const auto& id : store_.list()) out.push_back(project_summary(store_.get(id)));
            return out;
          }));
  srv.Post("/api/projects", wrap([this](Ctx& ctx) {
             require_role(ctx, {UserRole::Convener, UserRole::Operator});
             const auto b = ctx.body();
             Project p;
             if (b.contains("template") && b["template"].is_string()) {
               p = project_from_template(b["template"].get<std::string>(), b.at("id").get<std::string>());
             } else if (b.contains("project")) {
               p = project_from_json(b["project"]);
               p.id = b.value("id", p.id);
             } else {
               p.id = b.at("id").get<std::string>();
             }
             if (b.contains("name")) p.name = b["name"].get<std::string>();
             store_.create(p);
             ctx.status = 201;
             return project_to_json(store_.get(p.id));
           }));
  srv.Get("/api/projects/:id", wrap([this, project_id](Ctx& ctx) {
            return project_to_json(store_.get(project_id(ctx)));
          }));
  srv.Put("/api/projects/:id", wrap([this, project_id](Ctx& ctx) {
            require_role(ctx, {UserRole::Convener, UserRole::Operator});
            auto incoming = project_from_json(ctx.body());
            return project_to_json(store_.update(project_id(ctx), [&](Project& p) {
              incoming.sessions.clear();
              p = std::move(incoming);
            }));
          }));
  srv.Delete("/api/projects/:id", wrap([this, project_id](Ctx& ctx) {
               require_role(ctx, {UserRole::Convener, UserRole::Operator});
               store_.remove(project_id(ctx));
               return json{{"deleted", project_id(ctx)}};
             }));

  // ---- social impact evaluator ----
  srv.Get("/api/projects/:id/logic-model", wrap([this, project_id](Ctx& ctx) {
            return json(logic_model_of(store_.get(project_id(ctx))));
          }));
  srv.Put("/api/projects/:id/logic-model", wrap([this, project_id](Ctx& ctx) {
            require_role(ctx, {UserRole::Convener});
            const auto model = ctx.body().get<impact::LogicModel>();
            if (const auto report = impact::validate_model(model); !report.ok()) {
              throw Error(ErrorCode::ValidationFailure, "invalid logic model: " + report.summary());
            }
            const auto p = store_.update(project_id(ctx), [&](Project& p) { p.logic_model = model; });
            return json(*p.logic_model);
          }));
  srv.Get("/api/projects/:id/logic-model/validate", wrap([this, project_id](Ctx& ctx) {
            const auto report = impact::validate_model(logic_model_of(store_.get(project_id(ctx))));
            json findings = json::array();
            for (const auto& f : report.graph.findings) {
              findings.push_back({{"kind", std::string(to_string(f.kind))}, {"nodes", f.nodes}, {"message", f.message}});
            }
            return json{{"ok", report.ok()}, {"findings", findings}, {"errors", report.errors}, {"warnings", report.warnings}};
          }));
  srv.Post("/api/projects/:id/logic-model/edits", wrap([this, project_id](Ctx& ctx) {
             require_role(ctx, {UserRole::Convener});
             const auto e = impact::edit_from_json(ctx.body());
             const auto p = store_.update(project_id(ctx), [&](Project& p) {
               p.logic_model = impact::apply_edit(logic_model_of(p), e);
             });
             return json(*p.logic_model);
           }));
  srv.Get("/api/projects/:id/logic-model/rank", wrap([this, project_id](Ctx& ctx) {
            return json(impact::rank_inputs(logic_model_of(store_.get(project_id(ctx)))));
          }));
  srv.Get("/api/projects/:id/logic-model/choices", wrap([this, project_id](Ctx& ctx) {
            const auto p = store_.get(project_id(ctx));
            const auto& model = logic_model_of(p);
            std::size_t k = model.graph.nodes_of_kind(NodeKind::Input).size();
            if (ctx.req.has_param("top_k")) k = std::stoul(ctx.req.get_param_value("top_k"));
            return json(impact::export_choices(model, k));
          }));
  srv.Post("/api/projects/:id/logic-model/advanced", wrap([this, project_id](Ctx& ctx) {
             const auto b = ctx.body();
             Project p = store_.get(project_id(ctx));
             if (b.contains("settings")) {
               require_role(ctx, {UserRole::Convener});
               const auto settings = b["settings"].get<impact::AdvancedSettings>();
               impact::advanced_trajectory(logic_model_of(p), settings);  // validates before saving
               p = store_.update(project_id(ctx), [&](Project& q) { logic_model_of(q), q.logic_model->advanced = settings; });
             }
             const auto& model = logic_model_of(p);
             if (!model.advanced) throw Error(ErrorCode::InvalidSettings, "no advanced settings configured");
             return json{{"settings", *model.advanced}, {"trajectory", impact::advanced_trajectory(model, *model.advanced)}};
           }));

  // ---- pluralistic policy simulator ----
  srv.Put("/api/projects/:id/multi-agent-model", wrap([this, project_id](Ctx& ctx) {
            require_role(ctx, {UserRole::Convener});
            const auto model = ctx.body().get<sim::MultiAgentModel>();
            if (const auto problems = sim::validate_model(model); !problems.empty()) {
              throw Error(ErrorCode::ValidationFailure, "invalid multi-agent model: " + problems.front());
            }
            return json(*store_.update(project_id(ctx), [&](Project& p) { p.multi_agent = model; }).multi_agent);
          }));
  srv.Get("/api/projects/:id/multi-agent-model", wrap([this, project_id](Ctx& ctx) {
            return json(multi_agent_of(store_.get(project_id(ctx))));
          }));
  srv.Get("/api/projects/:id/scenarios", wrap([this, project_id](Ctx& ctx) {
            return json(store_.get(project_id(ctx)).scenarios);
          }));
  srv.Put("/api/projects/:id/scenarios", wrap([this, project_id](Ctx& ctx) {
            require_role(ctx, {UserRole::Convener});
            const auto scenarios = ctx.body().get<std::vector<sim::PolicyScenario>>();
            return json(store_.update(project_id(ctx), [&](Project& p) { p.scenarios = scenarios; }).scenarios);
          }));
  srv.Post("/api/projects/:id/sim/evaluate", wrap([this, project_id](Ctx& ctx) {
             const auto b = ctx.body();
             const auto p = store_.get(project_id(ctx));
             const auto scenario =
                 b.contains("scenario") ? b["scenario"].get<sim::PolicyScenario>() : scenario_of(p, b.at("scenario_id"));
             return json{{"scenario", scenario.id},
                         {"values", sim::values_to_json(sim::evaluate_policy(multi_agent_of(p), scenario))}};
           }));
  srv.Post("/api/projects/:id/sim/normalize", wrap([](Ctx& ctx) {
             const auto b = ctx.body();
             std::vector<sim::RawPoint> points;
             for (const auto& pt : b.at("points")) {
               points.push_back({pt.at("policy").get<std::string>(), values_from(pt.at("values"))});
             }
             json out = json::array();
             for (const auto& [policy, point] : sim::normalize_ternary(points, scaling_from(b))) {
               json row = point;
               row["policy"] = policy;
               out.push_back(std::move(row));
             }
             return out;
           }));
  srv.Post("/api/projects/:id/sim/compare", wrap([this, project_id](Ctx& ctx) {
             const auto b = ctx.body();
             const auto p = store_.get(project_id(ctx));
             std::vector<sim::PolicyScenario> scenarios;
             if (b.contains("scenario_ids")) {
               for (const auto& id : b["scenario_ids"]) scenarios.push_back(scenario_of(p, id.get<std::string>()));
             } else {
               scenarios = p.scenarios;
             }
             return json(sim::compare_policies(multi_agent_of(p), scenarios, b.value("selected", std::size_t{0}),
                                               scaling_from(b)));
           }));
  srv.Get("/api/projects/:id/sim/sensitivity/:scenario", wrap([this, project_id](Ctx& ctx) {
            const auto p = store_.get(project_id(ctx));
            return json(sim::policy_sensitivity(multi_agent_of(p), scenario_of(p, ctx.param("scenario"))));
          }));

  // ---- consensus sessions ----
  srv.Get("/api/projects/:id/sessions", wrap([this, project_id](Ctx& ctx) {
            json out = json::array();
            for (const auto& sid : store_.sessions(project_id(ctx))) {
              const auto s = store_.session(project_id(ctx), sid);
              out.push_back({{"id", sid}, {"phase", std::string(consensus::to_string(s.phase))}, {"version", s.version()}});
            }
            return out;
          }));
  srv.Post("/api/projects/:id/sessions", wrap([this, project_id](Ctx& ctx) {
             require_role(ctx, {UserRole::Convener});
             const auto b = ctx.body();
             std::string sid = b.value("id", std::string{});
             if (sid.empty()) sid = "session-" + std::to_string(store_.sessions(project_id(ctx)).size() + 1);
             store_.create_session(project_id(ctx), sid);
             ctx.status = 201;
             return session_json(sid, store_.session(project_id(ctx), sid));
           }));
  srv.Get("/api/projects/:id/sessions/:sid", wrap([this, project_id](Ctx& ctx) {
            const auto sid = ctx.param("sid");
            if (ctx.req.has_param("since")) {
              const auto since = std::stoul(ctx.req.get_param_value("since"));
              auto wait = config_.max_wait;
              if (ctx.req.has_param("wait")) {
                wait = std::min(config_.max_wait, std::chrono::milliseconds(std::stol(ctx.req.get_param_value("wait"))));
              }
              return session_json(sid, store_.wait(project_id(ctx), sid, since, wait));
            }
            return session_json(sid, store_.session(project_id(ctx), sid));
          }));

  // Generic event endpoint plus one named route per lifecycle step.
  const auto post_event = [this, project_id](Ctx& ctx, SessionEvent e) {
    authorize_event(ctx, e);
    const auto sid = ctx.param("sid");
    return session_json(sid, store_.append(project_id(ctx), sid, e));
  };
  srv.Post("/api/projects/:id/sessions/:sid/events", wrap([post_event](Ctx& ctx) {
             return post_event(ctx, consensus::event_from_json(ctx.body()));
           }));
  const auto typed = [post_event](const char* type) {
    return [post_event, type](Ctx& ctx) {
      json b = ctx.body();
      b["type"] = type;
      return post_event(ctx, consensus::event_from_json(b));
    };
  };
  srv.Post("/api/projects/:id/sessions/:sid/issue", wrap([this, project_id, post_event](Ctx& ctx) {
             json b = ctx.body();
             // The issue defaults to the project's choice set.
             if (!b.contains("choices")) {
               const auto p = store_.get(project_id(ctx));
               if (!p.choices) throw Error(ErrorCode::ValidationFailure, "no choices given and the project has none");
               b["choices"] = *p.choices;
             }
             b["type"] = "finalize_issue";
             return post_event(ctx, consensus::event_from_json(b));
           }));
  srv.Post("/api/projects/:id/sessions/:sid/profiles", wrap([post_event](Ctx& ctx) {
             return post_event(ctx, consensus::event::SubmitProfile{ctx.body().get<consensus::PreferenceProfile>()});
           }));
  srv.Post("/api/projects/:id/sessions/:sid/close-collection", wrap(typed("begin_analysis")));
  srv.Post("/api/projects/:id/sessions/:sid/analysis", wrap([this, project_id, post_event](Ctx& ctx) {
             // Runs both steps when the session is still collecting.
             const auto sid = ctx.param("sid");
             const json b = ctx.body();
             if (store_.session(project_id(ctx), sid).phase == consensus::Phase::PreferenceCollection) {
               json begin = {{"type", "begin_analysis"}, {"facilitator_close", b.value("facilitator_close", false)}};
               post_event(ctx, consensus::event_from_json(begin));
             }
             json compute = b;
             compute["type"] = "compute_proposals";
             compute.erase("facilitator_close");
             return post_event(ctx, consensus::event_from_json(compute));
           }));
  srv.Post("/api/projects/:id/sessions/:sid/question", wrap(typed("call_question")));
  srv.Post("/api/projects/:id/sessions/:sid/approvals", wrap(typed("cast_approval")));
  srv.Post("/api/projects/:id/sessions/:sid/revise", wrap(typed("revise_choices")));
  srv.Post("/api/projects/:id/sessions/:sid/messages", wrap(typed("post_message")));
  srv.Get("/api/projects/:id/sessions/:sid/results", wrap([this, project_id](Ctx& ctx) {
            return consensus::results_json(store_.session(project_id(ctx), ctx.param("sid")));
          }));
  srv.Get("/api/projects/:id/sessions/:sid/motions", wrap([this, project_id](Ctx& ctx) {
            mediator::MotionSettings settings;
            if (ctx.req.has_param("threshold")) settings.dispersion_threshold = std::stod(ctx.req.get_param_value("threshold"));
            const auto s = store_.session(project_id(ctx), ctx.param("sid"));
            return json{{"version", s.version()},
                        {"phase", std::string(consensus::to_string(s.phase))},
                        {"motions", mediator::to_json(mediator::session_motions(s, settings))}};
          }));

  // ---- personality estimator ----
  const auto flow_key = [project_id](const Ctx& ctx) { return project_id(ctx) + "/" + ctx.param("participant"); };
  const auto own_flow = [](const Ctx& ctx) {
    const auto& u = ctx.who();
    if (u.role == UserRole::Operator) return;
    if (u.role == UserRole::Subject && u.id == ctx.param("participant")) return;
    throw Error(ErrorCode::Forbidden, "questionnaires are answered by the subject in person");
  };
  srv.Post("/api/projects/:id/svo/:participant/consent", wrap([this, project_id, flow_key, own_flow](Ctx& ctx) {
             own_flow(ctx);
             store_.get(project_id(ctx));  // 404 for unknown projects
             auto flow = std::make_shared<svo::Questionnaire>(svo::default_instrument(), ctx.param("participant"));
             flow->record_consent();
             std::lock_guard lock(flows_mutex_);
             flows_[flow_key(ctx)] = flow;
             return json{{"participant", flow->participant()}, {"consent", true}};
           }));
  const auto flow_of = [this, flow_key](const Ctx& ctx) {
    const auto it = flows_.find(flow_key(ctx));
    if (it == flows_.end()) throw Error(ErrorCode::ConsentMissing, "consent has not been recorded for " + ctx.param("participant"));
    return it->second;
  };
  srv.Post("/api/projects/:id/svo/:participant/practice", wrap([this, flow_of, own_flow](Ctx& ctx) {
             own_flow(ctx);
             std::lock_guard lock(flows_mutex_);
             const auto flow = flow_of(ctx);
             const auto b = ctx.body();
             flow->complete_practice(responses_from(b.value("responses", json::array())));
             return json{{"practice_done", true}};
           }));
  srv.Get("/api/projects/:id/svo/:participant/items", wrap([this, flow_of, own_flow](Ctx& ctx) {
            own_flow(ctx);
            std::lock_guard lock(flows_mutex_);
            return json(flow_of(ctx)->items());
          }));
  srv.Post("/api/projects/:id/svo/:participant/responses", wrap([this, flow_of, own_flow](Ctx& ctx) {
             own_flow(ctx);
             std::lock_guard lock(flows_mutex_);
             const auto flow = flow_of(ctx);
             for (const auto& r : responses_from(ctx.body().at("responses"))) flow->respond(r);
             return json{{"answered", flow->answered()}};
           }));
  srv.Post("/api/projects/:id/svo/:participant/finish", wrap([this, project_id, flow_of, flow_key, own_flow](Ctx& ctx) {
             own_flow(ctx);
             svo::SvoResult result;
             {
               std::lock_guard lock(flows_mutex_);
               result = flow_of(ctx)->finish();
               flows_.erase(flow_key(ctx));
             }
             store_.update(project_id(ctx), [&](Project& p) { p.svo_results[result.participant] = result; });
             return json(result);
           }));
  srv.Get("/api/projects/:id/svo/:participant/result", wrap([this, project_id](Ctx& ctx) {
            const auto p = store_.get(project_id(ctx));
            const auto it = p.svo_results.find(ctx.param("participant"));
            if (it == p.svo_results.end()) throw Error(ErrorCode::NotFound, "no SVO result for " + ctx.param("participant"));
            return json(it->second);
          }));
  srv.Get("/api/projects/:id/svo", wrap([this, project_id](Ctx& ctx) {
            return json(store_.get(project_id(ctx)).svo_results);
          }));

  // ---- behavior change promoter ----
  const auto operators = [](const Ctx& ctx) { require_role(ctx, {UserRole::Operator, UserRole::Convener}); };
  srv.Get("/api/projects/:id/behavior/config", wrap([this, project_id](Ctx& ctx) {
            return json(behavior_of(store_.get(project_id(ctx))));
          }));
  srv.Put("/api/projects/:id/behavior/config", wrap([this, project_id, operators](Ctx& ctx) {
            operators(ctx);
            const auto config = ctx.body().get<behavior::BehaviorConfig>();
            return json(*store_.update(project_id(ctx), [&](Project& p) { p.behavior = config; }).behavior);
          }));
  const auto baseline_of = [](const json& b, const behavior::BehaviorConfig& c) {
    return b.contains("baseline") ? behavior::vector_from_json(b["baseline"]) : c.baseline;
  };
  srv.Post("/api/projects/:id/behavior/predict", wrap([this, project_id, operators, baseline_of](Ctx& ctx) {
             operators(ctx);
             const auto b = ctx.body();
             const auto p = store_.get(project_id(ctx));
             const auto& config = behavior_of(p);
             const auto catalog = behavior::default_catalog();
             auto features = baseline_of(b, config);
             if (b.contains("subject")) {
               const auto it = p.subjects.find(b["subject"].get<std::string>());
               if (it == p.subjects.end()) throw Error(ErrorCode::NotFound, "no subject " + b["subject"].get<std::string>());
               features = it->second;
             }
             json out = behavior::predict(config.model, catalog, features);
             out["sensitivity"] = behavior::feature_sensitivity(config.model, catalog, features);
             return out;
           }));
  srv.Post("/api/projects/:id/behavior/simulate", wrap([this, project_id, operators, baseline_of](Ctx& ctx) {
             operators(ctx);
             const auto b = ctx.body();
             const auto config = behavior_of(store_.get(project_id(ctx)));
             const auto plans =
                 b.contains("plans") ? b["plans"].get<std::vector<behavior::InterventionPlan>>() : config.plans;
             return json(behavior::simulate_interventions(config.model, behavior::default_catalog(),
                                                          baseline_of(b, config), plans));
           }));
  srv.Post("/api/projects/:id/behavior/suggest", wrap([this, project_id, operators, baseline_of](Ctx& ctx) {
             operators(ctx);
             const auto b = ctx.body();
             const auto config = behavior_of(store_.get(project_id(ctx)));
             behavior::InterventionPlan plan;
             if (b.contains("plan")) {
               plan = b["plan"].get<behavior::InterventionPlan>();
             } else {
               const auto id = b.at("plan_id").get<std::string>();
               const auto it = std::find_if(config.plans.begin(), config.plans.end(),
                                            [&](const behavior::InterventionPlan& x) { return x.id == id; });
               if (it == config.plans.end()) throw Error(ErrorCode::NotFound, "no plan '" + id + "'", id);
               plan = *it;
             }
             auto sustain = config.sustainability;
             sustain.decay = b.value("decay", sustain.decay);
             sustain.horizon = b.value("horizon", sustain.horizon);
             return json(behavior::suggest(config.model, behavior::default_catalog(), baseline_of(b, config), plan, sustain));
           }));
  srv.Post("/api/projects/:id/behavior/monitor", wrap([this, project_id, operators](Ctx& ctx) {
             operators(ctx);
             const auto b = ctx.body();
             const auto config = behavior_of(store_.get(project_id(ctx)));
             std::lock_guard lock(monitors_mutex_);
             auto& monitor = monitors_[project_id(ctx)];
             if (!monitor) monitor = std::make_shared<behavior::Monitor>(config.monitor_threshold);
             return json(monitor->record(b.at("subject").get<std::string>(), b.value("period", 0),
                                         b.at("observed").get<double>()));
           }));
  srv.Get("/api/projects/:id/behavior/monitor/:subject", wrap([this, project_id](Ctx& ctx) {
            std::lock_guard lock(monitors_mutex_);
            const auto it = monitors_.find(project_id(ctx));
            if (it == monitors_.end()) return json::array();
            return json(it->second->records(ctx.param("subject")));
          }));
  srv.Post("/api/projects/:id/behavior/subjects/import", wrap([this, project_id, operators](Ctx& ctx) {
             operators(ctx);
             const auto b = ctx.body();
             behavior::ImportReport report;
             store_.update(project_id(ctx), [&](Project& p) {
               std::vector<svo::SvoResult> results;
               if (b.contains("results")) {
                 results = b["results"].get<std::vector<svo::SvoResult>>();
               } else {
                 for (const auto& [id, r] : p.svo_results) results.push_back(r);
               }
               report = behavior::import_subjects(behavior::default_catalog(), p.subjects, results);
             });
             return json(report);
           }));
  srv.Get("/api/projects/:id/behavior/subjects", wrap([this, project_id](Ctx& ctx) {
            json out = json::object();
            for (const auto& [id, v] : store_.get(project_id(ctx)).subjects) out[id] = behavior::vector_to_json(v);
            return out;
          }));
}

}  // namespace dualloop
