#include "dualloop/store.hpp"

#include "dualloop/error.hpp"

#include <algorithm>
#include <fstream>
#include <ranges>
#include <sstream>

namespace dualloop {

namespace fs = std::filesystem;

namespace {

Project without_sessions(Project p) {
  p.sessions.clear();
  return p;
}

std::vector<consensus::SessionEvent> read_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open session log " + path.string());
  std::vector<consensus::SessionEvent> events;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      events.push_back(consensus::event_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      // A torn final line can only come from a crash mid-append; drop it.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw Error(ErrorCode::ValidationFailure,
                  path.string() + ":" + std::to_string(number) + ": unreadable event: " + e.what());
    }
  }
  return events;
}

}  // namespace

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
           c == '.';
  });
}

ProjectStore::ProjectStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "projects");
  load_all();
}

fs::path ProjectStore::project_dir(const std::string& id) const { return root_ / "projects" / id; }

void ProjectStore::load_all() {
  for (const auto& dir : fs::directory_iterator(root_ / "projects")) {
    if (!dir.is_directory()) continue;
    auto e = std::make_shared<Entry>();
    e->project = load_project_file(dir.path() / "project.json");
    const auto sessions = dir.path() / "sessions";
    if (fs::exists(sessions)) {
      for (const auto& log : fs::directory_iterator(sessions)) {
        if (log.path().extension() != ".jsonl") continue;
        const auto sid = log.path().stem().string();
        auto events = read_log(log.path());
        e->states[sid] = consensus::replay(events);
        e->project.sessions[sid] = std::move(events);
      }
    }
    entries_[e->project.id] = std::move(e);
  }
}

std::shared_ptr<ProjectStore::Entry> ProjectStore::entry(const std::string& id) const {
  std::shared_lock lock(index_mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(ErrorCode::NotFound, "no project '" + id + "'", id);
  return it->second;
}

void ProjectStore::persist(const Project& p) const {
  const auto dir = project_dir(p.id);
  fs::create_directories(dir / "sessions");
  save_project_file(without_sessions(p), dir / "project.json");
}

std::vector<std::string> ProjectStore::list() const {
  std::shared_lock lock(index_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, e] : entries_) ids.push_back(id);
  return ids;
}

bool ProjectStore::contains(const std::string& id) const {
  std::shared_lock lock(index_mutex_);
  return entries_.count(id) != 0;
}

Project ProjectStore::get(const std::string& id) const {
  const auto e = entry(id);
  std::lock_guard lock(e->mutex);
  return e->project;
}

void ProjectStore::create(const Project& p) {
  if (!valid_id(p.id)) throw Error(ErrorCode::ValidationFailure, "invalid project id '" + p.id + "'", "/id");
  std::unique_lock lock(index_mutex_);
  if (entries_.count(p.id)) throw Error(ErrorCode::Conflict, "project '" + p.id + "' already exists", p.id);
  for (const auto& sid : p.sessions | std::views::keys) {
    if (!valid_id(sid)) throw Error(ErrorCode::ValidationFailure, "invalid session id '" + sid + "'");
  }
  auto e = std::make_shared<Entry>();
  e->project = p;
  persist(p);
  for (const auto& [sid, events] : p.sessions) {
    std::ofstream out(project_dir(p.id) / "sessions" / (sid + ".jsonl"), std::ios::trunc);
    for (const auto& ev : events) out << consensus::to_json(ev).dump() << "\n";
    e->states[sid] = consensus::replay(events);
  }
  entries_[p.id] = std::move(e);
}

void ProjectStore::remove(const std::string& id) {
  std::unique_lock lock(index_mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(ErrorCode::NotFound, "no project '" + id + "'", id);
  {
    std::lock_guard entry_lock(it->second->mutex);
    fs::remove_all(project_dir(id));
  }
  entries_.erase(it);
}

Project ProjectStore::update(const std::string& id, const std::function<void(Project&)>& fn) {
  const auto e = entry(id);
  std::lock_guard lock(e->mutex);
  Project next = e->project;
  fn(next);
  next.id = id;
  next.sessions = e->project.sessions;
  persist(next);
  e->project = std::move(next);
  return e->project;
}

void ProjectStore::create_session(const std::string& id, const std::string& session) {
  if (!valid_id(session)) throw Error(ErrorCode::ValidationFailure, "invalid session id '" + session + "'");
  const auto e = entry(id);
  std::lock_guard lock(e->mutex);
  if (e->states.count(session)) throw Error(ErrorCode::Conflict, "session '" + session + "' already exists", session);
  const auto dir = project_dir(id) / "sessions";
  fs::create_directories(dir);
  std::ofstream(dir / (session + ".jsonl"), std::ios::trunc);
  e->states[session] = consensus::SessionState{};
  e->project.sessions[session] = {};
  e->changed.notify_all();
}

std::vector<std::string> ProjectStore::sessions(const std::string& id) const {
  const auto e = entry(id);
  std::lock_guard lock(e->mutex);
  std::vector<std::string> out;
  for (const auto& [sid, s] : e->states) out.push_back(sid);
  return out;
}

consensus::SessionState ProjectStore::session(const std::string& id, const std::string& session) const {
  const auto e = entry(id);
  std::lock_guard lock(e->mutex);
  const auto it = e->states.find(session);
  if (it == e->states.end()) throw Error(ErrorCode::NotFound, "no session '" + session + "'", session);
  return it->second;
}

consensus::SessionState ProjectStore::append(const std::string& id, const std::string& session,
                                             const consensus::SessionEvent& ev) {
  const auto e = entry(id);
  std::lock_guard lock(e->mutex);
  const auto it = e->states.find(session);
  if (it == e->states.end()) throw Error(ErrorCode::NotFound, "no session '" + session + "'", session);
  consensus::SessionState next = consensus::session_step(it->second, ev);
  {
    std::ofstream out(project_dir(id) / "sessions" / (session + ".jsonl"), std::ios::app);
    if (!out) throw Error(ErrorCode::NotFound, "cannot append to session log '" + session + "'");
    out << consensus::to_json(ev).dump() << "\n";
    out.flush();
    if (!out) throw Error(ErrorCode::NotFound, "write to session log '" + session + "' failed");
  }
  it->second = next;
  e->project.sessions[session].push_back(ev);
  e->changed.notify_all();
  return next;
}

consensus::SessionState ProjectStore::wait(const std::string& id, const std::string& session, std::size_t since,
                                           std::chrono::milliseconds timeout) const {
  const auto e = entry(id);
  std::unique_lock lock(e->mutex);
  const auto current = [&]() -> const consensus::SessionState& {
    const auto it = e->states.find(session);
    if (it == e->states.end()) throw Error(ErrorCode::NotFound, "no session '" + session + "'", session);
    return it->second;
  };
  e->changed.wait_for(lock, timeout, [&] { return current().version() > since; });
  return current();
}

}  // namespace dualloop
