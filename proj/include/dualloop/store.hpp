#pragma once

#include "dualloop/project.hpp"
#include "dualloop/session.hpp"

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

namespace dualloop {

// Directory-backed project store:
//   <root>/projects/<id>/project.json            canonical project, no sessions
//   <root>/projects/<id>/sessions/<sid>.jsonl   append-only event log
// Opening the store replays every log, so a restart reproduces all session
// states. Writes to one project are serialized by a per-project mutex.
class ProjectStore {
 public:
  explicit ProjectStore(std::filesystem::path root);

  std::vector<std::string> list() const;
  bool contains(const std::string& id) const;

  Project get(const std::string& id) const;  // throws NotFound
  void create(const Project& p);             // throws Conflict
  void remove(const std::string& id);

  // Runs `fn` on the live project under its lock and persists the result.
  // Session logs are not touched; `fn` must not edit `sessions`.
  Project update(const std::string& id, const std::function<void(Project&)>& fn);

  void create_session(const std::string& id, const std::string& session);
  std::vector<std::string> sessions(const std::string& id) const;
  consensus::SessionState session(const std::string& id, const std::string& session) const;

  // Validates through the session state machine, then appends to the log.
  consensus::SessionState append(const std::string& id, const std::string& session, const consensus::SessionEvent& e);

  // Blocks until the session version exceeds `since` or `timeout` elapses;
  // returns the state current at wake-up.
  consensus::SessionState wait(const std::string& id, const std::string& session, std::size_t since,
                               std::chrono::milliseconds timeout) const;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  struct Entry {
    mutable std::mutex mutex;
    mutable std::condition_variable changed;
    Project project;
    std::map<std::string, consensus::SessionState> states;
  };

  std::shared_ptr<Entry> entry(const std::string& id) const;
  std::filesystem::path project_dir(const std::string& id) const;
  void persist(const Project& p) const;
  void load_all();

  std::filesystem::path root_;
  mutable std::shared_mutex index_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> entries_;
};

// Ids become file names, so they are restricted to [A-Za-z0-9_.-] and may
// not start with a dot.
bool valid_id(const std::string& id);

}  // namespace dualloop
