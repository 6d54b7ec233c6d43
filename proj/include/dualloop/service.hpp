#pragma once

#include "dualloop/auth.hpp"
#include "dualloop/behavior.hpp"
#include "dualloop/error.hpp"
#include "dualloop/store.hpp"
#include "dualloop/svo.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace httplib {
class Server;
}

namespace dualloop {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path data_dir = "dualloop-data";
  bool open_registration = true;
  std::chrono::milliseconds max_wait{25000};  // long-poll ceiling
};

// HTTP JSON API over the project store. Errors are returned as
// {"error": {"code", "message", "detail"}} with the status from http_status().
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and returns the bound port.
  int bind();
  // Blocks serving requests until stop().
  void listen();
  void stop();
  void wait_until_ready() const;

  ProjectStore& store() noexcept { return store_; }
  UserStore& users() noexcept { return users_; }

 private:
  void routes();

  ServiceConfig config_;
  ProjectStore store_;
  UserStore users_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex flows_mutex_;
  // In-progress questionnaires keyed by "<project>/<participant>".
  std::map<std::string, std::shared_ptr<svo::Questionnaire>> flows_;
  std::mutex monitors_mutex_;
  std::map<std::string, std::shared_ptr<behavior::Monitor>> monitors_;
};

int http_status(ErrorCode code) noexcept;

}  // namespace dualloop
