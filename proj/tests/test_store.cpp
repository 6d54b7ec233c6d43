#include "dualloop/store.hpp"

#include "dualloop/error.hpp"
#include "service_support.hpp"

#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

using namespace dualloop;
namespace ev = consensus::event;

namespace {

consensus::ChoiceSet abc() {
  consensus::ChoiceSet s;
  for (const char* id : {"a", "b", "c"}) s.choices.push_back({id, id, {"f"}});
  s.factors["f"] = "shared";
  return s;
}

void open_issue(ProjectStore& store, const std::string& pid, const std::string& sid) {
  store.create_session(pid, sid);
  store.append(pid, sid, ev::FinalizeIssue{"t", abc(), {"p1", "p2"}});
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::NotFound;
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("create, get and update persist the project file") {
    const auto dir = harness::scratch_dir("store");
    {
      ProjectStore store(dir);
      Project p;
      p.id = "demo";
      p.name = "Demo";
      store.create(p);
      CHECK(code_of([&] { store.create(p); }) == ErrorCode::Conflict);
      store.update("demo", [](Project& q) { q.name = "Renamed"; });
      CHECK(std::filesystem::exists(dir / "projects" / "demo" / "project.json"));
    }
    ProjectStore reopened(dir);
    CHECK(reopened.list() == std::vector<std::string>{"demo"});
    CHECK(reopened.get("demo").name == "Renamed");
    CHECK(code_of([&] { reopened.get("nope"); }) == ErrorCode::NotFound);
    reopened.remove("demo");
    CHECK_FALSE(std::filesystem::exists(dir / "projects" / "demo"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("ids that would escape the data directory are refused") {
    CHECK(valid_id("unused-stock_2.v1"));
    CHECK_FALSE(valid_id(""));
    CHECK_FALSE(valid_id(".."));
    CHECK_FALSE(valid_id("a/b"));
    CHECK_FALSE(valid_id(".hidden"));
    const auto dir = harness::scratch_dir("store");
    ProjectStore store(dir);
    Project p;
    p.id = "../x";
    CHECK(code_of([&] { store.create(p); }) == ErrorCode::ValidationFailure);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("illegal events are not logged and restart replays the rest") {
    const auto dir = harness::scratch_dir("store");
    consensus::SessionState before;
    {
      ProjectStore store(dir);
      Project p;
      p.id = "x";
      store.create(p);
      open_issue(store, "x", "s");
      store.append("x", "s", ev::SubmitProfile{{"p1", {"a", "b", "c"}, 1, {{"f", 1.0}}}});
      CHECK(code_of([&] { store.append("x", "s", ev::CallQuestion{"a"}); }) == ErrorCode::IllegalTransition);
      store.append("x", "s", ev::SubmitProfile{{"p2", {"b", "a", "c"}, 2, {{"f", 1.0}}}});
      store.append("x", "s", ev::BeginAnalysis{false});
      store.append("x", "s", ev::ComputeProposals{});
      before = store.session("x", "s");
    }
    ProjectStore reopened(dir);
    const auto after = reopened.session("x", "s");
    CHECK(after.version() == 5);
    CHECK(consensus::to_json(after, true) == consensus::to_json(before, true));
    CHECK(reopened.get("x").sessions.at("s").size() == 5);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("a torn final log line is dropped on replay") {
    const auto dir = harness::scratch_dir("store");
    {
      ProjectStore store(dir);
      Project p;
      p.id = "x";
      store.create(p);
      open_issue(store, "x", "s");
    }
    std::ofstream(dir / "projects" / "x" / "sessions" / "s.jsonl", std::ios::app) << R"({"type":"submit_pro)";
    ProjectStore reopened(dir);
    CHECK(reopened.session("x", "s").version() == 1);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("concurrent appends are serialized per project") {
    const auto dir = harness::scratch_dir("store");
    {
      ProjectStore store(dir);
      for (const char* id : {"p", "q"}) {
        Project p;
        p.id = id;
        store.create(p);
        open_issue(store, id, "s");
      }
      constexpr int kThreads = 8;
      constexpr int kEach = 25;
      std::vector<std::thread> threads;
      for (int t = 0; t < kThreads; ++t) {
        threads.emplace_back([&, t] {
          const std::string pid = t % 2 ? "p" : "q";
          for (int i = 0; i < kEach; ++i) store.append(pid, "s", ev::PostMessage{"u" + std::to_string(t), "hi"});
        });
      }
      for (auto& th : threads) th.join();
      CHECK(store.session("p", "s").version() == 1 + kThreads / 2 * kEach);
      CHECK(store.session("q", "s").version() == 1 + kThreads / 2 * kEach);
    }
    ProjectStore reopened(dir);
    CHECK(reopened.session("p", "s").version() == 101);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("wait wakes on a change and times out otherwise") {
    const auto dir = harness::scratch_dir("store");
    ProjectStore store(dir);
    Project p;
    p.id = "x";
    store.create(p);
    open_issue(store, "x", "s");

    const auto t0 = std::chrono::steady_clock::now();
    CHECK(store.wait("x", "s", 1, std::chrono::milliseconds(50)).version() == 1);
    CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(45));

    std::thread writer([&] {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
      store.append("x", "s", ev::PostMessage{"p1", "hello"});
    });
    const auto t1 = std::chrono::steady_clock::now();
    const auto s = store.wait("x", "s", 1, std::chrono::milliseconds(5000));
    const auto waited = std::chrono::steady_clock::now() - t1;
    writer.join();
    CHECK(s.version() == 2);
    CHECK(waited < std::chrono::seconds(2));
    std::filesystem::remove_all(dir);
  }
}
