// Randomized invariants over generated inputs. Seeds are fixed so failures
// reproduce; each case reports the seed and iteration through CAPTURE.

#include "dualloop/consensus.hpp"
#include "dualloop/error.hpp"
#include "dualloop/graph.hpp"
#include "dualloop/policy_sim.hpp"
#include "dualloop/project.hpp"
#include "dualloop/session.hpp"
#include "dualloop/svo.hpp"

#include "oracles/oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dualloop;

namespace {

consensus::Ranking shuffled(std::mt19937_64& rng, std::size_t n) {
  consensus::Ranking r;
  for (std::size_t i = 0; i < n; ++i) r.push_back("c" + std::to_string(i));
  std::shuffle(r.begin(), r.end(), rng);
  return r;
}

std::vector<sim::RawPoint> random_points(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 7);
  std::uniform_real_distribution<double> value(-1.0, 5.0);
  std::vector<sim::RawPoint> pts;
  const int k = count(rng);
  for (int i = 0; i < k; ++i) pts.push_back({"p" + std::to_string(i), {value(rng), value(rng), value(rng)}});
  return pts;
}

std::vector<svo::SliderResponse> random_responses(std::mt19937_64& rng, const svo::Instrument& ins) {
  std::vector<svo::SliderResponse> rs;
  for (const auto& item : ins.items) rs.push_back({item.id, testgen::random_position(rng)});
  return rs;
}

consensus::ChoiceSet abc() {
  return {{{"A", "A", {"f"}}, {"B", "B", {"f", "g"}}, {"C", "C", {"g"}}}, {{"f", "F"}, {"g", "G"}}};
}

}  // namespace

TEST_SUITE("properties") {
  TEST_CASE("kendall distance is a metric bounded by n(n-1)/2") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> size(1, 9);
    for (int i = 0; i < 500; ++i) {
      CAPTURE(i);
      const auto n = size(rng);
      const auto a = shuffled(rng, n);
      const auto b = shuffled(rng, n);
      const auto c = shuffled(rng, n);
      const auto ab = consensus::kendall_tau(a, b);
      CHECK(consensus::kendall_tau(a, a) == 0);
      CHECK(ab == consensus::kendall_tau(b, a));
      CHECK((ab == 0) == (a == b));
      CHECK(consensus::kendall_tau(a, c) <= ab + consensus::kendall_tau(b, c));
      CHECK(ab <= n * (n - 1) / 2);
      CHECK(ab == oracle::kendall(a, b));
      // Reversal is the unique farthest ranking.
      auto rev = a;
      std::reverse(rev.begin(), rev.end());
      CHECK(consensus::kendall_tau(a, rev) == n * (n - 1) / 2);
    }
  }

  TEST_CASE("compromise never does worse than any participant's own ranking") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
      CAPTURE(i);
      const auto profiles = oracle::random_profiles(rng, 5, 6);
      const auto r = consensus::compromise_exploration(profiles);
      for (const auto& candidate : profiles) {
        std::size_t total = 0;
        for (const auto& p : profiles) total += consensus::kendall_tau(candidate.order, p.order);
        CHECK(r.total <= total);
      }
      // Permissible cost is zero exactly when some choice sits inside every prefix.
      const auto pm = consensus::permissible_meeting(profiles);
      bool shared = false;
      for (const auto& choice : profiles.front().order) {
        bool inside = true;
        for (const auto& p : profiles) {
          const auto pos = static_cast<std::size_t>(std::find(p.order.begin(), p.order.end(), choice) - p.order.begin());
          inside &= pos < p.permissible_k;
        }
        shared |= inside;
      }
      CHECK((pm.widening_cost == 0) == shared);
    }
  }

  TEST_CASE("ternary simplex sums to one and ignores per-dimension scale") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> log_c(-4.0, 4.0);
    int sets = 0;
    for (int i = 0; sets < 300; ++i) {
      CAPTURE(i);
      const auto pts = random_points(rng);
      std::vector<std::pair<std::string, sim::TernaryPoint>> base;
      try {
        base = sim::normalize_ternary(pts);
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateRange);
        continue;
      }
      ++sets;
      for (const auto& [id, p] : base) {
        if (p.status == sim::PointStatus::ZeroSum) {
          CHECK_FALSE(p.simplex.has_value());
          continue;
        }
        REQUIRE(p.simplex.has_value());
        const auto& s = *p.simplex;
        CHECK(std::abs(s[0] + s[1] + s[2] - 1.0) <= 1e-9);
        // Verbatim scaling keeps signs, so only non-negative raw values
        // promise a point inside the triangle.
        if (std::all_of(p.raw.begin(), p.raw.end(), [](double x) { return x >= 0.0; })) {
          CHECK(p.status == sim::PointStatus::Ok);
          for (double x : s) CHECK(x >= 0.0);
        }
      }
      // Relabeling policies permutes the output without changing values.
      auto permuted = pts;
      std::shuffle(permuted.begin(), permuted.end(), rng);
      const auto again = sim::normalize_ternary(permuted);
      for (const auto& [id, q] : again) {
        const auto it = std::find_if(base.begin(), base.end(), [&](const auto& e) { return e.first == id; });
        REQUIRE(it != base.end());
        CHECK(q.scaled == it->second.scaled);
        CHECK(q.simplex == it->second.simplex);
      }
      for (std::size_t d = 0; d < 3; ++d) {
        auto scaled = pts;
        const double c = std::pow(10.0, log_c(rng));
        for (auto& p : scaled) p.values[d] *= c;
        for (const auto mode : {RangeScaling::Verbatim, RangeScaling::MinMax}) {
          const auto a = sim::normalize_ternary(pts, mode);
          const auto b = sim::normalize_ternary(scaled, mode);
          for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(a[k].second.status == b[k].second.status);
            if (a[k].second.simplex && b[k].second.simplex) {
              for (std::size_t j = 0; j < 3; ++j) {
                CHECK((*a[k].second.simplex)[j] == doctest::Approx((*b[k].second.simplex)[j]).epsilon(1e-9));
              }
            }
          }
        }
      }
    }
  }

  TEST_CASE("analytic sensitivity matches finite differences and path sums") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> size(1, 14);
    for (int i = 0; i < 150; ++i) {
      CAPTURE(i);
      const auto n = size(rng);
      const bool dyadic = n <= 8;
      const auto dag = testgen::random_dag(rng, n, 0.4, dyadic);
      const CompiledGraph compiled(dag.graph);
      const auto effect = compiled.total_effect();
      for (const auto& input : compiled.inputs()) {
        for (const auto& target : compiled.order()) {
          const double s = sensitivity(dag.graph, input, target);
          // Column solve and full inverse round differently on real weights.
          CHECK(s == doctest::Approx(effect(static_cast<Eigen::Index>(compiled.index_of(target)),
                                            static_cast<Eigen::Index>(compiled.index_of(input))))
                         .epsilon(1e-12));
          const double fd = finite_diff_sensitivity(dag.graph, input, target, 1.0);
          CHECK(fd == doctest::Approx(s).epsilon(1e-9).scale(1.0));
          if (dyadic) CHECK(s == oracle::path_sum(dag.graph, input, target));
        }
      }
      // Superposition: propagating a sum of assignments sums the outputs.
      InputAssignment x;
      InputAssignment y;
      InputAssignment xy;
      std::uniform_real_distribution<double> v(-1.0, 1.0);
      for (const auto& input : compiled.inputs()) {
        x.values[input] = v(rng);
        y.values[input] = v(rng);
        xy.values[input] = x.values[input] + y.values[input];
      }
      const auto px = compiled.propagate(x);
      const auto py = compiled.propagate(y);
      const auto pxy = compiled.propagate(xy);
      for (Eigen::Index k = 0; k < pxy.size(); ++k) CHECK(pxy[k] == doctest::Approx(px[k] + py[k]).epsilon(1e-12));
    }
  }

  TEST_CASE("svo scoring ignores response order and stays in range") {
    const auto ins = svo::default_instrument();
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
      CAPTURE(i);
      auto rs = random_responses(rng, ins);
      const auto base = svo::score(ins, "x", rs);
      std::shuffle(rs.begin(), rs.end(), rng);
      const auto again = svo::score(ins, "x", rs);
      CHECK(again.angle == base.angle);
      CHECK(again.category == base.category);
      CHECK(again.equality_index == base.equality_index);
      REQUIRE(base.equality_index.has_value());
      CHECK(*base.equality_index >= 0.0);
      CHECK(*base.equality_index <= 1.0);
      CHECK(base.angle >= -45.0 - 1e-9);
      CHECK(base.angle <= 90.0 + 1e-9);
    }
  }

  TEST_CASE("svo angle stays within the attainable band on a slider grid") {
    const auto ins = svo::default_instrument();
    const auto primary = ins.of_kind(svo::ItemKind::Primary);
    std::vector<svo::SliderResponse> rs;
    for (const auto* item : primary) rs.push_back({item->id, 0.0});
    // Every primary slider at the same position.
    for (int k = 0; k <= 100; ++k) {
      for (auto& r : rs) r.position = k / 100.0;
      const auto s = svo::score_primary(ins, rs);
      CAPTURE(k);
      CHECK(s.angle >= -45.0 - 1e-9);
      CHECK(s.angle <= 90.0 + 1e-9);
    }
    // Independent positions per slider.
    std::mt19937_64 rng(6);
    for (int i = 0; i < 2000; ++i) {
      for (auto& r : rs) r.position = testgen::random_position(rng);
      const auto s = svo::score_primary(ins, rs);
      CAPTURE(i);
      CHECK(s.angle >= -45.0 - 1e-9);
      CHECK(s.angle <= 90.0 + 1e-9);
    }
  }

  TEST_CASE("classification is monotone in the angle") {
    const std::array<svo::Category, 4> order{svo::Category::Competitive, svo::Category::Individualistic,
                                             svo::Category::Prosocial, svo::Category::Altruistic};
    const auto rank = [&](svo::Category c) { return std::find(order.begin(), order.end(), c) - order.begin(); };
    double prev = -90.0;
    for (int k = -9000; k <= 12000; ++k) {
      const double angle = k / 100.0;
      CAPTURE(angle);
      CHECK(rank(svo::classify(angle)) >= rank(svo::classify(prev)));
      prev = angle;
    }
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> angle(-180.0, 180.0);
    for (int i = 0; i < 2000; ++i) {
      double a = angle(rng);
      double b = angle(rng);
      if (a > b) std::swap(a, b);
      CHECK(rank(svo::classify(a)) <= rank(svo::classify(b)));
    }
  }

  TEST_CASE("session replay reproduces every random walk") {
    namespace ev = consensus::event;
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> kind(0, 7);
    std::uniform_int_distribution<int> pick(0, 1);
    for (int walk = 0; walk < 100; ++walk) {
      CAPTURE(walk);
      consensus::SessionState state;
      std::vector<consensus::SessionEvent> accepted;
      for (int step = 0; step < 50; ++step) {
        auto order = consensus::Ranking{"A", "B", "C"};
        std::shuffle(order.begin(), order.end(), rng);
        const std::string who = pick(rng) ? "p1" : "p2";
        consensus::SessionEvent e;
        switch (kind(rng)) {
          case 0: e = ev::FinalizeIssue{"t", abc(), {"p1", "p2"}}; break;
          case 1: e = ev::SubmitProfile{{who, order, 1u + pick(rng), {{"f", 0.3}, {"g", 0.9}}}}; break;
          case 2: e = ev::BeginAnalysis{pick(rng) == 1}; break;
          case 3: e = ev::ComputeProposals{}; break;
          case 4: e = ev::CallQuestion{order.front()}; break;
          case 5: e = ev::CastApproval{who, pick(rng) ? consensus::Approval::Approve : consensus::Approval::Reject}; break;
          case 6: e = ev::ReviseChoices{abc()}; break;
          default: e = ev::PostMessage{who, "m"}; break;
        }
        const auto before = consensus::to_json(state, true);
        try {
          state = consensus::session_step(state, e);
          accepted.push_back(e);
        } catch (const Error&) {
          // A rejected event leaves the state untouched.
          CHECK(consensus::to_json(state, true) == before);
        }
        // Events survive their own wire format.
        CHECK(consensus::to_json(consensus::event_from_json(consensus::to_json(e))) == consensus::to_json(e));
      }
      CHECK(state.version() == accepted.size());
      CHECK(consensus::to_json(consensus::replay(accepted), true) == consensus::to_json(state, true));
    }
  }

  TEST_CASE("projects round-trip byte for byte") {
    for (const auto& name : template_names()) {
      CAPTURE(name);
      const auto p = project_from_template(name, "rt");
      const auto text = save_project(p);
      const auto again = load_project_text(text);
      CHECK(save_project(again) == text);
      CHECK(validate_project(again).empty());
    }
    // Random scenario edits still round-trip.
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> share(0.0, 1.0);
    auto p = project_from_template("unused-stock", "rt");
    for (int i = 0; i < 50; ++i) {
      CAPTURE(i);
      auto& s = p.scenarios[static_cast<std::size_t>(i) % p.scenarios.size()];
      s.allocation = false;
      for (auto& [id, v] : s.inputs.values) v = share(rng);
      const auto text = save_project(p);
      CHECK(save_project(load_project_text(text)) == text);
      CHECK(load_project_text(text).scenarios == p.scenarios);
    }
  }
}
