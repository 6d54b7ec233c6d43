#include "dualloop/consensus.hpp"
#include "dualloop/error.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace dualloop;
using namespace dualloop::consensus;

namespace {

PreferenceProfile prof(std::string who, Ranking order, std::size_t k = 1, std::map<FactorId, double> h = {}) {
  return {std::move(who), std::move(order), k, std::move(h)};
}

ChoiceSet two_choice_set() {
  return {{{"A", "A", {"f1", "f2"}}, {"B", "B", {"f2", "f3"}}}, {{"f1", "F1"}, {"f2", "F2"}, {"f3", "F3"}}};
}

}  // namespace

TEST_SUITE("consensus") {
  TEST_CASE("kendall examples") {
    CHECK(kendall_tau({"A", "B"}, {"B", "A"}) == 1);
    CHECK(kendall_tau({"A", "B", "C"}, {"A", "B", "C"}) == 0);
    CHECK(kendall_tau({"A", "B", "C"}, {"C", "B", "A"}) == 3);
    CHECK_THROWS_AS(kendall_tau({"A", "B"}, {"A", "C"}), Error);
    CHECK_THROWS_AS(kendall_tau({"A", "A"}, {"A", "A"}), Error);
  }

  TEST_CASE("permissible meeting examples") {
    auto r = permissible_meeting({prof("p1", {"A", "B"}), prof("p2", {"A", "B"})});
    CHECK(r.choice == "A");
    CHECK(r.widening_cost == 0);

    r = permissible_meeting({prof("P1", {"A", "B", "C", "D"}, 1), prof("P2", {"B", "A", "C", "D"}, 1),
                             prof("P3", {"A", "C", "B", "D"}, 2)});
    CHECK(r.choice == "A");
    CHECK(r.widening_cost == 1);
    CHECK(r.costs == std::map<ChoiceId, std::size_t>{{"A", 1}, {"B", 2}, {"C", 4}, {"D", 8}});

    r = permissible_meeting({prof("solo", {"C", "A", "B"}, 3)});
    CHECK(r.choice == "C");
    CHECK(r.widening_cost == 0);
  }

  TEST_CASE("permissible tie rules") {
    // Equal cost 0 for A and B; B has the lower rank sum.
    auto r = permissible_meeting({prof("p", {"A", "B", "C"}, 2), prof("q", {"B", "C", "A"}, 3)});
    CHECK(r.choice == "B");
    // Full symmetry: falls through to the id.
    r = permissible_meeting({prof("p", {"B", "A"}), prof("q", {"A", "B"})});
    CHECK(r.choice == "A");
    CHECK_THROWS_AS(permissible_meeting({}), Error);
  }

  TEST_CASE("compromise examples") {
    auto r = compromise_exploration({prof("1", {"A", "B", "C"}), prof("2", {"B", "A", "C"}), prof("3", {"A", "B", "C"})});
    CHECK(r.ranking == Ranking{"A", "B", "C"});
    CHECK(r.total == 1);
    CHECK(r.top == "A");
    CHECK_FALSE(r.approximate);

    r = compromise_exploration({prof("1", {"A", "B", "C"}), prof("2", {"C", "B", "A"})});
    CHECK(r.total == 3);
    CHECK(r.max == 2);
    CHECK(r.ranking == Ranking{"A", "C", "B"});
    CHECK(r.top == "A");

    r = compromise_exploration({prof("1", {"C", "A", "B"}), prof("2", {"C", "A", "B"})});
    CHECK(r.ranking == Ranking{"C", "A", "B"});
    for (const auto& [who, d] : r.distances) CHECK(d == 0);
  }

  TEST_CASE("compromise beyond the exhaustive limit is flagged approximate") {
    const Ranking order{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
    Ranking reversed(order.rbegin(), order.rend());
    const auto r = compromise_exploration({prof("1", order), prof("2", order), prof("3", reversed)});
    CHECK(r.approximate);
    CHECK(r.ranking == order);
    // Small instances solved both ways agree.
    const std::vector<PreferenceProfile> small{prof("1", {"A", "B", "C", "D"}), prof("2", {"B", "D", "A", "C"}),
                                               prof("3", {"D", "A", "C", "B"})};
    const auto exact = compromise_exploration(small, 8);
    const auto heuristic = compromise_exploration(small, 2);
    CHECK(heuristic.approximate);
    CHECK(heuristic.total >= exact.total);
  }

  TEST_CASE("sublated examples") {
    const ChoiceSet single{{{"A", "A", {"f1"}}}, {{"f1", "F1"}}};
    auto r = sublated_creation({prof("p", {"A"}, 1, {{"f1", 1.0}})}, single);
    CHECK(r.selected == std::vector<FactorId>{"f1"});
    CHECK(r.factor_scores.at("f1") == 1.0);

    r = sublated_creation({prof("P1", {"A", "B"}, 1, {{"f1", 1.0}, {"f2", 0.5}, {"f3", 0.2}}),
                           prof("P2", {"B", "A"}, 1, {{"f1", 0.2}, {"f2", 1.0}, {"f3", 0.6}})},
                          two_choice_set());
    CHECK(r.factor_scores.at("f1") == doctest::Approx(2.2));
    CHECK(r.factor_scores.at("f2") == doctest::Approx(4.5));
    CHECK(r.factor_scores.at("f3") == doctest::Approx(1.4));
    CHECK(r.k == 2);
    CHECK(r.selected == std::vector<FactorId>{"f2", "f1"});
    CHECK(r.label == "F2 + F1");

    const auto mean = sublated_creation({prof("P1", {"A", "B"}, 1, {{"f1", 1.0}, {"f2", 0.5}, {"f3", 0.2}}),
                                         prof("P2", {"B", "A"}, 1, {{"f1", 0.2}, {"f2", 1.0}, {"f3", 0.6}})},
                                        two_choice_set(), FactorSelection::AboveMean);
    // Mean is 8.1 / 3 = 2.7; only f2 clears it.
    CHECK(mean.selected == std::vector<FactorId>{"f2"});
  }

  TEST_CASE("sublated input checks") {
    const auto set = two_choice_set();
    CHECK_THROWS_AS(sublated_creation({prof("P", {"A", "B"}, 1, {{"f1", 1.0}})}, set), Error);
    CHECK_THROWS_AS(sublated_creation({prof("P", {"A", "B"}, 1, {{"f1", 1.5}, {"f2", 0}, {"f3", 0}})}, set), Error);
    CHECK_THROWS_AS(sublated_creation({prof("P", {"A", "B"}, 1, {})}, ChoiceSet{set.choices, {}}), Error);
  }

  TEST_CASE("raising an importance never lowers its score") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    const auto set = two_choice_set();
    for (int i = 0; i < 100; ++i) {
      std::map<FactorId, double> h{{"f1", u(rng)}, {"f2", u(rng)}, {"f3", u(rng)}};
      auto raised = h;
      const FactorId f = "f" + std::to_string(1 + i % 3);
      raised[f] = std::min(1.0, h[f] + u(rng));
      const auto a = sublated_creation({prof("p", {"A", "B"}, 1, h), prof("q", {"B", "A"}, 1, h)}, set);
      const auto b = sublated_creation({prof("p", {"A", "B"}, 1, raised), prof("q", {"B", "A"}, 1, h)}, set);
      CHECK(b.factor_scores.at(f) >= a.factor_scores.at(f));
    }
  }

  TEST_CASE("profile validation") {
    const auto set = two_choice_set();
    const std::map<FactorId, double> h{{"f1", 1}, {"f2", 1}, {"f3", 1}};
    CHECK(validate_profile(prof("p", {"A", "B"}, 2, h), set).empty());
    CHECK_FALSE(validate_profile(prof("p", {"A", "A"}, 1, h), set).empty());
    CHECK_FALSE(validate_profile(prof("p", {"A", "B"}, 3, h), set).empty());
    CHECK_FALSE(validate_profile(prof("", {"A", "B"}, 1, h), set).empty());
    CHECK_THROWS_AS(analyze({prof("p", {"A"}, 1, h)}, set), Error);
  }

  TEST_CASE("dispersion") {
    CHECK(dispersion({}) == 0.0);
    CHECK(dispersion({prof("a", {"A", "B", "C"})}) == 0.0);
    CHECK(dispersion({prof("a", {"A", "B", "C"}), prof("b", {"A", "B", "C"})}) == 0.0);
    CHECK(dispersion({prof("a", {"A", "B", "C"}), prof("b", {"C", "B", "A"})}) == 1.0);
  }

  TEST_CASE("json round trips") {
    const auto set = two_choice_set();
    nlohmann::json j = set;
    CHECK(j.get<ChoiceSet>() == set);
    const auto p = prof("p", {"A", "B"}, 2, {{"f1", 0.5}});
    j = p;
    CHECK(j.get<PreferenceProfile>() == p);
    j["permissible_k"] = 0;
    CHECK_THROWS_AS(j.get<PreferenceProfile>(), Error);
  }

  TEST_CASE("oracle agreement on fixed seeds") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
      const auto profiles = oracle::random_profiles(rng, 5, 6);
      const auto pm = permissible_meeting(profiles);
      const auto po = oracle::permissible(profiles);
      CHECK(pm.choice == po.choice);
      CHECK(pm.widening_cost == po.cost);
      const auto cm = compromise_exploration(profiles);
      const auto co = oracle::compromise(profiles);
      CHECK(cm.ranking == co.ranking);
      CHECK(cm.total == co.total);
      CHECK(cm.max == co.max);
    }
  }
}
