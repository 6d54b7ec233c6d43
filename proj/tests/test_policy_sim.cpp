#include "dualloop/error.hpp"
#include "dualloop/policy_sim.hpp"
#include "dualloop/project.hpp"

#include <doctest.h>

#include <cmath>

using namespace dualloop;
using namespace dualloop::sim;

namespace {

MultiAgentModel tiny() {
  MultiAgentModel m;
  auto& g = m.graph;
  g.nodes = {{"regional", {"Regional finance", NodeKind::Input}},
             {"other", {"Other", NodeKind::Input}},
             {"soc", {"Social", NodeKind::ValueSoc}},
             {"env", {"Environmental", NodeKind::ValueEnv}},
             {"eco", {"Economic", NodeKind::ValueEco}}};
  g.edges = {{"regional", "soc", 0.5}, {"other", "eco", -0.4}, {"regional", "eco", 0.25}};
  m.value_nodes = {"soc", "env", "eco"};
  return m;
}

PolicyScenario scenario(std::string id, double regional, double other) {
  return {id, id, {{{"regional", regional}, {"other", other}}}, false};
}

std::vector<RawPoint> worked() {
  return {{"p1", {2, 3, 5}}, {"p2", {4, 1, 5}}, {"p3", {6, 2, 2}}};
}

Project fixture() { return project_from_template("unused-stock", "t"); }

}  // namespace

TEST_SUITE("policy-sim") {
  TEST_CASE("model validation covers value nodes and weight range") {
    CHECK(validate_model(tiny()).empty());
    auto bad = tiny();
    bad.graph.edges[0].weight = 1.5;
    CHECK_FALSE(validate_model(bad).empty());
    bad = tiny();
    bad.value_nodes[1] = "soc";
    CHECK_FALSE(validate_model(bad).empty());
  }

  TEST_CASE("evaluation examples") {
    const auto zero = evaluate_policy(tiny(), scenario("z", 0, 0));
    for (double v : zero) CHECK(v == 0.0);
    const auto v = evaluate_policy(tiny(), scenario("r", 0.7, 0));
    CHECK(v[0] == doctest::Approx(0.35));
    CHECK(v[1] == 0.0);
  }

  TEST_CASE("shipped policy scenarios load and validate") {
    const auto p = fixture();
    REQUIRE(p.scenarios.size() == 4);
    const std::map<std::string, std::vector<int>> tenths{
        // resident, external, regional, central, subsidy, inbound
        {"A", {1, 0, 7, 0, 2, 0}},
        {"B", {1, 5, 1, 2, 1, 0}},
        {"C", {1, 0, 2, 0, 7, 0}},
        {"D", {1, 1, 2, 2, 1, 3}},
    };
    const std::vector<std::string> order{"resident_fund", "external_capital", "regional_finance",
                                         "central_finance", "municipal_subsidy", "inbound_revenue"};
    for (const auto& s : p.scenarios) {
      CHECK(validate_scenario(s).empty());
      CHECK(s.allocation);
      int total = 0;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const double v = s.inputs.values.at(order[i]);
        CHECK(v * 10 == doctest::Approx(tenths.at(s.id)[i]));
        total += static_cast<int>(std::lround(v * 10));
      }
      CHECK(total == 10);
    }
  }

  TEST_CASE("allocation scenarios must sum to one") {
    auto s = fixture().scenarios.front();
    s.inputs.values["resident_fund"] = 0.2;
    CHECK_FALSE(validate_scenario(s).empty());
    s.inputs.values["resident_fund"] = -0.1;
    CHECK_FALSE(validate_scenario(s).empty());
    CHECK_THROWS_AS(evaluate_policy(*fixture().multi_agent, s), Error);
  }

  TEST_CASE("worked ternary example") {
    const auto out = normalize_ternary(worked());
    REQUIRE(out.size() == 3);
    const auto& p1 = out[0].second;
    REQUIRE(p1.simplex);
    CHECK((*p1.simplex)[0] == doctest::Approx(0.136364).epsilon(1e-6));
    CHECK((*p1.simplex)[1] == doctest::Approx(0.409091).epsilon(1e-6));
    CHECK((*p1.simplex)[2] == doctest::Approx(0.454545).epsilon(1e-6));
    CHECK(p1.scaled[0] == doctest::Approx(0.5));
    CHECK(p1.scaled[1] == doctest::Approx(1.5));
    for (const auto& [id, p] : out) {
      CHECK(p.status == PointStatus::Ok);
      CHECK((*p.simplex)[0] + (*p.simplex)[1] + (*p.simplex)[2] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("min-max scaling shifts to zero") {
    const auto out = normalize_ternary(worked(), RangeScaling::MinMax);
    CHECK(out[0].second.scaled[0] == 0.0);
    CHECK(out[2].second.scaled[0] == 1.0);
  }

  TEST_CASE("degenerate and zero-sum inputs") {
    CHECK_THROWS_AS(normalize_ternary({{"only", {1, 2, 3}}}), Error);
    try {
      normalize_ternary({{"a", {1, 2, 3}}, {"b", {2, 2, 4}}});
      FAIL("expected DegenerateRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateRange);
      CHECK(e.detail() == "env");
    }
    const auto out = normalize_ternary({{"a", {1, -1, 0}}, {"b", {-1, 1, 2}}, {"c", {0, 0, -2}}});
    CHECK(out[0].second.status == PointStatus::ZeroSum);
    CHECK_FALSE(out[0].second.simplex);
    CHECK(out[2].second.status == PointStatus::NegativeSum);
    CHECK(out[2].second.simplex);
  }

  TEST_CASE("scaling a dimension leaves the simplex unchanged") {
    auto scaled = worked();
    for (auto& p : scaled) p.values[1] *= 10;
    const auto a = normalize_ternary(worked());
    const auto b = normalize_ternary(scaled);
    for (std::size_t k = 0; k < a.size(); ++k) {
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(a[k].second.scaled[j] == doctest::Approx(b[k].second.scaled[j]).epsilon(1e-12));
        CHECK((*a[k].second.simplex)[j] == doctest::Approx((*b[k].second.simplex)[j]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("sensitivity block") {
    const auto block = policy_sensitivity(tiny(), scenario("r", 0.7, 0));
    CHECK(block.at("other", ValueDimension::Env) == 0.0);
    CHECK(block.at("other", ValueDimension::Eco) == doctest::Approx(-0.4));
    CHECK(block.at("regional", ValueDimension::Soc) == doctest::Approx(0.5));
    const auto p = fixture();
    const auto& model = *p.multi_agent;
    const auto full = policy_sensitivity(model, p.scenarios[0]);
    for (const auto& input : full.inputs) {
      for (const auto d : kDimensions) {
        const double fd = finite_diff_sensitivity(model.graph, input, model.value_node(d), 1e-3, p.scenarios[0].inputs,
                                                  WeightPolicy::UnitInterval);
        CHECK(std::abs(full.at(input, d) - fd) <= 1e-9);
      }
    }
  }

  TEST_CASE("comparison over the fixture") {
    const auto p = fixture();
    const auto table = compare_policies(*p.multi_agent, p.scenarios, 2);
    REQUIRE(table.rows.size() == 4);
    CHECK(table.degenerate.empty());
    CHECK(table.sensitivity.scenario == "C");
    for (const auto& row : table.rows) {
      double sum = 0;
      for (double v : row.inputs) sum += v;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      REQUIRE(row.simplex);
    }
  }

  TEST_CASE("identical scenarios are degenerate on every dimension") {
    const auto p = fixture();
    const auto table = compare_policies(*p.multi_agent, {p.scenarios[0], p.scenarios[0]});
    CHECK(table.degenerate.size() == 3);
    CHECK(table.rows[0].raw == table.rows[1].raw);
    CHECK_FALSE(table.rows[0].simplex);
  }

  TEST_CASE("permuting scenarios permutes rows only") {
    const auto p = fixture();
    auto reversed = p.scenarios;
    std::reverse(reversed.begin(), reversed.end());
    const auto a = compare_policies(*p.multi_agent, p.scenarios);
    const auto b = compare_policies(*p.multi_agent, reversed);
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
      const auto& ra = a.rows[k];
      const auto& rb = b.rows[a.rows.size() - 1 - k];
      CHECK(ra.scenario == rb.scenario);
      CHECK(ra.raw == rb.raw);
      CHECK(*ra.simplex == *rb.simplex);
    }
  }

  TEST_CASE("ternary csv") {
    const auto csv = ternary_csv(normalize_ternary(worked()));
    CHECK(csv.rfind("policy_id,soc,env,eco\n", 0) == 0);
    CHECK(csv.find("p1,0.136363636364") != std::string::npos);
  }
}
