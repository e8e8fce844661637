#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "mtdc/opf.hpp"

using namespace mtdc;
using namespace mtdc::opf;

TEST_CASE("coefficient revision") {
  CHECK(revise_coefficient(0.2, 0.001, 0.001, 1.0, 0.5) == doctest::Approx(std::sqrt(0.2 * 0.001)));
  CHECK(revise_coefficient(0.2, 0.001, 0.001, 1.0, 1.0) == doctest::Approx(0.001));
  CHECK(revise_coefficient(0.05, 0.05, 0.001, 1.0, 0.5) == doctest::Approx(std::sqrt(0.001)));
  // always within the range
  CHECK(revise_coefficient(5.0, 10.0, 0.001, 1.0, 0.5) == 1.0);
  CHECK_THROWS_AS(revise_coefficient(0.2, 0.1, 0.001, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(revise_coefficient(0.2, 0.1, 0.0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(revise_coefficient(-0.2, 0.1, 0.001, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("undisturbed hierarchy converges without revisions") {
  const auto net = fixtures::bundled_case();
  const auto sc = fixtures::bundled_scenario(1);
  for (auto kind : kAllStrategies) {
    CAPTURE(to_string(kind));
    const auto r = run_hierarchy(net, Strategy::make(kind, net), sc);
    REQUIRE_MESSAGE(r.success, r.message);
    CHECK(r.retries == 0);
    CHECK(r.message == "converged");
    CHECK(r.stages.size() == (kind == StrategyKind::ActivePowerControl ? 2u : 3u));
    CHECK(r.stage(Stage::Stage1Cost) != nullptr);
    CHECK((r.stage(Stage::Stage2Droop) != nullptr) == (kind != StrategyKind::ActivePowerControl));
    CHECK(r.obj2_stage2.has_value() == (kind != StrategyKind::ActivePowerControl));
    CHECK(r.droop_final == r.droop_pre);
    REQUIRE(r.obj1_stage3.has_value());
    REQUIRE(r.sharing.has_value());
    // an empty scenario moves nothing
    for (double dp : r.sharing->delta_p) CHECK(std::abs(dp) <= 1e-10);
  }
}

TEST_CASE("a single injected stage-3 failure is revised and recovers") {
  const auto net = fixtures::bundled_case();
  HierarchyOptions opt;
  opt.force_failure = [](int attempt) { return attempt == 0; };
  const auto r = run_hierarchy(net, Strategy::make(StrategyKind::ProposedDroop, net), fixtures::bundled_scenario(2), opt);
  REQUIRE_MESSAGE(r.success, r.message);
  CHECK(r.retries == 1);
  CHECK(r.message == "converged after 1 revision(s)");
  CHECK(r.droop_final != r.droop_pre);
  for (const auto& d : r.droop_final) {
    CHECK(d.k_v >= d.k_min);
    CHECK(d.k_v <= d.k_max);
  }
  // stage 1, stage 2, failed attempt, successful attempt
  REQUIRE(r.stages.size() == 4);
  CHECK_FALSE(r.stages[2].optimal());
  CHECK(r.final_stage3()->optimal());
}

TEST_CASE("persistent stage-3 failure stops after the retry budget") {
  const auto net = fixtures::bundled_case();
  HierarchyOptions opt;
  opt.force_failure = [](int) { return true; };
  for (auto kind : {StrategyKind::AdaptiveDroop, StrategyKind::ProposedDroop}) {
    const auto r = run_hierarchy(net, Strategy::make(kind, net), fixtures::bundled_scenario(1), opt);
    CHECK_FALSE(r.success);
    CHECK(r.retries == 5);
    CHECK(r.stages.size() == 2u + 6u);
    CHECK(r.message.rfind("stage 3 failed after 5 revision(s)", 0) == 0);
    CHECK_FALSE(r.obj1_stage3.has_value());
  }
  const auto active = run_hierarchy(net, Strategy::make(StrategyKind::ActivePowerControl, net),
                                    fixtures::bundled_scenario(1), opt);
  CHECK_FALSE(active.success);
  CHECK(active.retries == 0);
}

TEST_CASE("revisions move coefficients toward the stage-2 anchor") {
  const auto net = fixtures::bundled_case();
  HierarchyOptions opt;
  opt.stage3_droop_override = [](std::vector<DroopSettings>& k) {
    for (auto& d : k) d.k_v = d.k_max;
  };
  opt.force_failure = [](int attempt) { return attempt < 2; };
  const auto r = run_hierarchy(net, Strategy::make(StrategyKind::AdaptiveDroop, net), fixtures::bundled_scenario(1), opt);
  REQUIRE(r.success);
  CHECK(r.retries == 2);
  for (std::size_t c = 0; c < r.droop_final.size(); ++c) {
    const double anchor = r.droop_pre[c].k_v;
    const double expected = std::exp(std::log(1.0) + 0.75 * (std::log(anchor) - std::log(1.0)));
    CHECK(r.droop_final[c].k_v == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("hierarchy is deterministic") {
  const auto net = fixtures::bundled_case();
  const auto sc = fixtures::bundled_scenario(3);
  const auto s = Strategy::make(StrategyKind::ProposedDroop, net);
  const auto a = run_hierarchy(net, s, sc);
  const auto b = run_hierarchy(net, s, sc);
  CHECK(a.obj1_stage3 == b.obj1_stage3);
  CHECK(a.droop_final == b.droop_final);
  CHECK(a.final_stage3()->operating_point == b.final_stage3()->operating_point);
}
