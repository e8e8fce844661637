#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "mtdc/contingency.hpp"
#include "mtdc/opf.hpp"

using namespace mtdc;
using namespace mtdc::contingency;

namespace {

/// Sharing fixture whose sink grows by `step` when constant-power source
/// converter 4 (DC bus 3) trips.
NetworkCase sharing_with_source(double k1, double k2, double step = 0.2) {
  auto net = fixtures::sharing_case(k1, k2);
  net.converters[2].setpoints.p_dc_0 = -1.0 - step;
  auto source = net.converters[2];
  source.id = 4;
  source.setpoints.p_dc_0 = step;
  net.converters.push_back(source);
  return net;
}

Scenario trip(ActionKind kind, int id) { return {"trip", {{kind, id, 1.0}}, {}}; }

struct Response {
  steady::PowerFlowResult pre, post;
  SharingMetrics metrics;
};

Response respond(const NetworkCase& net, const Scenario& sc) {
  const auto controls = steady::PowerFlowControls::from_case(net);
  Response r;
  r.pre = steady::solve_power_flow(net, controls);
  REQUIRE(r.pre.converged());
  const auto post_case = apply_scenario(net, sc);
  r.post = equilibrium_after(net, post_case, controls, r.pre.point);
  REQUIRE_MESSAGE(r.post.converged(), r.post.message);
  std::vector<ControlMode> modes;
  for (const auto& c : controls.converters) modes.push_back(c.mode);
  r.metrics = sharing_metrics(r.pre.point, r.post.point, post_case, modes);
  return r;
}

}  // namespace

TEST_CASE("scenario documents") {
  const auto full = parse_scenario(R"({"id": "s", "actions": [{"action": "scale-load", "bus": 3, "factor": 1.5}],
    "control_overrides": [{"converter": 2, "mode": "dc-voltage", "strategy": "active-power-control"}]})",
                                   "fallback");
  CHECK(full.id == "s");
  REQUIRE(full.actions.size() == 1);
  CHECK(full.actions[0].kind == ActionKind::ScaleLoad);
  CHECK(full.actions[0].factor == 1.5);
  REQUIRE(full.control_overrides.size() == 1);
  CHECK(full.control_overrides[0].mode == ControlMode::DcVoltage);
  CHECK(parse_scenario(serialize_scenario(full), "other") == full);

  const auto bare = parse_scenario(R"([{"action": "trip-generator", "id": 2}])", "bare");
  CHECK(bare.id == "bare");
  CHECK(bare.actions.size() == 1);
  CHECK(parse_scenario("[]", "empty").actions.empty());

  CHECK_THROWS(parse_scenario(R"([{"action": "explode", "id": 1}])", "x"));
  CHECK_THROWS(parse_scenario("[{", "x"));

  for (int n = 1; n <= 3; ++n) CHECK(fixtures::bundled_scenario(n).id == "scenario" + std::to_string(n));
  for (auto k : {ActionKind::TripGenerator, ActionKind::TripConverter, ActionKind::ScaleLoad, ActionKind::TripAcBranch,
                 ActionKind::TripDcBranch}) {
    CHECK(action_kind_from_string(to_string(k)) == k);
  }
}

TEST_CASE("applying scenarios") {
  const auto net = fixtures::bundled_case();
  CHECK(apply_scenario(net, Scenario{"none", {}, {}}) == net);

  const auto tripped = apply_scenario(net, fixtures::bundled_scenario(2));
  CHECK_FALSE(tripped.generators[1].in_service);
  CHECK(tripped.generators[0].in_service);
  for (std::size_t i = 0; i < net.ac_buses.size(); ++i) CHECK(tripped.ac_buses[i].p_demand == net.ac_buses[i].p_demand);

  const auto conv = apply_scenario(net, fixtures::bundled_scenario(3));
  CHECK_FALSE(conv.converters[3].in_service);
  CHECK(conv.dc_buses.size() == net.dc_buses.size());
  CHECK(validate_case(conv).ok());

  const auto scaled = apply_scenario(net, Scenario{"s", {{ActionKind::ScaleLoad, 3, 2.0}}, {}});
  CHECK(scaled.ac_buses[2].p_demand == 2.0 * net.ac_buses[2].p_demand);
  CHECK(scaled.ac_buses[2].q_demand == 2.0 * net.ac_buses[2].q_demand);

  CHECK_THROWS_AS(apply_scenario(tripped, fixtures::bundled_scenario(2)), ScenarioError);
  CHECK_THROWS_AS(apply_scenario(net, trip(ActionKind::TripGenerator, 42)), ScenarioError);
  CHECK_THROWS_AS(apply_scenario(net, trip(ActionKind::TripDcBranch, 42)), ScenarioError);

  const auto isolated = apply_scenario(net, Scenario{"iso",
                                                     {{ActionKind::TripDcBranch, 3, 1.0},
                                                      {ActionKind::TripDcBranch, 4, 1.0},
                                                      {ActionKind::TripConverter, 4, 1.0}},
                                                     {}});
  CHECK_FALSE(validate_case(isolated).ok());
}

TEST_CASE("an empty scenario is a fixed point") {
  const auto net = fixtures::bundled_case();
  const auto strategy = opf::Strategy::make(opf::StrategyKind::ProposedDroop, net);
  const auto s1 = opf::solve_stage1(net, strategy);
  REQUIRE(s1.optimal());
  const auto controls = opf::passive_controls(net, strategy, s1.droop, s1.operating_point);
  const auto pre = steady::solve_power_flow(net, controls);
  REQUIRE(pre.converged());
  const auto post = equilibrium_after(net, net, controls, pre.point);
  REQUIRE(post.converged());
  const auto& a = pre.point;
  const auto& b = post.point;
  auto worst = [](const std::vector<double>& x, const std::vector<double>& y) {
    double w = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) w = std::max(w, std::abs(x[i] - y[i]));
    return w;
  };
  CHECK(worst(a.u, b.u) <= 1e-10);
  CHECK(worst(a.delta, b.delta) <= 1e-10);
  CHECK(worst(a.u_dc, b.u_dc) <= 1e-10);
  CHECK(worst(a.p_g, b.p_g) <= 1e-10);
  CHECK(worst(a.p_dc, b.p_dc) <= 1e-10);
  CHECK(worst(a.delta_f, b.delta_f) <= 1e-10);

  const auto m = sharing_metrics(a, a, net);
  for (double dp : m.delta_p) CHECK(dp == 0.0);
  for (double r : m.sharing_ratios) CHECK(r == 0.0);
  CHECK(m.max_delta_f == std::abs(a.delta_f[0]));
}

TEST_CASE("equal droop gains split a sink step evenly") {
  const auto r = respond(sharing_with_source(0.1, 0.1), trip(ActionKind::TripConverter, 4));
  const auto& m = r.metrics;
  CHECK(std::abs(m.delta_p[0] - m.delta_p[1]) <= 1e-6);
  CHECK(m.sharing_ratios[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(m.sharing_ratios[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(m.sharing_ratios[2] == 0.0);
  CHECK(m.sharing_ratios[3] == 0.0);
  // tripped converter: minus its pre-disturbance injection
  CHECK(m.delta_p[3] == doctest::Approx(-r.pre.point.p_dc[3]));
  CHECK(m.sharing_ratios[0] + m.sharing_ratios[1] == doctest::Approx(1.0));

  const auto pre = fixtures::sharing_closed_form(0.1, 0.1, 2000.0, -1.0);
  const auto post = fixtures::sharing_closed_form(0.1, 0.1, 2000.0, -1.2);
  CHECK(m.delta_p[0] == doctest::Approx(post[0] - pre[0]).epsilon(1e-7));
}

TEST_CASE("droop residuals hold after the disturbance") {
  const auto net = sharing_with_source(0.1, 0.25);
  const auto r = respond(net, trip(ActionKind::TripConverter, 4));
  std::vector<DroopSettings> settings;
  std::vector<ControlMode> modes;
  for (const auto& c : net.converters) {
    settings.push_back(c.setpoints);
    modes.push_back(c.control_mode);
  }
  const auto post_case = apply_scenario(net, trip(ActionKind::TripConverter, 4));
  CHECK(fixtures::check_physics(post_case, r.post.point, settings, modes).max() <= 1e-8);
}

TEST_CASE("inverse-k sharing") {
  for (double k2 : {0.05, 0.2, 0.4}) {
    CAPTURE(k2);
    const auto r = respond(sharing_with_source(0.1, k2), trip(ActionKind::TripConverter, 4));
    const double a = r.metrics.delta_p[0] * 0.1, b = r.metrics.delta_p[1] * k2;
    CHECK(std::abs(a - b) / std::max(std::abs(a), std::abs(b)) <= 0.01);
  }
  const auto r = respond(sharing_with_source(0.1, 0.2), trip(ActionKind::TripConverter, 4));
  const double ratio = r.metrics.delta_p[0] / r.metrics.delta_p[1];
  CHECK(std::abs(ratio - 2.0) / 2.0 <= 0.01);
}

TEST_CASE("a smaller gain never carries less of the step") {
  double previous = std::numeric_limits<double>::infinity();
  for (double k1 : {0.02, 0.05, 0.1, 0.2, 0.5}) {
    const auto r = respond(sharing_with_source(k1, 0.1), trip(ActionKind::TripConverter, 4));
    const double burden = std::abs(r.metrics.delta_p[0]);
    CHECK(burden <= previous);
    previous = burden;
  }
}

TEST_CASE("voltage deviation") {
  const auto net = fixtures::bundled_case();
  auto op = steady::OperatingPoint::flat(net);
  CHECK(voltage_deviation(op, net) == 0.0);
  op.u_dc = {1.01, 0.98, 1.0, 1.0};
  CHECK(voltage_deviation(op, net) == doctest::Approx(0.0001 + 0.0004));
  auto bad = op;
  bad.p_dc.pop_back();
  CHECK_THROWS_AS(sharing_metrics(op, bad, net), std::invalid_argument);
}
