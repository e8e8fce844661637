#include <complex>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "mtdc/steadystate.hpp"

using namespace mtdc;
using namespace mtdc::steady;

namespace {

NetworkCase two_bus(double g, double b) {
  NetworkCase net;
  AcBus a;
  a.id = 1;
  a.kind = BusKind::SlackCandidate;
  AcBus c;
  c.id = 2;
  net.ac_buses = {a, c};
  AcBranch br;
  br.id = 1;
  br.from_bus = 1;
  br.to_bus = 2;
  br.g = g;
  br.b = b;
  net.ac_branches = {br};
  return net;
}

NetworkCase two_node_dc(double y) {
  NetworkCase net;
  DcBus a, c;
  a.id = 1;
  c.id = 2;
  net.dc_buses = {a, c};
  DcBranch br;
  br.id = 1;
  br.from_bus = 1;
  br.to_bus = 2;
  br.y_dc = y;
  net.dc_branches = {br};
  return net;
}

ConverterStation table_station() {
  ConverterStation st;
  st.loss_a = 0.011;
  st.loss_b = 0.003;
  st.loss_c_rec = 0.004;
  st.loss_c_inv = 0.007;
  return st;
}

}  // namespace

TEST_CASE("AC injections") {
  SUBCASE("pure susceptance at equal angles") {
    const auto inj = ac_injections(Vector::Ones(2), Vector::Zero(2), two_bus(0.0, -10.0));
    CHECK(inj.p[0] == doctest::Approx(0.0));
    CHECK(inj.p[1] == doctest::Approx(0.0));
  }
  SUBCASE("identical voltages carry nothing") {
    const auto inj = ac_injections(Vector::Ones(2), Vector::Zero(2), two_bus(1.0, 0.0));
    CHECK(inj.p.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(inj.q.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
  SUBCASE("angle difference across a reactance") {
    Vector delta(2);
    delta << 0.1, 0.0;
    const auto inj = ac_injections(Vector::Ones(2), delta, two_bus(0.0, -10.0));
    CHECK(inj.p[0] == doctest::Approx(10.0 * std::sin(0.1)).epsilon(1e-12));
    CHECK(inj.p[0] == doctest::Approx(0.9983).epsilon(1e-4));
  }
}

TEST_CASE("AC injections agree with the complex phasor product") {
  const auto net = fixtures::bundled_case();
  const auto y = build_admittance(net);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(0.9, 1.1), ang(-0.3, 0.3);
  const auto n = static_cast<Eigen::Index>(net.ac_buses.size());
  for (int trial = 0; trial < 10; ++trial) {
    Vector u(n), d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      u[i] = mag(rng);
      d[i] = ang(rng);
    }
    const auto inj = ac_injections(u, d, y);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::complex<double> iy = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) iy += std::complex<double>(y.g(i, k), y.b(i, k)) * std::polar(u[k], d[k]);
      const auto s = std::polar(u[i], d[i]) * std::conj(iy);
      CHECK(inj.p[i] == doctest::Approx(s.real()).epsilon(1e-12));
      CHECK(inj.q[i] == doctest::Approx(s.imag()).epsilon(1e-12));
    }
  }
}

TEST_CASE("DC injections") {
  const auto net = two_node_dc(10.0);
  SUBCASE("equal voltages") {
    const auto inj = dc_injections(Vector::Constant(2, 1.02), net);
    CHECK(inj.i_dc.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two-node example and antisymmetry") {
    Vector u(2);
    u << 1.01, 1.00;
    const auto inj = dc_injections(u, net);
    CHECK(inj.i_dc[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(inj.p_dc[0] == doctest::Approx(0.202).epsilon(1e-12));
    CHECK(inj.i_dc[1] == doctest::Approx(-inj.i_dc[0]).epsilon(1e-14));
  }
  SUBCASE("out-of-service branch carries nothing") {
    auto open = net;
    open.dc_branches[0].in_service = false;
    Vector u(2);
    u << 1.01, 1.00;
    CHECK(dc_injections(u, open).i_dc.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("reactor current") {
  CHECK(reactor_current(3.0, 0.0, 1.0) == 1.0);
  CHECK(reactor_current(0.0, 0.0, 1.0) == 0.0);
  CHECK(reactor_current(0.3, 0.4, 1.0) == doctest::Approx(0.5 / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(reactor_current(1.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("converter loss with the tabulated coefficients") {
  const auto st = table_station();
  CHECK(converter_loss(0.0, ConverterDirection::Rectifier, st) == 0.011);
  CHECK(converter_loss(0.0, ConverterDirection::Inverter, st) == 0.011);
  CHECK(converter_loss(1.0, ConverterDirection::Rectifier, st) == doctest::Approx(0.018).epsilon(1e-15));
  CHECK(converter_loss(1.0, ConverterDirection::Inverter, st) == doctest::Approx(0.021).epsilon(1e-15));
  CHECK_THROWS_AS(converter_loss(-0.1, ConverterDirection::Rectifier, st), std::invalid_argument);
  CHECK(direction_of(0.0) == ConverterDirection::Rectifier);
  CHECK(direction_of(-1e-12) == ConverterDirection::Inverter);
}

TEST_CASE("converter loss is nonnegative and nondecreasing") {
  const auto st = table_station();
  for (auto dir : {ConverterDirection::Rectifier, ConverterDirection::Inverter}) {
    double prev = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double loss = converter_loss(0.01 * i, dir, st);
      CHECK(loss >= 0.0);
      CHECK(loss >= prev);
      prev = loss;
    }
  }
}

TEST_CASE("droop residual") {
  DroopSettings s;
  s.p_dc_0 = 1.0;
  s.u_dc_0 = 1.0;
  s.k_v = 0.5;
  s.k_f = 0.5;
  CHECK(droop_residual(s, ControlMode::VoltageFrequencyDroop, 1.0, 1.0, 1.0) == 0.0);
  CHECK(droop_residual(s, ControlMode::VoltageDroop, 0.98, 1.01, 1.3) == doctest::Approx(0.0));
  CHECK(droop_residual(s, ControlMode::VoltageFrequencyDroop, 1.0 - 0.03, 1.01, 1.005) == doctest::Approx(0.0));
  // Independent evaluation at an arbitrary point.
  const double r = droop_residual(s, ControlMode::VoltageFrequencyDroop, 0.7, 0.97, 0.99);
  CHECK(r == doctest::Approx((0.7 - 1.0) + (0.97 - 1.0) / 0.5 + (0.99 - 1.0) / 0.5));

  auto bad = s;
  bad.k_v = 0.0;
  CHECK_THROWS_AS(droop_residual(bad, ControlMode::VoltageDroop, 1, 1, 1), std::invalid_argument);
  bad = s;
  bad.k_f = -0.1;
  CHECK_THROWS_AS(droop_residual(bad, ControlMode::VoltageFrequencyDroop, 1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(droop_residual(s, ControlMode::ActivePower, 1, 1, 1), std::invalid_argument);
}

namespace {

NetworkCase governor_area(int generators, double droop) {
  NetworkCase net;
  AcBus bus;
  bus.id = 1;
  bus.kind = BusKind::SlackCandidate;
  bus.p_demand = 1.1;
  net.ac_buses = {bus};
  for (int g = 1; g <= generators; ++g) {
    Generator gen;
    gen.id = g;
    gen.bus = 1;
    gen.p_max = 2.0;
    gen.governor_droop = droop;
    net.generators.push_back(gen);
  }
  return net;
}

}  // namespace

TEST_CASE("area frequency balance") {
  SUBCASE("balanced area stays at nominal") {
    const auto net = governor_area(1, 20.0);
    const auto df = solve_area_frequency({{1.1}, {}, {0.0}}, net);
    CHECK(df[0] == doctest::Approx(0.0));
  }
  SUBCASE("single governor, 0.1 deficit") {
    const auto net = governor_area(1, 20.0);
    const AreaDispatch d{{1.0}, {}, {0.0}};
    const auto df = solve_area_frequency(d, net);
    CHECK(df[0] == doctest::Approx(-0.005).epsilon(1e-12));
    // Scalar bisection on the balance as an independent root find.
    double lo = -1.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      Vector x(1);
      x << mid;
      (area_frequency_balance(x, d, net)[0] > 0 ? lo : hi) = mid;
    }
    CHECK(df[0] == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-10));
  }
  SUBCASE("two identical governors share equally") {
    const auto net = governor_area(2, 20.0);
    const auto df = solve_area_frequency({{0.5, 0.5}, {}, {0.0}}, net);
    const double pick_up = -20.0 * df[0];
    CHECK(pick_up == doctest::Approx(0.05).epsilon(1e-12));
  }
  SUBCASE("no governor response and an imbalance") {
    const auto net = governor_area(1, 0.0);
    CHECK_THROWS_AS(solve_area_frequency({{1.0}, {}, {0.0}}, net), SingularFrequencyError);
    CHECK_NOTHROW(solve_area_frequency({{1.1}, {}, {0.0}}, net));
  }
}

TEST_CASE("flat operating point") {
  const auto net = fixtures::bundled_case();
  const auto op = OperatingPoint::flat(net);
  CHECK(op.u.size() == 5);
  CHECK(op.u_dc.size() == 4);
  CHECK(op.delta_f.size() == 1);
  for (double u : op.u) CHECK(u == 1.0);
  for (double u : op.u_dc) CHECK(u == 1.0);
}
