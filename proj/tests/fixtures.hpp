// Shared cases and independent physics checks for the test programs.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "mtdc/contingency.hpp"
#include "mtdc/grid_model.hpp"
#include "mtdc/opf.hpp"
#include "mtdc/power_flow.hpp"
#include "mtdc/steadystate.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) { return std::string(MTDC_DATA_DIR) + "/" + name; }
inline std::string test_data_path(const std::string& name) {
  return std::string(MTDC_TEST_DATA_DIR) + "/" + name;
}

inline mtdc::NetworkCase bundled_case() { return mtdc::load_case(data_path("case5_4dc.json")); }

inline mtdc::contingency::Scenario bundled_scenario(int n) {
  return mtdc::contingency::load_scenario(data_path("scenario" + std::to_string(n) + ".json"));
}

/// Two voltage-droop converters (DC buses 1, 2) feeding a constant-power sink
/// converter at DC bus 3 over identical cables. Every converter sits alone in
/// its own AC area with a governor-controlled generator; converter losses are
/// zero so the only losses are the I^2/Y cable losses.
inline mtdc::NetworkCase sharing_case(double k1, double k2, double y_cable = 2000.0) {
  using namespace mtdc;
  NetworkCase net;
  for (int a = 1; a <= 3; ++a) {
    AcBus bus;
    bus.id = a;
    bus.kind = BusKind::SlackCandidate;
    bus.area = a;
    bus.p_demand = 1.0;
    net.ac_buses.push_back(bus);

    Generator g;
    g.id = a;
    g.bus = a;
    g.p_min = -5.0;
    g.p_max = 5.0;
    g.q_min = -5.0;
    g.q_max = 5.0;
    g.beta = 10.0;
    g.governor_droop = 50.0;
    net.generators.push_back(g);

    DcBus d;
    d.id = a;
    net.dc_buses.push_back(d);
  }
  for (int a = 1; a <= 2; ++a) {
    DcBranch br;
    br.id = a;
    br.from_bus = a;
    br.to_bus = 3;
    br.y_dc = y_cable;
    net.dc_branches.push_back(br);
  }
  for (int c = 1; c <= 3; ++c) {
    ConverterStation st;
    st.id = c;
    st.ac_bus = c;
    st.dc_bus = c;
    st.p_dc_min = -4.0;
    st.p_dc_max = 4.0;
    st.control_mode = c == 3 ? ControlMode::ActivePower : ControlMode::VoltageDroop;
    st.setpoints.p_dc_0 = c == 3 ? -1.0 : 0.5;
    st.setpoints.u_dc_0 = 1.0;
    st.setpoints.k_v = c == 1 ? k1 : c == 2 ? k2 : 1.0;
    net.converters.push_back(st);
  }
  return net;
}

struct SharingRun {
  mtdc::steady::PowerFlowResult before, after;
  double dp1 = 0.0, dp2 = 0.0;
};

/// Power flow before and after the sink draw grows by `step`.
inline SharingRun run_sharing(const mtdc::NetworkCase& net, double step) {
  using namespace mtdc::steady;
  auto controls = PowerFlowControls::from_case(net);
  controls.converters[2].mode = mtdc::ControlMode::ActivePower;
  controls.converters[2].p_dc_set = -1.0;
  SharingRun run;
  run.before = solve_power_flow(net, controls);
  controls.converters[2].p_dc_set = -1.0 - step;
  run.after = solve_power_flow(net, controls, run.before.point);
  run.dp1 = run.after.point.p_dc[0] - run.before.point.p_dc[0];
  run.dp2 = run.after.point.p_dc[1] - run.before.point.p_dc[1];
  return run;
}

/// Closed-form DC side of the sharing fixture: droop converters i = 1, 2 with
/// p_i = p0 - (u_i - u0)/k_i feed the sink p_3 over cables of admittance Y,
/// with p_j = 2 u_j sum_m Y (u_j - u_m). Solved by a 3x3 Newton on u.
inline std::vector<double> sharing_closed_form(double k1, double k2, double y, double p_sink, double p0 = 0.5,
                                               double u0 = 1.0) {
  Eigen::Vector3d u(1.0, 1.0, 1.0);
  const double k[2] = {k1, k2};
  for (int it = 0; it < 50; ++it) {
    Eigen::Vector3d r;
    Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 2; ++i) {
      const double p = p0 - (u[i] - u0) / k[i];
      r[i] = 2.0 * u[i] * y * (u[i] - u[2]) - p;
      j(i, i) = 2.0 * y * (2.0 * u[i] - u[2]) + 1.0 / k[i];
      j(i, 2) = -2.0 * u[i] * y;
    }
    r[2] = 2.0 * u[2] * y * (2.0 * u[2] - u[0] - u[1]) - p_sink;
    j(2, 2) = 2.0 * y * (4.0 * u[2] - u[0] - u[1]);
    j(2, 0) = j(2, 1) = -2.0 * u[2] * y;
    const Eigen::Vector3d du = j.fullPivLu().solve(-r);
    u += du;
    if (du.cwiseAbs().maxCoeff() < 1e-15) break;
  }
  return {p0 - (u[0] - u0) / k1, p0 - (u[1] - u0) / k2, u[0], u[1], u[2]};
}

/// Worst physics mismatch of an operating point, evaluated from the case data
/// alone: AC balance via complex phasors, DC balance, loss coupling with the
/// direction given by the sign of p_c, reactor current and droop rows.
struct PhysicsCheck {
  double ac_balance = 0.0;
  double dc_balance = 0.0;
  double loss_coupling = 0.0;
  double reported_loss = 0.0;
  double reactor_current = 0.0;
  double droop = 0.0;
  double max() const {
    return std::max({ac_balance, dc_balance, loss_coupling, reported_loss, reactor_current, droop});
  }
};

inline PhysicsCheck check_physics(const mtdc::NetworkCase& net, const mtdc::steady::OperatingPoint& op,
                                  const std::vector<mtdc::DroopSettings>& droop,
                                  const std::vector<mtdc::ControlMode>& modes) {
  using namespace mtdc;
  using cd = std::complex<double>;
  PhysicsCheck out;
  const CaseIndex idx(net);
  const std::size_t nb = net.ac_buses.size();

  std::vector<std::vector<cd>> y(nb, std::vector<cd>(nb));
  for (const auto& br : net.ac_branches) {
    if (!br.in_service) continue;
    const auto i = idx.ac_bus_at(br.from_bus), k = idx.ac_bus_at(br.to_bus);
    const cd ys(br.g, br.b), sh(0.0, br.b_shunt / 2);
    y[i][i] += ys + sh;
    y[k][k] += ys + sh;
    y[i][k] -= ys;
    y[k][i] -= ys;
  }
  std::vector<cd> v(nb), s_net(nb);
  for (std::size_t i = 0; i < nb; ++i) v[i] = std::polar(op.u[i], op.delta[i]);
  for (std::size_t i = 0; i < nb; ++i) {
    cd iy = 0.0;
    for (std::size_t k = 0; k < nb; ++k) iy += y[i][k] * v[k];
    s_net[i] = v[i] * std::conj(iy);
  }
  std::vector<cd> sched(nb);
  for (std::size_t i = 0; i < nb; ++i) sched[i] = -cd(net.ac_buses[i].p_demand, net.ac_buses[i].q_demand);
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    if (!net.generators[g].in_service) continue;
    sched[idx.ac_bus_at(net.generators[g].bus)] += cd(op.p_g[g], op.q_g[g]);
  }
  for (const auto& f : net.fixed_injections) sched[idx.ac_bus_at(f.bus)] += cd(f.p, f.q);
  for (std::size_t c = 0; c < net.converters.size(); ++c) {
    if (!net.converters[c].in_service) continue;
    sched[idx.ac_bus_at(net.converters[c].ac_bus)] -= cd(op.p_c[c], op.q_c[c]);
  }
  for (std::size_t i = 0; i < nb; ++i) out.ac_balance = std::max(out.ac_balance, std::abs(sched[i] - s_net[i]));

  const std::size_t nd = net.dc_buses.size();
  std::vector<double> p_bus(nd, 0.0);
  for (const auto& br : net.dc_branches) {
    if (!br.in_service) continue;
    const auto i = idx.dc_bus_at(br.from_bus), k = idx.dc_bus_at(br.to_bus);
    const double current = br.y_dc * (op.u_dc[i] - op.u_dc[k]);
    p_bus[i] += 2.0 * op.u_dc[i] * current;
    p_bus[k] -= 2.0 * op.u_dc[k] * current;
  }
  for (std::size_t c = 0; c < net.converters.size(); ++c) {
    if (net.converters[c].in_service) p_bus[idx.dc_bus_at(net.converters[c].dc_bus)] -= op.p_dc[c];
  }
  for (double p : p_bus) out.dc_balance = std::max(out.dc_balance, std::abs(p));

  for (std::size_t c = 0; c < net.converters.size(); ++c) {
    const auto& st = net.converters[c];
    if (!st.in_service) continue;
    const double i = op.i_c[c];
    const double quad = op.p_c[c] >= 0.0 ? st.loss_c_rec : st.loss_c_inv;
    const double loss = st.loss_a + st.loss_b * i + quad * i * i;
    out.loss_coupling = std::max(out.loss_coupling, std::abs(op.p_c[c] - op.p_dc[c] - loss));
    out.reported_loss = std::max(out.reported_loss, std::abs(op.p_loss[c] - loss));
    const double u = op.u[idx.ac_bus_at(st.ac_bus)];
    const double s = std::sqrt(op.p_c[c] * op.p_c[c] + op.q_c[c] * op.q_c[c] + steady::kCurrentSmoothing);
    out.reactor_current = std::max(out.reactor_current, std::abs(3.0 * u * i - s));

    if (c < modes.size() && (modes[c] == ControlMode::VoltageDroop || modes[c] == ControlMode::VoltageFrequencyDroop)) {
      const auto& d = droop[c];
      double r = op.p_dc[c] - d.p_dc_0 + (op.u_dc[idx.dc_bus_at(st.dc_bus)] - d.u_dc_0) / d.k_v;
      if (modes[c] == ControlMode::VoltageFrequencyDroop) {
        const auto area = idx.bus_area()[idx.ac_bus_at(st.ac_bus)];
        r += (1.0 + op.delta_f[area] - d.f_ref) / *d.k_f;
      }
      out.droop = std::max(out.droop, std::abs(r));
    }
  }
  return out;
}

/// Control modes a strategy assigns to the converters of `net`.
inline std::vector<mtdc::ControlMode> strategy_modes(const mtdc::NetworkCase& net, const mtdc::opf::Strategy& s) {
  std::vector<mtdc::ControlMode> modes;
  for (const auto& c : net.converters) {
    if (!s.uses_droop()) modes.push_back(mtdc::ControlMode::ActivePower);
    else if (s.in_frequency_subset(c.id)) modes.push_back(mtdc::ControlMode::VoltageFrequencyDroop);
    else modes.push_back(mtdc::ControlMode::VoltageDroop);
  }
  return modes;
}

}  // namespace fixtures
