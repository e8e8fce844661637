#include "mtdc/power_flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mtdc::steady {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

bool is_regulating(ControlMode mode) { return mode != ControlMode::ActivePower; }

/// DC component label per DC bus, via in-service DC branches.
std::vector<int> dc_components(const NetworkCase& net, const CaseIndex& index) {
  std::vector<int> parent(net.dc_buses.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[sz(a)] != a) a = parent[sz(a)] = parent[sz(parent[sz(a)])];
    return a;
  };
  for (const auto& br : net.dc_branches) {
    if (!br.in_service) continue;
    parent[sz(find(static_cast<int>(index.dc_bus_at(br.from_bus))))] =
        find(static_cast<int>(index.dc_bus_at(br.to_bus)));
  }
  std::vector<int> comp(net.dc_buses.size());
  for (std::size_t j = 0; j < comp.size(); ++j) comp[j] = find(static_cast<int>(j));
  return comp;
}

std::vector<ConverterDirection> directions_of(const std::vector<double>& p_c) {
  std::vector<ConverterDirection> d;
  for (double p : p_c) d.push_back(direction_of(p));
  return d;
}

}  // namespace

std::string_view to_string(PowerFlowStatus status) {
  switch (status) {
    case PowerFlowStatus::Converged: return "converged";
    case PowerFlowStatus::NonConvergence: return "non-convergence";
    case PowerFlowStatus::SingularJacobian: return "singular-jacobian";
    case PowerFlowStatus::DcRegulationAbsent: return "dc-regulation-absent";
    case PowerFlowStatus::SingularFrequency: return "singular-frequency";
  }
  return "unknown";
}

PowerFlowControls PowerFlowControls::from_case(const NetworkCase& net) {
  const CaseIndex index(net);
  PowerFlowControls pc;
  for (const auto& conv : net.converters) {
    ConverterControl cc;
    cc.mode = conv.control_mode;
    cc.settings = conv.setpoints;
    cc.p_dc_set = conv.setpoints.p_dc_0;
    cc.u_dc_set = conv.setpoints.u_dc_0;
    pc.converters.push_back(cc);
  }
  for (const auto& bus : net.ac_buses) pc.u_set.push_back(std::clamp(1.0, bus.u_min, bus.u_max));

  const auto& bus_area = index.bus_area();
  std::vector<double> demand(index.areas().size(), 0.0), capacity(index.areas().size(), 0.0);
  for (std::size_t i = 0; i < net.ac_buses.size(); ++i) demand[bus_area[i]] += net.ac_buses[i].p_demand;
  for (const auto& inj : net.fixed_injections) demand[bus_area[index.ac_bus_at(inj.bus)]] -= inj.p;
  for (const auto& conv : net.converters) {
    if (conv.in_service) demand[bus_area[index.ac_bus_at(conv.ac_bus)]] += conv.setpoints.p_dc_0;
  }
  for (const auto& gen : net.generators) {
    if (gen.in_service) capacity[bus_area[index.ac_bus_at(gen.bus)]] += gen.p_max;
  }
  for (const auto& gen : net.generators) {
    const auto a = bus_area[index.ac_bus_at(gen.bus)];
    double p = capacity[a] > 0.0 ? demand[a] * gen.p_max / capacity[a] : 0.0;
    pc.p_set.push_back(gen.in_service ? std::clamp(p, gen.p_min, gen.p_max) : 0.0);
    pc.q_set.push_back(0.0);
  }
  return pc;
}

PowerFlowControls PowerFlowControls::with_setpoints(const OperatingPoint& op, const NetworkCase& net) const {
  const CaseIndex index(net);
  PowerFlowControls pc = *this;
  pc.p_set = op.p_g;
  pc.q_set = op.q_g;
  pc.u_set = op.u;
  for (std::size_t c = 0; c < pc.converters.size(); ++c) {
    pc.converters[c].p_dc_set = op.p_dc[c];
    pc.converters[c].u_dc_set = op.u_dc[index.dc_bus_at(net.converters[c].dc_bus)];
    pc.converters[c].q_set = op.q_c[c];
  }
  return pc;
}

NetworkEquations power_flow_equations(const NetworkCase& net, const PowerFlowControls& controls,
                                      const std::vector<ConverterDirection>& directions,
                                      std::vector<int>& fixed) {
  if (controls.converters.size() != net.converters.size() || controls.p_set.size() != net.generators.size() ||
      controls.q_set.size() != net.generators.size() || controls.u_set.size() != net.ac_buses.size()) {
    throw std::invalid_argument("power flow controls do not match the case");
  }
  NetworkEquations eq(net);
  const auto& L = eq.layout();
  const auto& index = eq.index();
  fixed.clear();

  eq.add_ac_balance();
  eq.add_dc_balance();
  eq.add_converter_physics(directions);

  // AC reference angle of each area.
  for (std::size_t i = 0; i < net.ac_buses.size(); ++i) {
    if (net.ac_buses[i].kind == BusKind::SlackCandidate) fixed.push_back(L.delta(static_cast<int>(i)));
  }

  std::vector<std::vector<int>> gens_at(net.ac_buses.size());
  for (int g = 0; g < L.n_gen; ++g) {
    const auto& gen = net.generators[sz(g)];
    if (!gen.in_service) {
      fixed.push_back(L.p_g(g));
      fixed.push_back(L.q_g(g));
      continue;
    }
    eq.add_governor(g, controls.p_set[sz(g)]);
    gens_at[index.ac_bus_at(gen.bus)].push_back(g);
  }
  for (int i = 0; i < L.n_bus; ++i) {
    const auto& gens = gens_at[sz(i)];
    if (gens.empty()) continue;
    const auto id = std::to_string(net.ac_buses[sz(i)].id);
    if (net.ac_buses[sz(i)].kind == BusKind::PQ) {
      for (int g : gens) eq.add_pin(L.q_g(g), controls.q_set[sz(g)], "q_set[gen " + std::to_string(net.generators[sz(g)].id) + "]");
      continue;
    }
    eq.add_pin(L.u(i), controls.u_set[sz(i)], "u_set[bus " + id + "]");
    for (std::size_t k = 1; k < gens.size(); ++k) {
      eq.add_equal(L.q_g(gens[0]), L.q_g(gens[k]),
                   "q_share[gen " + std::to_string(net.generators[sz(gens[k])].id) + "]");
    }
  }

  std::vector<bool> area_has_freq(sz(L.n_area), false);
  for (int c = 0; c < L.n_conv; ++c) {
    const auto& conv = net.converters[sz(c)];
    if (!conv.in_service) {
      for (int col : {L.p_c(c), L.q_c(c), L.p_dc(c), L.i_c(c)}) fixed.push_back(col);
      continue;
    }
    const auto& cc = controls.converters[sz(c)];
    const auto id = std::to_string(conv.id);
    switch (cc.mode) {
      case ControlMode::ActivePower:
        eq.add_pin(L.p_dc(c), cc.p_dc_set, "p_dc_set[conv " + id + "]");
        break;
      case ControlMode::DcVoltage:
        eq.add_pin(L.u_dc(static_cast<int>(index.dc_bus_at(conv.dc_bus))), cc.u_dc_set, "u_dc_set[conv " + id + "]");
        break;
      case ControlMode::VoltageDroop:
      case ControlMode::VoltageFrequencyDroop: {
        DroopRow row;
        row.converter = c;
        row.p_dc_0 = cc.settings.p_dc_0;
        row.u_dc_0 = cc.settings.u_dc_0;
        row.f_ref = cc.settings.f_ref;
        row.k_v = Coefficient::constant(cc.settings.k_v);
        if (cc.mode == ControlMode::VoltageFrequencyDroop) {
          if (!cc.settings.k_f) throw std::invalid_argument("converter " + id + " lacks k_f");
          row.k_f = Coefficient::constant(*cc.settings.k_f);
          area_has_freq[sz(eq.area_of_bus(static_cast<int>(index.ac_bus_at(conv.ac_bus))))] = true;
        }
        eq.add_droop(row);
        break;
      }
    }
    eq.add_pin(L.q_c(c), cc.q_set, "q_set[conv " + id + "]");
  }
  for (int a = 0; a < L.n_area; ++a) {
    if (eq.area_response(a) == 0.0 && !area_has_freq[sz(a)]) fixed.push_back(L.delta_f(a));
  }
  std::sort(fixed.begin(), fixed.end());
  return eq;
}

void populate_losses(OperatingPoint& op, const NetworkCase& net) {
  op.p_loss.assign(net.converters.size(), 0.0);
  for (std::size_t c = 0; c < net.converters.size(); ++c) {
    if (!net.converters[c].in_service) continue;
    op.p_loss[c] = converter_loss(std::max(0.0, op.i_c[c]), direction_of(op.p_c[c]), net.converters[c]);
  }
}

PowerFlowResult solve_power_flow(const NetworkCase& net, const PowerFlowControls& controls,
                                 const std::optional<OperatingPoint>& warm_start,
                                 const PowerFlowOptions& options) {
  const CaseIndex index(net);
  PowerFlowResult result;

  OperatingPoint start = warm_start ? *warm_start : OperatingPoint::flat(net);
  if (!warm_start) {
    for (std::size_t i = 0; i < net.ac_buses.size(); ++i) {
      if (net.ac_buses[i].kind != BusKind::PQ) start.u[i] = controls.u_set[i];
    }
    start.p_g = controls.p_set;
    start.q_g = controls.q_set;
    for (std::size_t c = 0; c < net.converters.size(); ++c) {
      const auto& cc = controls.converters[c];
      start.p_dc[c] = cc.mode == ControlMode::ActivePower ? cc.p_dc_set : cc.settings.p_dc_0;
      start.q_c[c] = cc.q_set;
      start.p_c[c] = start.p_dc[c];
      if (cc.mode == ControlMode::DcVoltage) start.u_dc[index.dc_bus_at(net.converters[c].dc_bus)] = cc.u_dc_set;
    }
  }
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    if (!net.generators[g].in_service) start.p_g[g] = start.q_g[g] = 0.0;
  }
  for (std::size_t c = 0; c < net.converters.size(); ++c) {
    if (!net.converters[c].in_service) {
      start.p_c[c] = start.q_c[c] = start.p_dc[c] = start.i_c[c] = 0.0;
      continue;
    }
    if (!warm_start) {
      const double u = start.u[index.ac_bus_at(net.converters[c].ac_bus)];
      start.i_c[c] = std::sqrt(start.p_c[c] * start.p_c[c] + start.q_c[c] * start.q_c[c] + kCurrentSmoothing) / (3.0 * u);
    }
  }

  auto directions = directions_of(start.p_c);
  std::vector<int> fixed;
  auto eq = power_flow_equations(net, controls, directions, fixed);
  const auto& L = eq.layout();
  Vector x = L.pack(start);

  // Any area left without a frequency-determining element cannot absorb an imbalance.
  for (int a = 0; a < L.n_area; ++a) {
    if (std::binary_search(fixed.begin(), fixed.end(), L.delta_f(a))) {
      result.status = PowerFlowStatus::SingularFrequency;
      result.message = SingularFrequencyError(index.areas()[sz(a)]).what();
      x[L.delta_f(a)] = 0.0;
    }
  }

  auto finish = [&](PowerFlowStatus status, std::string message) {
    result.status = status;
    result.message = std::move(message);
    result.point = L.unpack(x);
    populate_losses(result.point, net);
    const Vector r = eq.residual(x);
    result.max_residual = inf_norm(r);
    return result;
  };
  if (result.status == PowerFlowStatus::SingularFrequency) return finish(result.status, result.message);

  auto dc_unregulated = [&]() {
    const auto comp = dc_components(net, index);
    std::vector<bool> regulated(net.dc_buses.size(), false), has_conv(net.dc_buses.size(), false);
    for (std::size_t c = 0; c < net.converters.size(); ++c) {
      if (!net.converters[c].in_service) continue;
      const auto root = sz(comp[index.dc_bus_at(net.converters[c].dc_bus)]);
      has_conv[root] = true;
      if (is_regulating(controls.converters[c].mode)) regulated[root] = true;
    }
    for (std::size_t j = 0; j < comp.size(); ++j) {
      if (has_conv[j] && !regulated[j]) return true;
    }
    return false;
  };
  auto failure = [&](PowerFlowStatus status, const std::string& message) {
    if (dc_unregulated()) {
      return finish(PowerFlowStatus::DcRegulationAbsent,
                    "DC grid has no voltage-regulating converter and the solve failed: " + message);
    }
    return finish(status, message);
  };

  for (int pass = 0; pass < options.max_direction_passes; ++pass) {
    if (pass > 0) eq = power_flow_equations(net, controls, directions, fixed);
    std::vector<int> free;
    for (int col = 0; col < L.size(); ++col) {
      if (!std::binary_search(fixed.begin(), fixed.end(), col)) free.push_back(col);
    }
    if (static_cast<int>(free.size()) != eq.rows()) {
      throw std::logic_error("power flow system is not square: " + std::to_string(eq.rows()) + " rows, " +
                             std::to_string(free.size()) + " unknowns");
    }
    Vector r = eq.residual(x);
    double norm = inf_norm(r);
    result.trace.push_back(norm);
    int it = 0;
    while (norm > options.tolerance) {
      if (!std::isfinite(norm)) return failure(PowerFlowStatus::NonConvergence, "residual is not finite");
      if (it == options.max_iterations) {
        return failure(PowerFlowStatus::NonConvergence,
                       "no convergence in " + std::to_string(options.max_iterations) + " iterations");
      }
      const Matrix full = eq.jacobian(x);
      Matrix J(full.rows(), static_cast<Eigen::Index>(free.size()));
      for (std::size_t k = 0; k < free.size(); ++k) J.col(static_cast<Eigen::Index>(k)) = full.col(free[k]);
      Eigen::PartialPivLU<Matrix> lu(J);
      const double rcond = lu.rcond();
      if (!(rcond > 1e-14)) {
        return failure(PowerFlowStatus::SingularJacobian, "Jacobian is singular (rcond " + std::to_string(rcond) + ")");
      }
      const Vector dx = lu.solve(-r);
      double alpha = 1.0;
      Vector trial = x;
      Vector r_trial;
      double n_trial = 0.0;
      for (int h = 0; h <= options.max_halvings; ++h) {
        trial = x;
        for (std::size_t k = 0; k < free.size(); ++k) trial[free[k]] += alpha * dx[static_cast<Eigen::Index>(k)];
        r_trial = eq.residual(trial);
        n_trial = inf_norm(r_trial);
        if (std::isfinite(n_trial) && n_trial < norm) break;
        alpha *= 0.5;
      }
      x = trial;
      r = r_trial;
      norm = n_trial;
      ++it;
      ++result.iterations;
      result.trace.push_back(norm);
    }
    std::vector<ConverterDirection> now = directions;
    for (int c = 0; c < L.n_conv; ++c) {
      if (net.converters[sz(c)].in_service) now[sz(c)] = direction_of(x[L.p_c(c)]);
    }
    if (now == directions) return finish(PowerFlowStatus::Converged, "");
    directions = now;
  }
  return finish(PowerFlowStatus::Converged, "converter direction oscillates around zero power");
}

std::string state_layout(const NetworkCase& net, const PowerFlowControls& controls) {
  std::vector<ConverterDirection> dirs;
  for (const auto& cc : controls.converters) dirs.push_back(direction_of(cc.p_dc_set));
  std::vector<int> fixed;
  const auto eq = power_flow_equations(net, controls, dirs, fixed);
  const auto& L = eq.layout();
  std::ostringstream out;
  out << "columns\n";
  for (int col = 0; col < L.size(); ++col) {
    out << "  " << col << " " << L.name(col, net);
    if (std::binary_search(fixed.begin(), fixed.end(), col)) out << " (fixed)";
    out << "\n";
  }
  out << "rows\n";
  for (int k = 0; k < eq.rows(); ++k) out << "  " << k << " " << eq.row_info()[sz(k)].label << "\n";
  return out.str();
}

}  // namespace mtdc::steady
