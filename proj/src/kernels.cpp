#include <algorithm>
#include <cmath>

#include "mtdc/steadystate.hpp"

namespace mtdc::steady {

OperatingPoint OperatingPoint::flat(const NetworkCase& net) {
  const CaseIndex index(net);
  OperatingPoint op;
  for (const auto& bus : net.ac_buses) {
    op.u.push_back(std::clamp(1.0, bus.u_min, bus.u_max));
    op.delta.push_back(0.0);
  }
  for (const auto& bus : net.dc_buses) op.u_dc.push_back(bus.u_dc_rated);
  op.p_g.assign(net.generators.size(), 0.0);
  op.q_g.assign(net.generators.size(), 0.0);
  const auto nc = net.converters.size();
  op.p_c.assign(nc, 0.0);
  op.q_c.assign(nc, 0.0);
  op.p_dc.assign(nc, 0.0);
  op.i_c.assign(nc, 0.0);
  op.p_loss.assign(nc, 0.0);
  op.delta_f.assign(index.areas().size(), 0.0);
  return op;
}

Admittance build_admittance(const NetworkCase& net) {
  const CaseIndex index(net);
  const auto n = static_cast<Eigen::Index>(net.ac_buses.size());
  Admittance y{Matrix::Zero(n, n), Matrix::Zero(n, n)};
  for (const auto& br : net.ac_branches) {
    if (!br.in_service) continue;
    const auto i = static_cast<Eigen::Index>(index.ac_bus_at(br.from_bus));
    const auto j = static_cast<Eigen::Index>(index.ac_bus_at(br.to_bus));
    y.g(i, i) += br.g;
    y.g(j, j) += br.g;
    y.g(i, j) -= br.g;
    y.g(j, i) -= br.g;
    y.b(i, i) += br.b + 0.5 * br.b_shunt;
    y.b(j, j) += br.b + 0.5 * br.b_shunt;
    y.b(i, j) -= br.b;
    y.b(j, i) -= br.b;
  }
  return y;
}

Matrix dc_admittance(const NetworkCase& net) {
  const CaseIndex index(net);
  const auto n = static_cast<Eigen::Index>(net.dc_buses.size());
  Matrix y = Matrix::Zero(n, n);
  for (const auto& br : net.dc_branches) {
    if (!br.in_service) continue;
    const auto i = static_cast<Eigen::Index>(index.dc_bus_at(br.from_bus));
    const auto j = static_cast<Eigen::Index>(index.dc_bus_at(br.to_bus));
    y(i, j) += br.y_dc;
    y(j, i) += br.y_dc;
  }
  return y;
}

AcInjections ac_injections(const Vector& u, const Vector& delta, const Admittance& y) {
  const auto n = u.size();
  AcInjections out{Vector::Zero(n), Vector::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double g = y.g(i, j), b = y.b(i, j);
      if (g == 0.0 && b == 0.0) continue;
      const double th = delta[i] - delta[j];
      const double c = std::cos(th), s = std::sin(th);
      out.p[i] += u[i] * u[j] * (g * c + b * s);
      out.q[i] += u[i] * u[j] * (g * s - b * c);
    }
  }
  return out;
}

AcInjections ac_injections(const Vector& u, const Vector& delta, const NetworkCase& net) {
  return ac_injections(u, delta, build_admittance(net));
}

DcInjections dc_injections(const Vector& u_dc, const NetworkCase& net) {
  const Matrix y = dc_admittance(net);
  const auto n = u_dc.size();
  DcInjections out{Vector::Zero(n), Vector::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) out.i_dc[i] += y(i, j) * (u_dc[i] - u_dc[j]);
    }
    out.p_dc[i] = 2.0 * u_dc[i] * out.i_dc[i];
  }
  return out;
}

double reactor_current(double p_c, double q_c, double u_c) {
  if (!(u_c > 0.0)) throw std::invalid_argument("converter AC voltage must be positive");
  return std::hypot(p_c, q_c) / (3.0 * u_c);
}

double converter_loss(double i_c, ConverterDirection direction, const ConverterStation& station) {
  if (i_c < 0.0) throw std::invalid_argument("converter current must be nonnegative");
  const double c = quadratic_loss_coefficient(station, direction);
  return station.loss_a + station.loss_b * i_c + c * i_c * i_c;
}

double droop_residual(const DroopSettings& s, ControlMode mode, double p_dc, double u_dc, double f_pcc) {
  if (mode != ControlMode::VoltageDroop && mode != ControlMode::VoltageFrequencyDroop) {
    throw std::invalid_argument("control mode has no droop characteristic");
  }
  if (!(s.k_v > 0.0)) throw std::invalid_argument("k_v must be positive");
  double r = (p_dc - s.p_dc_0) + (u_dc - s.u_dc_0) / s.k_v;
  if (mode == ControlMode::VoltageFrequencyDroop) {
    if (!s.k_f || !(*s.k_f > 0.0)) throw std::invalid_argument("k_f must be positive");
    r += (f_pcc - s.f_ref) / *s.k_f;
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct AreaTotals {
  Vector scheduled, response;
};

AreaTotals area_totals(const AreaDispatch& dispatch, const NetworkCase& net, const CaseIndex& index) {
  const auto na = static_cast<Eigen::Index>(index.areas().size());
  if (dispatch.p_set.size() != net.generators.size() ||
      dispatch.converter_draw.size() != net.converters.size() ||
      dispatch.network_loss.size() != static_cast<std::size_t>(na)) {
    throw std::invalid_argument("area dispatch dimensions do not match the case");
  }
  AreaTotals t{Vector::Zero(na), Vector::Zero(na)};
  const auto& bus_area = index.bus_area();
  for (std::size_t i = 0; i < net.ac_buses.size(); ++i) {
    t.scheduled[static_cast<Eigen::Index>(bus_area[i])] -= net.ac_buses[i].p_demand;
  }
  for (const auto& inj : net.fixed_injections) {
    t.scheduled[static_cast<Eigen::Index>(bus_area[index.ac_bus_at(inj.bus)])] += inj.p;
  }
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& gen = net.generators[g];
    if (!gen.in_service) continue;
    const auto a = static_cast<Eigen::Index>(bus_area[index.ac_bus_at(gen.bus)]);
    t.scheduled[a] += dispatch.p_set[g];
    t.response[a] += gen.governor_droop;
  }
  for (std::size_t c = 0; c < net.converters.size(); ++c) {
    const auto& conv = net.converters[c];
    if (!conv.in_service) continue;
    t.scheduled[static_cast<Eigen::Index>(bus_area[index.ac_bus_at(conv.ac_bus)])] -=
        dispatch.converter_draw[c];
  }
  for (Eigen::Index a = 0; a < na; ++a) t.scheduled[a] -= dispatch.network_loss[static_cast<std::size_t>(a)];
  return t;
}

}  // namespace

Vector area_frequency_balance(const Vector& delta_f, const AreaDispatch& dispatch, const NetworkCase& net) {
  const CaseIndex index(net);
  const auto t = area_totals(dispatch, net, index);
  if (delta_f.size() != t.scheduled.size()) throw std::invalid_argument("delta_f has wrong length");
  return t.scheduled - t.response.cwiseProduct(delta_f);
}

Vector solve_area_frequency(const AreaDispatch& dispatch, const NetworkCase& net) {
  const CaseIndex index(net);
  const auto t = area_totals(dispatch, net, index);
  Vector df = Vector::Zero(t.scheduled.size());
  for (Eigen::Index a = 0; a < df.size(); ++a) {
    if (t.response[a] > 0.0) {
      df[a] = t.scheduled[a] / t.response[a];
    } else if (std::abs(t.scheduled[a]) > 1e-12) {
      throw SingularFrequencyError(index.areas()[static_cast<std::size_t>(a)]);
    }
  }
  return df;
}

}  // namespace mtdc::steady
