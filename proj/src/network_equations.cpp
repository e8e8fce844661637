#include "mtdc/network_equations.hpp"

#include <cmath>
#include <stdexcept>

namespace mtdc::steady {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

double p_ref_of(const DroopRow& d, const Vector& x) { return d.p_ref_column >= 0 ? x[d.p_ref_column] : d.p_dc_0; }
double u_ref_of(const DroopRow& d, const Vector& x) { return d.u_ref_column >= 0 ? x[d.u_ref_column] : d.u_dc_0; }

void add_sym(Matrix& h, int i, int j, double v) {
  if (v == 0.0) return;
  if (i == j) {
    h(i, i) += v;
  } else {
    h(i, j) += v;
    h(j, i) += v;
  }
}

std::vector<double> copy(const Vector& x, int from, int n) {
  std::vector<double> out(sz(n));
  for (int k = 0; k < n; ++k) out[sz(k)] = x[from + k];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// VariableLayout

VariableLayout VariableLayout::of(const NetworkCase& net, int n_kv, int n_kf, int n_ref) {
  VariableLayout l;
  l.n_bus = static_cast<int>(net.ac_buses.size());
  l.n_dc = static_cast<int>(net.dc_buses.size());
  l.n_gen = static_cast<int>(net.generators.size());
  l.n_conv = static_cast<int>(net.converters.size());
  l.n_area = static_cast<int>(CaseIndex(net).areas().size());
  l.n_kv = n_kv;
  l.n_kf = n_kf;
  l.n_ref = n_ref;
  return l;
}

std::string VariableLayout::name(int col, const NetworkCase& net) const {
  auto tag = [](const char* what, const char* kind, int id) {
    return std::string(what) + "[" + kind + " " + std::to_string(id) + "]";
  };
  if (col < 0 || col >= size()) throw std::out_of_range("column out of range");
  if (col < delta(0)) return tag("u", "bus", net.ac_buses[sz(col)].id);
  if (col < u_dc(0)) return tag("delta", "bus", net.ac_buses[sz(col - delta(0))].id);
  if (col < p_g(0)) return tag("u_dc", "dc_bus", net.dc_buses[sz(col - u_dc(0))].id);
  if (col < q_g(0)) return tag("p_g", "gen", net.generators[sz(col - p_g(0))].id);
  if (col < p_c(0)) return tag("q_g", "gen", net.generators[sz(col - q_g(0))].id);
  if (col < q_c(0)) return tag("p_c", "conv", net.converters[sz(col - p_c(0))].id);
  if (col < p_dc(0)) return tag("q_c", "conv", net.converters[sz(col - q_c(0))].id);
  if (col < i_c(0)) return tag("p_dc", "conv", net.converters[sz(col - p_dc(0))].id);
  if (col < delta_f(0)) return tag("i_c", "conv", net.converters[sz(col - i_c(0))].id);
  if (col < k_v(0)) return tag("delta_f", "area", CaseIndex(net).areas()[sz(col - delta_f(0))]);
  if (col < k_f(0)) return "k_v[slot " + std::to_string(col - k_v(0)) + "]";
  if (col < p_ref(0)) return "k_f[slot " + std::to_string(col - k_f(0)) + "]";
  if (col < u_ref(0)) return "p_ref[slot " + std::to_string(col - p_ref(0)) + "]";
  return "u_ref[slot " + std::to_string(col - u_ref(0)) + "]";
}

Vector VariableLayout::pack(const OperatingPoint& op) const {
  Vector x = Vector::Zero(size());
  auto put = [&](const std::vector<double>& v, int from, int n) {
    if (static_cast<int>(v.size()) != n) throw std::invalid_argument("operating point does not match layout");
    for (int k = 0; k < n; ++k) x[from + k] = v[sz(k)];
  };
  put(op.u, u(0), n_bus);
  put(op.delta, delta(0), n_bus);
  put(op.u_dc, u_dc(0), n_dc);
  put(op.p_g, p_g(0), n_gen);
  put(op.q_g, q_g(0), n_gen);
  put(op.p_c, p_c(0), n_conv);
  put(op.q_c, q_c(0), n_conv);
  put(op.p_dc, p_dc(0), n_conv);
  put(op.i_c, i_c(0), n_conv);
  put(op.delta_f, delta_f(0), n_area);
  return x;
}

OperatingPoint VariableLayout::unpack(const Vector& x) const {
  if (x.size() != size()) throw std::invalid_argument("state vector does not match layout");
  OperatingPoint op;
  op.u = copy(x, u(0), n_bus);
  op.delta = copy(x, delta(0), n_bus);
  op.u_dc = copy(x, u_dc(0), n_dc);
  op.p_g = copy(x, p_g(0), n_gen);
  op.q_g = copy(x, q_g(0), n_gen);
  op.p_c = copy(x, p_c(0), n_conv);
  op.q_c = copy(x, q_c(0), n_conv);
  op.p_dc = copy(x, p_dc(0), n_conv);
  op.i_c = copy(x, i_c(0), n_conv);
  op.p_loss.assign(sz(n_conv), 0.0);
  op.delta_f = copy(x, delta_f(0), n_area);
  return op;
}

// ---------------------------------------------------------------------------
// NetworkEquations

NetworkEquations::NetworkEquations(const NetworkCase& net, int n_kv, int n_kf, int n_ref)
    : net_(std::make_shared<const NetworkCase>(net)),
      index_(std::make_shared<const CaseIndex>(*net_)),
      layout_(VariableLayout::of(*net_, n_kv, n_kf, n_ref)),
      y_(build_admittance(*net_)),
      y_dc_(steady::dc_admittance(*net_)) {
  const auto& n = *net_;
  gens_at_bus_.resize(n.ac_buses.size());
  convs_at_bus_.resize(n.ac_buses.size());
  convs_at_dc_.resize(n.dc_buses.size());
  fixed_p_.assign(n.ac_buses.size(), 0.0);
  fixed_q_.assign(n.ac_buses.size(), 0.0);
  for (std::size_t g = 0; g < n.generators.size(); ++g) {
    const int bus = static_cast<int>(index_->ac_bus_at(n.generators[g].bus));
    gen_bus_.push_back(bus);
    if (n.generators[g].in_service) gens_at_bus_[sz(bus)].push_back(static_cast<int>(g));
  }
  for (std::size_t c = 0; c < n.converters.size(); ++c) {
    const int ac = static_cast<int>(index_->ac_bus_at(n.converters[c].ac_bus));
    const int dc = static_cast<int>(index_->dc_bus_at(n.converters[c].dc_bus));
    conv_ac_.push_back(ac);
    conv_dc_.push_back(dc);
    if (n.converters[c].in_service) {
      convs_at_bus_[sz(ac)].push_back(static_cast<int>(c));
      convs_at_dc_[sz(dc)].push_back(static_cast<int>(c));
    }
  }
  for (const auto& inj : n.fixed_injections) {
    const auto bus = index_->ac_bus_at(inj.bus);
    fixed_p_[bus] += inj.p;
    fixed_q_[bus] += inj.q;
  }
  directions_.assign(n.converters.size(), ConverterDirection::Rectifier);
}

void NetworkEquations::push(Row row, RowKind kind, std::string label) {
  row.kind = kind;
  rows_.push_back(row);
  info_.push_back({kind, std::move(label)});
}

void NetworkEquations::add_ac_balance() {
  for (int i = 0; i < layout_.n_bus; ++i) {
    const auto id = std::to_string(net_->ac_buses[sz(i)].id);
    push({RowKind::ActiveBalance, i}, RowKind::ActiveBalance, "P[bus " + id + "]");
    push({RowKind::ReactiveBalance, i}, RowKind::ReactiveBalance, "Q[bus " + id + "]");
  }
}

void NetworkEquations::add_dc_balance() {
  for (int j = 0; j < layout_.n_dc; ++j) {
    push({RowKind::DcBalance, j}, RowKind::DcBalance,
         "P_dc[dc_bus " + std::to_string(net_->dc_buses[sz(j)].id) + "]");
  }
}

void NetworkEquations::add_converter_physics(const std::vector<ConverterDirection>& directions) {
  if (directions.size() != net_->converters.size()) {
    throw std::invalid_argument("one direction per converter required");
  }
  directions_ = directions;
  for (int c = 0; c < layout_.n_conv; ++c) {
    if (!net_->converters[sz(c)].in_service) continue;
    const auto id = std::to_string(net_->converters[sz(c)].id);
    push({RowKind::ConverterLoss, c}, RowKind::ConverterLoss, "loss[conv " + id + "]");
    push({RowKind::ReactorCurrent, c}, RowKind::ReactorCurrent, "current[conv " + id + "]");
  }
}

void NetworkEquations::add_droop(const DroopRow& row) {
  if (row.converter < 0 || row.converter >= layout_.n_conv) throw std::out_of_range("droop converter");
  Row r{RowKind::Droop, row.converter};
  r.droop = static_cast<int>(droops_.size());
  droops_.push_back(row);
  push(r, RowKind::Droop, "droop[conv " + std::to_string(net_->converters[sz(row.converter)].id) + "]");
}

void NetworkEquations::add_pin(int column, double value, std::string label) {
  if (column < 0 || column >= layout_.size()) throw std::out_of_range("pin column");
  Row r{RowKind::Pin, column};
  r.value = value;
  push(r, RowKind::Pin, std::move(label));
}

void NetworkEquations::add_equal(int a, int b, std::string label) {
  Row r{RowKind::Equal, a};
  r.other = b;
  push(r, RowKind::Equal, std::move(label));
}

void NetworkEquations::add_governor(int g, double p_set) {
  Row r{RowKind::GeneratorGovernor, g};
  r.value = p_set;
  push(r, RowKind::GeneratorGovernor, "governor[gen " + std::to_string(net_->generators[sz(g)].id) + "]");
}

void NetworkEquations::add_area_frequency(int area, const std::vector<double>& p_sched) {
  if (p_sched.size() != net_->generators.size()) throw std::invalid_argument("schedule length");
  Row r{RowKind::AreaFrequency, area};
  r.sched = static_cast<int>(schedules_.size());
  schedules_.push_back(p_sched);
  push(r, RowKind::AreaFrequency, "frequency[area " + std::to_string(index_->areas()[sz(area)]) + "]");
}

double NetworkEquations::area_response(int area) const {
  double r = 0.0;
  for (std::size_t g = 0; g < net_->generators.size(); ++g) {
    const auto& gen = net_->generators[g];
    if (gen.in_service && area_of_bus(gen_bus_[g]) == area) r += gen.governor_droop;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation

Vector NetworkEquations::residual(const Vector& x) const {
  const auto& L = layout_;
  const auto& n = *net_;
  Vector r(rows());
  for (int k = 0; k < rows(); ++k) {
    const Row& row = rows_[sz(k)];
    double v = 0.0;
    switch (row.kind) {
      case RowKind::ActiveBalance:
      case RowKind::ReactiveBalance: {
        const int i = row.element;
        const bool active = row.kind == RowKind::ActiveBalance;
        for (int j = 0; j < L.n_bus; ++j) {
          const double g = y_.g(i, j), b = y_.b(i, j);
          if (g == 0.0 && b == 0.0) continue;
          const double th = x[L.delta(i)] - x[L.delta(j)];
          const double c = std::cos(th), s = std::sin(th);
          v += x[L.u(i)] * x[L.u(j)] * (active ? g * c + b * s : g * s - b * c);
        }
        const auto& bus = n.ac_buses[sz(i)];
        v += active ? bus.p_demand - fixed_p_[sz(i)] : bus.q_demand - fixed_q_[sz(i)];
        for (int g : gens_at_bus_[sz(i)]) v -= x[active ? L.p_g(g) : L.q_g(g)];
        for (int c : convs_at_bus_[sz(i)]) v += x[active ? L.p_c(c) : L.q_c(c)];
        break;
      }
      case RowKind::DcBalance: {
        const int j = row.element;
        double i_dc = 0.0;
        for (int m = 0; m < L.n_dc; ++m) i_dc += y_dc_(j, m) * (x[L.u_dc(j)] - x[L.u_dc(m)]);
        v = 2.0 * x[L.u_dc(j)] * i_dc;
        for (int c : convs_at_dc_[sz(j)]) v -= x[L.p_dc(c)];
        break;
      }
      case RowKind::ConverterLoss: {
        const int c = row.element;
        const auto& st = n.converters[sz(c)];
        const double i = x[L.i_c(c)];
        v = x[L.p_c(c)] - x[L.p_dc(c)] -
            (st.loss_a + st.loss_b * i + quadratic_loss_coefficient(st, directions_[sz(c)]) * i * i);
        break;
      }
      case RowKind::ReactorCurrent: {
        const int c = row.element;
        const double p = x[L.p_c(c)], q = x[L.q_c(c)];
        v = 3.0 * x[L.u(conv_ac_[sz(c)])] * x[L.i_c(c)] - std::sqrt(p * p + q * q + kCurrentSmoothing);
        break;
      }
      case RowKind::Droop: {
        const DroopRow& d = droops_[sz(row.droop)];
        const int c = d.converter;
        v = x[L.p_dc(c)] - p_ref_of(d, x) + (x[L.u_dc(conv_dc_[sz(c)])] - u_ref_of(d, x)) / d.k_v.at(x);
        if (d.k_f) {
          const double f = 1.0 + x[L.delta_f(area_of_bus(conv_ac_[sz(c)]))];
          v += (f - d.f_ref) / d.k_f->at(x);
        }
        break;
      }
      case RowKind::Pin:
        v = x[row.element] - row.value;
        break;
      case RowKind::Equal:
        v = x[row.element] - x[row.other];
        break;
      case RowKind::GeneratorGovernor: {
        const int g = row.element;
        v = x[L.p_g(g)] - row.value +
            n.generators[sz(g)].governor_droop * x[L.delta_f(area_of_bus(gen_bus_[sz(g)]))];
        break;
      }
      case RowKind::AreaFrequency: {
        const int a = row.element;
        const auto& sched = schedules_[sz(row.sched)];
        for (int g = 0; g < L.n_gen; ++g) {
          if (n.generators[sz(g)].in_service && area_of_bus(gen_bus_[sz(g)]) == a) {
            v += x[L.p_g(g)] - sched[sz(g)];
          }
        }
        v += area_response(a) * x[L.delta_f(a)];
        break;
      }
    }
    r[k] = v;
  }
  return r;
}

Matrix NetworkEquations::jacobian(const Vector& x) const {
  const auto& L = layout_;
  const auto& n = *net_;
  Matrix J = Matrix::Zero(rows(), L.size());
  for (int k = 0; k < rows(); ++k) {
    const Row& row = rows_[sz(k)];
    switch (row.kind) {
      case RowKind::ActiveBalance:
      case RowKind::ReactiveBalance: {
        const int i = row.element;
        const bool active = row.kind == RowKind::ActiveBalance;
        const double ui = x[L.u(i)];
        for (int j = 0; j < L.n_bus; ++j) {
          const double g = y_.g(i, j), b = y_.b(i, j);
          if (g == 0.0 && b == 0.0) continue;
          if (j == i) {
            J(k, L.u(i)) += 2.0 * ui * (active ? g : -b);
            continue;
          }
          const double uj = x[L.u(j)];
          const double th = x[L.delta(i)] - x[L.delta(j)];
          const double c = std::cos(th), s = std::sin(th);
          const double a = active ? g * c + b * s : g * s - b * c;
          const double da = active ? -g * s + b * c : g * c + b * s;
          J(k, L.u(i)) += uj * a;
          J(k, L.u(j)) += ui * a;
          J(k, L.delta(i)) += ui * uj * da;
          J(k, L.delta(j)) -= ui * uj * da;
        }
        for (int g : gens_at_bus_[sz(i)]) J(k, active ? L.p_g(g) : L.q_g(g)) -= 1.0;
        for (int c : convs_at_bus_[sz(i)]) J(k, active ? L.p_c(c) : L.q_c(c)) += 1.0;
        break;
      }
      case RowKind::DcBalance: {
        const int j = row.element;
        const double uj = x[L.u_dc(j)];
        double i_dc = 0.0;
        for (int m = 0; m < L.n_dc; ++m) {
          const double y = y_dc_(j, m);
          if (y == 0.0) continue;
          i_dc += y * (uj - x[L.u_dc(m)]);
          J(k, L.u_dc(j)) += 2.0 * uj * y;
          J(k, L.u_dc(m)) -= 2.0 * uj * y;
        }
        J(k, L.u_dc(j)) += 2.0 * i_dc;
        for (int c : convs_at_dc_[sz(j)]) J(k, L.p_dc(c)) -= 1.0;
        break;
      }
      case RowKind::ConverterLoss: {
        const int c = row.element;
        const auto& st = n.converters[sz(c)];
        J(k, L.p_c(c)) = 1.0;
        J(k, L.p_dc(c)) = -1.0;
        J(k, L.i_c(c)) =
            -(st.loss_b + 2.0 * quadratic_loss_coefficient(st, directions_[sz(c)]) * x[L.i_c(c)]);
        break;
      }
      case RowKind::ReactorCurrent: {
        const int c = row.element;
        const double p = x[L.p_c(c)], q = x[L.q_c(c)];
        const double s = std::sqrt(p * p + q * q + kCurrentSmoothing);
        const int u = L.u(conv_ac_[sz(c)]);
        J(k, u) += 3.0 * x[L.i_c(c)];
        J(k, L.i_c(c)) += 3.0 * x[u];
        J(k, L.p_c(c)) -= p / s;
        J(k, L.q_c(c)) -= q / s;
        break;
      }
      case RowKind::Droop: {
        const DroopRow& d = droops_[sz(row.droop)];
        const int c = d.converter;
        const int ucol = L.u_dc(conv_dc_[sz(c)]);
        const double kv = d.k_v.at(x);
        J(k, L.p_dc(c)) += 1.0;
        J(k, ucol) += 1.0 / kv;
        if (d.p_ref_column >= 0) J(k, d.p_ref_column) -= 1.0;
        if (d.u_ref_column >= 0) J(k, d.u_ref_column) -= 1.0 / kv;
        if (d.k_v.column >= 0) J(k, d.k_v.column) -= (x[ucol] - u_ref_of(d, x)) / (kv * kv);
        if (d.k_f) {
          const int fcol = L.delta_f(area_of_bus(conv_ac_[sz(c)]));
          const double kf = d.k_f->at(x);
          J(k, fcol) += 1.0 / kf;
          if (d.k_f->column >= 0) J(k, d.k_f->column) -= (1.0 + x[fcol] - d.f_ref) / (kf * kf);
        }
        break;
      }
      case RowKind::Pin:
        J(k, row.element) = 1.0;
        break;
      case RowKind::Equal:
        J(k, row.element) += 1.0;
        J(k, row.other) -= 1.0;
        break;
      case RowKind::GeneratorGovernor: {
        const int g = row.element;
        J(k, L.p_g(g)) = 1.0;
        J(k, L.delta_f(area_of_bus(gen_bus_[sz(g)]))) += n.generators[sz(g)].governor_droop;
        break;
      }
      case RowKind::AreaFrequency: {
        const int a = row.element;
        for (int g = 0; g < L.n_gen; ++g) {
          if (n.generators[sz(g)].in_service && area_of_bus(gen_bus_[sz(g)]) == a) J(k, L.p_g(g)) = 1.0;
        }
        J(k, L.delta_f(a)) += area_response(a);
        break;
      }
    }
  }
  return J;
}

void NetworkEquations::add_hessian(const Vector& x, const Vector& lambda, Matrix& h) const {
  const auto& L = layout_;
  if (lambda.size() != rows()) throw std::invalid_argument("multiplier length");
  for (int k = 0; k < rows(); ++k) {
    const double w = lambda[k];
    if (w == 0.0) continue;
    const Row& row = rows_[sz(k)];
    switch (row.kind) {
      case RowKind::ActiveBalance:
      case RowKind::ReactiveBalance: {
        const int i = row.element;
        const bool active = row.kind == RowKind::ActiveBalance;
        const double ui = x[L.u(i)];
        const int Ui = L.u(i), Di = L.delta(i);
        for (int j = 0; j < L.n_bus; ++j) {
          const double g = y_.g(i, j), b = y_.b(i, j);
          if (g == 0.0 && b == 0.0) continue;
          if (j == i) {
            add_sym(h, Ui, Ui, w * 2.0 * (active ? g : -b));
            continue;
          }
          const double uj = x[L.u(j)];
          const int Uj = L.u(j), Dj = L.delta(j);
          const double th = x[Di] - x[L.delta(j)];
          const double c = std::cos(th), s = std::sin(th);
          const double a = w * (active ? g * c + b * s : g * s - b * c);
          const double da = w * (active ? -g * s + b * c : g * c + b * s);
          const double dda = -a;
          add_sym(h, Ui, Uj, a);
          add_sym(h, Di, Di, ui * uj * dda);
          add_sym(h, Dj, Dj, ui * uj * dda);
          add_sym(h, Di, Dj, -ui * uj * dda);
          add_sym(h, Ui, Di, uj * da);
          add_sym(h, Ui, Dj, -uj * da);
          add_sym(h, Uj, Di, ui * da);
          add_sym(h, Uj, Dj, -ui * da);
        }
        break;
      }
      case RowKind::DcBalance: {
        const int j = row.element;
        const int Uj = L.u_dc(j);
        for (int m = 0; m < L.n_dc; ++m) {
          const double y = y_dc_(j, m);
          if (y == 0.0) continue;
          add_sym(h, Uj, Uj, w * 4.0 * y);
          add_sym(h, Uj, L.u_dc(m), -w * 2.0 * y);
        }
        break;
      }
      case RowKind::ConverterLoss: {
        const int c = row.element;
        const auto& st = net_->converters[sz(c)];
        add_sym(h, L.i_c(c), L.i_c(c), -w * 2.0 * quadratic_loss_coefficient(st, directions_[sz(c)]));
        break;
      }
      case RowKind::ReactorCurrent: {
        const int c = row.element;
        const double p = x[L.p_c(c)], q = x[L.q_c(c)];
        const double s2 = p * p + q * q + kCurrentSmoothing;
        const double s3 = s2 * std::sqrt(s2);
        add_sym(h, L.u(conv_ac_[sz(c)]), L.i_c(c), 3.0 * w);
        add_sym(h, L.p_c(c), L.p_c(c), -w * (s2 - p * p) / s3);
        add_sym(h, L.q_c(c), L.q_c(c), -w * (s2 - q * q) / s3);
        add_sym(h, L.p_c(c), L.q_c(c), w * p * q / s3);
        break;
      }
      case RowKind::Droop: {
        const DroopRow& d = droops_[sz(row.droop)];
        const int c = d.converter;
        if (d.k_v.column >= 0) {
          const int ucol = L.u_dc(conv_dc_[sz(c)]);
          const double kv = x[d.k_v.column];
          add_sym(h, d.k_v.column, d.k_v.column, w * 2.0 * (x[ucol] - u_ref_of(d, x)) / (kv * kv * kv));
          add_sym(h, ucol, d.k_v.column, -w / (kv * kv));
          if (d.u_ref_column >= 0) add_sym(h, d.u_ref_column, d.k_v.column, w / (kv * kv));
        }
        if (d.k_f && d.k_f->column >= 0) {
          const int fcol = L.delta_f(area_of_bus(conv_ac_[sz(c)]));
          const int kcol = d.k_f->column;
          const double kf = x[kcol];
          add_sym(h, kcol, kcol, w * 2.0 * (1.0 + x[fcol] - d.f_ref) / (kf * kf * kf));
          add_sym(h, fcol, kcol, -w / (kf * kf));
        }
        break;
      }
      default:
        break;
    }
  }
}

}  // namespace mtdc::steady
