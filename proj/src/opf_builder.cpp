#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtdc/opf.hpp"

namespace mtdc::opf {

using steady::ConverterDirection;
using steady::Matrix;
using steady::NetworkEquations;
using steady::Vector;

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }
double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

std::vector<ConverterDirection> directions_at(const OperatingPoint& op) {
  std::vector<ConverterDirection> d;
  for (double p : op.p_c) d.push_back(steady::direction_of(p));
  return d;
}

/// Power flow of the case controls when it converges, else a flat point.
OperatingPoint initial_point(const NetworkCase& net) {
  const auto controls = steady::PowerFlowControls::from_case(net);
  try {
    auto pf = steady::solve_power_flow(net, controls);
    if (pf.converged()) return pf.point;
  } catch (const std::exception&) {
  }
  OperatingPoint op = OperatingPoint::flat(net);
  op.p_g = controls.p_set;
  return op;
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::ActivePowerControl: return "active-power-control";
    case StrategyKind::AdaptiveDroop: return "adaptive-droop";
    case StrategyKind::ProposedDroop: return "proposed-droop";
  }
  return "unknown";
}

StrategyKind strategy_from_string(std::string_view text) {
  for (auto k : kAllStrategies) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown strategy '" + std::string(text) + "'");
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Stage1Cost: return "stage1-cost";
    case Stage::Stage2Droop: return "stage2-droop";
    case Stage::Stage3Redispatch: return "stage3-redispatch";
  }
  return "unknown";
}

Strategy Strategy::make(StrategyKind kind, const NetworkCase& net) {
  Strategy s;
  s.kind = kind;
  if (kind == StrategyKind::ProposedDroop) {
    for (const auto& c : net.converters) {
      if (c.control_mode == ControlMode::VoltageFrequencyDroop) s.frequency_subset.push_back(c.id);
    }
  }
  return s;
}

bool Strategy::in_frequency_subset(int id) const {
  return kind == StrategyKind::ProposedDroop &&
         std::find(frequency_subset.begin(), frequency_subset.end(), id) != frequency_subset.end();
}

void Strategy::check(const NetworkCase& net) const {
  if (kind != StrategyKind::ProposedDroop) return;
  if (frequency_subset.empty()) throw std::invalid_argument("proposed droop needs a nonempty frequency subset");
  const CaseIndex index(net);
  for (int id : frequency_subset) {
    if (!index.converter(id)) throw std::invalid_argument("frequency subset names unknown converter " + std::to_string(id));
  }
}

double generation_cost(const OperatingPoint& op, const NetworkCase& net) {
  double c = 0.0;
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    if (net.generators[g].in_service) c += net.generators[g].cost(op.p_g[g]);
  }
  return c;
}

OpfInputs default_inputs(const NetworkCase& net) {
  OpfInputs in;
  for (const auto& c : net.converters) {
    DroopSettings d = c.setpoints;
    if (!d.k_f) d.k_f = d.k_v;
    in.droop.push_back(d);
  }
  in.p_sched = steady::PowerFlowControls::from_case(net).p_set;
  return in;
}

BuiltOpf build_opf(const NetworkCase& net, const Strategy& strategy, Stage stage, const OpfInputs& inputs,
                   const OpfOptions& options) {
  strategy.check(net);
  if (stage == Stage::Stage2Droop && !strategy.uses_droop()) {
    throw std::invalid_argument("stage 2 is undefined under active-power control");
  }
  const int nc = static_cast<int>(net.converters.size());
  const int ng = static_cast<int>(net.generators.size());
  const bool tuning = stage == Stage::Stage2Droop;
  if (stage != Stage::Stage1Cost) {
    if (static_cast<int>(inputs.droop.size()) != nc) throw std::invalid_argument("one droop setting per converter required");
    if (static_cast<int>(inputs.p_sched.size()) != ng) throw std::invalid_argument("one scheduled output per generator required");
  }

  BuiltOpf b;
  b.stage = stage;
  b.kv_slot.assign(sz(nc), -1);
  b.kf_slot.assign(sz(nc), -1);
  b.ref_slot.assign(sz(nc), -1);
  int n_kv = 0, n_kf = 0, n_ref = 0;
  if (tuning) {
    for (int c = 0; c < nc; ++c) {
      if (!net.converters[sz(c)].in_service) continue;
      b.kv_slot[sz(c)] = n_kv++;
      if (strategy.in_frequency_subset(net.converters[sz(c)].id)) b.kf_slot[sz(c)] = n_kf++;
      if (options.free_references) b.ref_slot[sz(c)] = n_ref++;
    }
  }

  auto eq = std::make_shared<NetworkEquations>(net, n_kv, n_kf, n_ref);
  const auto& L = eq->layout();
  const auto& index = eq->index();

  const OperatingPoint start = inputs.warm_start ? *inputs.warm_start : initial_point(net);
  const auto directions = inputs.directions.empty() ? directions_at(start) : inputs.directions;

  eq->add_ac_balance();
  eq->add_dc_balance();
  eq->add_converter_physics(directions);
  if (stage != Stage::Stage1Cost) {
    if (strategy.uses_droop()) {
      for (int c = 0; c < nc; ++c) {
        const auto& conv = net.converters[sz(c)];
        if (!conv.in_service) continue;
        const auto& d = inputs.droop[sz(c)];
        steady::DroopRow row;
        row.converter = c;
        row.p_dc_0 = d.p_dc_0;
        row.u_dc_0 = d.u_dc_0;
        row.f_ref = d.f_ref;
        row.k_v = tuning ? steady::Coefficient::variable(L.k_v(b.kv_slot[sz(c)])) : steady::Coefficient::constant(d.k_v);
        if (strategy.in_frequency_subset(conv.id)) {
          if (tuning) {
            row.k_f = steady::Coefficient::variable(L.k_f(b.kf_slot[sz(c)]));
          } else {
            if (!d.k_f) throw std::invalid_argument("converter " + std::to_string(conv.id) + " lacks k_f");
            row.k_f = steady::Coefficient::constant(*d.k_f);
          }
        }
        if (b.ref_slot[sz(c)] >= 0) {
          row.p_ref_column = L.p_ref(b.ref_slot[sz(c)]);
          row.u_ref_column = L.u_ref(b.ref_slot[sz(c)]);
        }
        eq->add_droop(row);
      }
    }
    // Governor closure holds against the stage-1 schedule while droop gains
    // are tuned; after re-dispatch the frequency is back at nominal.
    if (tuning) {
      for (int a = 0; a < L.n_area; ++a) {
        if (eq->area_response(a) > 0.0) eq->add_area_frequency(a, inputs.p_sched);
      }
    }
  }

  // Bounds.
  const int n = L.size();
  Vector lo = Vector::Constant(n, -nlp::kInf), hi = Vector::Constant(n, nlp::kInf);
  auto fix = [&](int col, double v) { lo[col] = hi[col] = v; };
  for (int i = 0; i < L.n_bus; ++i) {
    const auto& bus = net.ac_buses[sz(i)];
    lo[L.u(i)] = bus.u_min;
    hi[L.u(i)] = bus.u_max;
    if (bus.kind == BusKind::SlackCandidate) {
      fix(L.delta(i), 0.0);
    } else {
      lo[L.delta(i)] = bus.delta_min;
      hi[L.delta(i)] = bus.delta_max;
    }
  }
  for (int j = 0; j < L.n_dc; ++j) {
    lo[L.u_dc(j)] = net.dc_buses[sz(j)].u_dc_min;
    hi[L.u_dc(j)] = net.dc_buses[sz(j)].u_dc_max;
  }
  for (int g = 0; g < ng; ++g) {
    const auto& gen = net.generators[sz(g)];
    if (!gen.in_service) {
      fix(L.p_g(g), 0.0);
      fix(L.q_g(g), 0.0);
      continue;
    }
    lo[L.p_g(g)] = gen.p_min;
    hi[L.p_g(g)] = gen.p_max;
    lo[L.q_g(g)] = gen.q_min;
    hi[L.q_g(g)] = gen.q_max;
  }
  for (int c = 0; c < nc; ++c) {
    const auto& conv = net.converters[sz(c)];
    if (!conv.in_service) {
      for (int col : {L.p_c(c), L.q_c(c), L.p_dc(c), L.i_c(c)}) fix(col, 0.0);
      continue;
    }
    const double rating = std::max(std::abs(conv.p_dc_min), std::abs(conv.p_dc_max));
    lo[L.q_c(c)] = -rating;
    hi[L.q_c(c)] = rating;
    lo[L.p_dc(c)] = conv.p_dc_min;
    hi[L.p_dc(c)] = conv.p_dc_max;
    lo[L.i_c(c)] = 0.0;
    const auto& d = stage == Stage::Stage1Cost ? conv.setpoints : inputs.droop[sz(c)];
    if (b.kv_slot[sz(c)] >= 0) {
      lo[L.k_v(b.kv_slot[sz(c)])] = d.k_min;
      hi[L.k_v(b.kv_slot[sz(c)])] = d.k_max;
    }
    if (b.kf_slot[sz(c)] >= 0) {
      lo[L.k_f(b.kf_slot[sz(c)])] = d.k_min;
      hi[L.k_f(b.kf_slot[sz(c)])] = d.k_max;
    }
    if (b.ref_slot[sz(c)] >= 0) {
      const auto& bus = net.dc_buses[index.dc_bus_at(conv.dc_bus)];
      lo[L.p_ref(b.ref_slot[sz(c)])] = conv.p_dc_min;
      hi[L.p_ref(b.ref_slot[sz(c)])] = conv.p_dc_max;
      lo[L.u_ref(b.ref_slot[sz(c)])] = bus.u_dc_min;
      hi[L.u_ref(b.ref_slot[sz(c)])] = bus.u_dc_max;
    }
  }
  for (int a = 0; a < L.n_area; ++a) {
    if (!tuning || eq->area_response(a) == 0.0) fix(L.delta_f(a), 0.0);
  }

  // Start point.
  Vector x0 = Vector::Zero(n);
  x0.head(L.delta_f(L.n_area)) = L.pack(start).head(L.delta_f(L.n_area));
  for (int c = 0; c < nc; ++c) {
    const auto& d = stage == Stage::Stage1Cost ? net.converters[sz(c)].setpoints : inputs.droop[sz(c)];
    if (b.kv_slot[sz(c)] >= 0) x0[L.k_v(b.kv_slot[sz(c)])] = d.k_v;
    if (b.kf_slot[sz(c)] >= 0) x0[L.k_f(b.kf_slot[sz(c)])] = d.k_f.value_or(d.k_v);
    if (b.ref_slot[sz(c)] >= 0) {
      x0[L.p_ref(b.ref_slot[sz(c)])] = d.p_dc_0;
      x0[L.u_ref(b.ref_slot[sz(c)])] = d.u_dc_0;
    }
  }
  for (int col = 0; col < n; ++col) {
    if (lo[col] == hi[col]) x0[col] = lo[col];
  }

  // Objective.
  struct CostTerm {
    int col;
    double alpha, beta, gamma;
  };
  struct DeviationTerm {
    int col;
    double rated;
  };
  std::vector<CostTerm> cost;
  std::vector<DeviationTerm> deviation;
  if (stage == Stage::Stage2Droop) {
    for (int j = 0; j < L.n_dc; ++j) deviation.push_back({L.u_dc(j), net.dc_buses[sz(j)].u_dc_rated});
  } else {
    for (int g = 0; g < ng; ++g) {
      const auto& gen = net.generators[sz(g)];
      if (gen.in_service) cost.push_back({L.p_g(g), gen.alpha, gen.beta, gen.gamma});
    }
  }

  auto& p = b.problem;
  p.n = n;
  p.m_eq = eq->rows();
  p.m_ineq = 0;
  p.lower = lo;
  p.upper = hi;
  p.x0 = x0;
  p.objective = [cost, deviation](const Vector& x) {
    double v = 0.0;
    for (const auto& t : cost) v += (t.alpha * x[t.col] + t.beta) * x[t.col] + t.gamma;
    for (const auto& t : deviation) v += (x[t.col] - t.rated) * (x[t.col] - t.rated);
    return v;
  };
  p.gradient = [cost, deviation, n](const Vector& x) {
    Vector g = Vector::Zero(n);
    for (const auto& t : cost) g[t.col] += 2.0 * t.alpha * x[t.col] + t.beta;
    for (const auto& t : deviation) g[t.col] += 2.0 * (x[t.col] - t.rated);
    return g;
  };
  p.eq = [eq](const Vector& x) { return eq->residual(x); };
  p.eq_jacobian = [eq](const Vector& x) { return eq->jacobian(x); };
  p.hessian = [eq, cost, deviation, n](const Vector& x, double obj_factor, const Vector& le, const Vector&) {
    Matrix h = Matrix::Zero(n, n);
    for (const auto& t : cost) h(t.col, t.col) += obj_factor * 2.0 * t.alpha;
    for (const auto& t : deviation) h(t.col, t.col) += obj_factor * 2.0;
    eq->add_hessian(x, le, h);
    return h;
  };
  for (int col = 0; col < n; ++col) p.variable_names.push_back(L.name(col, net));
  for (const auto& r : eq->row_info()) p.eq_names.push_back(r.label);
  b.equations = eq;
  return b;
}

// ---------------------------------------------------------------------------
// Stage solves

namespace {

StageResult solve_stage(const NetworkCase& net, const Strategy& strategy, Stage stage, OpfInputs inputs,
                        const OpfOptions& options) {
  StageResult r;
  r.stage = stage;
  if (!inputs.warm_start) inputs.warm_start = initial_point(net);
  if (inputs.directions.empty()) inputs.directions = directions_at(*inputs.warm_start);
  for (int pass = 0; pass < std::max(1, options.max_direction_passes); ++pass) {
    const BuiltOpf b = build_opf(net, strategy, stage, inputs, options);
    const auto sol = nlp::solve_nlp(b.problem, options.nlp);
    const auto& L = b.equations->layout();
    r.direction_passes = pass + 1;
    r.iterations += sol.iterations;
    r.status = sol.status;
    r.kkt = sol.kkt;
    r.message = sol.message;
    r.trace = nlp::trace_csv(sol);
    r.objective_value = sol.objective;
    r.max_equality_residual = inf_norm(b.equations->residual(sol.x));
    r.operating_point = L.unpack(sol.x);
    steady::populate_losses(r.operating_point, net);

    r.droop.clear();
    const CaseIndex index(net);
    for (std::size_t c = 0; c < net.converters.size(); ++c) {
      const auto& conv = net.converters[c];
      DroopSettings d = stage == Stage::Stage1Cost ? conv.setpoints : inputs.droop[c];
      if (stage == Stage::Stage1Cost && conv.in_service) {
        d.p_dc_0 = r.operating_point.p_dc[c];
        d.u_dc_0 = r.operating_point.u_dc[index.dc_bus_at(conv.dc_bus)];
      }
      if (stage == Stage::Stage2Droop) {
        if (b.kv_slot[c] >= 0) d.k_v = sol.x[L.k_v(b.kv_slot[c])];
        if (b.kf_slot[c] >= 0) {
          d.k_f = sol.x[L.k_f(b.kf_slot[c])];
        } else if (conv.in_service) {
          d.k_f.reset();
        }
        if (b.ref_slot[c] >= 0) {
          d.p_dc_0 = sol.x[L.p_ref(b.ref_slot[c])];
          d.u_dc_0 = sol.x[L.u_ref(b.ref_slot[c])];
        }
      }
      r.droop.push_back(d);
    }
    if (!sol.optimal()) break;

    auto now = inputs.directions;
    for (std::size_t c = 0; c < net.converters.size(); ++c) {
      if (net.converters[c].in_service) now[c] = steady::direction_of(r.operating_point.p_c[c]);
    }
    if (now == inputs.directions) break;
    if (pass + 1 == std::max(1, options.max_direction_passes)) {
      r.message = "converter loss direction did not settle";
      break;
    }
    inputs.directions = now;
    inputs.warm_start = r.operating_point;
    if (stage == Stage::Stage2Droop) {
      for (std::size_t c = 0; c < net.converters.size(); ++c) {
        inputs.droop[c].k_v = r.droop[c].k_v;
        if (r.droop[c].k_f) inputs.droop[c].k_f = r.droop[c].k_f;
      }
    }
  }
  return r;
}

}  // namespace

StageResult solve_stage1(const NetworkCase& net, const Strategy& strategy, const OpfOptions& options) {
  return solve_stage(net, strategy, Stage::Stage1Cost, {}, options);
}

StageResult solve_stage2(const NetworkCase& net, const Strategy& strategy, const StageResult& stage1,
                         const OpfOptions& options) {
  if (!strategy.uses_droop()) throw std::invalid_argument("stage 2 is undefined under active-power control");
  OpfInputs in;
  in.droop = stage1.droop;
  for (std::size_t c = 0; c < net.converters.size(); ++c) {
    const auto& conv = net.converters[c];
    in.droop[c].k_v = conv.setpoints.k_v;
    in.droop[c].k_f = conv.setpoints.k_f ? conv.setpoints.k_f : std::optional<double>(conv.setpoints.k_v);
  }
  in.p_sched = stage1.operating_point.p_g;
  in.warm_start = stage1.operating_point;
  return solve_stage(net, strategy, Stage::Stage2Droop, in, options);
}

StageResult solve_stage3(const NetworkCase& net, const Strategy& strategy, const std::vector<DroopSettings>& droop,
                         const std::vector<double>& p_sched, const OperatingPoint& warm_start,
                         const OpfOptions& options) {
  OpfInputs in;
  in.droop = droop;
  in.p_sched = p_sched;
  in.warm_start = warm_start;
  StageResult r = solve_stage(net, strategy, Stage::Stage3Redispatch, in, options);
  r.objective_value = generation_cost(r.operating_point, net);
  return r;
}

}  // namespace mtdc::opf
