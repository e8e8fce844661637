// Acceptance run over the bundled desk case: one PASS/FAIL line per criterion,
// followed by indented detail lines. Exit status is nonzero when any
// mandatory criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mtdc/opf.hpp"
#include "mtdc/results_io.hpp"

using namespace mtdc;
using opf::Stage;
using opf::StrategyKind;

namespace {

struct Job {
  contingency::Scenario scenario;
  NetworkCase post;
  opf::StrategyResult result;
};

int failures = 0;

void verdict(int n, bool pass, const std::string& title) {
  std::printf("criterion %d: %s  %s\n", n, pass ? "PASS" : "FAIL", title.c_str());
  if (!pass) ++failures;
}

void detail(const std::string& text) { std::printf("    %s\n", text.c_str()); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string name(const Job& j) { return j.scenario.id + "/" + std::string(opf::to_string(j.result.strategy.kind)); }

std::vector<Job> run_grid(const NetworkCase& net, double& seconds) {
  std::vector<Job> jobs;
  const auto start = std::chrono::steady_clock::now();
  for (int s = 1; s <= 3; ++s) {
    const auto sc = fixtures::bundled_scenario(s);
    for (auto kind : opf::kAllStrategies) {
      Job j{sc, contingency::apply_scenario(net, sc), {}};
      j.result = opf::run_hierarchy(net, opf::Strategy::make(kind, net), sc);
      jobs.push_back(std::move(j));
    }
  }
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return jobs;
}

void criterion1(const std::vector<Job>& jobs, double seconds) {
  bool pass = seconds <= 60.0;
  double worst = 0.0;
  for (const auto& j : jobs) {
    const auto& r = j.result;
    bool ok = r.success && r.final_stage3() && r.final_stage3()->optimal();
    // every stage that counted toward the result
    std::vector<const opf::StageResult*> stages = {r.stage(Stage::Stage1Cost), r.final_stage3()};
    if (r.strategy.uses_droop()) stages.push_back(r.stage(Stage::Stage2Droop));
    for (const auto* s : stages) {
      if (!s) {
        ok = false;
        continue;
      }
      ok = ok && s->optimal();
      worst = std::max({worst, s->kkt.stationarity, s->kkt.primal_feasibility, s->kkt.complementarity});
    }
    pass = pass && ok;
    if (!ok) detail(name(j) + ": " + r.message);
  }
  pass = pass && worst <= 1e-6;
  verdict(1, pass, "all 9 strategy/scenario jobs kkt-optimal, KKT residuals <= 1e-6, wall time <= 60 s");
  detail("largest unscaled KKT residual " + fmt("%.3e", worst) + ", wall time " + fmt("%.2f s", seconds));
}

void criterion2(const NetworkCase& net, const std::vector<Job>& jobs) {
  double worst = 0.0, loss_mismatch = 0.0;
  std::string worst_at;
  const auto apc = opf::Strategy::make(StrategyKind::ActivePowerControl, net);
  for (const auto& j : jobs) {
    const auto& r = j.result;
    auto visit = [&](const opf::StageResult* s, const NetworkCase& c, const std::vector<ControlMode>& modes,
                     const char* label) {
      if (!s || !s->optimal()) return;
      const auto p = fixtures::check_physics(c, s->operating_point, s->droop, modes);
      if (p.max() > worst) {
        worst = p.max();
        worst_at = name(j) + " " + label;
      }
      loss_mismatch = std::max(loss_mismatch, p.reported_loss);
    };
    visit(r.stage(Stage::Stage1Cost), net, fixtures::strategy_modes(net, apc), "stage 1");
    visit(r.stage(Stage::Stage2Droop), net, fixtures::strategy_modes(net, r.strategy), "stage 2");
    visit(r.final_stage3(), j.post, fixtures::strategy_modes(j.post, r.strategy), "stage 3");
  }
  // Coefficients of the bundled converters and exact kernel values.
  bool table = true;
  for (const auto& c : net.converters) {
    table = table && c.loss_a == 0.011 && c.loss_b == 0.003 && c.loss_c_rec == 0.004 && c.loss_c_inv == 0.007;
  }
  const auto& st = net.converters.front();
  table = table && steady::converter_loss(0.0, steady::ConverterDirection::Rectifier, st) == 0.011 &&
          steady::converter_loss(1.0, steady::ConverterDirection::Rectifier, st) == 0.011 + 0.003 + 0.004 &&
          steady::converter_loss(1.0, steady::ConverterDirection::Inverter, st) == 0.011 + 0.003 + 0.007;
  verdict(2, worst <= 1e-8 && loss_mismatch <= 1e-12 && table,
          "AC/DC balance, converter coupling and droop residuals <= 1e-8; losses a + b i + c i^2 exact");
  detail("largest physics residual " + fmt("%.3e", worst) + " (" + worst_at + "), reported loss mismatch " +
         fmt("%.1e", loss_mismatch) + ", loss table " + (table ? "exact" : "MISMATCH"));
}

void criterion3(const NetworkCase& net) {
  double worst = 0.0;
  std::string worst_at;
  int programs = 0;
  for (int s = 1; s <= 3; ++s) {
    const auto post = contingency::apply_scenario(net, fixtures::bundled_scenario(s));
    for (auto kind : opf::kAllStrategies) {
      const auto strategy = opf::Strategy::make(kind, net);
      for (auto stage : {Stage::Stage1Cost, Stage::Stage2Droop, Stage::Stage3Redispatch}) {
        if (stage == Stage::Stage2Droop && (!strategy.uses_droop() || s > 1)) continue;
        if (stage == Stage::Stage1Cost && s > 1) continue;
        const auto& c = stage == Stage::Stage3Redispatch ? post : net;
        const auto built = opf::build_opf(c, strategy, stage, opf::default_inputs(c));
        const auto& p = built.problem;
        ++programs;
        for (unsigned long long seed = 1; seed <= 20; ++seed) {
          const auto x = nlp::sample_interior_point(p, seed);
          const nlp::Vector le = nlp::Vector::LinSpaced(p.m_eq, -1.0, 1.0);
          const nlp::Vector li = nlp::Vector::Constant(p.m_ineq, 0.5);
          const auto rep = nlp::check_derivatives(p, x, 1e-6, le, li);
          if (rep.max_relative_error > worst) {
            worst = rep.max_relative_error;
            worst_at = std::string(opf::to_string(kind)) + " " + std::string(opf::to_string(stage)) + " " +
                       rep.worst.part;
          }
        }
      }
    }
  }
  verdict(3, worst <= 1e-5, "analytic derivatives of every assembled OPF match central differences <= 1e-5");
  detail(std::to_string(programs) + " programs x 20 random interior points (gradient, Jacobians, Hessian); worst " +
         fmt("%.3e", worst) + (worst_at.empty() ? "" : " at " + worst_at));
}

void criterion4(const NetworkCase& net, const std::vector<Job>& jobs) {
  std::vector<io::ResultSummary> summaries;
  for (const auto& j : jobs) summaries.push_back(io::summarize(io::to_json(j.result, net, j.post)));
  const auto checks = io::check_ordering(summaries);
  bool pass = checks.size() == 3;
  for (const auto& c : checks) pass = pass && c.pass();
  verdict(4, pass, "Obj1(active-power) <= Obj1(proposed) and <= Obj1(adaptive) on every scenario (tol 1e-8)");
  for (const auto& c : checks) {
    double cost[3] = {0, 0, 0};
    for (const auto& s : summaries) {
      if (s.scenario != c.scenario || !s.obj1_stage3) continue;
      const auto k = static_cast<int>(opf::strategy_from_string(s.strategy));
      cost[k] = *s.obj1_stage3;
    }
    std::ostringstream line;
    line.precision(10);
    line << c.scenario << ": active " << cost[0] << ", adaptive " << cost[1] << ", proposed " << cost[2]
         << "; proposed <= adaptive: " << (c.proposed_le_adaptive ? "yes" : "no") << " (reported only)";
    detail(line.str());
  }
}

bool near_bound(double k, const DroopSettings& d, double tol) {
  return std::abs(k - d.k_min) <= tol || std::abs(k - d.k_max) <= tol;
}

std::string coefficients(const std::vector<DroopSettings>& droop) {
  std::ostringstream out;
  out.precision(6);
  for (const auto& d : droop) {
    out << " (" << d.k_v;
    if (d.k_f) out << ", " << *d.k_f;
    out << ")";
  }
  return out.str();
}

void criterion5(const std::vector<Job>& jobs) {
  constexpr double kPinTolerance = 5e-5;
  const auto fixture = load_case(fixtures::test_data_path("droop_pin_2area.json"));
  bool in_range = true, adaptive_pinned = false, proposed_interior = false, solved = true;
  auto check_range = [&](const std::vector<DroopSettings>& droop) {
    for (const auto& d : droop) {
      in_range = in_range && d.k_v >= 0.001 && d.k_v <= 1.0;
      if (d.k_f) in_range = in_range && *d.k_f >= 0.001 && *d.k_f <= 1.0;
    }
  };
  std::vector<std::string> lines;
  for (auto kind : {StrategyKind::AdaptiveDroop, StrategyKind::ProposedDroop}) {
    const auto strategy = opf::Strategy::make(kind, fixture);
    auto s1 = opf::solve_stage1(fixture, strategy);
    // droop tuned around the rated DC voltage
    const CaseIndex index(fixture);
    for (std::size_t c = 0; c < s1.droop.size(); ++c) {
      s1.droop[c].u_dc_0 = fixture.dc_buses[index.dc_bus_at(fixture.converters[c].dc_bus)].u_dc_rated;
    }
    const auto s2 = opf::solve_stage2(fixture, strategy, s1);
    solved = solved && s1.optimal() && s2.optimal();
    check_range(s2.droop);
    for (const auto& d : s2.droop) {
      const bool pinned = near_bound(d.k_v, d, kPinTolerance) || (d.k_f && near_bound(*d.k_f, d, kPinTolerance));
      const bool interior = !near_bound(d.k_v, d, kPinTolerance) || (d.k_f && !near_bound(*d.k_f, d, kPinTolerance));
      if (kind == StrategyKind::AdaptiveDroop) adaptive_pinned = adaptive_pinned || pinned;
      else proposed_interior = proposed_interior || interior;
    }
    lines.push_back("fixture " + std::string(opf::to_string(kind)) + " (" + std::string(nlp::to_string(s2.status)) +
                    "):" + coefficients(s2.droop));
  }
  for (const auto& j : jobs) {
    check_range(j.result.droop_pre);
    check_range(j.result.droop_final);
  }
  verdict(5, solved && in_range && adaptive_pinned && proposed_interior,
          "droop coefficients within [0.001, 1]; adaptive pins at a bound, proposed has an interior coefficient");
  for (const auto& l : lines) detail(l);
  detail(std::string("pin tolerance 5e-5; adaptive pinned: ") + (adaptive_pinned ? "yes" : "no") +
         ", proposed interior: " + (proposed_interior ? "yes" : "no"));
  for (const auto& j : jobs) {
    if (j.scenario.id == "scenario1" && j.result.strategy.uses_droop()) {
      detail("bundled case " + std::string(opf::to_string(j.result.strategy.kind)) +
             " (information):" + coefficients(j.result.droop_pre));
    }
  }
}

void criterion6() {
  constexpr double kY = 2000.0, kStep = 0.2;
  bool pass = true;

  const auto equal = fixtures::run_sharing(fixtures::sharing_case(0.1, 0.1, kY), kStep);
  pass = pass && equal.before.converged() && equal.after.converged();
  const double split = equal.dp1 / (equal.dp1 + equal.dp2);
  pass = pass && std::abs(equal.dp1 - equal.dp2) <= 1e-6 && std::abs(split - 0.5) <= 1e-6;

  const auto uneven = fixtures::run_sharing(fixtures::sharing_case(0.1, 0.2, kY), kStep);
  pass = pass && uneven.before.converged() && uneven.after.converged();
  const double ratio = uneven.dp1 / uneven.dp2;
  pass = pass && std::abs(ratio - 2.0) / 2.0 <= 0.01;

  const auto pre = fixtures::sharing_closed_form(0.1, 0.2, kY, -1.0);
  const auto post = fixtures::sharing_closed_form(0.1, 0.2, kY, -1.0 - kStep);
  const double cf = std::max(std::abs(uneven.dp1 - (post[0] - pre[0])), std::abs(uneven.dp2 - (post[1] - pre[1])));
  pass = pass && cf <= 1e-7;

  verdict(6, pass, "symmetric 2-converter fixture: equal k splits 50/50 within 1e-6, k ratio 1:2 splits 2:1 within 1%");
  detail("equal k: dP = " + fmt("%.10f", equal.dp1) + " / " + fmt("%.10f", equal.dp2) + ", share " +
         fmt("%.9f", split));
  detail("k 0.1 : 0.2: dP ratio " + fmt("%.6f", ratio) + ", deviation from closed form " + fmt("%.2e", cf));
}

void criterion7(const NetworkCase& net) {
  const auto strategy = opf::Strategy::make(StrategyKind::ProposedDroop, net);
  const auto sc = fixtures::bundled_scenario(2);

  opf::HierarchyOptions once;
  once.force_failure = [](int attempt) { return attempt == 0; };
  const auto recovered = opf::run_hierarchy(net, strategy, sc, once);

  opf::HierarchyOptions always;
  always.force_failure = [](int) { return true; };
  const auto exhausted = opf::run_hierarchy(net, strategy, sc, always);

  const bool pass = recovered.retries >= 1 && recovered.retries <= 5 && recovered.success &&
                    recovered.droop_final != recovered.droop_pre && exhausted.retries >= 1 &&
                    exhausted.retries <= 5 && !exhausted.success && !exhausted.message.empty();
  verdict(7, pass, "injected stage-3 failure triggers coefficient revision and ends with a definite status");
  detail("single injected failure: " + recovered.message);
  detail("persistent failure: " + exhausted.message);
}

void criterion8() {
  const char* path = std::getenv("MTDC_USER_CASE");
  if (!path) {
    std::printf("criterion 8: SKIPPED  user-supplied large case (set MTDC_USER_CASE, optional MTDC_USER_SCENARIOS)\n");
    return;
  }
  const auto net = load_case(path);
  std::vector<contingency::Scenario> scenarios;
  if (const char* list = std::getenv("MTDC_USER_SCENARIOS")) {
    std::istringstream in(list);
    for (std::string item; std::getline(in, item, ':');) {
      if (!item.empty()) scenarios.push_back(contingency::load_scenario(item));
    }
  }
  if (scenarios.empty()) scenarios.push_back({"normal", {}, {}});
  std::vector<io::ResultSummary> summaries;
  for (const auto& sc : scenarios) {
    const auto post = contingency::apply_scenario(net, sc);
    for (auto kind : opf::kAllStrategies) {
      const auto r = opf::run_hierarchy(net, opf::Strategy::make(kind, net), sc);
      summaries.push_back(io::summarize(io::to_json(r, net, post)));
    }
  }
  std::printf("criterion 8: REPORT  strategy ordering on %s (no tolerance promised)\n", path);
  for (const auto& c : io::check_ordering(summaries)) {
    detail(c.scenario + ": " + (c.complete ? (c.pass() ? "ordering holds" : "ordering violated") : "incomplete") +
           ", proposed <= adaptive: " + (c.proposed_le_adaptive ? "yes" : "no"));
  }
}

}  // namespace

int main() {
  try {
    const auto net = fixtures::bundled_case();
    if (!validate_case(net).ok()) {
      std::printf("bundled case is invalid:\n%s", validate_case(net).to_string().c_str());
      return 1;
    }
    double seconds = 0.0;
    const auto jobs = run_grid(net, seconds);
    criterion1(jobs, seconds);
    criterion2(net, jobs);
    criterion3(net);
    criterion4(net, jobs);
    criterion5(jobs);
    criterion6();
    criterion7(net);
    criterion8();
  } catch (const std::exception& e) {
    std::printf("acceptance run aborted: %s\n", e.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
