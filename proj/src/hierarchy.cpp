#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtdc/opf.hpp"

namespace mtdc::opf {

const StageResult* StrategyResult::stage(Stage s) const {
  for (const auto& r : stages) {
    if (r.stage == s) return &r;
  }
  return nullptr;
}

const StageResult* StrategyResult::final_stage3() const {
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
    if (it->stage == Stage::Stage3Redispatch) return &*it;
  }
  return nullptr;
}

double revise_coefficient(double current, double target, double k_min, double k_max, double factor) {
  if (!(k_min > 0.0) || !(k_max >= k_min)) throw std::invalid_argument("droop bounds must satisfy 0 < k_min <= k_max");
  if (!(factor > 0.0 && factor <= 1.0)) throw std::invalid_argument("revision factor must lie in (0, 1]");
  if (!(current > 0.0) || !(target > 0.0)) throw std::invalid_argument("droop coefficients must be positive");
  double k;
  if (current == target) {
    k = std::sqrt(k_min * k_max);
  } else {
    k = std::exp(std::log(current) + factor * (std::log(target) - std::log(current)));
  }
  return std::clamp(k, k_min, k_max);
}

steady::PowerFlowControls passive_controls(const NetworkCase& net, const Strategy& strategy,
                                           const std::vector<DroopSettings>& droop, const OperatingPoint& reference,
                                           const std::vector<contingency::ControlOverride>& overrides) {
  if (droop.size() != net.converters.size()) throw std::invalid_argument("one droop setting per converter required");
  auto controls = steady::PowerFlowControls::from_case(net).with_setpoints(reference, net);
  const CaseIndex index(net);
  for (std::size_t c = 0; c < net.converters.size(); ++c) {
    auto& cc = controls.converters[c];
    cc.settings = droop[c];
    if (!strategy.uses_droop()) {
      cc.mode = ControlMode::ActivePower;
    } else if (strategy.in_frequency_subset(net.converters[c].id)) {
      cc.mode = ControlMode::VoltageFrequencyDroop;
      if (!cc.settings.k_f) cc.settings.k_f = cc.settings.k_v;
    } else {
      cc.mode = ControlMode::VoltageDroop;
      cc.settings.k_f.reset();
    }
  }
  const std::string name(to_string(strategy.kind));
  for (const auto& o : overrides) {
    if (!o.strategy.empty() && o.strategy != name) continue;
    const auto pos = index.converter(o.converter);
    if (!pos) throw std::invalid_argument("override names unknown converter " + std::to_string(o.converter));
    auto& cc = controls.converters[*pos];
    cc.mode = o.mode;
    if (o.mode == ControlMode::VoltageFrequencyDroop && !cc.settings.k_f) cc.settings.k_f = cc.settings.k_v;
    if (o.mode == ControlMode::VoltageDroop) cc.settings.k_f.reset();
  }
  return controls;
}

namespace {

void passive_response(StrategyResult& out, const NetworkCase& net, const NetworkCase& post,
                      const contingency::Scenario& scenario, const OperatingPoint& reference) {
  try {
    const auto controls = passive_controls(net, out.strategy, out.droop_pre, reference, scenario.control_overrides);
    const auto pre_controls = passive_controls(net, out.strategy, out.droop_pre, reference);
    const auto pre = steady::solve_power_flow(net, pre_controls, reference);
    const OperatingPoint pre_point = pre.converged() ? pre.point : reference;
    out.pre_point = pre_point;
    const auto res = contingency::equilibrium_after(net, post, controls, pre_point);
    out.equilibrium_status = res.status;
    out.equilibrium_message = res.message;
    if (res.converged()) {
      out.post_point = res.point;
      std::vector<ControlMode> modes;
      for (const auto& cc : controls.converters) modes.push_back(cc.mode);
      out.sharing = contingency::sharing_metrics(pre_point, res.point, post, modes);
    }
  } catch (const std::exception& e) {
    out.equilibrium_status = steady::PowerFlowStatus::NonConvergence;
    out.equilibrium_message = e.what();
  }
}

}  // namespace

StrategyResult run_hierarchy(const NetworkCase& net, const Strategy& strategy, const contingency::Scenario& scenario,
                             const HierarchyOptions& options) {
  strategy.check(net);
  StrategyResult out;
  out.strategy = strategy;
  out.scenario = scenario.id;
  const NetworkCase post = contingency::apply_scenario(net, scenario);

  const StageResult s1 = solve_stage1(net, strategy, options.opf);
  out.stages.push_back(s1);
  out.obj1_stage1 = s1.objective_value;
  if (!s1.optimal()) {
    out.message = "stage 1 failed: " + s1.message;
    return out;
  }

  std::vector<DroopSettings> droop = s1.droop;
  OperatingPoint warm = s1.operating_point;
  if (strategy.uses_droop()) {
    const StageResult s2 = solve_stage2(net, strategy, s1, options.opf);
    out.stages.push_back(s2);
    out.obj2_stage2 = s2.objective_value;
    if (!s2.optimal()) {
      out.message = "stage 2 failed: " + s2.message;
      return out;
    }
    droop = s2.droop;
    warm = s2.operating_point;
  }
  out.droop_pre = droop;

  passive_response(out, net, post, scenario, s1.operating_point);

  std::vector<DroopSettings> k = droop;
  if (options.stage3_droop_override) options.stage3_droop_override(k);
  // Revision anchors, fixed at the first failure: the stage-2 coefficients,
  // or the case settings when stage 3 already used the stage-2 values.
  std::vector<DroopSettings> anchor;
  for (int attempt = 0;; ++attempt) {
    StageResult s3 = solve_stage3(post, strategy, k, s1.operating_point.p_g, warm, options.opf);
    if (options.force_failure && options.force_failure(attempt)) {
      s3.status = nlp::NlpStatus::NumericalFailure;
      s3.message = "failure injected";
    }
    const bool ok = s3.optimal();
    out.stages.push_back(s3);
    out.droop_final = k;
    if (ok) {
      out.success = true;
      out.obj1_stage3 = s3.objective_value;
      out.message = out.retries == 0 ? "converged" : "converged after " + std::to_string(out.retries) + " revision(s)";
      return out;
    }
    if (!strategy.uses_droop()) {
      out.message = "stage 3 failed: " + s3.message;
      return out;
    }
    if (out.retries >= options.max_retries) {
      out.message = "stage 3 failed after " + std::to_string(out.retries) + " revision(s): " + s3.message;
      return out;
    }
    if (anchor.empty()) {
      anchor = droop;
      for (std::size_t c = 0; c < k.size(); ++c) {
        const auto& initial = net.converters[c].setpoints;
        auto& a = anchor[c];
        if (k[c].k_v == a.k_v) a.k_v = std::clamp(initial.k_v, a.k_min, a.k_max);
        if (k[c].k_f && a.k_f && *k[c].k_f == *a.k_f) {
          a.k_f = std::clamp(initial.k_f.value_or(initial.k_v), a.k_min, a.k_max);
        }
      }
    }
    for (std::size_t c = 0; c < k.size(); ++c) {
      if (!post.converters[c].in_service) continue;
      auto& d = k[c];
      d.k_v = revise_coefficient(d.k_v, anchor[c].k_v, d.k_min, d.k_max, options.revision_factor);
      if (d.k_f && anchor[c].k_f) {
        d.k_f = revise_coefficient(*d.k_f, *anchor[c].k_f, d.k_min, d.k_max, options.revision_factor);
      }
    }
    ++out.retries;
  }
}

}  // namespace mtdc::opf
