// OPF programs of the three converter control strategies and the staged
// hierarchy: cost dispatch, droop tuning, post-disturbance redispatch.

#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mtdc/contingency.hpp"
#include "mtdc/network_equations.hpp"
#include "mtdc/nlp.hpp"
#include "mtdc/power_flow.hpp"

namespace mtdc::opf {

using steady::OperatingPoint;

enum class StrategyKind { ActivePowerControl, AdaptiveDroop, ProposedDroop };

inline constexpr std::array<StrategyKind, 3> kAllStrategies = {
    StrategyKind::ActivePowerControl, StrategyKind::AdaptiveDroop, StrategyKind::ProposedDroop};

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_from_string(std::string_view text);

struct Strategy {
  StrategyKind kind = StrategyKind::ActivePowerControl;
  /// Converter ids carrying the frequency term (proposed droop only).
  std::vector<int> frequency_subset;

  /// Proposed droop takes its subset from the converters whose case control
  /// mode is voltage-frequency droop.
  static Strategy make(StrategyKind kind, const NetworkCase& net);

  bool uses_droop() const { return kind != StrategyKind::ActivePowerControl; }
  bool in_frequency_subset(int converter_id) const;
  /// Throws std::invalid_argument when the subset is empty for proposed droop
  /// or names an unknown converter.
  void check(const NetworkCase& net) const;
};

enum class Stage { Stage1Cost, Stage2Droop, Stage3Redispatch };

std::string_view to_string(Stage stage);

/// Fixed data a stage is built around.
struct OpfInputs {
  /// Per converter: references (stages 2-3) and coefficients (stage 3).
  std::vector<DroopSettings> droop;
  /// Per generator: stage-1 dispatch, the frequency schedule of stage 2.
  std::vector<double> p_sched;
  /// Per converter loss direction; empty selects it from the start point.
  std::vector<steady::ConverterDirection> directions;
  std::optional<OperatingPoint> warm_start;
};

struct OpfOptions {
  nlp::NlpOptions nlp;
  /// Stage 2 treats p_dc_0 and u_dc_0 as variables instead of stage-1 values.
  bool free_references = false;
  int max_direction_passes = 3;
};

struct BuiltOpf {
  Stage stage = Stage::Stage1Cost;
  nlp::NlpProblem problem;
  std::shared_ptr<const steady::NetworkEquations> equations;
  /// Column slot per converter, -1 when absent.
  std::vector<int> kv_slot, kf_slot, ref_slot;
};

/// Case setpoints as droop data (k_f defaulting to k_v) and the power flow
/// generator references as schedule; used to build stages 2-3 stand-alone.
OpfInputs default_inputs(const NetworkCase& net);

/// Throws std::invalid_argument for stage 2 under active-power control.
BuiltOpf build_opf(const NetworkCase& net, const Strategy& strategy, Stage stage, const OpfInputs& inputs,
                   const OpfOptions& options = {});

struct StageResult {
  Stage stage = Stage::Stage1Cost;
  OperatingPoint operating_point;
  std::vector<DroopSettings> droop;
  /// Obj1 in cost units (stages 1 and 3) or Obj2 in p.u.^2 (stage 2).
  double objective_value = 0.0;
  nlp::NlpStatus status = nlp::NlpStatus::NumericalFailure;
  nlp::KktResiduals kkt;
  int iterations = 0;
  int direction_passes = 0;
  double max_equality_residual = 0.0;
  std::string message;
  std::string trace;  ///< NLP iterate trace CSV of the last pass

  bool optimal() const { return status == nlp::NlpStatus::KktOptimal; }
};

/// Generation cost of the in-service generators at `op`.
double generation_cost(const OperatingPoint& op, const NetworkCase& net);

StageResult solve_stage1(const NetworkCase& net, const Strategy& strategy, const OpfOptions& options = {});
StageResult solve_stage2(const NetworkCase& net, const Strategy& strategy, const StageResult& stage1,
                         const OpfOptions& options = {});
StageResult solve_stage3(const NetworkCase& net, const Strategy& strategy, const std::vector<DroopSettings>& droop,
                         const std::vector<double>& p_sched, const OperatingPoint& warm_start,
                         const OpfOptions& options = {});

struct HierarchyOptions {
  OpfOptions opf;
  int max_retries = 5;
  double revision_factor = 0.5;
  /// Replaces the stage-3 droop coefficients before the first attempt.
  std::function<void(std::vector<DroopSettings>&)> stage3_droop_override;
  /// Marks stage-3 attempt `attempt` (0-based) as failed when it returns true.
  std::function<bool(int attempt)> force_failure;
};

struct StrategyResult {
  Strategy strategy;
  std::string scenario;
  bool success = false;
  std::string message;
  /// Stage 1, stage 2 (droop strategies), then every stage-3 attempt.
  std::vector<StageResult> stages;
  int retries = 0;
  /// Coefficients in effect before the disturbance and after the final revision.
  std::vector<DroopSettings> droop_pre, droop_final;
  double obj1_stage1 = 0.0;
  std::optional<double> obj2_stage2;
  std::optional<double> obj1_stage3;

  /// Passive response to the scenario under the pre-disturbance controls.
  steady::PowerFlowStatus equilibrium_status = steady::PowerFlowStatus::NonConvergence;
  std::string equilibrium_message;
  std::optional<OperatingPoint> pre_point, post_point;
  std::optional<contingency::SharingMetrics> sharing;

  const StageResult* stage(Stage s) const;
  const StageResult* final_stage3() const;
};

/// Passive controls of a strategy: modes, droop settings and setpoints from
/// `reference`, with the scenario's overrides for this strategy applied.
steady::PowerFlowControls passive_controls(const NetworkCase& net, const Strategy& strategy,
                                           const std::vector<DroopSettings>& droop, const OperatingPoint& reference,
                                           const std::vector<contingency::ControlOverride>& overrides = {});

/// New coefficient log-space interpolated toward `target`; when `current`
/// already equals `target` the geometric midpoint of [k_min, k_max] is used.
double revise_coefficient(double current, double target, double k_min, double k_max, double factor);

StrategyResult run_hierarchy(const NetworkCase& net, const Strategy& strategy, const contingency::Scenario& scenario,
                             const HierarchyOptions& options = {});

}  // namespace mtdc::opf
