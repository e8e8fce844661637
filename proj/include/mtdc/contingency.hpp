// Disturbance scenarios and the passive droop response to them.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtdc/power_flow.hpp"

namespace mtdc::contingency {

enum class ActionKind { TripGenerator, TripConverter, ScaleLoad, TripAcBranch, TripDcBranch };

std::string_view to_string(ActionKind kind);
ActionKind action_kind_from_string(std::string_view text);

struct Action {
  ActionKind kind = ActionKind::TripGenerator;
  int id = 0;           ///< element id, or AC bus id for ScaleLoad
  double factor = 1.0;  ///< ScaleLoad only

  bool operator==(const Action&) const = default;
};

/// Operator change of a converter's control law after the disturbance. An
/// empty strategy applies to every strategy.
struct ControlOverride {
  int converter = 0;
  ControlMode mode = ControlMode::DcVoltage;
  std::string strategy;

  bool operator==(const ControlOverride&) const = default;
};

struct Scenario {
  std::string id;
  std::vector<Action> actions;
  std::vector<ControlOverride> control_overrides;

  bool operator==(const Scenario&) const = default;
};

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Accepts {"id", "actions", "control_overrides"} or a bare action list.
Scenario parse_scenario(std::string_view text, const std::string& default_id);
/// The id defaults to the file stem.
Scenario load_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& scenario);

/// Copy of `net` with the actions applied in order. Throws ScenarioError when
/// an action references a missing or already out-of-service element.
NetworkCase apply_scenario(const NetworkCase& net, const Scenario& scenario);

/// Passive post-disturbance equilibrium: the droop-governed power flow on
/// `post` with `controls` unchanged, warm-started from `pre_point`.
steady::PowerFlowResult equilibrium_after(const NetworkCase& pre, const NetworkCase& post,
                                          const steady::PowerFlowControls& controls,
                                          const steady::OperatingPoint& pre_point,
                                          const steady::PowerFlowOptions& options = {});

struct SharingMetrics {
  std::vector<double> delta_p;         ///< per converter, post p_dc - pre p_dc
  double voltage_deviation = 0.0;      ///< sum of (u_dc - u_rated)^2 at `post`
  double max_delta_f = 0.0;            ///< max |delta_f| at `post`
  /// delta_p / sum over the surviving sharing converters; others = 0
  std::vector<double> sharing_ratios;

  bool operator==(const SharingMetrics&) const = default;
};

/// sum over DC buses of (u_dc - u_dc_rated)^2
double voltage_deviation(const steady::OperatingPoint& op, const NetworkCase& net);

/// `net` is the post-disturbance case; converters out of service there count
/// as tripped. `modes` gives the control law of each converter during the
/// response; constant-power converters do not share and are left out of the
/// ratios. Empty `modes` lets every surviving converter share. Throws
/// std::invalid_argument on element-count mismatch.
SharingMetrics sharing_metrics(const steady::OperatingPoint& pre, const steady::OperatingPoint& post,
                               const NetworkCase& net, const std::vector<ControlMode>& modes = {});

}  // namespace mtdc::contingency
