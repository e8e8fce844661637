// Newton power flow of the coupled AC/DC grid under converter droop and
// generator governor control.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtdc/network_equations.hpp"

namespace mtdc::steady {

/// Control law of one converter during a power flow.
struct ConverterControl {
  ControlMode mode = ControlMode::ActivePower;
  DroopSettings settings;
  double p_dc_set = 0.0;  ///< ActivePower: DC injection setpoint
  double u_dc_set = 1.0;  ///< DcVoltage: DC bus voltage setpoint
  double q_set = 0.0;     ///< reactive power drawn at the PCC

  bool operator==(const ConverterControl&) const = default;
};

struct PowerFlowControls {
  std::vector<ConverterControl> converters;  ///< per converter
  std::vector<double> p_set;                 ///< per generator, governor reference
  std::vector<double> q_set;                 ///< per generator, used at PQ buses
  std::vector<double> u_set;                 ///< per AC bus, used at voltage-controlled buses

  /// Case control modes and droop settings; generator references share each
  /// area's net demand in proportion to p_max.
  static PowerFlowControls from_case(const NetworkCase& net);

  /// Replaces every setpoint by the values found in `op`, keeping modes and
  /// droop coefficients.
  PowerFlowControls with_setpoints(const OperatingPoint& op, const NetworkCase& net) const;
};

struct PowerFlowOptions {
  double tolerance = 1e-8;
  int max_iterations = 50;
  int max_halvings = 10;
  int max_direction_passes = 3;
};

enum class PowerFlowStatus { Converged, NonConvergence, SingularJacobian, DcRegulationAbsent, SingularFrequency };

std::string_view to_string(PowerFlowStatus status);

struct PowerFlowResult {
  PowerFlowStatus status = PowerFlowStatus::NonConvergence;
  OperatingPoint point;             ///< last iterate, p_loss populated
  int iterations = 0;               ///< Newton steps over all direction passes
  double max_residual = 0.0;        ///< infinity norm at the returned point
  std::vector<double> trace;        ///< residual norm per iterate
  std::string message;

  bool converged() const { return status == PowerFlowStatus::Converged; }
};

/// Assembles the square power flow system. `fixed` receives the columns held
/// at their warm-start values (out-of-service elements and area references).
NetworkEquations power_flow_equations(const NetworkCase& net, const PowerFlowControls& controls,
                                      const std::vector<ConverterDirection>& directions,
                                      std::vector<int>& fixed);

PowerFlowResult solve_power_flow(const NetworkCase& net, const PowerFlowControls& controls,
                                 const std::optional<OperatingPoint>& warm_start = std::nullopt,
                                 const PowerFlowOptions& options = {});

/// Column and row ordering of the power flow system, one line each.
std::string state_layout(const NetworkCase& net, const PowerFlowControls& controls);

/// Losses a + b i + c i^2 from the currents and p_c signs of `op`.
void populate_losses(OperatingPoint& op, const NetworkCase& net);

}  // namespace mtdc::steady
