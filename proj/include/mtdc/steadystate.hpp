// Physics kernels of the hybrid AC/DC grid: AC and DC injections, converter
// current and losses, the droop characteristic and the area frequency
// closure.

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "mtdc/grid_model.hpp"

namespace mtdc::steady {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Regularization inside the converter current square root, keeps the
/// current equation twice differentiable at zero apparent power.
inline constexpr double kCurrentSmoothing = 1e-8;

/// Solved state. Vectors follow the element order of the NetworkCase;
/// delta_f follows CaseIndex::areas().
struct OperatingPoint {
  std::vector<double> u, delta;
  std::vector<double> u_dc;
  std::vector<double> p_g, q_g;
  /// p_c, q_c: power drawn from the AC bus into the converter (positive for
  /// AC->DC). p_dc: power injected into the DC grid.
  std::vector<double> p_c, q_c, p_dc, i_c, p_loss;
  std::vector<double> delta_f;

  /// u = 1 (clipped to bounds), delta = 0, rated DC voltage, zero injections.
  static OperatingPoint flat(const NetworkCase& net);

  bool operator==(const OperatingPoint&) const = default;
};

/// Bus admittance matrix Y = G + jB from in-service AC branches.
struct Admittance {
  Matrix g, b;
};
Admittance build_admittance(const NetworkCase& net);

/// Symmetric matrix of summed DC branch admittances between bus pairs
/// (zero diagonal), in-service branches only.
Matrix dc_admittance(const NetworkCase& net);

struct AcInjections {
  Vector p, q;
};
AcInjections ac_injections(const Vector& u, const Vector& delta, const NetworkCase& net);
AcInjections ac_injections(const Vector& u, const Vector& delta, const Admittance& y);

struct DcInjections {
  Vector i_dc; ///< current injected into the DC network at each bus
  Vector p_dc; ///< 2 * u_dc * i_dc
};
DcInjections dc_injections(const Vector& u_dc, const NetworkCase& net);

/// sqrt(p^2 + q^2) / (3 u_c); throws std::invalid_argument for u_c <= 0.
double reactor_current(double p_c, double q_c, double u_c);

enum class ConverterDirection { Rectifier, Inverter };

/// AC->DC power flow (p_c >= 0) selects the rectifier coefficients.
inline ConverterDirection direction_of(double p_c) {
  return p_c >= 0.0 ? ConverterDirection::Rectifier : ConverterDirection::Inverter;
}

inline double quadratic_loss_coefficient(const ConverterStation& c, ConverterDirection dir) {
  return dir == ConverterDirection::Rectifier ? c.loss_c_rec : c.loss_c_inv;
}

/// a + b i + c i^2; throws std::invalid_argument for negative current.
double converter_loss(double i_c, ConverterDirection direction, const ConverterStation& station);

/// (p_dc - p_dc_0) + (u_dc - u_dc_0)/k_v [+ (f_pcc - f_ref)/k_f].
/// The frequency term is present only in VoltageFrequencyDroop mode. Throws
/// std::invalid_argument for a nonpositive coefficient in use, or for a
/// mode without a droop characteristic.
double droop_residual(const DroopSettings& settings, ControlMode mode, double p_dc, double u_dc,
                      double f_pcc);

class SingularFrequencyError : public std::runtime_error {
 public:
  explicit SingularFrequencyError(int area)
      : std::runtime_error("area " + std::to_string(area) +
                           " has zero governor response and a nonzero power imbalance"),
        area_(area) {}
  int area() const { return area_; }

 private:
  int area_;
};

/// Inputs of the area power balance. p_set per generator (ignored when out of
/// service), converter_draw per converter (AC power drawn, p_c), network_loss
/// per area.
struct AreaDispatch {
  std::vector<double> p_set;
  std::vector<double> converter_draw;
  std::vector<double> network_loss;
};

/// Per area: sum(p_set - R delta_f) - demand + fixed injections - converter
/// draw - network loss.
Vector area_frequency_balance(const Vector& delta_f, const AreaDispatch& dispatch, const NetworkCase& net);

/// Root of area_frequency_balance (linear in delta_f). Throws
/// SingularFrequencyError when an area with zero governor response is not
/// already balanced.
Vector solve_area_frequency(const AreaDispatch& dispatch, const NetworkCase& net);

}  // namespace mtdc::steady
