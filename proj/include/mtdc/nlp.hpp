// Smooth nonlinear programs and a primal-dual interior-point solver.
//
//   min f(x)  s.t.  c(x) = 0,  g(x) <= 0,  lower <= x <= upper
//
// Lagrangian convention: L = f + lambda_eq' c + lambda_ineq' g - z_lower'(x - l)
// + z_upper'(x - u), with lambda_ineq, z_lower, z_upper >= 0.

#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtdc::nlp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct NlpProblem {
  int n = 0;
  int m_eq = 0;
  int m_ineq = 0;

  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> gradient;
  std::function<Vector(const Vector&)> eq;
  std::function<Matrix(const Vector&)> eq_jacobian;
  std::function<Vector(const Vector&)> ineq;
  std::function<Matrix(const Vector&)> ineq_jacobian;
  /// Hessian of obj_factor f + lambda_eq' c + lambda_ineq' g (full symmetric
  /// n x n). Optional; damped BFGS is used when absent.
  std::function<Matrix(const Vector& x, double obj_factor, const Vector& lambda_eq, const Vector& lambda_ineq)>
      hessian;

  Vector lower, upper, x0;

  /// Optional names for error loci.
  std::vector<std::string> variable_names, eq_names, ineq_names;

  /// Throws std::invalid_argument on inconsistent dimensions or bounds.
  void check() const;
};

struct NlpOptions {
  double tol = 1e-6;               ///< stationarity and complementarity
  double feasibility_tol = 1e-9;   ///< infinity norm of c and max(g, 0)
  int max_iterations = 500;
  double mu_init = 0.01;
  double mu_factor = 0.1;
  double mu_min = 1e-11;           ///< barrier floor
  double tau = 0.995;
  double bound_push = 1e-2;
  int max_restoration_failures = 10;
};

enum class NlpStatus { KktOptimal, MaxIterations, InfeasibleDetected, NumericalFailure };

std::string_view to_string(NlpStatus status);

struct KktResiduals {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double complementarity = 0.0;
  /// Divisor applied to stationarity in the optimality test; exceeds 1 only
  /// when the average multiplier magnitude exceeds 100.
  double multiplier_scale = 1.0;
};

struct IterateRecord {
  int iteration = 0;
  double mu = 0.0;
  double objective = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double complementarity = 0.0;
  double step = 0.0;
  double regularization = 0.0;
  bool restoration = false;
};

struct NlpSolution {
  Vector x;
  double objective = 0.0;
  Vector lambda_eq, lambda_ineq, z_lower, z_upper;
  NlpStatus status = NlpStatus::NumericalFailure;
  KktResiduals kkt;
  int iterations = 0;
  std::string message;
  std::vector<IterateRecord> trace;
  std::vector<double> barrier_history;

  bool optimal() const { return status == NlpStatus::KktOptimal; }
};

NlpSolution solve_nlp(const NlpProblem& problem, const NlpOptions& options = {});

/// Writes the iterate trace as CSV.
std::string trace_csv(const NlpSolution& solution);

struct DerivativeEntry {
  std::string part;  ///< "gradient", "eq_jacobian", "ineq_jacobian" or "hessian"
  int row = -1;
  int col = -1;
  double analytic = 0.0;
  double finite_difference = 0.0;
  double error = 0.0;
};

struct DerivativeReport {
  /// max |a - fd| / max(1, |a|, |fd|) over all checked entries
  double max_relative_error = 0.0;
  DerivativeEntry worst;
  double gradient_error = 0.0;
  double eq_jacobian_error = 0.0;
  double ineq_jacobian_error = 0.0;
  double hessian_error = 0.0;  ///< only when a Hessian callback exists and multipliers are given
};

/// Central finite differences of the objective, constraints and, when
/// `lambda_eq`/`lambda_ineq` are non-empty, of the Lagrangian gradient against
/// the Hessian callback. Throws std::invalid_argument for step <= 0.
DerivativeReport check_derivatives(const NlpProblem& problem, const Vector& x, double step = 1e-6,
                                   const Vector& lambda_eq = {}, const Vector& lambda_ineq = {});

/// Point drawn uniformly inside the bound box (fixed variables at their
/// value, unbounded sides within +-spread of x0), deterministic in `seed`.
Vector sample_interior_point(const NlpProblem& problem, unsigned long long seed, double spread = 0.1);

}  // namespace mtdc::nlp
