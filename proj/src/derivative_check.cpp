#include <cmath>
#include <random>
#include <stdexcept>

#include "mtdc/nlp.hpp"

namespace mtdc::nlp {

namespace {

double relative_error(double a, double fd) {
  return std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
}

struct Tracker {
  DerivativeReport& report;

  double compare(const char* part, const Matrix& analytic, const Matrix& fd) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
      for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
        const double e = relative_error(analytic(i, j), fd(i, j));
        worst = std::max(worst, e);
        if (e > report.max_relative_error) {
          report.max_relative_error = e;
          report.worst = {part, static_cast<int>(i), static_cast<int>(j), analytic(i, j), fd(i, j), e};
        }
      }
    }
    return worst;
  }
};

/// Central differences of a vector function, one column per variable.
template <typename F>
Matrix central_jacobian(F&& fn, const Vector& x, double h, Eigen::Index rows) {
  Matrix out(rows, x.size());
  Vector xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + step;
    const Vector up = fn(xp);
    xp[j] = x[j] - step;
    const Vector down = fn(xp);
    xp[j] = x[j];
    out.col(j) = (up - down) / (2.0 * step);
  }
  return out;
}

}  // namespace

DerivativeReport check_derivatives(const NlpProblem& problem, const Vector& x, double step,
                                   const Vector& lambda_eq, const Vector& lambda_ineq) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  problem.check();
  if (x.size() != problem.n) throw std::invalid_argument("point has wrong length");

  DerivativeReport report;
  Tracker t{report};

  auto objective = [&](const Vector& v) { return Vector::Constant(1, problem.objective(v)); };
  report.gradient_error = t.compare("gradient", problem.gradient(x).transpose(),
                                    central_jacobian(objective, x, step, 1));
  if (problem.m_eq > 0) {
    report.eq_jacobian_error =
        t.compare("eq_jacobian", problem.eq_jacobian(x), central_jacobian(problem.eq, x, step, problem.m_eq));
  }
  if (problem.m_ineq > 0) {
    report.ineq_jacobian_error = t.compare("ineq_jacobian", problem.ineq_jacobian(x),
                                           central_jacobian(problem.ineq, x, step, problem.m_ineq));
  }
  const bool with_hessian = problem.hessian && (lambda_eq.size() > 0 || lambda_ineq.size() > 0 ||
                                                (problem.m_eq == 0 && problem.m_ineq == 0));
  if (with_hessian) {
    const Vector le = lambda_eq.size() == problem.m_eq ? lambda_eq : Vector::Zero(problem.m_eq);
    const Vector li = lambda_ineq.size() == problem.m_ineq ? lambda_ineq : Vector::Zero(problem.m_ineq);
    auto lagrangian_gradient = [&](const Vector& v) {
      Vector g = problem.gradient(v);
      if (problem.m_eq > 0) g += problem.eq_jacobian(v).transpose() * le;
      if (problem.m_ineq > 0) g += problem.ineq_jacobian(v).transpose() * li;
      return g;
    };
    report.hessian_error = t.compare("hessian", problem.hessian(x, 1.0, le, li),
                                     central_jacobian(lagrangian_gradient, x, step, problem.n));
  }
  return report;
}

}  // namespace mtdc::nlp

namespace mtdc::nlp {

Vector sample_interior_point(const NlpProblem& problem, unsigned long long seed, double spread) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector x(problem.n);
  for (int j = 0; j < problem.n; ++j) {
    const double l = problem.lower[j], u = problem.upper[j];
    const double t = unit(rng);
    if (l == u) {
      x[j] = l;
    } else if (std::isfinite(l) && std::isfinite(u)) {
      x[j] = l + (0.02 + 0.96 * t) * (u - l);
    } else {
      const double lo = std::isfinite(l) ? std::max(l, problem.x0[j] - spread) : problem.x0[j] - spread;
      const double hi = std::isfinite(u) ? std::min(u, problem.x0[j] + spread) : problem.x0[j] + spread;
      x[j] = lo + (0.02 + 0.96 * t) * (hi - lo);
    }
  }
  return x;
}

}  // namespace mtdc::nlp
