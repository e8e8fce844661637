#include "mtdc/symmetric_solver.hpp"

#include <lapacke.h>

#include <cmath>
#include <type_traits>

namespace mtdc::nlp {

static_assert(std::is_same_v<lapack_int, int>, "LAPACK built with 64-bit integers is not supported");

bool SymmetricIndefiniteSolver::factor(const Eigen::MatrixXd& k) {
  matrix_ = k;
  factors_ = k;
  const int n = static_cast<int>(k.rows());
  pivots_.assign(static_cast<std::size_t>(n), 0);
  inertia_ = {};
  if (n == 0) return true;
  const int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n, factors_.data(), n, pivots_.data());
  if (info < 0) return false;

  auto classify = [&](double v) {
    if (v == 0.0) {
      ++inertia_.zero;
    } else if (v > 0.0) {
      ++inertia_.positive;
    } else {
      ++inertia_.negative;
    }
  };
  for (int i = 0; i < n;) {
    if (pivots_[static_cast<std::size_t>(i)] > 0 || i + 1 == n) {
      classify(factors_(i, i));
      ++i;
      continue;
    }
    const double a = factors_(i, i), b = factors_(i + 1, i), c = factors_(i + 1, i + 1);
    const double mean = 0.5 * (a + c);
    const double radius = std::hypot(0.5 * (a - c), b);
    classify(mean + radius);
    classify(mean - radius);
    i += 2;
  }
  return info == 0 && inertia_.zero == 0;
}

Eigen::VectorXd SymmetricIndefiniteSolver::solve(const Eigen::VectorXd& rhs, int refinements) const {
  const int n = static_cast<int>(factors_.rows());
  auto raw = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd x = b;
    if (n > 0) {
      LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n, 1, factors_.data(), n, pivots_.data(), x.data(), n);
    }
    return x;
  };
  Eigen::VectorXd x = raw(rhs);
  const Eigen::MatrixXd full = matrix_.selfadjointView<Eigen::Lower>();
  for (int it = 0; it < refinements; ++it) {
    const Eigen::VectorXd r = rhs - full * x;
    if (!(r.lpNorm<Eigen::Infinity>() > 1e-15 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))) break;
    x += raw(r);
  }
  return x;
}

}  // namespace mtdc::nlp
