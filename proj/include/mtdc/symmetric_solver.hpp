// Dense symmetric indefinite factorization (Bunch-Kaufman via LAPACK) with
// inertia.

#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mtdc::nlp {

struct Inertia {
  int positive = 0;
  int negative = 0;
  int zero = 0;

  bool operator==(const Inertia&) const = default;
};

class SymmetricIndefiniteSolver {
 public:
  /// Factors the lower triangle of `k`. Returns false when LAPACK reports an
  /// exactly singular pivot; the inertia is still available then.
  bool factor(const Eigen::MatrixXd& k);

  Inertia inertia() const { return inertia_; }

  /// Solves with the last factorization, followed by iterative refinement
  /// against the original matrix.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, int refinements = 3) const;

 private:
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd factors_;
  std::vector<int> pivots_;
  Inertia inertia_;
};

}  // namespace mtdc::nlp
