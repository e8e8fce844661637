// Primal-dual interior point with a filter line search.
//
// Inequalities g(x) <= 0 become g(x) + s = 0 with s >= 0, so the working
// problem has variables y = (x_free, s), equality rows c(y) and simple bounds.
// Variables with equal bounds are eliminated before the solve.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "mtdc/nlp.hpp"
#include "mtdc/symmetric_solver.hpp"

namespace mtdc::nlp {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }
double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filter and line search constants.
constexpr double kGammaTheta = 1e-5;
constexpr double kGammaPhi = 1e-8;
constexpr double kEta = 1e-4;
constexpr double kSwitchDelta = 1.0;
constexpr double kSwitchSTheta = 1.1;
constexpr double kSwitchSPhi = 2.3;
constexpr double kKappaEpsilon = 10.0;
constexpr double kKappaSigma = 1e10;
constexpr int kMaxSoc = 4;
constexpr double kSMax = 100.0;
constexpr double kMachEps = std::numeric_limits<double>::epsilon();

class InteriorPoint {
 public:
  InteriorPoint(const NlpProblem& p, const NlpOptions& o) : p_(p), opt_(o) {
    for (int i = 0; i < p.n; ++i) {
      if (p.lower[i] == p.upper[i]) {
        fixed_.push_back(i);
      } else {
        free_.push_back(i);
      }
    }
    nf_ = static_cast<int>(free_.size());
    me_ = p.m_eq;
    mi_ = p.m_ineq;
    N_ = nf_ + mi_;
    M_ = me_ + mi_;
    template_ = p.x0;
    for (int i : fixed_) template_[i] = p.lower[i];
    lo_ = Vector::Constant(N_, -kInf);
    hi_ = Vector::Constant(N_, kInf);
    for (int k = 0; k < nf_; ++k) {
      lo_[k] = p.lower[free_[sz(k)]];
      hi_[k] = p.upper[free_[sz(k)]];
    }
    for (int k = 0; k < mi_; ++k) lo_[nf_ + k] = 0.0;
    bfgs_ = Matrix::Identity(nf_, nf_);
  }

  NlpSolution run();

 private:
  // --- evaluation -----------------------------------------------------------
  Vector full(const Vector& y) const {
    Vector x = template_;
    for (int k = 0; k < nf_; ++k) x[free_[sz(k)]] = y[k];
    return x;
  }

  void require_finite(const Vector& v, const char* what, const std::vector<std::string>& names) const {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) {
        std::string locus = std::string(what) + " entry " + std::to_string(i);
        if (sz(static_cast<int>(i)) < names.size()) locus += " (" + names[sz(static_cast<int>(i))] + ")";
        throw EvaluationError(locus + " is not finite");
      }
    }
  }
  void require_finite(const Matrix& m, const char* what) const {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!std::isfinite(m(i, j))) {
          std::string locus = std::string(what) + " entry (" + std::to_string(i) + ", " + std::to_string(j) + ")";
          if (sz(static_cast<int>(j)) < p_.variable_names.size()) {
            locus += " column " + p_.variable_names[sz(static_cast<int>(j))];
          }
          throw EvaluationError(locus + " is not finite");
        }
      }
    }
  }

  double f(const Vector& y) const {
    const double v = p_.objective(full(y));
    if (!std::isfinite(v)) throw EvaluationError("objective is not finite");
    return v;
  }

  Vector grad_full(const Vector& x) const {
    Vector g = p_.gradient(x);
    if (g.size() != p_.n) throw std::invalid_argument("gradient has wrong length");
    require_finite(g, "gradient", p_.variable_names);
    return g;
  }

  Vector grad(const Vector& y) const {
    const Vector g = grad_full(full(y));
    Vector out = Vector::Zero(N_);
    for (int k = 0; k < nf_; ++k) out[k] = g[free_[sz(k)]];
    return out;
  }

  Vector eq_full(const Vector& x) const {
    if (me_ == 0) return Vector(0);
    Vector c = p_.eq(x);
    if (c.size() != me_) throw std::invalid_argument("equality constraints have wrong length");
    require_finite(c, "equality constraint", p_.eq_names);
    return c;
  }
  Vector ineq_full(const Vector& x) const {
    if (mi_ == 0) return Vector(0);
    Vector g = p_.ineq(x);
    if (g.size() != mi_) throw std::invalid_argument("inequality constraints have wrong length");
    require_finite(g, "inequality constraint", p_.ineq_names);
    return g;
  }

  Vector cons(const Vector& y) const {
    const Vector x = full(y);
    Vector c(M_);
    c.head(me_) = eq_full(x);
    if (mi_ > 0) c.tail(mi_) = ineq_full(x) + y.tail(mi_);
    return c;
  }

  Matrix jac(const Vector& y) const {
    const Vector x = full(y);
    Matrix a = Matrix::Zero(M_, N_);
    if (me_ > 0) {
      const Matrix je = p_.eq_jacobian(x);
      if (je.rows() != me_ || je.cols() != p_.n) throw std::invalid_argument("equality Jacobian has wrong shape");
      require_finite(je, "equality Jacobian");
      for (int k = 0; k < nf_; ++k) a.block(0, k, me_, 1) = je.col(free_[sz(k)]);
    }
    if (mi_ > 0) {
      const Matrix ji = p_.ineq_jacobian(x);
      if (ji.rows() != mi_ || ji.cols() != p_.n) throw std::invalid_argument("inequality Jacobian has wrong shape");
      require_finite(ji, "inequality Jacobian");
      for (int k = 0; k < nf_; ++k) a.block(me_, k, mi_, 1) = ji.col(free_[sz(k)]);
      a.block(me_, nf_, mi_, mi_).setIdentity();
    }
    return a;
  }

  Matrix hess(const Vector& y, const Vector& lambda) const {
    Matrix w = Matrix::Zero(N_, N_);
    if (!p_.hessian) {
      w.topLeftCorner(nf_, nf_) = bfgs_;
      return w;
    }
    const Matrix h = p_.hessian(full(y), 1.0, lambda.head(me_), lambda.tail(mi_));
    if (h.rows() != p_.n || h.cols() != p_.n) throw std::invalid_argument("Hessian has wrong shape");
    require_finite(h, "Hessian");
    for (int a = 0; a < nf_; ++a) {
      for (int b = 0; b < nf_; ++b) w(a, b) = h(free_[sz(a)], free_[sz(b)]);
    }
    return w;
  }

  // --- barrier quantities ---------------------------------------------------
  double barrier(const Vector& y, double fy) const {
    double v = fy;
    for (int i = 0; i < N_; ++i) {
      if (std::isfinite(lo_[i])) v -= mu_ * std::log(y[i] - lo_[i]);
      if (std::isfinite(hi_[i])) v -= mu_ * std::log(hi_[i] - y[i]);
    }
    return v;
  }
  Vector barrier_grad(const Vector& y, const Vector& g) const {
    Vector v = g;
    for (int i = 0; i < N_; ++i) {
      if (std::isfinite(lo_[i])) v[i] -= mu_ / (y[i] - lo_[i]);
      if (std::isfinite(hi_[i])) v[i] += mu_ / (hi_[i] - y[i]);
    }
    return v;
  }

  double complementarity(const Vector& y, const Vector& zl, const Vector& zu, double target) const {
    double e = 0.0;
    for (int i = 0; i < N_; ++i) {
      if (std::isfinite(lo_[i])) e = std::max(e, std::abs((y[i] - lo_[i]) * zl[i] - target));
      if (std::isfinite(hi_[i])) e = std::max(e, std::abs((hi_[i] - y[i]) * zu[i] - target));
    }
    return e;
  }

  double fraction_to_boundary(const Vector& y, const Vector& dy) const {
    double alpha = 1.0;
    for (int i = 0; i < N_; ++i) {
      if (dy[i] < 0.0 && std::isfinite(lo_[i])) alpha = std::min(alpha, -opt_.tau * (y[i] - lo_[i]) / dy[i]);
      if (dy[i] > 0.0 && std::isfinite(hi_[i])) alpha = std::min(alpha, opt_.tau * (hi_[i] - y[i]) / dy[i]);
    }
    return alpha;
  }
  double fraction_to_boundary_z(const Vector& z, const Vector& dz) const {
    double alpha = 1.0;
    for (int i = 0; i < z.size(); ++i) {
      if (dz[i] < 0.0 && z[i] > 0.0) alpha = std::min(alpha, -opt_.tau * z[i] / dz[i]);
    }
    return alpha;
  }

  // --- linear algebra ---------------------------------------------------------
  /// Factors the primal-dual matrix with inertia correction. Returns false if
  /// no regularization yields the required inertia.
  bool factor_kkt(const Matrix& w, const Vector& sigma, const Matrix& a) {
    const int dim = N_ + M_;
    auto assemble = [&](double dw, double dc) {
      Matrix k = Matrix::Zero(dim, dim);
      k.topLeftCorner(N_, N_) = w;
      for (int i = 0; i < N_; ++i) k(i, i) += sigma[i] + dw;
      k.bottomLeftCorner(M_, N_) = a;
      k.topRightCorner(N_, M_) = a.transpose();
      for (int i = 0; i < M_; ++i) k(N_ + i, N_ + i) = -dc;
      return k;
    };
    auto correct = [&]() {
      const Inertia in = solver_.inertia();
      return in.positive == N_ && in.negative == M_ && in.zero == 0;
    };
    delta_w_ = 0.0;
    delta_c_ = 0.0;
    solver_.factor(assemble(0.0, 0.0));
    if (correct()) return true;
    // Too few negative or some zero eigenvalues: the constraint Jacobian is
    // (near) rank deficient.
    auto deficient = [&] {
      const Inertia in = solver_.inertia();
      return in.zero > 0 || in.negative < M_;
    };
    if (deficient()) {
      delta_c_ = 1e-8 * std::pow(mu_, 0.25);
      solver_.factor(assemble(0.0, delta_c_));
      if (correct()) return true;
    }
    delta_w_ = last_delta_w_ == 0.0 ? 1e-4 : std::max(1e-20, last_delta_w_ / 3.0);
    const double grow = last_delta_w_ == 0.0 ? 100.0 : 8.0;
    while (delta_w_ <= 1e40) {
      solver_.factor(assemble(delta_w_, delta_c_));
      if (correct()) {
        last_delta_w_ = delta_w_;
        return true;
      }
      if (delta_c_ == 0.0 && deficient()) {
        delta_c_ = 1e-8 * std::pow(mu_, 0.25);
        continue;
      }
      delta_w_ *= grow;
    }
    return false;
  }

  /// Least-squares equality multipliers for the given dual residual.
  Vector least_squares_lambda(const Vector& g, const Matrix& a, const Vector& zl, const Vector& zu) {
    if (M_ == 0) return Vector(0);
    const int dim = N_ + M_;
    Matrix k = Matrix::Zero(dim, dim);
    k.topLeftCorner(N_, N_).setIdentity();
    k.bottomLeftCorner(M_, N_) = a;
    k.topRightCorner(N_, M_) = a.transpose();
    for (int i = 0; i < M_; ++i) k(N_ + i, N_ + i) = -1e-10;
    SymmetricIndefiniteSolver s;
    s.factor(k);
    Vector rhs = Vector::Zero(dim);
    rhs.head(N_) = -(g - zl + zu);
    const Vector sol = s.solve(rhs);
    Vector lambda = sol.tail(M_);
    if (!lambda.allFinite() || inf_norm(lambda) > 1e3) lambda.setZero();
    return lambda;
  }

  // --- filter -------------------------------------------------------------------
  /// Stationarity divisor for large multipliers.
  double multiplier_scale(const Vector& lambda, const Vector& zl, const Vector& zu) const {
    const double total = lambda.lpNorm<1>() + zl.lpNorm<1>() + zu.lpNorm<1>();
    const int count = M_ + N_;
    return count == 0 ? 1.0 : std::max(kSMax, total / count) / kSMax;
  }

  bool filter_accepts(double theta, double phi) const {
    for (const auto& [ft, fp] : filter_) {
      if (theta >= ft && phi >= fp) return false;
    }
    return true;
  }
  void filter_add(double theta, double phi) {
    filter_.emplace_back((1.0 - kGammaTheta) * theta, phi - kGammaPhi * theta);
  }

  bool restoration(Vector& y, Vector& lambda, Vector& zl, Vector& zu);
  void bfgs_update(const Vector& s, const Vector& yd);

  const NlpProblem& p_;
  NlpOptions opt_;
  std::vector<int> free_, fixed_;
  int nf_ = 0, me_ = 0, mi_ = 0, N_ = 0, M_ = 0;
  Vector template_, lo_, hi_;
  Matrix bfgs_;
  double mu_ = 0.1;
  double delta_w_ = 0.0, delta_c_ = 0.0, last_delta_w_ = 0.0;
  double scale_ = 1.0;
  double theta_max_ = kInf, theta_min_ = 0.0;
  SymmetricIndefiniteSolver solver_;
  std::vector<std::pair<double, double>> filter_;
};

void InteriorPoint::bfgs_update(const Vector& s, const Vector& yd) {
  const double ss = s.squaredNorm();
  if (ss < 1e-24) return;
  const Vector bs = bfgs_ * s;
  const double sbs = s.dot(bs);
  const double sy = s.dot(yd);
  Vector r = yd;
  if (sy < 0.2 * sbs) {
    const double t = 0.8 * sbs / (sbs - sy);
    r = t * yd + (1.0 - t) * bs;
  }
  const double sr = s.dot(r);
  if (!(sr > 0.0) || !(sbs > 0.0)) return;
  bfgs_ += r * r.transpose() / sr - bs * bs.transpose() / sbs;
}

bool InteriorPoint::restoration(Vector& y, Vector& lambda, Vector& zl, Vector& zu) {
  Vector c = cons(y);
  const double theta0 = c.lpNorm<1>();
  const double phi0 = barrier(y, f(y));
  filter_add(theta0, phi0);
  double theta = theta0;
  for (int it = 0; it < 50; ++it) {
    const Matrix a = jac(y);
    Vector d2(N_);
    for (int i = 0; i < N_; ++i) {
      double dist = 1.0;
      if (std::isfinite(lo_[i])) dist = std::min(dist, y[i] - lo_[i]);
      if (std::isfinite(hi_[i])) dist = std::min(dist, hi_[i] - y[i]);
      d2[i] = dist * dist;
    }
    const Matrix ad = a * d2.asDiagonal();
    Matrix normal = ad * a.transpose();
    normal.diagonal().array() += 1e-10 * (1.0 + normal.diagonal().cwiseAbs().maxCoeff());
    const Vector w = normal.ldlt().solve(c);
    const Vector dy = -(ad.transpose() * w);
    if (!dy.allFinite() || inf_norm(dy) < 1e-14) break;
    double alpha = fraction_to_boundary(y, dy);
    bool improved = false;
    for (int h = 0; h < 30; ++h) {
      const Vector yt = y + alpha * dy;
      const Vector ct = cons(yt);
      const double tt = ct.lpNorm<1>();
      if (tt < (1.0 - 1e-4 * alpha) * theta) {
        y = yt;
        c = ct;
        theta = tt;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
    const double phi = barrier(y, f(y));
    if ((theta <= 0.9 * theta0 && filter_accepts(theta, phi)) || inf_norm(c) <= opt_.feasibility_tol) {
      lambda = least_squares_lambda(grad(y), jac(y), zl, zu);
      for (int i = 0; i < N_; ++i) {
        if (std::isfinite(lo_[i])) zl[i] = std::min(zl[i], kKappaSigma * mu_ / (y[i] - lo_[i]));
        if (std::isfinite(hi_[i])) zu[i] = std::min(zu[i], kKappaSigma * mu_ / (hi_[i] - y[i]));
      }
      return true;
    }
  }
  return false;
}

NlpSolution InteriorPoint::run() {
  NlpSolution sol;
  mu_ = opt_.mu_init;
  const double mu_min = std::min(opt_.mu_min, opt_.mu_init);
  sol.barrier_history.push_back(mu_);

  // Initial point pushed inside the bounds.
  Vector y(N_);
  for (int k = 0; k < nf_; ++k) {
    const int i = free_[sz(k)];
    double v = p_.x0[i];
    const double l = lo_[k], u = hi_[k];
    const double width = u - l;
    if (std::isfinite(l)) {
      const double push = std::isfinite(u) ? std::min(opt_.bound_push * std::max(1.0, std::abs(l)), opt_.bound_push * width)
                                           : opt_.bound_push * std::max(1.0, std::abs(l));
      v = std::max(v, l + push);
    }
    if (std::isfinite(u)) {
      const double push = std::isfinite(l) ? std::min(opt_.bound_push * std::max(1.0, std::abs(u)), opt_.bound_push * width)
                                           : opt_.bound_push * std::max(1.0, std::abs(u));
      v = std::min(v, u - push);
    }
    y[k] = v;
  }
  Vector zl = Vector::Zero(N_), zu = Vector::Zero(N_);
  Vector lambda = Vector::Zero(M_);

  try {
    if (mi_ > 0) {
      const Vector g = ineq_full(full(y));
      for (int k = 0; k < mi_; ++k) y[nf_ + k] = std::max(-g[k], opt_.bound_push);
    }
    for (int i = 0; i < N_; ++i) {
      if (std::isfinite(lo_[i])) zl[i] = 1.0;
      if (std::isfinite(hi_[i])) zu[i] = 1.0;
    }
    lambda = least_squares_lambda(grad(y), jac(y), zl, zu);

    {
      const double theta0 = cons(y).lpNorm<1>();
      theta_max_ = 1e4 * std::max(1.0, theta0);
      theta_min_ = 1e-4 * std::max(1.0, theta0);
    }

    int restoration_failures = 0;
    for (int iter = 0;; ++iter) {
      const double fy = f(y);
      const Vector g = grad(y);
      const Vector c = cons(y);
      const Matrix a = jac(y);
      const Vector dual = g + a.transpose() * lambda - zl + zu;
      const double s_d = multiplier_scale(lambda, zl, zu);
      const double stat = inf_norm(dual) / s_d;
      const double feas = inf_norm(c);
      const double compl0 = complementarity(y, zl, zu, 0.0);
      scale_ = s_d;

      IterateRecord rec;
      rec.iteration = iter;
      rec.mu = mu_;
      rec.objective = fy;
      rec.primal_infeasibility = feas;
      rec.dual_infeasibility = inf_norm(dual);
      rec.complementarity = compl0;

      sol.iterations = iter;
      if (stat <= opt_.tol && compl0 <= opt_.tol && feas <= opt_.feasibility_tol) {
        sol.trace.push_back(rec);
        sol.status = NlpStatus::KktOptimal;
        break;
      }
      if (iter >= opt_.max_iterations) {
        sol.trace.push_back(rec);
        sol.status = NlpStatus::MaxIterations;
        sol.message = "iteration limit reached";
        break;
      }

      // Barrier parameter update (monotone).
      bool mu_changed = false;
      while (mu_ > mu_min &&
             std::max({stat, feas, complementarity(y, zl, zu, mu_)}) <= kKappaEpsilon * mu_) {
        mu_ = std::max(mu_min, opt_.mu_factor * mu_);
        sol.barrier_history.push_back(mu_);
        mu_changed = true;
      }
      if (mu_changed) filter_.clear();
      rec.mu = mu_;

      // Newton direction.
      Vector sigma(N_);
      for (int i = 0; i < N_; ++i) {
        sigma[i] = 0.0;
        if (std::isfinite(lo_[i])) sigma[i] += zl[i] / (y[i] - lo_[i]);
        if (std::isfinite(hi_[i])) sigma[i] += zu[i] / (hi_[i] - y[i]);
      }
      const Matrix w = hess(y, lambda);
      if (!factor_kkt(w, sigma, a)) {
        sol.status = NlpStatus::NumericalFailure;
        sol.message = "KKT matrix could not be regularized";
        sol.trace.push_back(rec);
        break;
      }
      rec.regularization = delta_w_;
      const Vector gphi = barrier_grad(y, g);
      Vector rhs(N_ + M_);
      rhs.head(N_) = -(gphi + a.transpose() * lambda);
      rhs.tail(M_) = -c;
      const Vector sol_kkt = solver_.solve(rhs);
      if (!sol_kkt.allFinite()) {
        sol.status = NlpStatus::NumericalFailure;
        sol.message = "Newton direction is not finite";
        sol.trace.push_back(rec);
        break;
      }
      const Vector dy = sol_kkt.head(N_);
      const Vector dlambda = sol_kkt.tail(M_);
      auto z_steps = [&](const Vector& d, Vector& dzl, Vector& dzu) {
        dzl = Vector::Zero(N_);
        dzu = Vector::Zero(N_);
        for (int i = 0; i < N_; ++i) {
          if (std::isfinite(lo_[i])) dzl[i] = mu_ / (y[i] - lo_[i]) - zl[i] - zl[i] / (y[i] - lo_[i]) * d[i];
          if (std::isfinite(hi_[i])) dzu[i] = mu_ / (hi_[i] - y[i]) - zu[i] + zu[i] / (hi_[i] - y[i]) * d[i];
        }
      };

      // Filter line search.
      const double theta = c.lpNorm<1>();
      const double phi = barrier(y, fy);
      const double dphi = gphi.dot(dy);
      const double alpha_max = fraction_to_boundary(y, dy);
      double alpha_min = 0.05 * kGammaTheta;
      if (dphi < 0.0) {
        alpha_min = std::min(kGammaTheta, kGammaPhi * theta / -dphi);
        if (theta <= theta_min_) {
          alpha_min = std::min(alpha_min, kSwitchDelta * std::pow(theta, kSwitchSTheta) / std::pow(-dphi, kSwitchSPhi));
        }
        alpha_min *= 0.05;
      }

      bool accepted = false;
      bool f_type = false;
      Vector y_new, step_y, step_lambda;
      double alpha_used = 0.0;
      auto acceptable = [&](const Vector& yt, double alpha, bool& is_f_type) {
        const Vector ct = cons(yt);
        const double tt = ct.lpNorm<1>();
        if (!(tt <= theta_max_)) return false;
        const double pt = barrier(yt, f(yt));
        if (!std::isfinite(pt)) return false;
        const bool switching = dphi < 0.0 && alpha * std::pow(-dphi, kSwitchSPhi) > kSwitchDelta * std::pow(theta, kSwitchSTheta);
        const double slack = 10.0 * kMachEps * std::abs(phi);
        if (switching && theta <= theta_min_) {
          is_f_type = true;
          return pt - phi <= kEta * alpha * dphi + slack && filter_accepts(tt, pt);
        }
        is_f_type = false;
        return (tt <= (1.0 - kGammaTheta) * theta || pt - phi <= -kGammaPhi * theta + slack) && filter_accepts(tt, pt);
      };

      // Steps below round-off in every component are taken without a search.
      bool tiny = theta <= 1e-10;
      for (int i = 0; tiny && i < N_; ++i) tiny = std::abs(dy[i]) <= 10.0 * kMachEps * (1.0 + std::abs(y[i]));
      if (tiny) {
        accepted = true;
        y_new = y + alpha_max * dy;
        step_y = dy;
        step_lambda = dlambda;
        alpha_used = alpha_max;
        f_type = true;
      }

      double alpha = alpha_max;
      for (int trial = 0; !accepted && alpha >= alpha_min; ++trial) {
        const Vector yt = y + alpha * dy;
        if (acceptable(yt, alpha, f_type)) {
          accepted = true;
          y_new = yt;
          step_y = dy;
          step_lambda = dlambda;
          alpha_used = alpha;
          break;
        }
        if (trial == 0) {
          // Second-order corrections on the first trial.
          Vector ct = cons(yt);
          if (ct.lpNorm<1>() >= theta) {
            Vector c_soc = alpha * c + ct;
            double theta_old = theta;
            for (int k = 0; k < kMaxSoc; ++k) {
              Vector rhs_soc(N_ + M_);
              rhs_soc.head(N_) = -(gphi + a.transpose() * lambda);
              rhs_soc.tail(M_) = -c_soc;
              const Vector s = solver_.solve(rhs_soc);
              if (!s.allFinite()) break;
              const Vector d_soc = s.head(N_);
              const double a_soc = fraction_to_boundary(y, d_soc);
              const Vector y_soc = y + a_soc * d_soc;
              if (acceptable(y_soc, alpha, f_type)) {
                accepted = true;
                y_new = y_soc;
                step_y = d_soc;
                step_lambda = s.tail(M_);
                alpha_used = a_soc;
                break;
              }
              ct = cons(y_soc);
              const double theta_soc = ct.lpNorm<1>();
              if (k > 0 && theta_soc > 0.99 * theta_old) break;
              theta_old = theta_soc;
              c_soc = a_soc * c_soc + ct;
            }
            if (accepted) break;
          }
        }
        alpha *= 0.5;
      }

      if (!accepted) {
        rec.restoration = true;
        sol.trace.push_back(rec);
        if (restoration(y, lambda, zl, zu)) {
          restoration_failures = 0;
        } else if (++restoration_failures >= opt_.max_restoration_failures) {
          sol.status = NlpStatus::InfeasibleDetected;
          sol.message = "feasibility restoration failed " + std::to_string(restoration_failures) + " times in a row";
          sol.iterations = iter + 1;
          break;
        }
        continue;
      }

      Vector dzl, dzu;
      z_steps(step_y, dzl, dzu);
      const double alpha_z = std::min(fraction_to_boundary_z(zl, dzl), fraction_to_boundary_z(zu, dzu));
      if (!f_type) filter_add(theta, phi);

      if (!p_.hessian && nf_ > 0) {
        const Vector lambda_new = lambda + alpha_used * step_lambda;
        const Vector g_new = grad(y_new);
        const Vector lag_old = g + a.transpose() * lambda_new;
        const Vector lag_new = g_new + jac(y_new).transpose() * lambda_new;
        bfgs_update((y_new - y).head(nf_), (lag_new - lag_old).head(nf_));
      }

      y = y_new;
      lambda += alpha_used * step_lambda;
      zl += alpha_z * dzl;
      zu += alpha_z * dzu;
      for (int i = 0; i < N_; ++i) {
        if (std::isfinite(lo_[i])) {
          const double s = y[i] - lo_[i];
          zl[i] = std::clamp(zl[i], mu_ / (kKappaSigma * s), kKappaSigma * mu_ / s);
        }
        if (std::isfinite(hi_[i])) {
          const double s = hi_[i] - y[i];
          zu[i] = std::clamp(zu[i], mu_ / (kKappaSigma * s), kKappaSigma * mu_ / s);
        }
      }
      restoration_failures = 0;
      rec.step = alpha_used;
      sol.trace.push_back(rec);
    }
  } catch (const EvaluationError& e) {
    sol.status = NlpStatus::NumericalFailure;
    sol.message = e.what();
  }

  // Report in the original variables.
  sol.x = full(y);
  sol.lambda_eq = lambda.head(me_);
  sol.lambda_ineq = lambda.tail(mi_);
  sol.z_lower = Vector::Zero(p_.n);
  sol.z_upper = Vector::Zero(p_.n);
  for (int k = 0; k < nf_; ++k) {
    sol.z_lower[free_[sz(k)]] = zl[k];
    sol.z_upper[free_[sz(k)]] = zu[k];
  }
  try {
    sol.objective = p_.objective(sol.x);
    Vector stat = grad_full(sol.x);
    if (me_ > 0) stat += p_.eq_jacobian(sol.x).transpose() * sol.lambda_eq;
    double feas = inf_norm(eq_full(sol.x));
    double comp = 0.0;
    double slack_stat = 0.0;
    if (mi_ > 0) {
      stat += p_.ineq_jacobian(sol.x).transpose() * sol.lambda_ineq;
      const Vector gi = ineq_full(sol.x);
      for (int k = 0; k < mi_; ++k) {
        feas = std::max(feas, gi[k]);
        slack_stat = std::max(slack_stat, std::abs(lambda[me_ + k] - zl[nf_ + k]));
        comp = std::max(comp, std::abs(y[nf_ + k] * zl[nf_ + k]));
      }
    }
    for (int i : fixed_) {
      if (stat[i] > 0.0) {
        sol.z_lower[i] = stat[i];
      } else {
        sol.z_upper[i] = -stat[i];
      }
    }
    stat += sol.z_upper - sol.z_lower;
    double free_stat = slack_stat;
    for (int k = 0; k < nf_; ++k) {
      const int i = free_[sz(k)];
      free_stat = std::max(free_stat, std::abs(stat[i]));
      if (std::isfinite(lo_[k])) comp = std::max(comp, std::abs((y[k] - lo_[k]) * zl[k]));
      if (std::isfinite(hi_[k])) comp = std::max(comp, std::abs((hi_[k] - y[k]) * zu[k]));
    }
    sol.kkt = {free_stat, feas, comp, scale_};
  } catch (const EvaluationError& e) {
    sol.status = NlpStatus::NumericalFailure;
    sol.message = e.what();
  }
  return sol;
}

}  // namespace

void NlpProblem::check() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("NLP problem: " + m); };
  if (n < 0 || m_eq < 0 || m_ineq < 0) fail("negative dimension");
  if (!objective || !gradient) fail("objective and gradient callbacks are required");
  if (m_eq > 0 && (!eq || !eq_jacobian)) fail("equality callbacks missing");
  if (m_ineq > 0 && (!ineq || !ineq_jacobian)) fail("inequality callbacks missing");
  if (lower.size() != n || upper.size() != n || x0.size() != n) fail("bound or start vector has wrong length");
  for (int i = 0; i < n; ++i) {
    if (!(lower[i] <= upper[i])) fail("lower bound exceeds upper bound at variable " + std::to_string(i));
    if (!std::isfinite(x0[i])) fail("start point is not finite at variable " + std::to_string(i));
  }
}

std::string_view to_string(NlpStatus status) {
  switch (status) {
    case NlpStatus::KktOptimal: return "kkt-optimal";
    case NlpStatus::MaxIterations: return "max-iterations";
    case NlpStatus::InfeasibleDetected: return "infeasible-detected";
    case NlpStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

NlpSolution solve_nlp(const NlpProblem& problem, const NlpOptions& options) {
  problem.check();
  InteriorPoint ip(problem, options);
  return ip.run();
}

std::string trace_csv(const NlpSolution& s) {
  std::ostringstream out;
  out << "iteration,mu,objective,inf_pr,inf_du,compl,step,regularization,restoration\n";
  char buf[512];
  for (const auto& r : s.trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.iteration, r.mu, r.objective,
                  r.primal_infeasibility, r.dual_infeasibility, r.complementarity, r.step, r.regularization,
                  r.restoration ? 1 : 0);
    out << buf;
  }
  return out.str();
}

}  // namespace mtdc::nlp
