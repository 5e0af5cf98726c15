#pragma once

// Log-barrier interior-point solver for the penalized concave program
//
//   maximize   sum_j log(1 + e_j' w)  -  sum_l gamma_l |w_l|
//   subject to 1 + q_i' w >= 0        for every constraint row q_i,
//
// with w in R^L small (L <= 12).  Penalized coordinates are split as
// w_l = u_l - v_l with u_l, v_l > 0, which makes the objective smooth and
// concave; the constraint rows and the split variables get a log barrier
// with weight mu driven down a geometric schedule.  Each stage is solved by
// a damped Newton method on the (L + #penalized) variables; the Hessian is
// dense and tiny, so a Cholesky factorization per step is cheap even with
// tens of thousands of constraint rows.
//
// At the mu-central point the iterate is optimal for the original problem up
// to mu * (#constraints), which is reported as `first_order_gap`.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace ecns {

struct BarrierOptions {
  double tol = 1e-8;        // first-order contract: gap <= tol * n_loglik
  int max_newton = 4000;    // across all barrier stages
  int max_stage_newton = 200;
  double mu_shrink = 0.25;
  double mu_floor = 1e-13;
  double mu_cap = 1e-10;
  double feasibility_slack = 1e-8;  // accepted residual when checking inputs
  bool trace = false;       // per-stage diagnostics on stderr
};

struct BarrierReport {
  double objective = 0.0;          // sum_j log(1 + e_j'w) - penalty (no barrier)
  int newton_iterations = 0;
  int barrier_stages = 0;
  int active_constraints = 0;      // rows with 1 + q'w below activity threshold
  bool converged = false;
  double first_order_gap = 0.0;    // bound on attainable objective improvement
};

namespace detail {

struct BarrierWork {
  // Split layout: x = [w_1..w_L, extra splits...]; for penalized coordinate l,
  // x[l] holds u_l and x[split_of[l]] holds v_l, with w_l = u_l - v_l.
  // Free coordinates use x[l] = w_l directly.
  Eigen::VectorXi split_of;  // L entries; -1 for free coordinates
  int dim = 0;

  Eigen::VectorXd to_x(const Eigen::VectorXd& w, double pad) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    for (int l = 0; l < split_of.size(); ++l) {
      if (split_of[l] < 0) {
        x[l] = w[l];
      } else {
        x[l] = std::max(w[l], 0.0) + pad;
        x[split_of[l]] = std::max(-w[l], 0.0) + pad;
      }
    }
    return x;
  }

  Eigen::VectorXd to_w(const Eigen::VectorXd& x) const {
    Eigen::VectorXd w(split_of.size());
    for (int l = 0; l < split_of.size(); ++l) {
      w[l] = (split_of[l] < 0) ? x[l] : x[l] - x[split_of[l]];
    }
    return w;
  }
};

}  // namespace detail

class BarrierSolver {
 public:
  // likelihood_rows: p x L matrix E (objective sum_j log(1 + E_j w)).
  // constraint_rows: m x L matrix Q (constraints 1 + Q_i w >= 0).
  // penalty: L nonnegative weights gamma_l.
  BarrierSolver(const Eigen::MatrixXd& likelihood_rows,
                const Eigen::MatrixXd& constraint_rows,
                const Eigen::VectorXd& penalty,
                BarrierOptions options = {})
      : E_(likelihood_rows), Q_(constraint_rows), gamma_(penalty), opt_(options) {
    if (E_.cols() != Q_.cols() || gamma_.size() != E_.cols()) {
      throw std::invalid_argument("BarrierSolver: dimension mismatch");
    }
    work_.split_of = Eigen::VectorXi::Constant(E_.cols(), -1);
    work_.dim = static_cast<int>(E_.cols());
    for (int l = 0; l < gamma_.size(); ++l) {
      if (gamma_[l] < 0) throw std::invalid_argument("BarrierSolver: negative penalty");
      if (gamma_[l] > 0) work_.split_of[l] = work_.dim++;
    }
  }

  /// Penalized objective at w (no barrier terms); -inf if w is infeasible.
  double objective(const Eigen::VectorXd& w) const {
    Eigen::VectorXd rd = (E_ * w).array() + 1.0;
    if ((rd.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
    double val = rd.array().log().sum();
    for (int l = 0; l < gamma_.size(); ++l) val -= gamma_[l] * std::abs(w[l]);
    return val;
  }

  bool feasible(const Eigen::VectorXd& w, double slack = 0.0) const {
    Eigen::VectorXd rd = (E_ * w).array() + 1.0;
    Eigen::VectorXd rg = (Q_ * w).array() + 1.0;
    return rd.minCoeff() > -slack && rg.minCoeff() >= -slack;
  }

  std::pair<Eigen::VectorXd, BarrierReport> solve(const Eigen::VectorXd& init) {
    const int L = static_cast<int>(E_.cols());
    Eigen::VectorXd w = init;
    if (w.size() != L || !strictly_feasible(w)) {
      w = Eigen::VectorXd::Zero(L);  // always strictly feasible
    }

    BarrierReport report;
    const double n_loglik = std::max<double>(1, E_.rows());
    const double m_ineq = static_cast<double>(Q_.rows()) + 2.0 * (work_.dim - L);
    double mu = std::max(1e-3, 0.05 * n_loglik / std::max(1.0, m_ineq));
    const double mu_min =
        std::clamp(0.3 * opt_.tol * n_loglik / std::max(1.0, m_ineq), opt_.mu_floor, opt_.mu_cap);

    Eigen::VectorXd x = work_.to_x(w, std::sqrt(mu) / gamma_max());
    double decrement = std::numeric_limits<double>::infinity();
    while (true) {
      ++report.barrier_stages;
      decrement = newton_stage(x, mu, report);
      if (opt_.trace) {
        Eigen::VectorXd wt = work_.to_w(x);
        std::fprintf(stderr, "  stage mu=%.2e iters=%d dec=%.2e obj=%.8f wmax=%.2e\n", mu,
                     report.newton_iterations, decrement, objective(wt),
                     wt.cwiseAbs().maxCoeff());
      }
      if (mu <= mu_min) break;
      mu = std::max(mu * opt_.mu_shrink, mu_min);
      if (report.newton_iterations >= opt_.max_newton) break;
    }

    // Polish at the final mu: Newton is locally quadratic here, so driving
    // the decrement to the floating floor pins the iterate to the central
    // point itself (not just its neighborhood), which keeps reruns of
    // equivalent problems within ~1e-7 of each other coefficientwise.
    decrement = newton_stage(x, mu, report, 1e-15 * std::max(1.0, n_loglik));

    w = work_.to_w(x);
    report.objective = objective(w);
    report.first_order_gap = mu * m_ineq + decrement;
    report.converged = (mu <= mu_min) && decrement < 1e-6;
    Eigen::VectorXd rg = (Q_ * w).array() + 1.0;
    report.active_constraints =
        static_cast<int>((rg.array() < 1e3 * mu).count());
    return {w, report};
  }

 private:
  double gamma_max() const {
    double g = 1.0;
    for (int l = 0; l < gamma_.size(); ++l) g = std::max(g, gamma_[l]);
    return g;
  }

  bool strictly_feasible(const Eigen::VectorXd& w) const {
    Eigen::VectorXd rd = (E_ * w).array() + 1.0;
    Eigen::VectorXd rg = (Q_ * w).array() + 1.0;
    return rd.minCoeff() > 1e-12 && rg.minCoeff() > 1e-12;
  }

  // Barrier objective, gradient, Hessian in split coordinates at x.
  double barrier_value(const Eigen::VectorXd& x, double mu) const {
    Eigen::VectorXd w = work_.to_w(x);
    Eigen::VectorXd rd = (E_ * w).array() + 1.0;
    Eigen::VectorXd rg = (Q_ * w).array() + 1.0;
    if (rd.minCoeff() <= 0.0 || rg.minCoeff() <= 0.0) {
      return -std::numeric_limits<double>::infinity();
    }
    double val = rd.array().log().sum() + mu * rg.array().log().sum();
    for (int l = 0; l < gamma_.size(); ++l) {
      if (work_.split_of[l] >= 0) {
        double u = x[l], v = x[work_.split_of[l]];
        if (u <= 0.0 || v <= 0.0) return -std::numeric_limits<double>::infinity();
        val += -gamma_[l] * (u + v) + mu * (std::log(u) + std::log(v));
      }
    }
    return val;
  }

  // One barrier stage: damped Newton until the decrement is small.
  // Returns the final Newton decrement (suboptimality bound for the stage).
  double newton_stage(Eigen::VectorXd& x, double mu, BarrierReport& report,
                      double tol_override = 0.0) const {
    const int L = static_cast<int>(E_.cols());
    const double stage_tol = tol_override > 0.0 ? tol_override : stage_tolerance(mu);
    double lambda2 = std::numeric_limits<double>::infinity();
    for (int it = 0;
         it < opt_.max_stage_newton && report.newton_iterations < opt_.max_newton; ++it) {
      Eigen::VectorXd w = work_.to_w(x);
      Eigen::VectorXd rd = (E_ * w).array() + 1.0;
      Eigen::VectorXd rg = (Q_ * w).array() + 1.0;

      Eigen::VectorXd gw = E_.transpose() * rd.cwiseInverse() +
                           mu * (Q_.transpose() * rg.cwiseInverse());
      Eigen::MatrixXd Hw =
          E_.transpose() * rd.array().square().inverse().matrix().asDiagonal() * E_ +
          mu * (Q_.transpose() * rg.array().square().inverse().matrix().asDiagonal() * Q_);

      // Chain rule into split coordinates: w = J x with J[l,l] = 1 and
      // J[l, split_of[l]] = -1, so H = J' Hw J plus the split-barrier diagonal.
      Eigen::VectorXd g(work_.dim);
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(work_.dim, work_.dim);
      H.topLeftCorner(L, L) = Hw;
      for (int l = 0; l < L; ++l) {
        int sv = work_.split_of[l];
        if (sv < 0) {
          g[l] = gw[l];
          continue;
        }
        double u = x[l], v = x[sv];
        g[l] = gw[l] - gamma_[l] + mu / u;
        g[sv] = -gw[l] - gamma_[l] + mu / v;
        H(l, l) += mu / (u * u);
        for (int k = 0; k < L; ++k) {
          H(sv, k) = -Hw(l, k);
          H(k, sv) = -Hw(k, l);
        }
        for (int k = 0; k < L; ++k) {
          int sk = work_.split_of[k];
          if (sk >= 0) {
            H(sv, sk) = Hw(l, k);
            H(sk, sv) = Hw(k, l);
          }
        }
        H(sv, sv) = Hw(l, l) + mu / (v * v);
      }

      // H is positive definite (negated Hessian of a strictly concave barrier);
      // fall back to a Levenberg shift if Cholesky stalls numerically.
      Eigen::VectorXd step;
      double shift = 0.0;
      for (;;) {
        Eigen::LLT<Eigen::MatrixXd> llt(
            shift == 0.0 ? H : Eigen::MatrixXd(H + shift * Eigen::MatrixXd::Identity(work_.dim, work_.dim)));
        if (llt.info() == Eigen::Success) {
          step = llt.solve(g);
          break;
        }
        shift = (shift == 0.0) ? 1e-10 * (1.0 + H.diagonal().maxCoeff()) : shift * 100.0;
        if (shift > 1e12 * (1.0 + H.diagonal().maxCoeff())) {
          throw std::runtime_error("BarrierSolver: Newton system not positive definite");
        }
      }

      lambda2 = g.dot(step);
      ++report.newton_iterations;
      if (!(lambda2 > 0)) { lambda2 = std::abs(lambda2); break; }
      if (lambda2 * 0.5 < stage_tol) break;

      // Fraction-to-boundary cap, then backtracking on the barrier objective.
      double alpha = 0.99 * max_feasible_step(x, step);
      alpha = std::min(alpha, 1.0);
      double f0 = barrier_value(x, mu);
      double target_slope = g.dot(step);
      int bt = 0;
      while (bt < 60) {
        double f1 = barrier_value(x + alpha * step, mu);
        if (f1 >= f0 + 0.01 * alpha * target_slope) break;
        alpha *= 0.5;
        ++bt;
      }
      if (bt == 60) break;  // no progress possible at this scale
      x += alpha * step;
    }
    return std::max(lambda2, 0.0) * 0.5;
  }

  double stage_tolerance(double mu) const {
    return std::max(1e-12 * std::max<double>(1, E_.rows()), 1e-4 * mu);
  }

  // Largest t with x + t*step keeping all barrier arguments positive.
  double max_feasible_step(const Eigen::VectorXd& x, const Eigen::VectorXd& step) const {
    const int L = static_cast<int>(E_.cols());
    Eigen::VectorXd w = work_.to_w(x);
    Eigen::VectorXd dw = work_.to_w(x + step) - w;  // linear map, so this is J*step
    double t = std::numeric_limits<double>::infinity();
    auto limit_rows = [&](const Eigen::MatrixXd& A) {
      Eigen::VectorXd r = (A * w).array() + 1.0;
      Eigen::VectorXd dr = A * dw;
      for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (dr[i] < 0.0) t = std::min(t, -r[i] / dr[i]);
      }
    };
    limit_rows(E_);
    limit_rows(Q_);
    for (int l = 0; l < L; ++l) {
      int sv = work_.split_of[l];
      if (sv >= 0) {
        if (step[l] < 0.0) t = std::min(t, -x[l] / step[l]);
        if (step[sv] < 0.0) t = std::min(t, -x[sv] / step[sv]);
      }
    }
    return t;
  }

  const Eigen::MatrixXd& E_;
  const Eigen::MatrixXd& Q_;
  Eigen::VectorXd gamma_;
  BarrierOptions opt_;
  detail::BarrierWork work_;
};

}  // namespace ecns
