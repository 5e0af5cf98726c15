#pragma once

// Exchangeable Correlated Noise model: the empirical density of correlated
// marginally-N(0,1) z-scores is modeled as
//
//   f(x; omega) = phi(x) + sum_{l=1}^{L} omega_l phi^(l)(x) / sqrt(l!),
//
// and omega is estimated by penalized maximum likelihood subject to
// f(.; omega) >= 0 on a fine grid and at the observed z-scores.  The basis
// functions integrate to zero, so f integrates to one for any omega.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "ecnshrink/gdbasis.hpp"
#include "ecnshrink/interior_point.hpp"
#include "ecnshrink/parallel.hpp"

namespace ecns {

inline constexpr int kMaxModelOrder = 12;
inline constexpr double kFeasibilitySlack = 1e-8;

/// Coefficients omega_1..omega_L; omega[l-1] weights phi^(l)/sqrt(l!).
struct NoiseCoefficients {
  Eigen::VectorXd omega;

  NoiseCoefficients() = default;
  explicit NoiseCoefficients(Eigen::VectorXd w) : omega(std::move(w)) {}
  static NoiseCoefficients zero(int max_order) {
    return NoiseCoefficients(Eigen::VectorXd::Zero(max_order));
  }
  int max_order() const { return static_cast<int>(omega.size()); }
};

/// Penalty h(omega) = sum_l gamma_l |omega_l| with gamma_l = 0 for odd l and
/// gamma / rho^{l/2} for even l: even orders carry the distortion and their
/// coefficients shrink like rho^{l/2} under pervasive correlation rho.
struct EcnPenalty {
  double gamma = 10.0;
  double rho = 0.5;
  int max_order = 10;

  void validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("EcnPenalty: gamma must be positive");
    if (!(rho > 0.0 && rho < 1.0)) {
      throw std::invalid_argument("EcnPenalty: rho must lie in (0, 1)");
    }
    if (max_order < 1 || max_order > kMaxModelOrder) {
      throw std::invalid_argument("EcnPenalty: max_order must lie in [1, " +
                                  std::to_string(kMaxModelOrder) + "]");
    }
  }

  Eigen::VectorXd weights() const {
    validate();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(max_order);
    for (int l = 2; l <= max_order; l += 2) g[l - 1] = gamma / std::pow(rho, l / 2);
    return g;
  }
};

/// Nonnegativity is enforced on the points lo, lo+step, ..., hi.
struct ConstraintGrid {
  double lo = -10.0;
  double hi = 10.0;
  double step = 1e-3;

  void validate() const {
    if (!(lo < hi)) throw std::invalid_argument("ConstraintGrid: lo must be below hi");
    if (!(step > 0.0)) throw std::invalid_argument("ConstraintGrid: step must be positive");
  }
  int size() const {
    validate();
    return static_cast<int>(std::floor((hi - lo) / step + 0.5)) + 1;
  }
  double point(int i) const { return lo + i * step; }
};

/// f(x; omega) = phi(x) (1 + sum_l omega_l r_l(x)).  May be slightly negative
/// between constraint-grid points; clamping is the caller's decision.
inline double ecn_density(const NoiseCoefficients& coef, double x) {
  const int L = coef.max_order();
  double acc = 1.0;
  if (L > 0) {
    Eigen::VectorXd r(L);
    basis_ratio_row(x, L, r);
    acc += r.dot(coef.omega);
  }
  return norm_pdf(x) * acc;
}

inline double penalty_value(const NoiseCoefficients& coef, const EcnPenalty& pen) {
  Eigen::VectorXd g = pen.weights();
  if (g.size() != coef.omega.size()) {
    throw std::invalid_argument("penalty_value: coefficient/penalty length mismatch");
  }
  return g.dot(coef.omega.cwiseAbs());
}

/// Basis-ratio rows r_l(x_i) for a set of evaluation points; row i constrains
/// 1 + row_i . omega >= 0, i.e. f(x_i; omega) >= 0.
inline Eigen::MatrixXd basis_ratio_matrix(const Eigen::VectorXd& points, int max_order) {
  Eigen::MatrixXd rows(points.size(), max_order);
  parallel_for(points.size(), [&](long i) {
    basis_ratio_row(points[i], max_order, rows.row(i));
  });
  return rows;
}

inline Eigen::MatrixXd constraint_grid_matrix(const ConstraintGrid& grid, int max_order) {
  const int m = grid.size();
  Eigen::VectorXd pts(m);
  for (int i = 0; i < m; ++i) pts[i] = grid.point(i);
  return basis_ratio_matrix(pts, max_order);
}

struct EcnFitReport {
  double objective = 0.0;  // sum_j log f(z_j; omega) - h(omega)
  int newton_iterations = 0;
  int barrier_stages = 0;
  int active_constraints = 0;
  bool converged = true;
  double first_order_gap = 0.0;
};

struct EcnFit {
  NoiseCoefficients coefficients;
  EcnFitReport report;
};

namespace detail {

inline EcnFitReport to_ecn_report(const BarrierReport& r, double objective_offset) {
  EcnFitReport out;
  out.objective = r.objective + objective_offset;
  out.newton_iterations = r.newton_iterations;
  out.barrier_stages = r.barrier_stages;
  out.active_constraints = r.active_constraints;
  out.converged = r.converged;
  out.first_order_gap = r.first_order_gap;
  return out;
}

}  // namespace detail

/// Maximizes sum_j log f(z_j; omega) - h(omega) subject to f >= 0 at every
/// z_j and every grid point.  Inputs must satisfy |z_j| <= grid.hi and
/// p >= 50; the returned point is first-order optimal up to
/// report.first_order_gap (<= tol * p at convergence).
inline EcnFit fit_ecn(const Eigen::VectorXd& z, const EcnPenalty& pen = {},
                      const ConstraintGrid& grid = {}, double tol = 1e-8) {
  pen.validate();
  grid.validate();
  const long p = z.size();
  if (p < 50) {
    throw std::invalid_argument("fit_ecn: need at least 50 observations, got " +
                                std::to_string(p));
  }
  for (long j = 0; j < p; ++j) {
    if (!std::isfinite(z[j])) throw std::invalid_argument("fit_ecn: non-finite z value");
    if (z[j] < grid.lo || z[j] > grid.hi) {
      throw std::invalid_argument(
          "fit_ecn: z value " + std::to_string(z[j]) + " lies outside the constraint grid [" +
          std::to_string(grid.lo) + ", " + std::to_string(grid.hi) +
          "]; widen the grid or drop the observation");
    }
  }

  const int L = pen.max_order;
  Eigen::MatrixXd E = basis_ratio_matrix(z, L);
  Eigen::MatrixXd Q = constraint_grid_matrix(grid, L);

  BarrierOptions opts;
  opts.tol = tol;
  BarrierSolver solver(E, Q, pen.weights(), opts);
  auto [omega, report] = solver.solve(Eigen::VectorXd::Zero(L));

  // Report the objective in data units: sum_j log f(z_j) = sum_j log phi(z_j)
  // + the solver's relative objective.
  double offset = 0.0;
  for (long j = 0; j < p; ++j) offset += std::log(norm_pdf(z[j]));
  EcnFit fit;
  fit.coefficients = NoiseCoefficients(omega);
  fit.report = detail::to_ecn_report(report, offset);
  return fit;
}

}  // namespace ecns
