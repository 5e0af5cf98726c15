#pragma once

// Joint empirical-Bayes estimation of a scale-mixture-of-Gaussians prior and
// the correlated-noise coefficients omega.  The marginal likelihood of an
// observation (x_j, s_j) under prior weights pi and noise coefficients omega
// is  sum_k pi_k (p_jk0 + sum_l omega_l p_jkl)  with the p cells from
// gdbasis::conv_p; the penalized problem is biconvex and is solved by
// alternating a simplex-constrained weight step (EM with a fixed-point
// accelerator) and a noise-coefficient step (the same barrier solver as the
// plain ECN fit).

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ecnshrink/ecn.hpp"
#include "ecnshrink/gdbasis.hpp"
#include "ecnshrink/parallel.hpp"

namespace ecns {

struct Dataset {
  Eigen::VectorXd x;
  Eigen::VectorXd s;

  long size() const { return x.size(); }

  void validate() const {
    if (x.size() != s.size()) {
      throw std::invalid_argument("Dataset: x and s must have equal length");
    }
    for (long j = 0; j < x.size(); ++j) {
      if (!std::isfinite(x[j]) || !std::isfinite(s[j])) {
        throw std::invalid_argument("Dataset: non-finite entry at row " + std::to_string(j));
      }
      if (!(s[j] > 0.0)) {
        throw std::invalid_argument("Dataset: s must be positive at row " + std::to_string(j));
      }
    }
  }

  Eigen::VectorXd z_scores() const { return x.cwiseQuotient(s); }
};

/// Null weight pi[0] on the point mass at zero plus weights pi[k] on
/// N(0, sigma_grid[k-1]^2), k = 1..K.
struct MixturePrior {
  Eigen::VectorXd sigma_grid;
  Eigen::VectorXd pi;

  int components() const { return static_cast<int>(sigma_grid.size()); }

  void validate() const {
    if (pi.size() != sigma_grid.size() + 1) {
      throw std::invalid_argument("MixturePrior: pi must have one more entry than sigma_grid");
    }
    for (int k = 0; k < sigma_grid.size(); ++k) {
      if (!(sigma_grid[k] > 0.0)) {
        throw std::invalid_argument("MixturePrior: sigma grid values must be positive");
      }
      if (k > 0 && !(sigma_grid[k] > sigma_grid[k - 1])) {
        throw std::invalid_argument("MixturePrior: sigma grid must be strictly increasing");
      }
    }
    if ((pi.array() < 0.0).any()) {
      throw std::invalid_argument("MixturePrior: negative mixture weight");
    }
    if (std::abs(pi.sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("MixturePrior: weights must sum to one");
    }
  }

  /// CDF of the mixture at t.
  double cdf(double t) const {
    double acc = (t >= 0.0) ? pi[0] : 0.0;
    for (int k = 0; k < sigma_grid.size(); ++k) acc += pi[k + 1] * norm_cdf(t / sigma_grid[k]);
    return acc;
  }
};

struct CashConfig {
  EcnPenalty penalty;
  double lambda0 = 10.0;
  ConstraintGrid grid;
  int max_outer_iters = 50;
  double outer_tol = 1e-6;
  double ecn_tol = 1e-8;
  double pi_kkt_tol = 1e-8;
  std::optional<Eigen::VectorXd> sigma_override;

  void validate() const {
    penalty.validate();
    grid.validate();
    if (!(lambda0 >= 0.0)) throw std::invalid_argument("CashConfig: lambda0 must be nonnegative");
    if (max_outer_iters < 1) throw std::invalid_argument("CashConfig: max_outer_iters must be positive");
    if (!(outer_tol > 0.0)) throw std::invalid_argument("CashConfig: outer_tol must be positive");
  }
};

/// Geometric sigma grid with ratio sqrt(2), from min(s)/10 up to the first
/// rung at or above 2 sqrt(max(x^2 - s^2)); when every x^2 <= s^2 the upper
/// target falls back to max(s).
inline Eigen::VectorXd default_sigma_grid(const Dataset& data) {
  data.validate();
  if (data.size() < 1) throw std::invalid_argument("default_sigma_grid: empty dataset");
  double lo = data.s.minCoeff() / 10.0;
  double excess = 0.0;
  for (long j = 0; j < data.size(); ++j) {
    excess = std::max(excess, data.x[j] * data.x[j] - data.s[j] * data.s[j]);
  }
  double target = excess > 0.0 ? 2.0 * std::sqrt(excess) : data.s.maxCoeff();
  std::vector<double> rungs{lo};
  while (rungs.back() < target) rungs.push_back(rungs.back() * std::numbers::sqrt2);
  return Eigen::Map<Eigen::VectorXd>(rungs.data(), rungs.size());
}

/// Cache of p_jkl cells for a dataset and sigma grid: a p x (K+1) x (L+1)
/// table, k = 0 being the point-mass column.  This is the dominant memory
/// cost of a fit (p (K+1)(L+1) doubles) and is built once.
class KernelTable {
 public:
  KernelTable() = default;

  KernelTable(const Dataset& data, Eigen::VectorXd sigma_grid, int max_order)
      : n_(data.size()),
        K_(static_cast<int>(sigma_grid.size())),
        L_(max_order),
        sigma_grid_(std::move(sigma_grid)),
        cells_(static_cast<std::size_t>(n_) * (K_ + 1) * (L_ + 1)) {
    data.validate();
    const auto& sf = detail::factorials().sqrt_fact;
    parallel_for(n_, [&](long j) {
      double xj = data.x[j], sj = data.s[j];
      for (int k = 0; k <= K_; ++k) {
        double sigma = (k == 0) ? 0.0 : sigma_grid_[k - 1];
        double c = std::hypot(sigma, sj);
        double u = xj / c;
        double ratio = sj / c;
        double* cell = &cells_[offset(j, k)];
        // p_jkl = (s/c)^l (1/c) (-1)^l h_l(u) phi(u) / sqrt(l!)
        double base = norm_pdf(u) / c;
        double prev = 1.0, cur = u;
        cell[0] = base;
        double scale = 1.0;
        for (int l = 1; l <= L_; ++l) {
          scale *= -ratio;
          cell[l] = scale * cur * base / sf[l];
          double next = u * cur - l * prev;
          prev = cur;
          cur = next;
        }
      }
    });
    for (double v : cells_) {
      if (!std::isfinite(v)) throw std::runtime_error("KernelTable: non-finite cell");
    }
  }

  long rows() const { return n_; }
  int components() const { return K_; }
  int max_order() const { return L_; }
  const Eigen::VectorXd& sigma_grid() const { return sigma_grid_; }

  double at(long j, int k, int l) const { return cells_[offset(j, k) + l]; }
  const double* row(long j, int k) const { return &cells_[offset(j, k)]; }

  /// alpha_jk = p_jk0 + sum_l omega_l p_jkl (no flooring).
  double alpha(long j, int k, const Eigen::VectorXd& omega) const {
    const double* cell = row(j, k);
    double acc = cell[0];
    for (int l = 1; l <= L_; ++l) acc += omega[l - 1] * cell[l];
    return acc;
  }

 private:
  std::size_t offset(long j, int k) const {
    return (static_cast<std::size_t>(j) * (K_ + 1) + k) * (L_ + 1);
  }

  long n_ = 0;
  int K_ = 0;
  int L_ = 0;
  Eigen::VectorXd sigma_grid_;
  std::vector<double> cells_;
};

struct LoglikResult {
  double value = 0.0;
  bool infeasible = false;  // some inner sum was <= 0: omega not a density
  long floored = 0;         // inner sums lifted to the 1e-300 floor
};

inline constexpr double kLikelihoodFloor = 1e-300;

inline LoglikResult marginal_loglik(const MixturePrior& prior, const NoiseCoefficients& coef,
                                    const KernelTable& table) {
  prior.validate();
  if (prior.components() != table.components() || coef.max_order() != table.max_order()) {
    throw std::invalid_argument("marginal_loglik: dimension mismatch with kernel table");
  }
  LoglikResult out;
  for (long j = 0; j < table.rows(); ++j) {
    double inner = 0.0;
    for (int k = 0; k <= table.components(); ++k) {
      inner += prior.pi[k] * table.alpha(j, k, coef.omega);
    }
    if (inner <= 0.0) {
      out.infeasible = true;
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
    if (inner < kLikelihoodFloor) {
      inner = kLikelihoodFloor;
      ++out.floored;
    }
    out.value += std::log(inner);
  }
  return out;
}

inline LoglikResult marginal_loglik(const MixturePrior& prior, const NoiseCoefficients& coef,
                                    const Dataset& data) {
  return marginal_loglik(prior, coef, KernelTable(data, prior.sigma_grid, coef.max_order()));
}

struct PiStepResult {
  MixturePrior prior;
  int iterations = 0;
  double kkt_residual = 0.0;
  long dropped_rows = 0;
  bool converged = true;
};

namespace detail {

/// max over the simplex of sum_j log(sum_k pi_k A_jk) + lambda0 log pi_0.
/// EM sweeps with a SQUAREM-style extrapolation provide globally safe
/// progress; an equality-constrained Newton phase on the active support
/// finishes the job (EM alone crawls when adjacent components trade mass).
/// Terminates at a KKT residual below kkt_tol.
inline PiStepResult solve_simplex_weights(const Eigen::MatrixXd& A, double lambda0,
                                          Eigen::VectorXd pi, double kkt_tol,
                                          int max_cycles = 4000) {
  const long n = A.rows();
  const int m = static_cast<int>(A.cols());
  const double mass = static_cast<double>(n) + lambda0;

  auto objective = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd mix = A * w;
    double val = 0.0;
    for (long j = 0; j < n; ++j) val += std::log(std::max(mix[j], kLikelihoodFloor));
    if (lambda0 > 0.0) val += lambda0 * std::log(std::max(w[0], 1e-300));
    return val;
  };

  // One EM sweep: w_k <- (sum_j w_k A_jk / mix_j + lambda_k) / (n + lambda0).
  auto em = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd mix = A * w;
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(m);
    for (long j = 0; j < n; ++j) {
      double d = mix[j];
      if (d <= 0.0) continue;  // row already dropped upstream
      counts += A.row(j).transpose() / d;
    }
    Eigen::VectorXd next = w.cwiseProduct(counts);
    next[0] += lambda0;
    return Eigen::VectorXd(next / mass);
  };

  auto gradient = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd mix = A * w;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
    for (long j = 0; j < n; ++j) {
      if (mix[j] > 0.0) g += A.row(j).transpose() / mix[j];
    }
    if (lambda0 > 0.0 && w[0] > 0.0) g[0] += lambda0 / w[0];
    return g;
  };

  auto kkt_residual = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd g = gradient(w);
    double res = 0.0;
    for (int k = 0; k < m; ++k) {
      res = std::max(res, std::max(g[k] - mass, 0.0) / mass);
      res = std::max(res, w[k] * std::abs(g[k] - mass) / mass);
    }
    return res;
  };

  // Newton phase on the current support: maximize over the face spanned by
  // components with meaningful weight, keeping sum(pi) = 1.  Quadratically
  // convergent where EM's mass-trading modes are slowest.
  auto newton_polish = [&](Eigen::VectorXd& w) {
    for (int round = 0; round < 30; ++round) {
      Eigen::VectorXd g_entry = gradient(w);
      std::vector<int> support;
      for (int k = 0; k < m; ++k) {
        bool entering = g_entry[k] > mass * (1.0 + 1e-12);
        if (w[k] > 1e-12 || entering || (k == 0 && lambda0 > 0.0)) {
          support.push_back(k);
          if (entering && w[k] < 1e-10) w[k] = 1e-10;  // seed re-entrants
        }
      }
      w /= w.sum();
      const int ns = static_cast<int>(support.size());
      if (ns < 2) return;
      Eigen::VectorXd mix = A * w;
      Eigen::VectorXd g_full = gradient(w);
      Eigen::VectorXd g(ns);
      for (int i = 0; i < ns; ++i) g[i] = g_full[support[i]];

      Eigen::MatrixXd As(n, ns);
      for (int i = 0; i < ns; ++i) As.col(i) = A.col(support[i]);
      Eigen::VectorXd inv_mix(n);
      for (long j = 0; j < n; ++j) inv_mix[j] = mix[j] > 0.0 ? 1.0 / mix[j] : 0.0;
      Eigen::MatrixXd H = (As.array().colwise() * inv_mix.array()).matrix().transpose() *
                          (As.array().colwise() * inv_mix.array()).matrix();
      if (lambda0 > 0.0 && support[0] == 0 && w[0] > 0.0) {
        H(0, 0) += lambda0 / (w[0] * w[0]);
      }
      H.diagonal().array() += 1e-10 * (1.0 + H.trace() / ns);

      Eigen::LLT<Eigen::MatrixXd> llt(H);
      if (llt.info() != Eigen::Success) return;
      Eigen::VectorXd hg = llt.solve(g);
      Eigen::VectorXd h1 = llt.solve(Eigen::VectorXd::Ones(ns));
      double nu = h1.sum() > 0.0 ? hg.sum() / h1.sum() : 0.0;
      Eigen::VectorXd delta = hg - nu * h1;
      if (!delta.allFinite() || delta.norm() < 1e-16) return;

      double alpha = 1.0;
      for (int i = 0; i < ns; ++i) {
        if (delta[i] < 0.0) alpha = std::min(alpha, -0.99 * w[support[i]] / delta[i]);
      }
      double f0 = objective(w);
      Eigen::VectorXd trial = w;
      bool improved = false;
      for (int bt = 0; bt < 40; ++bt) {
        for (int i = 0; i < ns; ++i) {
          trial[support[i]] = std::max(w[support[i]] + alpha * delta[i], 0.0);
        }
        if (objective(trial) > f0) {
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) return;
      w = trial;
      w /= w.sum();
      if (kkt_residual(w) < kkt_tol) return;
    }
  };

  PiStepResult out;
  double best_obj = objective(pi);
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    out.kkt_residual = kkt_residual(pi);
    if (out.kkt_residual < kkt_tol) {
      out.iterations = cycle;
      out.prior.pi = pi / pi.sum();
      return out;
    }
    Eigen::VectorXd x1 = em(pi);
    Eigen::VectorXd x2 = em(x1);
    Eigen::VectorXd r = x1 - pi;
    Eigen::VectorXd v = x2 - x1 - r;
    double vn = v.norm();
    Eigen::VectorXd candidate = x2;
    if (vn > 0.0) {
      double alpha = -r.norm() / vn;
      alpha = std::min(alpha, -1.0);
      Eigen::VectorXd extrap = pi - 2.0 * alpha * r + alpha * alpha * v;
      extrap = extrap.cwiseMax(0.0);  // project back onto the simplex
      if (extrap.sum() > 0.0) {
        extrap /= extrap.sum();
        extrap = em(extrap);  // stabilizing sweep keeps the iterate interior
        if (objective(extrap) >= objective(x2)) candidate = extrap;
      }
    }
    double cand_obj = objective(candidate);
    if (cand_obj < best_obj - 1e-9 * (1.0 + std::abs(best_obj))) {
      candidate = x1;  // safeguard: plain EM never decreases the objective
      cand_obj = objective(candidate);
    }
    best_obj = std::max(best_obj, cand_obj);
    pi = candidate;
    if (cycle >= 10 && cycle % 10 == 0) {
      newton_polish(pi);
      best_obj = std::max(best_obj, objective(pi));
    }
  }
  out.iterations = max_cycles;
  out.converged = false;
  out.kkt_residual = kkt_residual(pi);
  out.prior.pi = pi / pi.sum();
  return out;
}

/// Component likelihood matrix a_jk = max(alpha_jk, 0).  All-zero rows (only
/// reachable through floating underflow) are dropped and counted so the EM
/// normalizer stays consistent.
inline Eigen::MatrixXd component_matrix(const KernelTable& table, const Eigen::VectorXd& omega,
                                        long* dropped) {
  const long n = table.rows();
  const int K = table.components();
  Eigen::MatrixXd A(n, K + 1);
  long kept = 0;
  for (long j = 0; j < n; ++j) {
    for (int k = 0; k <= K; ++k) A(kept, k) = std::max(table.alpha(j, k, omega), 0.0);
    if (A.row(kept).maxCoeff() > 0.0) ++kept;
  }
  *dropped = n - kept;
  A.conservativeResize(kept, Eigen::NoChange);
  return A;
}

}  // namespace detail

/// Convex weight step: maximizes the penalized mixture likelihood over the
/// simplex for fixed omega.  Rows whose component likelihoods are all zero
/// (possible only through floating underflow) are dropped with a count.
inline PiStepResult pi_step(const KernelTable& table, const NoiseCoefficients& coef,
                            double lambda0, const Eigen::VectorXd& init_pi,
                            double kkt_tol = 1e-8) {
  if (coef.max_order() != table.max_order()) {
    throw std::invalid_argument("pi_step: omega/table order mismatch");
  }
  const int K = table.components();
  long dropped = 0;
  Eigen::MatrixXd A = detail::component_matrix(table, coef.omega, &dropped);
  Eigen::VectorXd pi = init_pi;
  if (pi.size() != K + 1 || (pi.array() < 0.0).any() || pi.sum() <= 0.0) {
    pi = Eigen::VectorXd::Constant(K + 1, 1.0 / (K + 1));
  } else {
    pi /= pi.sum();
  }
  // Keep the start strictly interior so no component is frozen at zero.
  pi = (pi.array() + 1e-8).matrix();
  pi /= pi.sum();
  auto out = detail::solve_simplex_weights(A, lambda0, pi, kkt_tol);
  out.dropped_rows = dropped;
  out.prior.sigma_grid = table.sigma_grid();
  return out;
}

inline PiStepResult pi_step(const Dataset& data, const NoiseCoefficients& coef,
                            const Eigen::VectorXd& sigma_grid, double lambda0,
                            const Eigen::VectorXd& init_pi, double kkt_tol = 1e-8) {
  return pi_step(KernelTable(data, sigma_grid, coef.max_order()), coef, lambda0, init_pi,
                 kkt_tol);
}

struct OmegaStepResult {
  NoiseCoefficients coefficients;
  EcnFitReport report;
};

/// Convex noise step: maximizes the penalized marginal likelihood over omega
/// for fixed prior weights, subject to the grid nonnegativity constraints.
/// `grid_rows` must be the constraint matrix for cfgrid (cached by fit_cash).
inline OmegaStepResult omega_step(const KernelTable& table, const MixturePrior& prior,
                                  const EcnPenalty& pen, const Eigen::MatrixXd& grid_rows,
                                  const NoiseCoefficients& init, double tol = 1e-8) {
  prior.validate();
  pen.validate();
  const long n = table.rows();
  const int L = pen.max_order;
  if (table.max_order() != L) throw std::invalid_argument("omega_step: order mismatch");

  // Likelihood rows: marginal_j(omega) = c_j (1 + e_j . omega) with
  // c_j = sum_k pi_k p_jk0 and e_jl = sum_k pi_k p_jkl / c_j.
  Eigen::MatrixXd E(n, L);
  double offset = 0.0;
  for (long j = 0; j < n; ++j) {
    double c = 0.0;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(L);
    for (int k = 0; k <= table.components(); ++k) {
      double w = prior.pi[k];
      if (w == 0.0) continue;
      const double* cell = table.row(j, k);
      c += w * cell[0];
      for (int l = 1; l <= L; ++l) d[l - 1] += w * cell[l];
    }
    if (!(c > 0.0)) throw std::runtime_error("omega_step: nonpositive base likelihood");
    E.row(j) = d / c;
    offset += std::log(c);
  }

  BarrierOptions opts;
  opts.tol = tol;
  BarrierSolver solver(E, grid_rows, pen.weights(), opts);
  Eigen::VectorXd start = init.omega.size() == L ? init.omega : Eigen::VectorXd::Zero(L);
  auto [omega, report] = solver.solve(start);
  OmegaStepResult out;
  out.coefficients = NoiseCoefficients(omega);
  out.report = detail::to_ecn_report(report, offset);
  return out;
}

inline OmegaStepResult omega_step(const Dataset& data, const MixturePrior& prior,
                                  const EcnPenalty& pen, const ConstraintGrid& grid,
                                  const NoiseCoefficients& init, double tol = 1e-8) {
  KernelTable table(data, prior.sigma_grid, pen.max_order);
  return omega_step(table, prior, pen, constraint_grid_matrix(grid, pen.max_order), init, tol);
}

struct CashFit {
  MixturePrior prior;
  NoiseCoefficients omega;
  KernelTable table;
  std::vector<double> trace;  // penalized objective after each outer iteration
  bool converged = false;
  int outer_iterations = 0;
  long floored_rows = 0;
  long dropped_rows = 0;

  double objective() const { return trace.empty() ? 0.0 : trace.back(); }
};

namespace detail {

inline double penalized_objective(const KernelTable& table, const MixturePrior& prior,
                                  const NoiseCoefficients& coef, const EcnPenalty& pen,
                                  double lambda0, long* floored = nullptr) {
  LoglikResult ll = marginal_loglik(prior, coef, table);
  if (floored) *floored = ll.floored;
  double val = ll.value;
  if (lambda0 > 0.0) val += lambda0 * std::log(std::max(prior.pi[0], 1e-300));
  val -= pen.weights().dot(coef.omega.cwiseAbs());
  return val;
}

}  // namespace detail

/// Alternating maximization of the penalized marginal likelihood.  The trace
/// is nondecreasing: a half-step that fails to improve the exact objective is
/// discarded in favor of the incumbent.
inline CashFit fit_cash(const Dataset& data, const CashConfig& cfg = {}) {
  data.validate();
  cfg.validate();
  if (data.size() < 50) {
    throw std::invalid_argument("fit_cash: need at least 50 observations, got " +
                                std::to_string(data.size()));
  }
  Eigen::VectorXd sigma = cfg.sigma_override ? *cfg.sigma_override : default_sigma_grid(data);
  const int L = cfg.penalty.max_order;

  CashFit fit;
  fit.table = KernelTable(data, sigma, L);
  fit.omega = NoiseCoefficients::zero(L);

  Eigen::MatrixXd grid_rows = constraint_grid_matrix(cfg.grid, L);
  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(sigma.size() + 1, 1.0 / (sigma.size() + 1));

  auto pi0_result = pi_step(fit.table, fit.omega, cfg.lambda0, uniform, cfg.pi_kkt_tol);
  fit.prior = pi0_result.prior;
  fit.dropped_rows += pi0_result.dropped_rows;

  double current =
      detail::penalized_objective(fit.table, fit.prior, fit.omega, cfg.penalty, cfg.lambda0,
                                  &fit.floored_rows);
  fit.trace.push_back(current);

  for (int iter = 0; iter < cfg.max_outer_iters; ++iter) {
    fit.outer_iterations = iter + 1;

    auto om = omega_step(fit.table, fit.prior, cfg.penalty, grid_rows, fit.omega, cfg.ecn_tol);
    double with_omega = detail::penalized_objective(fit.table, fit.prior, om.coefficients,
                                                    cfg.penalty, cfg.lambda0);
    if (with_omega > current) {
      fit.omega = om.coefficients;
      current = with_omega;
    }

    auto ps = pi_step(fit.table, fit.omega, cfg.lambda0, fit.prior.pi, cfg.pi_kkt_tol);
    fit.dropped_rows = ps.dropped_rows;
    double with_pi = detail::penalized_objective(fit.table, ps.prior, fit.omega, cfg.penalty,
                                                 cfg.lambda0);
    if (with_pi > current) {
      fit.prior = ps.prior;
      current = with_pi;
    }

    double prev = fit.trace.back();
    fit.trace.push_back(current);
    double rel_change = (current - prev) / std::max(1.0, std::abs(current));
    if (rel_change < cfg.outer_tol) {
      fit.converged = true;
      break;
    }
  }
  detail::penalized_objective(fit.table, fit.prior, fit.omega, cfg.penalty, cfg.lambda0,
                              &fit.floored_rows);
  return fit;
}

/// Central-spread diagnostic sqrt(1 + sqrt(2) omega_2); NaN (flagged by the
/// caller via isnan) when the implied second moment is negative.
inline double fitted_noise_sd(const NoiseCoefficients& coef) {
  if (coef.max_order() < 2) return 1.0;
  double second_moment = 1.0 + std::numbers::sqrt2 * coef.omega[1];
  if (second_moment < 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(second_moment);
}

inline double fitted_noise_sd(const CashFit& fit) { return fitted_noise_sd(fit.omega); }

}  // namespace ecns
