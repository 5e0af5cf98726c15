#pragma once

// Gaussian-derivative basis kernel.
//
// Everything here is built from the standard normal density phi and its
// derivatives phi^(l)(x) = (-1)^l h_l(x) phi(x), where h_l is the l-th
// probabilists' Hermite polynomial.  The standardized family
// phi^(l)/sqrt(l!) is orthonormal against the weight 1/phi, which is what
// makes the closed forms below work.  Order -1 denotes the antiderivative,
// i.e. phi^(-1) := Phi (the standard normal CDF).

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ecns {

inline constexpr int kMaxKernelOrder = 64;

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) * (1.0 / std::sqrt(2.0 * std::numbers::pi));
}

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace detail {

struct FactorialTables {
  double fact[kMaxKernelOrder + 2];
  double sqrt_fact[kMaxKernelOrder + 2];
  FactorialTables() {
    fact[0] = 1.0;
    for (int i = 1; i <= kMaxKernelOrder + 1; ++i) fact[i] = fact[i - 1] * i;
    for (int i = 0; i <= kMaxKernelOrder + 1; ++i) sqrt_fact[i] = std::sqrt(fact[i]);
  }
};

inline const FactorialTables& factorials() {
  static const FactorialTables t;
  return t;
}

inline void check_order(int order, const char* fn) {
  if (order < 0 || order > kMaxKernelOrder + 1) {
    throw std::invalid_argument(std::string(fn) + ": order " + std::to_string(order) +
                                " outside supported range [0, " +
                                std::to_string(kMaxKernelOrder + 1) + "]");
  }
}

}  // namespace detail

inline double factorial(int l) {
  detail::check_order(l, "factorial");
  return detail::factorials().fact[l];
}

inline double sqrt_factorial(int l) {
  detail::check_order(l, "sqrt_factorial");
  return detail::factorials().sqrt_fact[l];
}

/// l-th probabilists' Hermite polynomial via the three-term recurrence
/// h_{l+1}(x) = x h_l(x) - l h_{l-1}(x).
inline double hermite(int order, double x) {
  detail::check_order(order, "hermite");
  if (order == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int l = 1; l < order; ++l) {
    double next = x * cur - l * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// phi^(order)(x); order -1 returns Phi(x).
inline double phi_deriv(int order, double x) {
  if (order == -1) return norm_cdf(x);
  detail::check_order(order, "phi_deriv");
  double sign = (order % 2 == 0) ? 1.0 : -1.0;
  return sign * hermite(order, x) * norm_pdf(x);
}

/// Standardized derivative phi^(order)(x) / sqrt(order!).
inline double std_phi_deriv(int order, double x) {
  detail::check_order(order, "std_phi_deriv");
  return phi_deriv(order, x) / sqrt_factorial(order);
}

/// Fills out[l-1] = phi^(l)(x) / (sqrt(l!) phi(x)) = (-1)^l h_l(x)/sqrt(l!)
/// for l = 1..max_order.  These are the basis ratios r_l that appear in
/// f(x; omega)/phi(x) = 1 + sum_l omega_l r_l(x).
template <typename Out>
inline void basis_ratio_row(double x, int max_order, Out&& out) {
  detail::check_order(max_order, "basis_ratio_row");
  const auto& sf = detail::factorials().sqrt_fact;
  double prev = 1.0, cur = x, sign = -1.0;
  for (int l = 1; l <= max_order; ++l) {
    out[l - 1] = sign * cur / sf[l];
    double next = x * cur - l * prev;
    prev = cur;
    cur = next;
    sign = -sign;
  }
}

inline Eigen::VectorXd basis_ratios(double x, int max_order) {
  Eigen::VectorXd r(max_order);
  basis_ratio_row(x, max_order, r);
  return r;
}

/// One (observation, prior component, basis order) cell of the convolution
/// kernels: x is the observation, s > 0 its noise scale, sigma >= 0 the
/// zero-mean Gaussian prior scale (sigma = 0 is the point-mass limit).
struct ConvolutionCell {
  double x = 0.0;
  double s = 1.0;
  double sigma = 1.0;
  int order = 0;

  void validate(const char* fn, bool require_positive_sigma = false) const {
    if (!(s > 0.0)) {
      throw std::invalid_argument(std::string(fn) + ": noise scale s must be positive");
    }
    if (!(sigma >= 0.0)) {
      throw std::invalid_argument(std::string(fn) + ": prior scale sigma must be nonnegative");
    }
    if (require_positive_sigma && sigma == 0.0) {
      throw std::invalid_argument(std::string(fn) + ": prior scale sigma must be positive");
    }
    if (!std::isfinite(x) || !std::isfinite(s) || !std::isfinite(sigma)) {
      throw std::invalid_argument(std::string(fn) + ": cell values must be finite");
    }
    detail::check_order(order, fn);
  }
};

/// p cell value: the convolution of N(0, sigma^2) with the standardized
/// derivative kernel (1/s) phi^(order)((x - .)/s)/sqrt(order!),
///   p = (s/c)^order (1/c) phi^(order)(x/c)/sqrt(order!),  c^2 = sigma^2 + s^2.
/// sigma = 0 is the delta-prior limit (1/s) phi^(order)(x/s)/sqrt(order!).
inline double conv_p(const ConvolutionCell& cell) {
  cell.validate("conv_p");
  double c = std::hypot(cell.sigma, cell.s);
  return std::pow(cell.s / c, cell.order) / c * std_phi_deriv(cell.order, cell.x / c);
}

/// m cell value: same convolution with an extra theta factor,
///   m = -(sigma^2/c^2) (s/c)^order phi^(order+1)(x/c)/sqrt(order!).
inline double conv_m(const ConvolutionCell& cell) {
  cell.validate("conv_m");
  if (cell.sigma == 0.0) return 0.0;
  double c = std::hypot(cell.sigma, cell.s);
  double v = cell.sigma / c;
  return -v * v * std::pow(cell.s / c, cell.order) *
         phi_deriv(cell.order + 1, cell.x / c) / sqrt_factorial(cell.order);
}

/// tau cell value: the same convolution restricted to theta > 0.  Closed form
/// is a binomial sum (Leibniz differentiation of N(x; 0, c^2) Phi(x sigma/(s c)));
/// the m = 0 term uses phi^(-1) = Phi.
inline double tail_tau(const ConvolutionCell& cell) {
  cell.validate("tail_tau", /*require_positive_sigma=*/true);
  const int l = cell.order;
  double c = std::hypot(cell.sigma, cell.s);
  double u = cell.x / c;
  double a = cell.sigma / cell.s;
  double rs = cell.s / c;      // both ratios are in (0, 1)
  double rsig = cell.sigma / c;
  // Pascal-row binomials; l <= kMaxKernelOrder so plain doubles are exact.
  long double sum = 0.0L;
  double binom = 1.0;
  for (int m = 0; m <= l; ++m) {
    double term = binom * std::pow(rs, l - m) * std::pow(rsig, m) *
                  phi_deriv(m - 1, u * a) * phi_deriv(l - m, u);
    sum += term;
    binom = binom * (l - m) / (m + 1);
  }
  return static_cast<double>(sum) / (c * sqrt_factorial(l));
}

/// Hermite moment M_l(mu, y): E[h_l(Z)] for Z ~ N(mu, 1 + y), expressed as a
/// polynomial in mu and y = sigma^2 - 1.
inline double gaussian_hermite_moment(int l, double mu, double y) {
  detail::check_order(l, "gaussian_hermite_moment");
  double sum = std::pow(mu, l);
  double binom_even = 1.0;  // C(l, 2k)
  double dfact = 1.0;       // (2k - 1)!!
  for (int k = 1; 2 * k <= l; ++k) {
    binom_even *= static_cast<double>(l - 2 * k + 2) * (l - 2 * k + 1) / (2.0 * k * (2.0 * k - 1));
    dfact *= 2.0 * k - 1.0;
    sum += binom_even * std::pow(mu, l - 2 * k) * std::pow(y, k) * dfact;
  }
  return sum;
}

/// Coefficients w_1..w_L of N(mu, sigma2) in the standardized-derivative
/// basis: w_l = ((-1)^l / sqrt(l!)) M_l(mu, sigma2 - 1).  The coefficients
/// diverge for sigma2 > 2, so such inputs are rejected.
inline Eigen::VectorXd gaussian_decomposition(double mu, double sigma2, int max_order) {
  if (!(sigma2 > 0.0)) {
    throw std::invalid_argument("gaussian_decomposition: sigma2 must be positive");
  }
  if (sigma2 > 2.0) {
    throw std::invalid_argument(
        "gaussian_decomposition: sigma2 > 2 has no convergent expansion in this basis");
  }
  detail::check_order(max_order, "gaussian_decomposition");
  Eigen::VectorXd w(max_order);
  double sign = -1.0;
  for (int l = 1; l <= max_order; ++l) {
    w[l - 1] = sign * gaussian_hermite_moment(l, mu, sigma2 - 1.0) / sqrt_factorial(l);
    sign = -sign;
  }
  return w;
}

/// Coefficients of the point mass at z: w_l = ((-1)^l / sqrt(l!)) h_l(z).
inline Eigen::VectorXd point_mass_coefficients(double z, int max_order) {
  if (!std::isfinite(z)) {
    throw std::invalid_argument("point_mass_coefficients: z must be finite");
  }
  detail::check_order(max_order, "point_mass_coefficients");
  Eigen::VectorXd w(max_order);
  double sign = -1.0;
  for (int l = 1; l <= max_order; ++l) {
    w[l - 1] = sign * hermite(l, z) / sqrt_factorial(l);
    sign = -sign;
  }
  return w;
}

/// Covariance of the empirical CDF of p exchangeable marginally-N(0,1)
/// variables, truncated at the length of rho_moments:
///   cov(F_p(x), F_p(y)) = (1 - 1/p) sum_l rhobar^l [phi^(l-1)(x)/sqrt(l!)]
///                                               [phi^(l-1)(y)/sqrt(l!)]
///                       + (1/p) [Phi(min(x,y)) - Phi(x) Phi(y)],
/// where rho_moments[l-1] = rhobar^l, the average l-th moment of the pairwise
/// correlations.
inline double ecdf_covariance(double x, double y, const Eigen::VectorXd& rho_moments,
                              long p) {
  if (p < 2) throw std::invalid_argument("ecdf_covariance: p must be at least 2");
  double corr_part = 0.0;
  for (int l = 1; l <= rho_moments.size(); ++l) {
    corr_part += rho_moments[l - 1] *
                 (phi_deriv(l - 1, x) / sqrt_factorial(l)) *
                 (phi_deriv(l - 1, y) / sqrt_factorial(l));
  }
  double indep_part = norm_cdf(std::min(x, y)) - norm_cdf(x) * norm_cdf(y);
  double invp = 1.0 / static_cast<double>(p);
  return (1.0 - invp) * corr_part + invp * indep_part;
}

}  // namespace ecns
