#pragma once

// Shared randomized fixtures: feasible noise coefficients, mixture priors,
// and the marginal-likelihood quadrature oracle used across the model tests.

#include <cmath>
#include <utility>

#include <Eigen/Core>

#include "ecnshrink/cash.hpp"
#include "ecnshrink/ecn.hpp"
#include "ecnshrink/rng.hpp"
#include "support/oracles.hpp"
#include "support/quadrature.hpp"

namespace ecns::testing {

/// Random omega kept strictly feasible (density positive) by scaling back
/// until f >= margin * phi on a fine grid over [-10, 10].
inline Eigen::VectorXd random_feasible_omega(RngStream& rng, int max_order,
                                             double margin = 1e-3) {
  double sigma2 = 0.8 + 0.8 * rng.uniform();
  Eigen::VectorXd w = gaussian_decomposition(0.0, sigma2, max_order);
  for (int l = 0; l < max_order; ++l) w[l] += 0.05 * rng.normal();
  w *= 0.3 + 0.7 * rng.uniform();
  for (;;) {
    double worst = 1.0;
    for (double x = -10.0; x <= 10.0; x += 0.005) {
      Eigen::VectorXd r(max_order);
      basis_ratio_row(x, max_order, r);
      worst = std::min(worst, 1.0 + r.dot(w));
    }
    if (worst >= margin) return w;
    w *= 0.7;
  }
}

inline MixturePrior random_prior(RngStream& rng, int components) {
  MixturePrior prior;
  prior.sigma_grid.resize(components);
  double sigma = 0.1 + 0.4 * rng.uniform();
  for (int k = 0; k < components; ++k) {
    prior.sigma_grid[k] = sigma;
    sigma *= 1.5 + rng.uniform();
  }
  prior.pi.resize(components + 1);
  for (int k = 0; k <= components; ++k) prior.pi[k] = rng.uniform();
  prior.pi[0] += 1.0;  // keep a solid null weight
  prior.pi /= prior.pi.sum();
  return prior;
}

/// Marginal density of one observation by quadrature over theta:
///   pi_0 f(x/s)/s + sum_k pi_k \int N(theta; 0, sigma_k^2) f((x-theta)/s)/s.
inline double quad_marginal(const MixturePrior& prior, const NoiseCoefficients& coef,
                            double x, double s) {
  double total = prior.pi[0] * ecn_density(coef, x / s) / s;
  for (int k = 0; k < prior.sigma_grid.size(); ++k) {
    double sigma = prior.sigma_grid[k];
    auto integrand = [&](double theta) {
      return ref_norm_pdf(theta / sigma) / sigma * ecn_density(coef, (x - theta) / s) / s;
    };
    double lo = std::max(-12.0 * sigma, x - 12.0 * s);
    double hi = std::min(12.0 * sigma, x + 12.0 * s);
    if (lo < hi) total += prior.pi[k + 1] * integrate(integrand, lo, hi, 1e-14, 1e-11);
  }
  return total;
}

inline Dataset simulated_dataset(RngStream& rng, long p, double pi0, double effect_sd,
                                 double rho = 0.0) {
  Dataset data;
  data.x.resize(p);
  data.s = Eigen::VectorXd::Ones(p);
  double eta = rng.normal();
  for (long j = 0; j < p; ++j) {
    double theta = (rng.uniform() < pi0) ? 0.0 : effect_sd * rng.normal();
    double z = rho > 0.0 ? std::sqrt(rho) * eta + std::sqrt(1.0 - rho) * rng.normal()
                         : rng.normal();
    data.x[j] = theta + z;
  }
  return data;
}

}  // namespace ecns::testing
