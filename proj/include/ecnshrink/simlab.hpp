#pragma once

// Seeded simulation harness for the multiple-testing study: effect draws from
// the six non-null families, correlated marginally-N(0,1) noise from factor
// constructions, rescaled standard deviations, the Benjamini-Hochberg
// baseline, and per-scenario FDP/TDP bookkeeping.  Every draw is keyed by
// (seed, label, replicate), so batches are reproducible at any thread count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ecnshrink/cash.hpp"
#include "ecnshrink/posterior.hpp"
#include "ecnshrink/rng.hpp"

namespace ecns {

enum class EffectFamily { gaussian, near_gaussian, spiky, skew, flat_top, bimodal };

inline const char* to_string(EffectFamily f) {
  switch (f) {
    case EffectFamily::gaussian: return "Gaussian";
    case EffectFamily::near_gaussian: return "NearGaussian";
    case EffectFamily::spiky: return "Spiky";
    case EffectFamily::skew: return "Skew";
    case EffectFamily::flat_top: return "FlatTop";
    case EffectFamily::bimodal: return "Bimodal";
  }
  return "?";
}

inline EffectFamily effect_family_from_string(const std::string& s) {
  if (s == "Gaussian") return EffectFamily::gaussian;
  if (s == "NearGaussian") return EffectFamily::near_gaussian;
  if (s == "Spiky") return EffectFamily::spiky;
  if (s == "Skew") return EffectFamily::skew;
  if (s == "FlatTop") return EffectFamily::flat_top;
  if (s == "Bimodal") return EffectFamily::bimodal;
  throw std::invalid_argument("unknown effect family: " + s);
}

/// Mixture-of-Gaussians description of a non-null effect family.
struct EffectMixture {
  std::vector<double> weight;
  std::vector<double> mean;
  std::vector<double> sd;
};

inline EffectMixture effect_mixture(EffectFamily f) {
  switch (f) {
    case EffectFamily::gaussian:
      return {{1.0}, {0.0}, {2.0}};
    case EffectFamily::near_gaussian:
      return {{0.6, 0.4}, {0.0, 0.0}, {1.0, 3.0}};
    case EffectFamily::spiky:
      return {{0.4, 0.2, 0.4}, {0.0, 0.0, 0.0}, {0.5, 2.0, 3.0}};
    case EffectFamily::skew:
      return {{0.25, 0.25, 0.25, 0.25}, {-2.0, -1.0, 0.0, 1.0}, {2.0, 2.0, 1.0, 1.0}};
    case EffectFamily::flat_top:
      return {{0.5, 0.5}, {-1.5, 1.5}, {1.5, 1.5}};
    case EffectFamily::bimodal:
      return {{0.5, 0.5}, {-1.5, 1.5}, {1.0, 1.0}};
  }
  throw std::logic_error("unreachable");
}

struct NoiseModel {
  enum class Kind { iid, one_factor, equicorrelated, k_factor, pairs };
  Kind kind = Kind::iid;
  double rho = 0.5;               // one_factor / equicorrelated
  Eigen::VectorXd loadings;       // k_factor: shared loading per factor

  void validate() const {
    switch (kind) {
      case Kind::one_factor:
      case Kind::equicorrelated:
        if (!(rho > 0.0 && rho < 1.0)) {
          throw std::invalid_argument("NoiseModel: rho must lie in (0, 1)");
        }
        break;
      case Kind::k_factor: {
        if (loadings.size() == 0) {
          throw std::invalid_argument("NoiseModel: k_factor needs loadings");
        }
        if (loadings.squaredNorm() > 1.0) {
          throw std::invalid_argument("NoiseModel: factor loadings exceed unit variance");
        }
        break;
      }
      default:
        break;
    }
  }

  /// Average l-th moments of the pairwise correlations, for l = 1..max_order.
  Eigen::VectorXd correlation_moments(int max_order, long p) const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(max_order);
    double pairwise = 0.0;
    switch (kind) {
      case Kind::iid:
        return m;
      case Kind::one_factor:
      case Kind::equicorrelated:
        pairwise = rho;
        break;
      case Kind::k_factor:
        pairwise = loadings.squaredNorm();
        break;
      case Kind::pairs: {
        // Each variable is perfectly correlated with exactly one partner.
        for (int l = 1; l <= max_order; ++l) m[l - 1] = 1.0 / static_cast<double>(p - 1);
        return m;
      }
    }
    double acc = 1.0;
    for (int l = 1; l <= max_order; ++l) {
      acc *= pairwise;
      m[l - 1] = acc;
    }
    return m;
  }
};

struct Scenario {
  EffectFamily g1 = EffectFamily::gaussian;
  double pi0 = 0.9;
  long p = 2000;
  NoiseModel noise;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(pi0 > 0.0 && pi0 <= 1.0)) {
      throw std::invalid_argument("Scenario: pi0 must lie in (0, 1]");
    }
    if (p < 100) throw std::invalid_argument("Scenario: p must be at least 100");
    noise.validate();
  }
};

/// Effects theta_j: zero with probability pi0, otherwise one draw from g1.
inline Eigen::VectorXd sample_effects(const Scenario& scenario) {
  scenario.validate();
  RngStream rng(scenario.seed, "effects");
  EffectMixture mix = effect_mixture(scenario.g1);
  Eigen::VectorXd theta(scenario.p);
  for (long j = 0; j < scenario.p; ++j) {
    if (rng.uniform() < scenario.pi0) {
      theta[j] = 0.0;
      continue;
    }
    double u = rng.uniform();
    std::size_t c = 0;
    double acc = mix.weight[0];
    while (c + 1 < mix.weight.size() && u > acc) acc += mix.weight[++c];
    theta[j] = mix.mean[c] + mix.sd[c] * rng.normal();
  }
  return theta;
}

/// Correlated noise with exact N(0,1) marginals by construction.
inline Eigen::VectorXd sample_correlated_noise(const NoiseModel& model, long p,
                                               std::uint64_t seed) {
  model.validate();
  RngStream rng(seed, "noise");
  Eigen::VectorXd z(p);
  switch (model.kind) {
    case NoiseModel::Kind::iid:
      for (long j = 0; j < p; ++j) z[j] = rng.normal();
      break;
    case NoiseModel::Kind::one_factor:
    case NoiseModel::Kind::equicorrelated: {
      double eta = rng.normal();
      double a = std::sqrt(model.rho), b = std::sqrt(1.0 - model.rho);
      for (long j = 0; j < p; ++j) z[j] = a * eta + b * rng.normal();
      break;
    }
    case NoiseModel::Kind::k_factor: {
      Eigen::VectorXd eta(model.loadings.size());
      for (int t = 0; t < eta.size(); ++t) eta[t] = rng.normal();
      double shared = model.loadings.dot(eta);
      double resid = std::sqrt(1.0 - model.loadings.squaredNorm());
      for (long j = 0; j < p; ++j) z[j] = shared + resid * rng.normal();
      break;
    }
    case NoiseModel::Kind::pairs: {
      for (long j = 0; j + 1 < p; j += 2) {
        double v = rng.normal();
        z[j] = v;
        z[j + 1] = v;
      }
      if (p % 2 == 1) z[p - 1] = rng.normal();
      break;
    }
  }
  return z;
}

/// Log-normal standard deviations rescaled so that mean(s^2) = 1 exactly.
inline Eigen::VectorXd simulate_standard_deviations(long p, std::uint64_t seed) {
  if (p < 1) throw std::invalid_argument("simulate_standard_deviations: p must be positive");
  RngStream rng(seed, "sds");
  Eigen::VectorXd s(p);
  for (long j = 0; j < p; ++j) s[j] = std::exp(0.3 * rng.normal());
  s *= std::sqrt(static_cast<double>(p) / s.squaredNorm());
  return s;
}

/// Classical step-up procedure; returns indices of the rejected hypotheses in
/// increasing order.
inline std::vector<int> bh_procedure(const Eigen::VectorXd& pvalues, double level) {
  const long n = pvalues.size();
  for (long j = 0; j < n; ++j) {
    if (!(pvalues[j] >= 0.0 && pvalues[j] <= 1.0)) {
      throw std::invalid_argument("bh_procedure: p-value outside [0, 1]");
    }
  }
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0L);
  std::sort(order.begin(), order.end(),
            [&](long a, long b) { return pvalues[a] < pvalues[b]; });
  long cut = 0;
  for (long i = 1; i <= n; ++i) {
    if (pvalues[order[i - 1]] <= level * static_cast<double>(i) / static_cast<double>(n)) {
      cut = i;
    }
  }
  std::vector<int> rejected;
  rejected.reserve(cut);
  for (long i = 0; i < cut; ++i) rejected.push_back(static_cast<int>(order[i]));
  std::sort(rejected.begin(), rejected.end());
  return rejected;
}

struct MethodResult {
  std::string method;
  long discoveries = 0;
  long false_discoveries = 0;
  double fdp = 0.0;
  double tdp = 0.0;
  double runtime_seconds = 0.0;  // diagnostic only; never serialized
  std::string error;             // nonempty when the method failed
};

struct ScenarioResult {
  std::uint64_t seed = 0;
  double realized_noise_sd = 0.0;  // uncentered RMS of the realized z draw
  std::vector<MethodResult> methods;

  const MethodResult* find(const std::string& name) const {
    for (const auto& m : methods) {
      if (m.method == name) return &m;
    }
    return nullptr;
  }
};

namespace detail {

inline MethodResult score_discoveries(const std::string& name, const std::vector<int>& set,
                                      const Eigen::VectorXd& theta) {
  MethodResult out;
  out.method = name;
  out.discoveries = static_cast<long>(set.size());
  long nonnull = 0;
  for (long j = 0; j < theta.size(); ++j) nonnull += theta[j] != 0.0;
  long true_disc = 0;
  for (int j : set) true_disc += theta[j] != 0.0;
  out.false_discoveries = out.discoveries - true_disc;
  out.fdp = out.discoveries > 0
                ? static_cast<double>(out.false_discoveries) / static_cast<double>(out.discoveries)
                : 0.0;
  out.tdp = nonnull > 0 ? static_cast<double>(true_disc) / static_cast<double>(nonnull) : 0.0;
  return out;
}

}  // namespace detail

/// Simulates one data set and scores the three methods: the joint fit
/// ("cash"), the same fit with the noise coefficients frozen at zero
/// ("indep_ebnm"), and Benjamini-Hochberg ("bh").  A method failure is
/// recorded in its entry without aborting the others.
inline ScenarioResult run_scenario(const Scenario& scenario, double level,
                                   const CashConfig& cfg = {}) {
  scenario.validate();
  Eigen::VectorXd theta = sample_effects(scenario);
  Eigen::VectorXd z = sample_correlated_noise(scenario.noise, scenario.p, scenario.seed);
  Eigen::VectorXd s = simulate_standard_deviations(scenario.p, scenario.seed);

  Dataset data;
  data.x = theta + s.cwiseProduct(z);
  data.s = s;

  ScenarioResult result;
  result.seed = scenario.seed;
  result.realized_noise_sd = std::sqrt(z.squaredNorm() / static_cast<double>(scenario.p));

  auto timed = [&](const std::string& name, auto&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    MethodResult entry;
    try {
      std::vector<int> set = fn();
      entry = detail::score_discoveries(name, set, theta);
    } catch (const std::exception& e) {
      entry.method = name;
      entry.error = e.what();
    }
    entry.runtime_seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
    result.methods.push_back(std::move(entry));
  };

  timed("cash", [&] {
    auto fit = fit_cash(data, cfg);
    auto summary = summarize_posterior(fit, data);
    return discovery_set(summary, level, DiscoveryCriterion::qvalue);
  });
  timed("indep_ebnm", [&] {
    // Frozen omega = 0: the weight step alone solves the convex problem.
    Eigen::VectorXd sigma = cfg.sigma_override ? *cfg.sigma_override : default_sigma_grid(data);
    CashFit fit;
    fit.table = KernelTable(data, sigma, cfg.penalty.max_order);
    fit.omega = NoiseCoefficients::zero(cfg.penalty.max_order);
    Eigen::VectorXd uniform =
        Eigen::VectorXd::Constant(sigma.size() + 1, 1.0 / (sigma.size() + 1));
    auto ps = pi_step(fit.table, fit.omega, cfg.lambda0, uniform, cfg.pi_kkt_tol);
    fit.prior = ps.prior;
    fit.converged = ps.converged;
    auto summary = summarize_posterior(fit, data);
    return discovery_set(summary, level, DiscoveryCriterion::qvalue);
  });
  timed("bh", [&] {
    Eigen::VectorXd pvalues(scenario.p);
    for (long j = 0; j < scenario.p; ++j) {
      pvalues[j] = 2.0 * norm_cdf(-std::abs(data.x[j] / data.s[j]));
    }
    return bh_procedure(pvalues, level);
  });
  return result;
}

struct BatchSummaryRow {
  std::string method;
  double mean_fdp = 0.0;
  double median_fdp = 0.0;
  double p5_fdp = 0.0;
  double p95_fdp = 0.0;
  double rmse_fdp = 0.0;  // sqrt(mean[(FDP - level)^2])
  double mean_tdp = 0.0;
  long failures = 0;
};

namespace detail {

inline double quantile_type7(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  if (xs.size() == 1) return xs[0];
  double h = (xs.size() - 1) * q;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - lo) * (xs[hi] - xs[lo]);
}

}  // namespace detail

inline std::vector<BatchSummaryRow> summarize_batch(const std::vector<ScenarioResult>& results,
                                                    double level) {
  if (results.empty()) throw std::invalid_argument("summarize_batch: no results");
  std::vector<std::string> names;
  for (const auto& m : results.front().methods) names.push_back(m.method);
  std::vector<BatchSummaryRow> rows;
  for (const auto& name : names) {
    BatchSummaryRow row;
    row.method = name;
    std::vector<double> fdp;
    double tdp_sum = 0.0, se_sum = 0.0;
    for (const auto& r : results) {
      const MethodResult* m = r.find(name);
      if (m == nullptr || !m->error.empty()) {
        ++row.failures;
        continue;
      }
      fdp.push_back(m->fdp);
      tdp_sum += m->tdp;
      se_sum += (m->fdp - level) * (m->fdp - level);
    }
    if (!fdp.empty()) {
      double n = static_cast<double>(fdp.size());
      row.mean_fdp = std::accumulate(fdp.begin(), fdp.end(), 0.0) / n;
      row.median_fdp = detail::quantile_type7(fdp, 0.5);
      row.p5_fdp = detail::quantile_type7(fdp, 0.05);
      row.p95_fdp = detail::quantile_type7(fdp, 0.95);
      row.rmse_fdp = std::sqrt(se_sum / n);
      row.mean_tdp = tdp_sum / n;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ecns
