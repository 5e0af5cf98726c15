#pragma once

// Posterior functionals of a fitted model: shrinkage means, local false
// discovery/sign rates, and their cumulative-mean tail summaries (q- and
// s-values).  All quantities are ratios of mixture sums built from the p, m
// and tau convolution cells; negative per-component likelihood contributions
// (possible between constraint-grid points) are floored at zero before any
// ratio is formed, and every clamp is counted.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ecnshrink/cash.hpp"
#include "ecnshrink/gdbasis.hpp"

namespace ecns {

struct PosteriorSummary {
  Eigen::VectorXd post_mean;
  Eigen::VectorXd lfdr;
  Eigen::VectorXd qvalue;
  Eigen::VectorXd lfsr;
  Eigen::VectorXd svalue;
  long floored_components = 0;  // alpha_jk < 0 lifted to 0
  long floored_denominators = 0;
  long renormalized = 0;  // sign-probability triples that needed rescaling
};

namespace detail {

struct ComponentSums {
  double denom = 0.0;           // sum_k pi_k max(alpha_jk, 0)
  double null_part = 0.0;       // pi_0 max(alpha_j0, 0)
  double mean_part = 0.0;       // sum_k pi_k m-sums over surviving components
  double pos_part = 0.0;        // sum_{k>=1} pi_k tau-sums, floored at 0
  long floored_components = 0;
  bool floored_denom = false;
};

inline ComponentSums component_sums(const CashFit& fit, const Dataset& data, long j,
                                    bool with_mean, bool with_sign) {
  const auto& table = fit.table;
  const auto& omega = fit.omega.omega;
  const int K = table.components();
  const int L = table.max_order();
  ComponentSums out;
  for (int k = 0; k <= K; ++k) {
    double pik = fit.prior.pi[k];
    double alpha = table.alpha(j, k, omega);
    if (alpha < 0.0) {
      ++out.floored_components;
      continue;  // component contributes nothing, including to m and tau sums
    }
    out.denom += pik * alpha;
    if (k == 0) {
      out.null_part = pik * alpha;
      continue;  // point mass: zero posterior mean and sign mass
    }
    double sigma = table.sigma_grid()[k - 1];
    if (pik == 0.0) continue;
    if (with_mean) {
      double msum = conv_m({data.x[j], data.s[j], sigma, 0});
      for (int l = 1; l <= L; ++l) {
        msum += omega[l - 1] * conv_m({data.x[j], data.s[j], sigma, l});
      }
      out.mean_part += pik * msum;
    }
    if (with_sign) {
      double tsum = tail_tau({data.x[j], data.s[j], sigma, 0});
      for (int l = 1; l <= L; ++l) {
        tsum += omega[l - 1] * tail_tau({data.x[j], data.s[j], sigma, l});
      }
      out.pos_part += pik * std::max(tsum, 0.0);
    }
  }
  if (out.denom < kLikelihoodFloor) {
    out.denom = kLikelihoodFloor;
    out.floored_denom = true;
  }
  return out;
}

inline void check_fit(const CashFit& fit, const Dataset& data, const char* fn) {
  data.validate();
  fit.prior.validate();
  if (fit.table.rows() != data.size()) {
    throw std::invalid_argument(std::string(fn) + ": fit and data sizes differ");
  }
  if (fit.omega.max_order() != fit.table.max_order()) {
    throw std::invalid_argument(std::string(fn) + ": omega/table order mismatch");
  }
}

}  // namespace detail

inline Eigen::VectorXd posterior_mean(const CashFit& fit, const Dataset& data) {
  detail::check_fit(fit, data, "posterior_mean");
  Eigen::VectorXd out(data.size());
  parallel_for(data.size(), [&](long j) {
    auto sums = detail::component_sums(fit, data, j, true, false);
    out[j] = sums.mean_part / sums.denom;
  });
  return out;
}

inline Eigen::VectorXd lfdr(const CashFit& fit, const Dataset& data) {
  detail::check_fit(fit, data, "lfdr");
  Eigen::VectorXd out(data.size());
  parallel_for(data.size(), [&](long j) {
    auto sums = detail::component_sums(fit, data, j, false, false);
    out[j] = std::clamp(sums.null_part / sums.denom, 0.0, 1.0);
  });
  return out;
}

/// Mean local false discovery rate over a discovery set.
inline double fdr_of_set(const Eigen::VectorXd& lfdr_values, const std::vector<int>& set) {
  if (set.empty()) throw std::invalid_argument("fdr_of_set: empty discovery set");
  double acc = 0.0;
  for (int j : set) acc += lfdr_values[j];
  return acc / static_cast<double>(set.size());
}

/// Cumulative means of the sorted input mapped back to the original order;
/// ties share the mean of the largest qualifying prefix.  This is the q-value
/// construction (and, applied to lfsr, the s-value construction).
inline Eigen::VectorXd cumulative_tail_means(const Eigen::VectorXd& local) {
  const long n = local.size();
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0L);
  std::stable_sort(order.begin(), order.end(),
                   [&](long a, long b) { return local[a] < local[b]; });
  Eigen::VectorXd out(n);
  double running = 0.0;
  long i = 0;
  while (i < n) {
    long block_end = i;
    while (block_end + 1 < n && local[order[block_end + 1]] == local[order[i]]) ++block_end;
    for (long t = i; t <= block_end; ++t) running += local[order[t]];
    double prefix_mean = running / static_cast<double>(block_end + 1);
    for (long t = i; t <= block_end; ++t) out[order[t]] = prefix_mean;
    i = block_end + 1;
  }
  return out;
}

inline Eigen::VectorXd q_values(const Eigen::VectorXd& lfdr_values) {
  for (long j = 0; j < lfdr_values.size(); ++j) {
    if (!(lfdr_values[j] >= 0.0 && lfdr_values[j] <= 1.0)) {
      throw std::invalid_argument("q_values: lfdr outside [0, 1]");
    }
  }
  return cumulative_tail_means(lfdr_values);
}

struct SignProbabilities {
  Eigen::VectorXd positive;
  Eigen::VectorXd negative;
  Eigen::VectorXd zero;
  long renormalized = 0;
};

inline SignProbabilities sign_probabilities(const CashFit& fit, const Dataset& data) {
  detail::check_fit(fit, data, "sign_probabilities");
  const long n = data.size();
  SignProbabilities out;
  out.positive.resize(n);
  out.negative.resize(n);
  out.zero.resize(n);
  std::vector<char> renorm(n, 0);
  parallel_for(n, [&](long j) {
    auto sums = detail::component_sums(fit, data, j, false, true);
    double zero = std::clamp(sums.null_part / sums.denom, 0.0, 1.0);
    double pos = std::clamp(sums.pos_part / sums.denom, 0.0, 1.0);
    double neg_raw = 1.0 - pos - zero;
    double neg = std::clamp(neg_raw, 0.0, 1.0);
    if (std::abs(neg - neg_raw) > 1e-8) {
      double total = pos + neg + zero;
      pos /= total;
      neg /= total;
      zero /= total;
      renorm[j] = 1;
    }
    out.positive[j] = pos;
    out.negative[j] = neg;
    out.zero[j] = zero;
  });
  for (char c : renorm) out.renormalized += c;
  return out;
}

struct LfsrSvalues {
  Eigen::VectorXd lfsr;
  Eigen::VectorXd svalue;
};

inline LfsrSvalues lfsr_s_values(const SignProbabilities& sp) {
  const long n = sp.positive.size();
  LfsrSvalues out;
  out.lfsr.resize(n);
  for (long j = 0; j < n; ++j) {
    out.lfsr[j] = std::clamp(
        std::min(sp.zero[j] + sp.negative[j], sp.zero[j] + sp.positive[j]), 0.0, 1.0);
  }
  out.svalue = cumulative_tail_means(out.lfsr);
  return out;
}

enum class DiscoveryCriterion { qvalue, svalue };

inline std::vector<int> discovery_set(const PosteriorSummary& summary, double level,
                                      DiscoveryCriterion criterion) {
  if (!(level > 0.0 && level < 1.0) && level != 1.0) {
    throw std::invalid_argument("discovery_set: level must lie in (0, 1]");
  }
  const Eigen::VectorXd& crit =
      criterion == DiscoveryCriterion::qvalue ? summary.qvalue : summary.svalue;
  std::vector<int> out;
  for (long j = 0; j < crit.size(); ++j) {
    if (crit[j] <= level) out.push_back(static_cast<int>(j));
  }
  return out;
}

/// One-pass computation of every posterior summary for a fit.
inline PosteriorSummary summarize_posterior(const CashFit& fit, const Dataset& data) {
  detail::check_fit(fit, data, "summarize_posterior");
  const long n = data.size();
  PosteriorSummary out;
  out.post_mean.resize(n);
  out.lfdr.resize(n);
  Eigen::VectorXd pos(n), neg(n);
  std::vector<long> floored(n, 0);
  std::vector<char> floored_denom(n, 0), renorm(n, 0);
  Eigen::VectorXd zero_renorm(n);
  parallel_for(n, [&](long j) {
    auto sums = detail::component_sums(fit, data, j, true, true);
    floored[j] = sums.floored_components;
    floored_denom[j] = sums.floored_denom;
    out.post_mean[j] = sums.mean_part / sums.denom;
    double zero = std::clamp(sums.null_part / sums.denom, 0.0, 1.0);
    out.lfdr[j] = zero;  // lfdr stays the raw clamped ratio
    double p = std::clamp(sums.pos_part / sums.denom, 0.0, 1.0);
    double neg_raw = 1.0 - p - zero;
    double ng = std::clamp(neg_raw, 0.0, 1.0);
    if (std::abs(ng - neg_raw) > 1e-8) {
      double total = p + ng + zero;
      p /= total;
      ng /= total;
      zero /= total;
      renorm[j] = 1;
    }
    zero_renorm[j] = zero;
    pos[j] = p;
    neg[j] = ng;
  });
  for (long j = 0; j < n; ++j) {
    out.floored_components += floored[j];
    out.floored_denominators += floored_denom[j];
    out.renormalized += renorm[j];
  }
  out.qvalue = q_values(out.lfdr);
  SignProbabilities sp;
  sp.positive = std::move(pos);
  sp.negative = std::move(neg);
  sp.zero = std::move(zero_renorm);
  auto ls = lfsr_s_values(sp);
  out.lfsr = std::move(ls.lfsr);
  out.svalue = std::move(ls.svalue);
  return out;
}

}  // namespace ecns
