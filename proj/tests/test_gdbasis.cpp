#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ecnshrink/gdbasis.hpp"
#include "ecnshrink/rng.hpp"
#include "support/oracles.hpp"

using namespace ecns;
using ecns::testing::integrate;
using ecns::testing::quad_conv_m;
using ecns::testing::quad_conv_p;
using ecns::testing::quad_tail_tau;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("hermite recurrence", "[gdbasis]") {
  CHECK(hermite(0, 3.7) == 1.0);
  CHECK(hermite(2, 2.0) == 3.0);
  CHECK(hermite(3, 2.0) == 2.0);
  CHECK(hermite(1, -1.25) == -1.25);
  CHECK_THROWS_AS(hermite(-1, 0.0), std::invalid_argument);
}

TEST_CASE("phi derivatives and the order -1 convention", "[gdbasis]") {
  CHECK_THAT(phi_deriv(0, 0.0), WithinAbs(0.3989422804, 1e-10));
  CHECK(phi_deriv(1, 0.0) == 0.0);
  CHECK_THAT(phi_deriv(-1, 0.0), WithinAbs(0.5, 1e-15));
}

TEST_CASE("standardized derivatives", "[gdbasis]") {
  // phi''(0)/sqrt(2) = -phi(0)/sqrt(2); value frozen from the closed form and
  // cross-checked below by finite differences.
  CHECK_THAT(std_phi_deriv(2, 0.0), WithinAbs(-0.2820947918, 1e-10));
  CHECK_THAT(std_phi_deriv(0, 1.5), WithinAbs(norm_pdf(1.5), 1e-15));
  CHECK_THAT(std_phi_deriv(0, 1.5), WithinAbs(0.1295176, 1e-7));
  // h_4(0) phi(0)/sqrt(24) = 3 phi(0)/sqrt(24)
  CHECK_THAT(std_phi_deriv(4, 0.0), WithinAbs(0.24430126, 1e-7));
  auto fd4 = [](double x, double h) {
    return (norm_pdf(x + 2 * h) - 4 * norm_pdf(x + h) + 6 * norm_pdf(x) -
            4 * norm_pdf(x - h) + norm_pdf(x - 2 * h)) / (h * h * h * h);
  };
  CHECK_THAT(std_phi_deriv(4, 0.0), WithinAbs(fd4(0.0, 0.01) / sqrt_factorial(4), 1e-4));

  // Finite-difference cross-check of the two frozen values.
  const double h = 1e-4;
  auto fd2 = (norm_pdf(h) - 2 * norm_pdf(0.0) + norm_pdf(-h)) / (h * h);
  CHECK_THAT(std_phi_deriv(2, 0.0), WithinAbs(fd2 / std::sqrt(2.0), 1e-7));
}

TEST_CASE("derivative identity under central differences", "[gdbasis]") {
  // Fourth-order central stencil: at orders near 10 the plain two-point
  // difference carries h^2 phi^(l+2)/6 truncation error above 1e-6 itself.
  const double h = 1e-4;
  for (int l = 0; l <= 10; ++l) {
    for (double x = -8.0; x <= 8.0; x += 0.5) {
      double fd = (-phi_deriv(l - 1, x + 2 * h) + 8 * phi_deriv(l - 1, x + h) -
                   8 * phi_deriv(l - 1, x - h) + phi_deriv(l - 1, x - 2 * h)) /
                  (12 * h);
      REQUIRE_THAT(phi_deriv(l, x), WithinAbs(fd, 1e-6));
    }
  }
}

TEST_CASE("orthonormality of the standardized family", "[gdbasis]") {
  for (int m = 0; m <= 8; ++m) {
    for (int n = 0; n <= 8; ++n) {
      auto integrand = [&](double x) {
        return hermite(m, x) / sqrt_factorial(m) * std_phi_deriv(n, x);
      };
      double got = integrate(integrand, -12.0, 12.0, 1e-12, 1e-12);
      double expected = (m == n) ? ((n % 2 == 0) ? 1.0 : -1.0) : 0.0;
      REQUIRE_THAT(got, WithinAbs(expected, 1e-8));
    }
  }
}

TEST_CASE("conv_p closed form", "[gdbasis]") {
  CHECK_THAT(conv_p({0.0, 1.0, 1.0, 0}), WithinAbs(0.2820948, 1e-7));
  CHECK_THAT(conv_p({0.0, 1.0, 1.0, 1}), WithinAbs(0.0, 1e-15));
  CHECK_THAT(conv_p({1.3, 0.8, 1.1, 2}),
             WithinRel(quad_conv_p(1.3, 0.8, 1.1, 2), 1e-8));
  // sigma = 0 is the delta-prior limit.
  CHECK_THAT(conv_p({0.7, 0.5, 0.0, 3}),
             WithinRel(phi_deriv(3, 1.4) / (0.5 * sqrt_factorial(3)), 1e-14));
  CHECK_THROWS_AS(conv_p({0.0, 0.0, 1.0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(conv_p({0.0, -1.0, 1.0, 0}), std::invalid_argument);
}

TEST_CASE("conv_m closed form", "[gdbasis]") {
  CHECK(conv_m({0.0, 1.0, 1.0, 0}) == 0.0);
  CHECK(conv_m({3.1, 0.7, 0.0, 4}) == 0.0);
  double oracle = quad_conv_m(2.0, 1.0, 1.5, 0);
  CHECK_THAT(conv_m({2.0, 1.0, 1.5, 0}), WithinRel(oracle, 1e-8));
  // Classical ridge form for l = 0: x sigma^2/(sigma^2+s^2) N(x; 0, sigma^2+s^2).
  double c2 = 2.25 + 1.0;
  double classical = 2.0 * 2.25 / c2 * norm_pdf(2.0 / std::sqrt(c2)) / std::sqrt(c2);
  CHECK_THAT(conv_m({2.0, 1.0, 1.5, 0}), WithinRel(classical, 1e-12));
  CHECK_THROWS_AS(conv_m({0.0, 0.0, 1.0, 0}), std::invalid_argument);
}

TEST_CASE("tail_tau closed form", "[gdbasis]") {
  CHECK_THAT(tail_tau({0.0, 1.0, 1.0, 0}), WithinAbs(0.1410474, 1e-7));
  CHECK_THAT(tail_tau({0.0, 1.0, 1.0, 0}), WithinRel(0.5 * conv_p({0.0, 1.0, 1.0, 0}), 1e-12));
  CHECK_THAT(tail_tau({1.5, 1.0, 2.0, 0}),
             WithinRel(quad_tail_tau(1.5, 1.0, 2.0, 0), 1e-8));
  CHECK_THAT(tail_tau({1.5, 1.0, 2.0, 3}),
             WithinRel(quad_tail_tau(1.5, 1.0, 2.0, 3), 1e-6));
  CHECK_THROWS_AS(tail_tau({1.0, 1.0, 0.0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(tail_tau({1.0, -1.0, 1.0, 0}), std::invalid_argument);
}

TEST_CASE("convolution kernels match quadrature on random cells", "[gdbasis]") {
  RngStream rng(2024, "conv-cells");
  for (int trial = 0; trial < 60; ++trial) {
    double x = -6.0 + 12.0 * rng.uniform();
    double s = 0.2 + 2.8 * rng.uniform();
    double sigma = 0.1 + 3.9 * rng.uniform();
    int l = static_cast<int>(rng.uniform_below(11));
    CAPTURE(x, s, sigma, l);
    ConvolutionCell cell{x, s, sigma, l};
    REQUIRE_THAT(conv_p(cell), WithinRel(quad_conv_p(x, s, sigma, l), 1e-6));
    REQUIRE_THAT(conv_m(cell), WithinRel(quad_conv_m(x, s, sigma, l), 1e-6));
    REQUIRE_THAT(tail_tau(cell), WithinRel(quad_tail_tau(x, s, sigma, l), 1e-6));
  }
}

TEST_CASE("half-line integrals sum to the full convolution", "[gdbasis]") {
  RngStream rng(77, "tau-completeness");
  for (int trial = 0; trial < 100; ++trial) {
    double x = -6.0 + 12.0 * rng.uniform();
    double s = 0.2 + 2.8 * rng.uniform();
    double sigma = 0.1 + 3.9 * rng.uniform();
    int l = static_cast<int>(rng.uniform_below(11));
    CAPTURE(x, s, sigma, l);
    double sign = (l % 2 == 0) ? 1.0 : -1.0;
    double whole = tail_tau({x, s, sigma, l}) + sign * tail_tau({-x, s, sigma, l});
    double p = conv_p({x, s, sigma, l});
    REQUIRE_THAT(whole, WithinRel(p, 1e-9) || WithinAbs(p, 1e-14));
  }
}

TEST_CASE("gaussian decomposition coefficients", "[gdbasis]") {
  auto w0 = gaussian_decomposition(0.0, 1.0, 8);
  CHECK(w0.cwiseAbs().maxCoeff() == 0.0);

  auto w2 = gaussian_decomposition(0.0, 2.0, 4);
  CHECK_THAT(w2[0], WithinAbs(0.0, 1e-15));
  CHECK_THAT(w2[1], WithinAbs(0.70711, 1e-5));
  CHECK_THAT(w2[2], WithinAbs(0.0, 1e-15));
  CHECK_THAT(w2[3], WithinAbs(0.61237, 1e-5));

  auto wm = gaussian_decomposition(0.5, 1.0, 2);
  CHECK_THAT(wm[0], WithinAbs(-0.5, 1e-14));
  CHECK_THAT(wm[1], WithinAbs(0.17678, 1e-5));

  CHECK_THROWS_AS(gaussian_decomposition(0.0, 2.0001, 4), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_decomposition(0.0, 0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_decomposition(0.0, -1.0, 4), std::invalid_argument);
}

TEST_CASE("decomposition coefficients equal numerical Hermite moments", "[gdbasis]") {
  // w_l = ((-1)^l / sqrt(l!)) E[h_l] under N(mu, sigma2), by quadrature.
  for (auto [mu, sigma2] : {std::pair{0.0, 2.0}, {0.5, 1.0}, {-0.8, 1.3}}) {
    auto w = gaussian_decomposition(mu, sigma2, 6);
    for (int l = 1; l <= 6; ++l) {
      auto integrand = [&, mu = mu, sigma2 = sigma2](double t) {
        double sd = std::sqrt(sigma2);
        return hermite(l, t) * ecns::testing::ref_norm_pdf((t - mu) / sd) / sd;
      };
      double moment = integrate(integrand, mu - 14 * std::sqrt(sigma2),
                                mu + 14 * std::sqrt(sigma2), 1e-13, 1e-12);
      double sign = (l % 2 == 0) ? 1.0 : -1.0;
      REQUIRE_THAT(w[l - 1], WithinAbs(sign * moment / sqrt_factorial(l), 1e-9));
    }
  }
}

TEST_CASE("gaussian reconstruction from the truncated series", "[gdbasis]") {
  auto w = gaussian_decomposition(0.0, 1.44, 20);
  double sup = 0.0;
  for (double x = -6.0; x <= 6.0; x += 0.01) {
    double series = norm_pdf(x);
    for (int l = 1; l <= 20; ++l) series += w[l - 1] * std_phi_deriv(l, x);
    double exact = norm_pdf(x / 1.2) / 1.2;
    sup = std::max(sup, std::abs(series - exact));
  }
  CHECK(sup < 1e-3);
}

TEST_CASE("point mass coefficients", "[gdbasis]") {
  auto w0 = point_mass_coefficients(0.0, 2);
  CHECK(w0[0] == 0.0);
  CHECK_THAT(w0[1], WithinAbs(-1.0 / std::sqrt(2.0), 1e-15));

  auto w1 = point_mass_coefficients(1.0, 1);
  CHECK_THAT(w1[0], WithinAbs(-1.0, 1e-15));

  auto w2 = point_mass_coefficients(2.0, 3);
  CHECK_THAT(w2[0], WithinAbs(-2.0, 1e-15));
  CHECK_THAT(w2[1], WithinAbs(3.0 / std::sqrt(2.0), 1e-14));
  CHECK_THAT(w2[2], WithinAbs(-2.0 / std::sqrt(6.0), 1e-14));
}

TEST_CASE("ecdf covariance independence term", "[gdbasis]") {
  Eigen::VectorXd none = Eigen::VectorXd::Zero(10);
  CHECK_THAT(ecdf_covariance(0.0, 0.0, none, 100), WithinAbs(0.0025, 1e-15));
  CHECK_THROWS_AS(ecdf_covariance(0.0, 0.0, none, 1), std::invalid_argument);
}

TEST_CASE("ecdf covariance matches one-factor Monte Carlo", "[gdbasis][slow]") {
  // Equicorrelated draws via a shared factor; every pair is bivariate normal
  // with correlation rho, so rhobar^l = rho^l exactly.
  const double rho = 0.5;
  const long p = 2000;
  const int reps = 20000;
  RngStream rng(31, "ecdf-mc");
  std::vector<double> f0(reps), f1(reps);
  const double sr = std::sqrt(rho), sc = std::sqrt(1.0 - rho);
  for (int r = 0; r < reps; ++r) {
    double eta = rng.normal();
    int c0 = 0, c1 = 0;
    for (long j = 0; j < p; ++j) {
      double z = sr * eta + sc * rng.normal();
      c0 += z <= 0.0;
      c1 += z <= 1.0;
    }
    f0[r] = static_cast<double>(c0) / p;
    f1[r] = static_cast<double>(c1) / p;
  }
  Eigen::VectorXd moments(10);
  for (int l = 1; l <= 10; ++l) moments[l - 1] = std::pow(rho, l);

  auto var_of = [&](const std::vector<double>& f) {
    auto ms = ecns::testing::mean_with_se(f);
    double v = 0.0, m4 = 0.0;
    for (double x : f) {
      double d = x - ms.mean;
      v += d * d;
      m4 += d * d * d * d;
    }
    v /= (f.size() - 1);
    m4 /= f.size();
    double se = std::sqrt(std::max(m4 - v * v, 0.0) / f.size());
    return std::pair{v, se};
  };
  auto [v0, se0] = var_of(f0);
  REQUIRE_THAT(ecdf_covariance(0.0, 0.0, moments, p), WithinAbs(v0, 3 * se0));

  double mean0 = ecns::testing::mean_with_se(f0).mean;
  double mean1 = ecns::testing::mean_with_se(f1).mean;
  double cov = 0.0, m22 = 0.0;
  for (int r = 0; r < reps; ++r) {
    double a = f0[r] - mean0, b = f1[r] - mean1;
    cov += a * b;
    m22 += a * a * b * b;
  }
  cov /= (reps - 1);
  m22 /= reps;
  double se_cov = std::sqrt(std::max(m22 - cov * cov, 0.0) / reps);
  REQUIRE_THAT(ecdf_covariance(0.0, 1.0, moments, p), WithinAbs(cov, 3 * se_cov));
}

TEST_CASE("Mehler bivariate normal CDF identity", "[gdbasis][slow]") {
  const int n = 400000;
  for (double rho : {0.3, 0.7}) {
    RngStream rng(91, "mehler", static_cast<uint64_t>(rho * 10));
    const double sr = std::sqrt(rho), sc = std::sqrt(1.0 - rho);
    std::vector<std::pair<double, double>> zs(n);
    for (int i = 0; i < n; ++i) {
      double eta = rng.normal();
      zs[i] = {sr * eta + sc * rng.normal(), sr * eta + sc * rng.normal()};
    }
    for (double x : {-1.0, 0.0, 2.0}) {
      for (double y : {-1.0, 0.0, 2.0}) {
        double truncated = norm_cdf(x) * norm_cdf(y);
        for (int l = 1; l <= 25; ++l) {
          truncated += std::pow(rho, l) * (phi_deriv(l - 1, x) / sqrt_factorial(l)) *
                       (phi_deriv(l - 1, y) / sqrt_factorial(l));
        }
        int count = 0;
        for (auto& [zi, zj] : zs) count += (zi <= x && zj <= y);
        double est = static_cast<double>(count) / n;
        double se = std::sqrt(est * (1 - est) / n);
        CAPTURE(rho, x, y);
        REQUIRE_THAT(truncated, WithinAbs(est, 3 * se + 1e-12));
      }
    }
  }
}
