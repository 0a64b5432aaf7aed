#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "margeff/error.hpp"
#include "margeff/linmod.hpp"
#include "margeff/stats.hpp"
#include "oracles.hpp"

using namespace margeff;

namespace {

DesignData random_design(std::size_t n, std::size_t p, bool binary, unsigned seed,
                         std::vector<double> beta = {}) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (beta.empty()) beta.assign(p, 0.5);
  DesignData d{Matrix(n, p), std::vector<double>(n), {}};
  for (std::size_t i = 0; i < n; ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      d.features(i, j) = j == 0 ? 1.0 : z(gen);
      eta += beta[j] * d.features(i, j);
    }
    d.response[i] = binary ? (u(gen) < expit(eta) ? 1.0 : 0.0) : eta + z(gen);
  }
  return d;
}

// Gauss-Jordan inversion of a small dense matrix.
std::vector<std::vector<double>> invert(std::vector<std::vector<double>> a) {
  const std::size_t p = a.size();
  std::vector<std::vector<double>> inv(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = a[c][c];
    for (std::size_t k = 0; k < p; ++k) a[c][k] /= d, inv[c][k] /= d;
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double m = a[r][c];
      for (std::size_t k = 0; k < p; ++k) a[r][k] -= m * a[c][k], inv[r][k] -= m * inv[c][k];
    }
  }
  return inv;
}

double scaled_score_norm(const DesignData& d, const std::vector<double>& b) {
  const auto g = logistic_score(d, b);
  double worst = 0.0;
  for (std::size_t j = 0; j < d.cols(); ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < d.rows(); ++i) ss += d.features(i, j) * d.features(i, j);
    worst = std::max(worst, std::fabs(g[j]) / std::sqrt(ss));
  }
  return worst;
}

DesignData two_group(int treated_events, int treated_n, int control_events, int control_n) {
  const std::size_t n = static_cast<std::size_t>(treated_n + control_n);
  DesignData d{Matrix(n, 2), std::vector<double>(n, 0.0), {}};
  std::size_t row = 0;
  for (int i = 0; i < treated_n; ++i, ++row) {
    d.features(row, 0) = 1.0;
    d.features(row, 1) = 1.0;
    d.response[row] = i < treated_events ? 1.0 : 0.0;
  }
  for (int i = 0; i < control_n; ++i, ++row) {
    d.features(row, 0) = 1.0;
    d.response[row] = i < control_events ? 1.0 : 0.0;
  }
  return d;
}

}  // namespace

TEST_CASE("intercept-only logistic fit on a balanced response") {
  DesignData d{Matrix(10, 1, 1.0), {1, 1, 1, 1, 1, 0, 0, 0, 0, 0}, {}};
  const GlmFit f = fit_logistic(d);
  CHECK(f.converged);
  CHECK(std::fabs(f.coefficients[0]) < 1e-12);
  CHECK(f.log_likelihood == doctest::Approx(-10.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("saturated two-group logistic model reproduces the group log odds") {
  const GlmFit f = fit_logistic(two_group(6, 10, 4, 10));
  CHECK(f.coefficients[1] == doctest::Approx(logit(0.6) - logit(0.4)).epsilon(1e-12));
  CHECK(std::fabs(f.coefficients[1] - 0.8109302162163288) < 1e-10);
  CHECK(std::fabs(f.coefficients[0] - logit(0.4)) < 1e-10);

  const GlmFit g = fit_logistic(two_group(37, 113, 12, 87));
  CHECK(std::fabs(g.coefficients[1] - (logit(37.0 / 113) - logit(12.0 / 87))) < 1e-10);
}

TEST_CASE("logistic fit matches a brute-force likelihood maximizer on 12 rows") {
  for (unsigned seed : {11u, 12u, 13u}) {
    DesignData d = random_design(12, 2, true, seed, {0.2, 0.8});
    // keep the instance away from separation
    d.response[0] = 1.0;
    d.features(0, 1) = -1.5;
    d.response[1] = 0.0;
    d.features(1, 1) = 1.5;
    const GlmFit f = fit_logistic(d);
    const auto best = oracle::nelder_mead_min(
        [&](const std::vector<double>& b) { return -logistic_log_likelihood(d, b); }, 2);
    for (std::size_t j = 0; j < 2; ++j) {
      INFO("seed " << seed << " coefficient " << j);
      CHECK(std::fabs(f.coefficients[j] - best[j]) < 1e-5);
    }
    CHECK(f.log_likelihood >= logistic_log_likelihood(d, best) - 1e-12);
  }
}

TEST_CASE("score vanishes at the returned coefficients") {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const DesignData d = random_design(2000, 5, true, seed, {-1.0, 1.0, 1.0, 1.0, 1.05});
    const GlmFit f = fit_logistic(d);
    CHECK(f.converged);
    CHECK(f.final_gradient_norm <= 1e-8);
    CHECK(scaled_score_norm(d, f.coefficients) <= 1e-8);
  }
}

TEST_CASE("analytic score agrees with finite differences of the log-likelihood") {
  const DesignData d = random_design(300, 4, true, 77);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int point = 0; point < 10; ++point) {
    std::vector<double> b(4);
    for (auto& v : b) v = z(gen);
    const auto g = logistic_score(d, b);
    for (std::size_t j = 0; j < 4; ++j) {
      const double h = 1e-5;
      auto plus = b, minus = b;
      plus[j] += h;
      minus[j] -= h;
      const double fd =
          (logistic_log_likelihood(d, plus) - logistic_log_likelihood(d, minus)) / (2.0 * h);
      CHECK(std::fabs(fd - g[j]) <= 1e-5 * std::max(1.0, std::fabs(g[j])));
    }
  }
}

TEST_CASE("perturbing the optimum never increases the log-likelihood") {
  const DesignData d = random_design(500, 4, true, 3);
  const GlmFit f = fit_logistic(d);
  for (std::size_t j = 0; j < 4; ++j) {
    for (double delta : {-0.01, 0.01}) {
      auto b = f.coefficients;
      b[j] += delta;
      CHECK(logistic_log_likelihood(d, b) <= f.log_likelihood);
    }
  }
}

TEST_CASE("scaling all weights leaves coefficients unchanged") {
  DesignData d = random_design(400, 3, true, 9);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  d.weights.resize(d.rows());
  for (auto& w : d.weights) w = u(gen);
  const GlmFit base = fit_logistic(d);
  for (double c : {7.0, 1e-3, 250.0}) {
    DesignData scaled = d;
    for (auto& w : scaled.weights) w *= c;
    const GlmFit f = fit_logistic(scaled);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::fabs(f.coefficients[j] - base.coefficients[j]) <= 1e-10);
    CHECK(f.log_likelihood == doctest::Approx(c * base.log_likelihood).epsilon(1e-10));

    DesignData lin = scaled;
    const GlmFit l0 = fit_linear(d), l1 = fit_linear(lin);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::fabs(l0.coefficients[j] - l1.coefficients[j]) <= 1e-10);
  }
}

TEST_CASE("integer weights act as frequency weights") {
  DesignData d = random_design(60, 3, true, 21);
  d.weights.assign(d.rows(), 1.0);
  for (std::size_t i = 0; i < d.rows(); i += 3) d.weights[i] = 2.0;
  for (std::size_t i = 1; i < d.rows(); i += 7) d.weights[i] = 0.0;

  DesignData expanded{Matrix(0, 0), {}, {}};
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (int k = 0; k < static_cast<int>(d.weights[i]); ++k) rows.push_back(i);
  expanded.features = Matrix(rows.size(), 3);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < 3; ++j) expanded.features(r, j) = d.features(rows[r], j);
    expanded.response.push_back(d.response[rows[r]]);
  }
  const GlmFit a = fit_logistic(d), b = fit_logistic(expanded);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::fabs(a.coefficients[j] - b.coefficients[j]) < 1e-9);
}

TEST_CASE("complete separation is reported as non-convergence") {
  DesignData d{Matrix(8, 2), {0, 0, 0, 0, 1, 1, 1, 1}, {}};
  for (std::size_t i = 0; i < 8; ++i) {
    d.features(i, 0) = 1.0;
    d.features(i, 1) = static_cast<double>(i) - 3.5;
  }
  try {
    fit_logistic(d);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonConvergence);
  }
}

TEST_CASE("collinear columns raise SingularDesign") {
  DesignData d = random_design(50, 3, true, 4);
  for (std::size_t i = 0; i < 50; ++i) d.features(i, 2) = 2.0 * d.features(i, 1);
  for (auto family : {Family::logistic, Family::linear}) {
    try {
      fit(family, d);
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SingularDesign);
    }
  }
}

TEST_CASE("validation of design data") {
  DesignData d = random_design(10, 2, true, 1);
  d.response.pop_back();
  CHECK_THROWS_AS(fit_logistic(d), Error);
  DesignData e = random_design(10, 2, true, 1);
  e.response[3] = 0.5;
  CHECK_THROWS_AS(fit_logistic(e), Error);
  DesignData w = random_design(10, 2, false, 1);
  w.weights.assign(10, 1.0);
  w.weights[2] = -1.0;
  CHECK_THROWS_AS(fit_linear(w), Error);
}

TEST_CASE("two-group least squares gives the difference in means") {
  DesignData d{Matrix(6, 2), {1.0, 2.0, 4.5, 0.5, 0.25, -1.0}, {}};
  for (std::size_t i = 0; i < 6; ++i) {
    d.features(i, 0) = 1.0;
    d.features(i, 1) = i < 3 ? 1.0 : 0.0;
  }
  const GlmFit f = fit_linear(d);
  CHECK(f.coefficients[1] == doctest::Approx(7.5 / 3.0 + 0.25 / 3.0).epsilon(1e-14));
  CHECK(f.coefficients[0] == doctest::Approx(-0.25 / 3.0).epsilon(1e-13));
}

TEST_CASE("weighted least squares matches an explicit normal-equations solve") {
  for (unsigned seed : {31u, 32u, 33u}) {
    DesignData d = random_design(10, 4, false, seed);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    d.weights.resize(10);
    for (auto& w : d.weights) w = u(gen);

    std::vector<std::vector<double>> xtwx(4, std::vector<double>(4, 0.0));
    std::vector<double> xtwy(4, 0.0);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t a = 0; a < 4; ++a) {
        xtwy[a] += d.weights[i] * d.features(i, a) * d.response[i];
        for (std::size_t b = 0; b < 4; ++b)
          xtwx[a][b] += d.weights[i] * d.features(i, a) * d.features(i, b);
      }
    const auto inv = invert(xtwx);
    const GlmFit f = fit_linear(d);
    for (std::size_t a = 0; a < 4; ++a) {
      double expected = 0.0;
      for (std::size_t b = 0; b < 4; ++b) expected += inv[a][b] * xtwy[b];
      CHECK(std::fabs(f.coefficients[a] - expected) <= 1e-10 * std::max(1.0, std::fabs(expected)));
    }

    std::vector<double> resid(10);
    const auto eta = linear_predictor(d.features, f.coefficients);
    for (std::size_t i = 0; i < 10; ++i) resid[i] = d.response[i] - eta[i];
    for (std::size_t j = 0; j < 4; ++j) {
      double g = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < 10; ++i) {
        g += d.weights[i] * d.features(i, j) * resid[i];
        ss += d.weights[i] * d.features(i, j) * d.features(i, j);
      }
      CHECK(std::fabs(g) / std::sqrt(ss) <= 1e-8);
    }
  }
}

TEST_CASE("predict_mean") {
  GlmFit zero{{0.0, 0.0, 0.0}, Family::logistic, true, 0, 0.0, 0.0};
  Matrix x(4, 3, 0.7);
  for (double p : predict_mean(zero, x)) CHECK(p == 0.5);

  GlmFit paper{{-1.0, 1.0, 1.0, 1.0, 1.0486}, Family::logistic, true, 0, 0.0, 0.0};
  Matrix subject(1, 5, 0.0);
  subject(0, 0) = 1.0;
  subject(0, 4) = 1.0;
  CHECK(predict_mean(paper, subject)[0] == doctest::Approx(0.5121475).epsilon(1e-6));

  const DesignData d = random_design(5, 3, false, 8);
  GlmFit lin{{0.3, -1.2, 2.5}, Family::linear, true, 0, 0.0, 0.0};
  GlmFit logi = lin;
  logi.family = Family::logistic;
  const auto pl = predict_mean(lin, d.features), pg = predict_mean(logi, d.features);
  for (std::size_t i = 0; i < 5; ++i) {
    const double eta = 0.3 - 1.2 * d.features(i, 1) + 2.5 * d.features(i, 2);
    CHECK(std::fabs(pl[i] - eta) <= 1e-12);
    CHECK(std::fabs(pg[i] - 1.0 / (1.0 + std::exp(-eta))) <= 1e-12);
  }

  CHECK_THROWS_AS(predict_mean(lin, Matrix(2, 4, 1.0)), Error);
}

TEST_CASE("solve_spd") {
  const std::vector<double> a{4, 2, 2, 3};
  const auto x = solve_spd(a, {2, 1}, 2, 1e-12);
  CHECK(x[0] == doctest::Approx(0.5));
  CHECK(std::fabs(x[1]) < 1e-15);
  CHECK_THROWS_AS(solve_spd({1, 1, 1, 1}, {1, 1}, 2, 1e-12), Error);
}
