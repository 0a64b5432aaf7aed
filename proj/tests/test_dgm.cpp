#include <doctest.h>

#include <cmath>
#include <vector>

#include "margeff/dgm.hpp"
#include "margeff/error.hpp"
#include "margeff/linmod.hpp"
#include "margeff/stats.hpp"

using namespace margeff;

namespace {

double column_mean(const Matrix& m, std::size_t c) {
  double s = 0.0;
  for (double v : m.col(c)) s += v;
  return s / static_cast<double>(m.rows());
}

DesignData full_design(const TrialData& t) {
  const std::size_t n = t.size(), k = t.covariates.cols();
  DesignData d{Matrix(n, k + 2), t.outcome, {}};
  for (std::size_t i = 0; i < n; ++i) {
    d.features(i, 0) = 1.0;
    for (std::size_t j = 0; j < k; ++j) d.features(i, j + 1) = t.covariates(i, j);
    d.features(i, k + 1) = t.treatment[i];
  }
  return d;
}

// Standard error of the last coefficient from the inverse observed information.
double last_coefficient_se(const DesignData& d, const GlmFit& f) {
  const std::size_t p = d.cols();
  const auto mu = predict_mean(f, d.features);
  std::vector<double> info(p * p, 0.0);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const double w = mu[i] * (1.0 - mu[i]);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) info[a * p + b] += w * d.features(i, a) * d.features(i, b);
  }
  std::vector<double> e(p, 0.0);
  e[p - 1] = 1.0;
  const auto col = solve_spd(info, e, p, 1e-14);
  return std::sqrt(col[p - 1]);
}

}  // namespace

TEST_CASE("paper presets") {
  const auto c = ScenarioConfig::paper_logistic();
  CHECK(c.family == Family::logistic);
  CHECK(c.n_per_study == 10000);
  CHECK(c.covariate_count() == 3);
  CHECK(c.beta0 == -1.0);
  CHECK(c.beta_t == 1.0486);
  CHECK_FALSE(c.has_interaction());
  CHECK(c.treated_count() == 5000);
  for (const auto& cv : c.covariates) {
    CHECK(cv.mean(Study::s1) == 0.0);
    CHECK(cv.mean(Study::s2) == -1.4);
    CHECK(cv.sd == 1.0);
  }
  CHECK(ScenarioConfig::paper_linear().family == Family::linear);
}

TEST_CASE("config validation") {
  auto c = ScenarioConfig::paper_logistic();
  c.covariates[1].sd = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ScenarioConfig::paper_logistic();
  c.beta_cov.pop_back();
  CHECK_THROWS_AS(c.validate(), Error);
  c = ScenarioConfig::paper_logistic();
  c.allocation_ratio = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ScenarioConfig::paper_linear();
  c.error_sd = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ScenarioConfig::paper_logistic();
  c.covariates.clear();
  c.beta_cov.clear();
  c.beta_interaction.clear();
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("config JSON round trip and optional fields") {
  auto c = ScenarioConfig::paper_logistic();
  c.beta_interaction = {0.0, 0.5, 0.0};
  const nlohmann::json j = c;
  const auto back = j.get<ScenarioConfig>();
  CHECK(back.beta_interaction == c.beta_interaction);
  CHECK(back.beta_t == c.beta_t);
  CHECK(back.covariates[2].mean_s2 == -1.4);

  nlohmann::json minimal = j;
  minimal.erase("beta_interaction");
  minimal.erase("error_sd");
  minimal.erase("allocation_ratio");
  const auto m = minimal.get<ScenarioConfig>();
  CHECK(m.beta_interaction == std::vector<double>(3, 0.0));
  CHECK(m.allocation_ratio == 0.5);

  nlohmann::json bad = j;
  bad["family"] = "poisson";
  CHECK_THROWS_AS(bad.get<ScenarioConfig>(), Error);
}

TEST_CASE("same stream gives a bit-identical trial") {
  const auto c = ScenarioConfig::paper_logistic();
  const StreamKey key{99, 4, StreamPurpose::trial_s1, 0};
  RandomStream a(key), b(key);
  CHECK(generate_trial(c, Study::s1, a) == generate_trial(c, Study::s1, b));
  RandomStream other(key.with(StreamPurpose::trial_s2));
  RandomStream again(key);
  CHECK_FALSE(generate_trial(c, Study::s1, other) == generate_trial(c, Study::s1, again));
}

TEST_CASE("exact treated count and binary outcomes") {
  auto c = ScenarioConfig::paper_logistic();
  c.n_per_study = 101;
  RandomStream rng(1);
  const auto t = generate_trial(c, Study::s2, rng);
  double treated = 0.0;
  for (double v : t.treatment) {
    CHECK((v == 0.0 || v == 1.0));
    treated += v;
  }
  CHECK(treated == static_cast<double>(c.treated_count()));
  CHECK(c.treated_count() == 51);
  for (double y : t.outcome) CHECK((y == 0.0 || y == 1.0));
  CHECK(t.study == Study::s2);
}

TEST_CASE("null logistic model behaves like a fair coin in both arms") {
  auto c = ScenarioConfig::paper_logistic();
  c.beta0 = 0.0;
  c.beta_t = 0.0;
  c.beta_cov.assign(3, 0.0);
  RandomStream rng(7);
  const auto t = generate_trial(c, Study::s1, rng);
  double ev[2] = {0, 0}, cnt[2] = {0, 0};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int arm = t.treatment[i] == 1.0 ? 1 : 0;
    ev[arm] += t.outcome[i];
    cnt[arm] += 1.0;
  }
  for (int arm = 0; arm < 2; ++arm)
    CHECK(std::fabs(ev[arm] / cnt[arm] - 0.5) <= 4.0 * std::sqrt(0.25 / cnt[arm]));
}

TEST_CASE("covariate means, spread and independence per study") {
  const auto c = ScenarioConfig::paper_logistic();
  const double band = 4.0 / std::sqrt(10000.0);
  for (Study s : {Study::s1, Study::s2}) {
    RandomStream rng(StreamKey{1, 0, s == Study::s1 ? StreamPurpose::trial_s1 : StreamPurpose::trial_s2, 0});
    const auto t = generate_trial(c, s, rng);
    const double target = s == Study::s1 ? 0.0 : -1.4;
    double means[3];
    for (std::size_t j = 0; j < 3; ++j) {
      means[j] = column_mean(t.covariates, j);
      CHECK(std::fabs(means[j] - target) <= band);
    }
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = a + 1; b < 3; ++b) {
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
          const double da = t.covariates(i, a) - means[a], db = t.covariates(i, b) - means[b];
          sab += da * db;
          saa += da * da;
          sbb += db * db;
        }
        CHECK(std::fabs(sab / std::sqrt(saa * sbb)) <= band);
      }
  }
}

TEST_CASE("randomization balance is centred on zero across seeds") {
  auto c = ScenarioConfig::paper_logistic();
  c.n_per_study = 400;
  const int seeds = 200;
  double sum_z = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RandomStream rng(static_cast<std::uint64_t>(1000 + s));
    const auto t = generate_trial(c, Study::s1, rng);
    double m1 = 0.0, m0 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      (t.treatment[i] == 1.0 ? m1 : m0) += t.covariates(i, 0);
    const double diff = m1 / 200.0 - m0 / 200.0;
    const double z = diff / std::sqrt(2.0 / 200.0);
    sum_z += z;
  }
  CHECK(std::fabs(sum_z / seeds) <= 4.0 / std::sqrt(static_cast<double>(seeds)));
}

TEST_CASE("linear outcome noise has the configured spread") {
  auto c = ScenarioConfig::paper_linear();
  c.error_sd = 2.0;
  c.beta_cov.assign(3, 0.0);
  c.beta_t = 0.0;
  RandomStream rng(3);
  const auto t = generate_trial(c, Study::s1, rng);
  double s = 0.0, ss = 0.0;
  for (double y : t.outcome) {
    s += y;
    ss += y * y;
  }
  const double n = static_cast<double>(t.size());
  const double mean = s / n, var = ss / n - mean * mean;
  CHECK(std::fabs(mean + 1.0) <= 4.0 * 2.0 / std::sqrt(n));
  CHECK(std::fabs(std::sqrt(var) - 2.0) <= 4.0 * 2.0 / std::sqrt(2.0 * n));
}

TEST_CASE("refits recover the conditional and the attenuated marginal effect") {
  const auto c = ScenarioConfig::paper_logistic();
  RandomStream rng(StreamKey{2023, 0, StreamPurpose::trial_s1, 0});
  const auto t = generate_trial(c, Study::s1, rng);

  const DesignData full = full_design(t);
  const GlmFit f = fit_logistic(full);
  const double se = last_coefficient_se(full, f);
  CHECK(std::fabs(f.coefficients.back() - c.beta_t) <= 4.0 * se);

  DesignData two{Matrix(t.size(), 2), t.outcome, {}};
  for (std::size_t i = 0; i < t.size(); ++i) {
    two.features(i, 0) = 1.0;
    two.features(i, 1) = t.treatment[i];
  }
  const GlmFit g = fit_logistic(two);
  const double se2 = last_coefficient_se(two, g);
  CHECK(g.coefficients[1] < c.beta_t);
  CHECK(std::fabs(g.coefficients[1] - std::log(2.0)) <= 4.0 * se2);
}

TEST_CASE("full-model treatment coefficient is unbiased over replicates") {
  const auto c = ScenarioConfig::paper_logistic();
  const int reps = 200;
  double total = 0.0;
  for (int r = 0; r < reps; ++r) {
    RandomStream rng(StreamKey{5, static_cast<std::uint64_t>(r), StreamPurpose::trial_s1, 0});
    const auto t = generate_trial(c, Study::s1, rng);
    total += fit_logistic(full_design(t)).coefficients.back();
  }
  CHECK(std::fabs(total / reps - c.beta_t) <= 0.01);
}

TEST_CASE("treatment interactions enter the linear predictor") {
  auto c = ScenarioConfig::paper_linear();
  c.beta_interaction = {0.5, 0.0, 0.0};
  c.error_sd = 1e-3;
  c.n_per_study = 50;
  CHECK(c.has_interaction());
  RandomStream rng(11);
  const auto t = generate_trial(c, Study::s2, rng);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double x1 = t.covariates(i, 0), x2 = t.covariates(i, 1), x3 = t.covariates(i, 2);
    const double eta = -1.0 + x1 + x2 + x3 + (c.beta_t + 0.5 * x1) * t.treatment[i];
    CHECK(std::fabs(t.outcome[i] - eta) < 0.01);
  }
}
