#include "margeff/dgm.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "margeff/error.hpp"
#include "margeff/stats.hpp"

namespace margeff {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidArgument, "scenario: " + what);
}

}  // namespace

std::string_view to_string(Study s) noexcept { return s == Study::s1 ? "S1" : "S2"; }

bool ScenarioConfig::has_interaction() const noexcept {
  return std::any_of(beta_interaction.begin(), beta_interaction.end(),
                     [](double b) { return b != 0.0; });
}

std::size_t ScenarioConfig::treated_count() const noexcept {
  return static_cast<std::size_t>(std::llround(allocation_ratio * static_cast<double>(n_per_study)));
}

void ScenarioConfig::validate() const {
  require(n_per_study >= 4, "n_per_study must be at least 4");
  require(allocation_ratio > 0.0 && allocation_ratio < 1.0, "allocation_ratio must be in (0, 1)");
  const std::size_t treated = treated_count();
  require(treated >= 2 && n_per_study - treated >= 2,
          "allocation leaves fewer than two subjects in an arm");
  require(!covariates.empty(), "covariate list must be non-empty");
  for (const auto& c : covariates) {
    require(std::isfinite(c.mean_s1) && std::isfinite(c.mean_s2), "covariate means must be finite");
    require(std::isfinite(c.sd) && c.sd > 0.0, "covariate sd must be strictly positive");
  }
  require(beta_cov.size() == covariates.size(), "beta_cov length must equal covariate count");
  require(beta_interaction.size() == covariates.size(),
          "beta_interaction length must equal covariate count");
  require(std::isfinite(beta0) && std::isfinite(beta_t), "coefficients must be finite");
  for (double b : beta_cov) require(std::isfinite(b), "coefficients must be finite");
  for (double b : beta_interaction) require(std::isfinite(b), "coefficients must be finite");
  require(std::isfinite(error_sd) && error_sd > 0.0, "error_sd must be strictly positive");
}

ScenarioConfig ScenarioConfig::paper_logistic() {
  ScenarioConfig c;
  c.family = Family::logistic;
  c.n_per_study = 10000;
  c.allocation_ratio = 0.5;
  c.covariates.assign(3, CovariateSpec{0.0, -1.4, 1.0});
  c.beta0 = -1.0;
  c.beta_cov.assign(3, 1.0);
  c.beta_t = 1.0486;
  c.beta_interaction.assign(3, 0.0);
  c.error_sd = 1.0;
  return c;
}

ScenarioConfig ScenarioConfig::paper_linear() {
  ScenarioConfig c = paper_logistic();
  c.family = Family::linear;
  return c;
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  nlohmann::json covs = nlohmann::json::array();
  for (const auto& cv : c.covariates)
    covs.push_back({{"mean_s1", cv.mean_s1}, {"mean_s2", cv.mean_s2}, {"sd", cv.sd}});
  j = nlohmann::json{{"family", std::string(to_string(c.family))},
                     {"n_per_study", c.n_per_study},
                     {"allocation_ratio", c.allocation_ratio},
                     {"covariates", covs},
                     {"beta0", c.beta0},
                     {"beta_cov", c.beta_cov},
                     {"beta_t", c.beta_t},
                     {"beta_interaction", c.beta_interaction},
                     {"error_sd", c.error_sd}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  try {
    ScenarioConfig out;
    out.family = family_from_string(j.at("family").get<std::string>());
    out.n_per_study = j.at("n_per_study").get<std::size_t>();
    out.allocation_ratio = j.value("allocation_ratio", 0.5);
    for (const auto& cv : j.at("covariates"))
      out.covariates.push_back(CovariateSpec{cv.at("mean_s1").get<double>(),
                                             cv.at("mean_s2").get<double>(),
                                             cv.value("sd", 1.0)});
    out.beta0 = j.at("beta0").get<double>();
    out.beta_cov = j.at("beta_cov").get<std::vector<double>>();
    out.beta_t = j.at("beta_t").get<double>();
    out.beta_interaction = j.contains("beta_interaction")
                               ? j.at("beta_interaction").get<std::vector<double>>()
                               : std::vector<double>(out.covariates.size(), 0.0);
    out.error_sd = j.value("error_sd", 1.0);
    out.validate();
    c = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("scenario JSON: ") + e.what());
  }
}

TrialData generate_trial(const ScenarioConfig& config, Study study, RandomStream& rng) {
  config.validate();
  const std::size_t n = config.n_per_study;
  const std::size_t k = config.covariate_count();

  TrialData trial;
  trial.study = study;
  trial.family = config.family;
  trial.covariates = Matrix(n, k);
  for (std::size_t j = 0; j < k; ++j) {
    const double mean = config.covariates[j].mean(study);
    const double sd = config.covariates[j].sd;
    for (double& v : trial.covariates.col(j)) v = mean + sd * rng.normal();
  }

  // exact allocation, random order
  const std::size_t treated = config.treated_count();
  trial.treatment.assign(n, 0.0);
  std::fill_n(trial.treatment.begin(), treated, 1.0);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(trial.treatment[i], trial.treatment[rng.below(i + 1)]);

  trial.outcome.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = config.beta0;
    double effect = config.beta_t;
    for (std::size_t j = 0; j < k; ++j) {
      const double x = trial.covariates(i, j);
      eta += config.beta_cov[j] * x;
      effect += config.beta_interaction[j] * x;
    }
    eta += effect * trial.treatment[i];
    if (config.family == Family::logistic)
      trial.outcome[i] = rng.uniform() < expit(eta) ? 1.0 : 0.0;
    else
      trial.outcome[i] = eta + config.error_sd * rng.normal();
  }
  return trial;
}

}  // namespace margeff
