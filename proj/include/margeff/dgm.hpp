#pragma once

// Two-trial data-generating mechanisms. Study S1 randomizes A vs C, study
// S2 randomizes B vs C; both share the outcome model
//
//   g(E[Y | x, t]) = beta0 + sum_k beta_cov[k] x_k + (beta_t + sum_k beta_interaction[k] x_k) t
//
// with g = logit (binary outcomes) or identity (continuous outcomes plus
// Normal(0, error_sd) noise). Covariates are independent normals whose
// means differ between studies.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "margeff/linmod.hpp"
#include "margeff/matrix.hpp"
#include "margeff/random.hpp"

namespace margeff {

enum class Study { s1, s2 };

std::string_view to_string(Study s) noexcept;

struct CovariateSpec {
  double mean_s1 = 0.0;
  double mean_s2 = 0.0;
  double sd = 1.0;

  double mean(Study s) const noexcept { return s == Study::s1 ? mean_s1 : mean_s2; }
};

struct ScenarioConfig {
  Family family = Family::logistic;
  std::size_t n_per_study = 10000;
  double allocation_ratio = 0.5;
  std::vector<CovariateSpec> covariates;
  double beta0 = 0.0;
  std::vector<double> beta_cov;
  double beta_t = 0.0;
  std::vector<double> beta_interaction;
  double error_sd = 1.0;

  std::size_t covariate_count() const noexcept { return covariates.size(); }
  bool has_interaction() const noexcept;
  /// Number of treated subjects per study: round(allocation_ratio * n).
  std::size_t treated_count() const noexcept;

  /// Throws Error(InvalidArgument) describing the first violated invariant.
  void validate() const;

  /// Logistic scenario with three N(0,1) vs N(-1.4,1) covariates,
  /// beta0 = -1, unit covariate effects and beta_t = 1.0486.
  static ScenarioConfig paper_logistic();
  /// Same design with a linear outcome model and unit error SD.
  static ScenarioConfig paper_linear();
};

void to_json(nlohmann::json& j, const ScenarioConfig& c);
/// Field names as in ScenarioConfig; beta_interaction and error_sd are
/// optional. Validates after parsing.
void from_json(const nlohmann::json& j, ScenarioConfig& c);

/// One simulated randomized trial. treatment[i] is 1 for the study's active
/// arm (A in S1, B in S2) and 0 for the common comparator C.
struct TrialData {
  Study study = Study::s1;
  Family family = Family::logistic;
  Matrix covariates;  // n x k
  std::vector<double> treatment;
  std::vector<double> outcome;

  std::size_t size() const noexcept { return outcome.size(); }
  bool operator==(const TrialData&) const = default;
};

/// Draw one trial. Consumption order from `rng`: covariates column by
/// column, then the treatment permutation, then outcomes row by row.
TrialData generate_trial(const ScenarioConfig& config, Study study, RandomStream& rng);

}  // namespace margeff
