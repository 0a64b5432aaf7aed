#pragma once

// True marginal outcome probabilities by Monte Carlo integration over the
// covariate distribution, the implied marginal log odds ratio, and the
// inverse problem: the conditional treatment coefficient that produces a
// target marginal odds ratio.

#include <cstddef>
#include <vector>

#include "margeff/dgm.hpp"
#include "margeff/kernels.hpp"
#include "margeff/random.hpp"

namespace margeff {

/// Logistic family: marginal event probabilities per arm and their log odds
/// ratio. Linear family: marginal means per arm and their difference
/// (exact, mc_draws = 0 and mc_se = 0).
struct MarginalTruth {
  double p_active = 0.0;
  double p_control = 0.0;
  double marginal_log_or = 0.0;
  std::size_t mc_draws = 0;
  double mc_se = 0.0;

  /// Same truth with the arm labels exchanged.
  MarginalTruth reversed() const noexcept {
    return {p_control, p_active, -marginal_log_or, mc_draws, mc_se};
  }
};

void to_json(nlohmann::json& j, const MarginalTruth& t);

inline constexpr std::size_t kMinCalibrationDraws = 10000;
inline constexpr std::size_t kDefaultCalibrationDraws = 1000000;

/// A fixed covariate sample from one study's distribution, reused for every
/// arm and every candidate treatment coefficient (common random numbers).
class CovariateSample {
public:
  CovariateSample(const ScenarioConfig& config, Study study, std::size_t draws, RandomStream& rng);

  std::size_t size() const noexcept { return control_eta_.size(); }

  /// Sum and sum of squares of the subject-level event probabilities.
  kernels::Moments control_moments() const noexcept;
  kernels::Moments active_moments(double beta_t) const noexcept;

private:
  std::vector<double> control_eta_;  // beta0 + sum beta_k x_k
  std::vector<double> active_eta_;   // control_eta_ + sum beta_xt_k x_k (beta_t excluded)
};

/// Monte Carlo estimate of the marginal event probability (logistic) or the
/// exact marginal mean (linear, no draws consumed).
/// Errors: InvalidArgument when draws < kMinCalibrationDraws for the logistic family.
double marginal_probability(const ScenarioConfig& config, Study study, bool treatment_on,
                            std::size_t draws, RandomStream& rng);

/// beta0 + sum beta_k mean_k + t (beta_t + sum beta_xt_k mean_k).
/// Errors: FamilyMismatch for the logistic family, where the mean of expit
/// is not expit of the mean.
double analytic_marginal_mean(const ScenarioConfig& config, Study study, bool treatment_on);

/// Both arms on one covariate sample; mc_se by the delta method.
MarginalTruth true_marginal_log_or(const ScenarioConfig& config, Study study, std::size_t draws,
                                   RandomStream& rng);

struct CalibrationSettings {
  double tolerance = 1e-4;  // on |log OR - log target|
  double lower = -20.0;
  double upper = 20.0;
  int max_iterations = 200;
};

/// Bisection for beta_t on a common covariate sample (config.beta_t is
/// ignored). Errors: BracketFailure, NonConvergence, FamilyMismatch for linear.
double solve_treatment_coefficient(const ScenarioConfig& config, Study study, double target_or,
                                   std::size_t draws, RandomStream& rng,
                                   const CalibrationSettings& settings = {});

}  // namespace margeff
