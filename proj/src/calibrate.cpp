#include "margeff/calibrate.hpp"

#include <cmath>
#include <string>

#include "margeff/error.hpp"
#include "margeff/stats.hpp"

namespace margeff {
namespace {

struct ArmEstimate {
  double p = 0.0;
  double var = 0.0;  // variance of the mean
};

ArmEstimate summarize_arm(const kernels::Moments& m, std::size_t draws) {
  const double n = static_cast<double>(draws);
  const double mean = m.sum / n;
  const double sample_var = std::max(0.0, (m.sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, sample_var / n};
}

void require_draws(std::size_t draws) {
  if (draws < kMinCalibrationDraws)
    throw Error(ErrorKind::InvalidArgument,
                "calibration needs at least " + std::to_string(kMinCalibrationDraws) + " draws");
}

}  // namespace

void to_json(nlohmann::json& j, const MarginalTruth& t) {
  j = nlohmann::json{{"p_active", t.p_active},
                     {"p_control", t.p_control},
                     {"marginal_log_or", t.marginal_log_or},
                     {"mc_draws", t.mc_draws},
                     {"mc_se", t.mc_se}};
}

CovariateSample::CovariateSample(const ScenarioConfig& config, Study study, std::size_t draws,
                                 RandomStream& rng)
    : control_eta_(draws, config.beta0) {
  config.validate();
  const bool interaction = config.has_interaction();
  if (interaction) active_eta_.assign(draws, 0.0);
  std::vector<double> column(draws);
  for (std::size_t k = 0; k < config.covariate_count(); ++k) {
    const auto& spec = config.covariates[k];
    const double mean = spec.mean(study);
    for (double& v : column) v = mean + spec.sd * rng.normal();
    kernels::axpy(config.beta_cov[k], column, control_eta_);
    if (interaction) kernels::axpy(config.beta_interaction[k], column, active_eta_);
  }
  if (interaction) kernels::axpy(1.0, control_eta_, active_eta_);
}

kernels::Moments CovariateSample::control_moments() const noexcept {
  return kernels::expit_moments(control_eta_, 0.0);
}

kernels::Moments CovariateSample::active_moments(double beta_t) const noexcept {
  return kernels::expit_moments(active_eta_.empty() ? control_eta_ : active_eta_, beta_t);
}

namespace {

// Marginal treatment effect on the identity scale: beta_t + sum beta_xt_k mean_k.
double linear_effect(const ScenarioConfig& config, Study study) {
  double effect = config.beta_t;
  for (std::size_t k = 0; k < config.covariate_count(); ++k)
    effect += config.beta_interaction[k] * config.covariates[k].mean(study);
  return effect;
}

}  // namespace

double analytic_marginal_mean(const ScenarioConfig& config, Study study, bool treatment_on) {
  if (config.family != Family::linear)
    throw Error(ErrorKind::FamilyMismatch,
                "analytic marginal mean is only exact for the linear family");
  double mean = config.beta0;
  for (std::size_t k = 0; k < config.covariate_count(); ++k)
    mean += config.beta_cov[k] * config.covariates[k].mean(study);
  return treatment_on ? mean + linear_effect(config, study) : mean;
}

double marginal_probability(const ScenarioConfig& config, Study study, bool treatment_on,
                            std::size_t draws, RandomStream& rng) {
  if (config.family == Family::linear) return analytic_marginal_mean(config, study, treatment_on);
  require_draws(draws);
  const CovariateSample sample(config, study, draws, rng);
  const auto m = treatment_on ? sample.active_moments(config.beta_t) : sample.control_moments();
  return m.sum / static_cast<double>(draws);
}

MarginalTruth true_marginal_log_or(const ScenarioConfig& config, Study study, std::size_t draws,
                                   RandomStream& rng) {
  if (config.family == Family::linear) {
    MarginalTruth t;
    t.p_active = analytic_marginal_mean(config, study, true);
    t.p_control = analytic_marginal_mean(config, study, false);
    t.marginal_log_or = linear_effect(config, study);
    return t;
  }
  require_draws(draws);
  const CovariateSample sample(config, study, draws, rng);
  const auto active = summarize_arm(sample.active_moments(config.beta_t), draws);
  const auto control = summarize_arm(sample.control_moments(), draws);

  MarginalTruth t;
  t.p_active = active.p;
  t.p_control = control.p;
  t.marginal_log_or = logit(active.p) - logit(control.p);
  t.mc_draws = draws;
  const double da = active.p * (1.0 - active.p);
  const double dc = control.p * (1.0 - control.p);
  t.mc_se = std::sqrt(active.var / (da * da) + control.var / (dc * dc));
  return t;
}

double solve_treatment_coefficient(const ScenarioConfig& config, Study study, double target_or,
                                   std::size_t draws, RandomStream& rng,
                                   const CalibrationSettings& settings) {
  if (config.family != Family::logistic)
    throw Error(ErrorKind::FamilyMismatch,
                "linear family is collapsible: beta_t equals the marginal mean difference");
  if (!(target_or > 0.0) || !std::isfinite(target_or))
    throw Error(ErrorKind::InvalidArgument, "target odds ratio must be positive and finite");
  require_draws(draws);

  const CovariateSample sample(config, study, draws, rng);
  const double n = static_cast<double>(draws);
  const double control_logit = logit(sample.control_moments().sum / n);
  const double log_target = std::log(target_or);
  auto objective = [&](double beta_t) {
    return logit(sample.active_moments(beta_t).sum / n) - control_logit - log_target;
  };

  double lo = settings.lower, hi = settings.upper;
  const double f_lo = objective(lo), f_hi = objective(hi);
  if (!(f_lo <= 0.0 && f_hi >= 0.0))
    throw Error(ErrorKind::BracketFailure,
                "target marginal OR " + std::to_string(target_or) + " not reachable for beta_t in [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
  if (std::fabs(f_lo) <= settings.tolerance) return lo;
  if (std::fabs(f_hi) <= settings.tolerance) return hi;

  for (int it = 0; it < settings.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = objective(mid);
    if (std::fabs(f) <= settings.tolerance) return mid;
    (f < 0.0 ? lo : hi) = mid;
  }
  throw Error(ErrorKind::NonConvergence, "bisection did not reach the requested tolerance");
}

}  // namespace margeff
