#pragma once

// Anchored indirect comparison of A vs B through the common comparator C:
//
//   delta_AB = delta_AC - delta_BC,  var(delta_AB) = var(delta_AC) + var(delta_BC)
//
// delta_AC comes from one of three estimators on the S1 data (Bucher: the
// unadjusted two-group fit; MAIC: a two-group fit weighted so S1 covariate
// means match S2; G-computation: an outcome model fitted on S1 and averaged
// over the S2 covariates). delta_BC is always the unadjusted two-group fit
// on S2. Effects are log odds ratios for binary outcomes and mean
// differences for continuous outcomes.

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "margeff/dgm.hpp"
#include "margeff/linmod.hpp"
#include "margeff/random.hpp"

namespace margeff {

enum class Method { bucher, maic, gcomp };

inline constexpr Method kAllMethods[] = {Method::bucher, Method::maic, Method::gcomp};

std::string_view to_string(Method m) noexcept;
/// Throws Error(InvalidArgument) for unknown names.
Method method_from_string(std::string_view name);

/// Method-of-moments balancing weights w_i = exp((x_i - target)' alpha).
struct WeightSet {
  std::vector<double> alpha;
  std::vector<double> weights;
  double ess = 0.0;
  int iterations = 0;
  /// max_j |weighted mean_j - target_j| at the returned alpha.
  double max_imbalance = 0.0;
};

struct MaicSettings {
  double balance_tolerance = 1e-10;
  int max_iterations = 100;
  double max_alpha_norm = 50.0;
};

/// Minimizes Q(alpha) = sum_i c_i exp((x_i - target)' alpha) by damped Newton.
/// `counts` are optional frequency weights c_i (bootstrap resamples);
/// empty means every row once. ess uses the combined weights c_i w_i.
/// Errors: NoOverlap (target not strictly inside the per-covariate range of
/// the counted rows, or the optimizer diverges), DimensionMismatch.
WeightSet maic_weights(const Matrix& s1_covariates, std::span<const double> target_means,
                       std::span<const double> counts = {}, const MaicSettings& settings = {});

/// Sum of exp((x_i - target)' alpha), the MAIC objective (for checks).
double maic_objective(const Matrix& s1_covariates, std::span<const double> target_means,
                      std::span<const double> alpha);

struct EffectEstimate {
  Method method = Method::bucher;
  double delta_hat = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t bootstrap_failures = 0;
  std::size_t bootstrap_resamples = 0;
};

/// Wald interval delta_hat -/+ z se at the given two-sided level.
EffectEstimate wald_estimate(Method method, double delta_hat, double se, double level = 0.95);

struct EstimatorSettings {
  std::size_t bootstrap = 200;
  FitSettings fit;
  MaicSettings maic;
  /// Master seed and replicate; purpose and index are set per resample.
  StreamKey stream;
  double level = 0.95;
  /// Include treatment-by-covariate terms in the G-computation outcome model.
  bool model_interactions = false;
  /// Resample failure fraction above which an estimate is flagged invalid.
  double max_failure_fraction = 0.05;
};

struct ArmEffect {
  double delta_hat = 0.0;
  double se = 0.0;
};

/// Unadjusted two-group effect of the study's active arm vs C with its
/// model-based SE. Binary: log OR from the 2x2 table, SE sqrt(1/a+1/b+1/c+1/d).
/// Continuous: mean difference, pooled-variance SE.
/// Errors: DegenerateArm (an empty cell or arm).
ArmEffect bucher_arm_estimate(const TrialData& trial);

/// Treatment coefficient of the weighted two-group regression on S1.
double maic_point(const TrialData& s1, std::span<const double> target_means,
                  std::span<const double> counts, const EstimatorSettings& settings);

/// MAIC estimate of delta_AC in S2 with bootstrap SE (S1 rows resampled,
/// weights re-estimated in every resample).
EffectEstimate maic_estimate(const TrialData& s1, const TrialData& s2,
                             const EstimatorSettings& settings);

struct GcompPoint {
  double delta_hat = 0.0;
  double mean_active = 0.0;   // average prediction over S2 with t = 1
  double mean_control = 0.0;  // average prediction over S2 with t = 0
  GlmFit fit;
};

/// Outcome model on S1 (optionally frequency-weighted) standardized over the
/// S2 covariates. Binary: logit(mean_active) - logit(mean_control).
GcompPoint gcomp_point(const TrialData& s1, const Matrix& s2_covariates,
                       std::span<const double> counts, const EstimatorSettings& settings);

/// G-computation estimate of delta_AC in S2 with bootstrap SE (S1 resampled,
/// S2 covariates held fixed).
EffectEstimate gcomp_estimate(const TrialData& s1, const TrialData& s2,
                              const EstimatorSettings& settings);

/// delta = ac - bc, se = sqrt(se_ac^2 + se_bc^2), Wald interval. Carries
/// ac's method and bootstrap counters.
EffectEstimate indirect_comparison(const EffectEstimate& ac, const EffectEstimate& bc,
                                   double level = 0.95);

struct BootstrapResult {
  double se = 0.0;  // sample SD (denominator B - 1) over successful resamples
  std::size_t failures = 0;
  std::size_t resamples = 0;
  std::vector<double> estimates;  // successful estimates in resample order
};

/// Ordinary nonparametric bootstrap expressed as multinomial frequency
/// counts: resample b draws n row indices from the stream `key` with index b.
/// Estimates that throw a numerical Error are counted as failures.
BootstrapResult bootstrap(std::size_t n, std::size_t resamples, const StreamKey& key,
                          const std::function<double(std::span<const double>)>& estimate);

/// Frequency counts of n draws with replacement from n rows.
std::vector<double> resample_counts(std::size_t n, RandomStream& rng);

}  // namespace margeff
