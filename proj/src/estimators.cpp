#include "margeff/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "margeff/error.hpp"
#include "margeff/kernels.hpp"
#include "margeff/stats.hpp"

namespace margeff {
namespace {

Matrix two_group_design(const TrialData& trial) {
  Matrix x(trial.size(), 2, 1.0);
  std::copy(trial.treatment.begin(), trial.treatment.end(), x.col(1).begin());
  return x;
}

// [1, t, x_1..x_k] plus [t x_1 .. t x_k] when interactions are modelled
Matrix outcome_design(const Matrix& covariates, std::span<const double> treatment,
                      bool interactions) {
  const std::size_t n = covariates.rows();
  const std::size_t k = covariates.cols();
  Matrix x(n, 2 + k * (interactions ? 2 : 1), 1.0);
  std::copy(treatment.begin(), treatment.end(), x.col(1).begin());
  for (std::size_t j = 0; j < k; ++j) {
    const auto src = covariates.col(j);
    std::copy(src.begin(), src.end(), x.col(2 + j).begin());
    if (interactions) kernels::mul(src, treatment, x.col(2 + k + j));
  }
  return x;
}

std::vector<double> column_means(const Matrix& m) {
  std::vector<double> out(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j)
    out[j] = kernels::sum(m.col(j)) / static_cast<double>(m.rows());
  return out;
}

double sample_sd(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

EffectEstimate from_bootstrap(Method method, double point, const BootstrapResult& boot,
                              double level) {
  const double se = boot.estimates.size() >= 2 ? boot.se : std::numeric_limits<double>::quiet_NaN();
  auto e = wald_estimate(method, point, se, level);
  e.bootstrap_failures = boot.failures;
  e.bootstrap_resamples = boot.resamples;
  return e;
}

}  // namespace

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::bucher: return "bucher";
    case Method::maic: return "maic";
    case Method::gcomp: return "gcomp";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  for (Method m : kAllMethods)
    if (to_string(m) == name) return m;
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

double maic_objective(const Matrix& s1_covariates, std::span<const double> target_means,
                      std::span<const double> alpha) {
  const std::size_t n = s1_covariates.rows();
  std::vector<double> s(n, 0.0);
  for (std::size_t j = 0; j < s1_covariates.cols(); ++j) {
    kernels::axpy(alpha[j], s1_covariates.col(j), s);
    for (double& v : s) v -= alpha[j] * target_means[j];
  }
  double q = 0.0;
  for (double v : s) q += std::exp(v);
  return q;
}

WeightSet maic_weights(const Matrix& s1_covariates, std::span<const double> target_means,
                       std::span<const double> counts, const MaicSettings& settings) {
  const std::size_t n = s1_covariates.rows();
  const std::size_t k = s1_covariates.cols();
  if (target_means.size() != k)
    throw Error(ErrorKind::DimensionMismatch, "target means length != covariate columns");
  if (!counts.empty() && counts.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "counts length != rows");
  const std::vector<double> ones = counts.empty() ? std::vector<double>(n, 1.0) : std::vector<double>{};
  const std::span<const double> c = counts.empty() ? std::span<const double>(ones) : counts;

  // centered covariates; the target must lie strictly inside each range
  Matrix z(n, k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto x = s1_covariates.col(j);
    auto zj = z.col(j);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      zj[i] = x[i] - target_means[j];
      if (c[i] > 0.0) {
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
      }
    }
    if (!(lo < target_means[j] && target_means[j] < hi))
      throw Error(ErrorKind::NoOverlap, "target mean of covariate " + std::to_string(j) +
                                            " outside the S1 sample range");
  }

  WeightSet out;
  out.alpha.assign(k, 0.0);
  std::vector<double> s(n, 0.0), e(n), ce(n), g(k), trial_alpha(k), trial_s(n);

  // log Q(alpha) from linear scores s, with the max shifted out
  auto evaluate = [&](std::span<const double> scores, double& shift) {
    shift = *std::max_element(scores.begin(), scores.end());
    kernels::exp_offset(scores, -shift, e);
    kernels::mul(c, e, ce);
    return kernels::sum(ce);
  };
  auto scores_for = [&](std::span<const double> alpha, std::span<double> scores) {
    std::fill(scores.begin(), scores.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) kernels::axpy(alpha[j], z.col(j), scores);
  };

  double shift = 0.0;
  double total = evaluate(s, shift);
  for (int iter = 0;; ++iter) {
    if (!(total > 0.0) || !std::isfinite(total))
      throw Error(ErrorKind::NoOverlap, "balancing objective underflowed");
    double imbalance = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      g[j] = kernels::dot(ce, z.col(j));
      imbalance = std::max(imbalance, std::fabs(g[j]) / total);
    }
    out.iterations = iter;
    out.max_imbalance = imbalance;
    if (imbalance <= settings.balance_tolerance) break;
    if (iter >= settings.max_iterations)
      throw Error(ErrorKind::NoOverlap, "balancing weights did not converge");

    std::vector<double> h(k * k);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t l = j; l < k; ++l) h[j * k + l] = h[l * k + j] = kernels::dot3(ce, z.col(j), z.col(l));
    std::vector<double> direction;
    try {
      direction = solve_spd(std::move(h), g, k, 1e-14);
    } catch (const Error&) {
      throw Error(ErrorKind::NoOverlap, "balancing Hessian is singular");
    }
    double slope = 0.0;  // directional derivative of log Q along -direction
    for (std::size_t j = 0; j < k; ++j) slope -= g[j] * direction[j] / total;

    const double log_q = shift + std::log(total);
    double step = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
      for (std::size_t j = 0; j < k; ++j) trial_alpha[j] = out.alpha[j] - step * direction[j];
      scores_for(trial_alpha, trial_s);
      double trial_shift = 0.0;
      const double trial_total = evaluate(trial_s, trial_shift);
      const double trial_log_q = trial_shift + std::log(trial_total);
      if (std::isfinite(trial_log_q) && trial_log_q <= log_q + 1e-4 * step * slope) {
        out.alpha = trial_alpha;
        s.swap(trial_s);
        shift = trial_shift;
        total = trial_total;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // at machine precision the line search can stall just short of the
      // tolerance; accept if balance already meets the documented bound
      evaluate(s, shift);
      if (imbalance <= 1e-8) break;
      throw Error(ErrorKind::NoOverlap, "balancing line search failed");
    }
    double norm = 0.0;
    for (double a : out.alpha) norm += a * a;
    if (std::sqrt(norm) > settings.max_alpha_norm)
      throw Error(ErrorKind::NoOverlap, "balancing coefficients diverged");
  }

  // e and ce hold the shifted weights at the final alpha
  double sum_cw = 0.0, sum_cw2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_cw += ce[i];
    sum_cw2 += ce[i] * e[i];
  }
  out.ess = sum_cw * sum_cw / sum_cw2;
  out.weights.resize(n);
  kernels::exp_offset(s, 0.0, out.weights);
  for (double w : out.weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw Error(ErrorKind::NoOverlap, "balancing weights overflow");
  return out;
}

EffectEstimate wald_estimate(Method method, double delta_hat, double se, double level) {
  const double z = normal_quantile(0.5 + 0.5 * level);
  EffectEstimate e;
  e.method = method;
  e.delta_hat = delta_hat;
  e.se = se;
  e.ci_low = delta_hat - z * se;
  e.ci_high = delta_hat + z * se;
  return e;
}

ArmEffect bucher_arm_estimate(const TrialData& trial) {
  const std::size_t n = trial.size();
  if (trial.family == Family::logistic) {
    double a = 0, b = 0, c = 0, d = 0;  // events/non-events in active, then control
    for (std::size_t i = 0; i < n; ++i) {
      const bool treated = trial.treatment[i] != 0.0;
      const bool event = trial.outcome[i] != 0.0;
      (treated ? (event ? a : b) : (event ? c : d)) += 1.0;
    }
    if (a == 0 || b == 0 || c == 0 || d == 0)
      throw Error(ErrorKind::DegenerateArm, "empty cell in the 2x2 table");
    return {std::log(a / b) - std::log(c / d), std::sqrt(1 / a + 1 / b + 1 / c + 1 / d)};
  }

  double n1 = 0, n0 = 0, s1 = 0, s0 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (trial.treatment[i] != 0.0) {
      n1 += 1;
      s1 += trial.outcome[i];
    } else {
      n0 += 1;
      s0 += trial.outcome[i];
    }
  }
  if (n1 < 1 || n0 < 1 || n1 + n0 < 3)
    throw Error(ErrorKind::DegenerateArm, "an arm is empty");
  const double m1 = s1 / n1, m0 = s0 / n0;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = trial.outcome[i] - (trial.treatment[i] != 0.0 ? m1 : m0);
    ss += r * r;
  }
  const double sigma2 = ss / (n1 + n0 - 2.0);
  return {m1 - m0, std::sqrt(sigma2 * (1.0 / n1 + 1.0 / n0))};
}

double maic_point(const TrialData& s1, std::span<const double> target_means,
                  std::span<const double> counts, const EstimatorSettings& settings) {
  const auto ws = maic_weights(s1.covariates, target_means, counts, settings.maic);
  DesignData data{two_group_design(s1), s1.outcome, ws.weights};
  if (!counts.empty()) kernels::mul(counts, ws.weights, data.weights);
  return fit(s1.family, data, settings.fit).coefficients[1];
}

EffectEstimate maic_estimate(const TrialData& s1, const TrialData& s2,
                             const EstimatorSettings& settings) {
  const auto target = column_means(s2.covariates);
  const double point = maic_point(s1, target, {}, settings);
  const auto boot = bootstrap(s1.size(), settings.bootstrap,
                              settings.stream.with(StreamPurpose::maic_bootstrap),
                              [&](std::span<const double> counts) {
                                return maic_point(s1, target, counts, settings);
                              });
  return from_bootstrap(Method::maic, point, boot, settings.level);
}

GcompPoint gcomp_point(const TrialData& s1, const Matrix& s2_covariates,
                       std::span<const double> counts, const EstimatorSettings& settings) {
  if (s2_covariates.cols() != s1.covariates.cols())
    throw Error(ErrorKind::DimensionMismatch, "S1 and S2 covariate counts differ");
  const bool inter = settings.model_interactions;
  DesignData data{outcome_design(s1.covariates, s1.treatment, inter), s1.outcome,
                  std::vector<double>(counts.begin(), counts.end())};
  GcompPoint out;
  out.fit = fit(s1.family, data, settings.fit);

  const std::size_t m = s2_covariates.rows();
  const std::vector<double> active(m, 1.0), control(m, 0.0);
  auto mean_prediction = [&](const std::vector<double>& t) {
    const auto mu = predict_mean(out.fit, outcome_design(s2_covariates, t, inter));
    return kernels::sum(mu) / static_cast<double>(m);
  };
  out.mean_active = mean_prediction(active);
  out.mean_control = mean_prediction(control);
  out.delta_hat = s1.family == Family::logistic ? logit(out.mean_active) - logit(out.mean_control)
                                                : out.mean_active - out.mean_control;
  return out;
}

EffectEstimate gcomp_estimate(const TrialData& s1, const TrialData& s2,
                              const EstimatorSettings& settings) {
  const double point = gcomp_point(s1, s2.covariates, {}, settings).delta_hat;
  const auto boot = bootstrap(s1.size(), settings.bootstrap,
                              settings.stream.with(StreamPurpose::gcomp_bootstrap),
                              [&](std::span<const double> counts) {
                                return gcomp_point(s1, s2.covariates, counts, settings).delta_hat;
                              });
  return from_bootstrap(Method::gcomp, point, boot, settings.level);
}

EffectEstimate indirect_comparison(const EffectEstimate& ac, const EffectEstimate& bc,
                                   double level) {
  auto e = wald_estimate(ac.method, ac.delta_hat - bc.delta_hat,
                         std::sqrt(ac.se * ac.se + bc.se * bc.se), level);
  e.bootstrap_failures = ac.bootstrap_failures;
  e.bootstrap_resamples = ac.bootstrap_resamples;
  return e;
}

std::vector<double> resample_counts(std::size_t n, RandomStream& rng) {
  std::vector<double> counts(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) counts[rng.below(n)] += 1.0;
  return counts;
}

BootstrapResult bootstrap(std::size_t n, std::size_t resamples, const StreamKey& key,
                          const std::function<double(std::span<const double>)>& estimate) {
  BootstrapResult out;
  out.resamples = resamples;
  out.estimates.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    RandomStream rng(key.with(key.purpose, b));
    const auto counts = resample_counts(n, rng);
    try {
      const double v = estimate(counts);
      if (std::isfinite(v))
        out.estimates.push_back(v);
      else
        ++out.failures;
    } catch (const Error& err) {
      if (!is_numerical(err.kind())) throw;
      ++out.failures;
    }
  }
  out.se = out.estimates.size() >= 2 ? sample_sd(out.estimates)
                                     : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace margeff
