#include "margeff/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <thread>

#include "margeff/error.hpp"

namespace margeff {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void to_json(nlohmann::json& j, const TruthLedger& t) {
  j = nlohmann::json{{"ac_s1", t.ac_s1}, {"ac_s2", t.ac_s2}, {"bc_s2", t.bc_s2},
                     {"delta_ab", t.delta_ab}};
}

TruthLedger truth_ledger(const ScenarioConfig& config, const StudySettings& settings) {
  const StreamKey base{settings.seed, 0, StreamPurpose::calibration, 0};
  auto truth_in = [&](Study study) {
    RandomStream rng(base.with(StreamPurpose::calibration, study == Study::s1 ? 1 : 2));
    return true_marginal_log_or(config, study, settings.calibration_draws, rng);
  };
  TruthLedger t;
  t.ac_s1 = truth_in(Study::s1);
  // Both active treatments share the outcome model, so A vs C and B vs C in
  // S2 are evaluated on the same covariate sample.
  t.ac_s2 = truth_in(Study::s2);
  t.bc_s2 = truth_in(Study::s2);
  t.delta_ab = t.ac_s2.marginal_log_or - t.bc_s2.marginal_log_or;
  if (t.delta_ab != 0.0)
    throw Error(ErrorKind::InvalidArgument, "truth ledger: A-vs-C and B-vs-C truths in S2 differ");
  return t;
}

EstimatorSettings estimator_settings(const ScenarioConfig& config, const StudySettings& settings,
                                     std::size_t replicate_index) {
  EstimatorSettings es;
  es.bootstrap = settings.bootstrap;
  es.fit = settings.fit;
  es.maic = settings.maic;
  es.stream = StreamKey{settings.seed, replicate_index, StreamPurpose::maic_bootstrap, 0};
  es.level = settings.level;
  es.model_interactions = config.has_interaction();
  es.max_failure_fraction = settings.max_failure_fraction;
  return es;
}

ReplicateRecord run_replicate(const ScenarioConfig& config, std::size_t replicate_index,
                              const StudySettings& settings) {
  ReplicateRecord record;
  record.replicate_index = replicate_index;
  for (Method m : kAllMethods) record.results[static_cast<std::size_t>(m)].estimate.method = m;

  const StreamKey key{settings.seed, replicate_index, StreamPurpose::trial_s1, 0};
  RandomStream rng1(key.with(StreamPurpose::trial_s1));
  RandomStream rng2(key.with(StreamPurpose::trial_s2));
  const TrialData s1 = generate_trial(config, Study::s1, rng1);
  const TrialData s2 = generate_trial(config, Study::s2, rng2);
  const EstimatorSettings es = estimator_settings(config, settings, replicate_index);

  EffectEstimate bc;
  try {
    const auto arm = bucher_arm_estimate(s2);
    bc = wald_estimate(Method::bucher, arm.delta_hat, arm.se, es.level);
  } catch (const Error& e) {
    for (auto& r : record.results) {
      r.estimate.delta_hat = r.estimate.se = r.estimate.ci_low = r.estimate.ci_high = kNaN;
      r.failure = std::string("B vs C: ") + e.what();
    }
    return record;
  }

  for (Method m : kAllMethods) {
    MethodResult& r = record.results[static_cast<std::size_t>(m)];
    try {
      EffectEstimate ac;
      switch (m) {
        case Method::bucher: {
          const auto arm = bucher_arm_estimate(s1);
          ac = wald_estimate(Method::bucher, arm.delta_hat, arm.se, es.level);
          break;
        }
        case Method::maic: ac = maic_estimate(s1, s2, es); break;
        case Method::gcomp: ac = gcomp_estimate(s1, s2, es); break;
      }
      r.estimate = indirect_comparison(ac, bc, es.level);
      const double allowed = es.max_failure_fraction * static_cast<double>(r.estimate.bootstrap_resamples);
      r.valid = std::isfinite(r.estimate.delta_hat) && std::isfinite(r.estimate.se) &&
                static_cast<double>(r.estimate.bootstrap_failures) <= allowed;
      if (!r.valid) r.failure = "bootstrap failures above limit or non-finite estimate";
    } catch (const Error& e) {
      r.estimate.delta_hat = r.estimate.se = r.estimate.ci_low = r.estimate.ci_high = kNaN;
      r.valid = false;
      r.failure = e.what();
    }
  }
  return record;
}

std::vector<ReplicateRecord> run_study(const ScenarioConfig& config, const StudySettings& settings,
                                       const ProgressFn& progress) {
  config.validate();
  const std::size_t total = settings.replicates;
  std::vector<ReplicateRecord> records(total);
  std::size_t threads = settings.threads != 0 ? settings.threads
                                              : std::max(1u, std::thread::hardware_concurrency());
  threads = std::max<std::size_t>(1, std::min(threads, total));

  std::atomic<std::size_t> next{0}, done{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
      records[i] = run_replicate(config, i, settings);
      const std::size_t d = done.fetch_add(1) + 1;
      if (progress) progress(d, total);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return records;
}

PerformanceSummary summarize_estimates(Method method, std::span<const EffectEstimate> estimates,
                                       double truth) {
  PerformanceSummary s;
  s.method = method;
  s.truth = truth;
  s.n_valid = estimates.size();
  const double n = static_cast<double>(estimates.size());
  if (estimates.empty()) {
    s.bias = s.bias_mcse = s.mse = s.mse_mcse = s.coverage = s.coverage_mcse = kNaN;
    return s;
  }
  double mean = 0.0, mse = 0.0, covered = 0.0;
  for (const auto& e : estimates) {
    mean += e.delta_hat;
    const double d = e.delta_hat - truth;
    mse += d * d;
    if (e.ci_low <= truth && truth <= e.ci_high) covered += 1.0;
  }
  mean /= n;
  mse /= n;
  double ss = 0.0, mse_ss = 0.0;
  for (const auto& e : estimates) {
    ss += (e.delta_hat - mean) * (e.delta_hat - mean);
    const double d = e.delta_hat - truth;
    mse_ss += (d * d - mse) * (d * d - mse);
  }
  s.bias = mean - truth;
  s.mse = mse;
  s.coverage = covered / n;
  s.coverage_mcse = std::sqrt(s.coverage * (1.0 - s.coverage) / n);
  if (estimates.size() >= 2) {
    s.bias_mcse = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    s.mse_mcse = std::sqrt(mse_ss / (n * (n - 1.0)));
  } else {
    s.bias_mcse = s.mse_mcse = kNaN;
  }
  return s;
}

std::vector<PerformanceSummary> summarize(const std::vector<ReplicateRecord>& records,
                                          double truth) {
  std::vector<PerformanceSummary> out;
  for (Method m : kAllMethods) {
    std::vector<EffectEstimate> valid;
    for (const auto& r : records)
      if (r[m].valid) valid.push_back(r[m].estimate);
    out.push_back(summarize_estimates(m, valid, truth));
  }
  return out;
}

void to_json(nlohmann::json& j, const PerformanceSummary& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  j = nlohmann::json{{"method", std::string(to_string(s.method))},
                     {"truth", num(s.truth)},
                     {"bias", num(s.bias)},
                     {"bias_mcse", num(s.bias_mcse)},
                     {"mse", num(s.mse)},
                     {"mse_mcse", num(s.mse_mcse)},
                     {"coverage", num(s.coverage)},
                     {"coverage_mcse", num(s.coverage_mcse)},
                     {"n_valid", s.n_valid}};
}

void from_json(const nlohmann::json& j, PerformanceSummary& s) {
  auto num = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? kNaN : v.get<double>();
  };
  s.method = method_from_string(j.at("method").get<std::string>());
  s.truth = num("truth");
  s.bias = num("bias");
  s.bias_mcse = num("bias_mcse");
  s.mse = num("mse");
  s.mse_mcse = num("mse_mcse");
  s.coverage = num("coverage");
  s.coverage_mcse = num("coverage_mcse");
  s.n_valid = j.at("n_valid").get<std::size_t>();
}

void write_replicates_csv(std::ostream& os, const std::vector<ReplicateRecord>& records,
                          const std::vector<std::string>& provenance) {
  for (const auto& line : provenance) os << "# " << line << '\n';
  os << kReplicateCsvHeader << '\n';
  for (const auto& r : records) {
    for (Method m : kAllMethods) {
      const auto& e = r[m].estimate;
      os << r.replicate_index << ',' << to_string(m) << ',' << format_number(e.delta_hat) << ','
         << format_number(e.se) << ',' << format_number(e.ci_low) << ','
         << format_number(e.ci_high) << ',' << (r[m].valid ? 1 : 0) << '\n';
    }
  }
}

}  // namespace margeff
