#pragma once

// Simulation study driver: R replicates of (generate S1 and S2, estimate
// delta_AB with every method), then bias / MSE / coverage with Monte Carlo
// standard errors.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "margeff/calibrate.hpp"
#include "margeff/dgm.hpp"
#include "margeff/estimators.hpp"

namespace margeff {

struct StudySettings {
  std::uint64_t seed = 20230101;
  std::size_t replicates = 200;
  std::size_t bootstrap = 200;
  /// 0 means std::thread::hardware_concurrency().
  std::size_t threads = 0;
  std::size_t calibration_draws = kDefaultCalibrationDraws;
  double level = 0.95;
  FitSettings fit;
  MaicSettings maic;
  double max_failure_fraction = 0.05;
};

struct MethodResult {
  EffectEstimate estimate;  // delta_AB
  bool valid = false;
  std::string failure;  // empty when the estimator returned
};

struct ReplicateRecord {
  std::size_t replicate_index = 0;
  std::array<MethodResult, 3> results;  // indexed like kAllMethods

  const MethodResult& operator[](Method m) const noexcept {
    return results[static_cast<std::size_t>(m)];
  }
};

struct PerformanceSummary {
  Method method = Method::bucher;
  double truth = 0.0;
  double bias = 0.0, bias_mcse = 0.0;
  double mse = 0.0, mse_mcse = 0.0;
  double coverage = 0.0, coverage_mcse = 0.0;
  std::size_t n_valid = 0;
};

/// True delta_AB in S2 assembled from the truths of both anchored arms.
struct TruthLedger {
  MarginalTruth ac_s1;  // A vs C in S1 (what the unadjusted method targets)
  MarginalTruth ac_s2;  // A vs C in S2
  MarginalTruth bc_s2;  // B vs C in S2
  double delta_ab = 0.0;
};

void to_json(nlohmann::json& j, const TruthLedger& t);

/// Computes the truths on a common covariate sample per study. Throws
/// Error(InvalidArgument) if the A-vs-C and B-vs-C truths in S2 differ,
/// since the engine's scenarios define delta_AB = 0 by construction.
TruthLedger truth_ledger(const ScenarioConfig& config, const StudySettings& settings);

EstimatorSettings estimator_settings(const ScenarioConfig& config, const StudySettings& settings,
                                     std::size_t replicate_index);

/// One replicate. Per-method failures are recorded, never thrown.
ReplicateRecord run_replicate(const ScenarioConfig& config, std::size_t replicate_index,
                              const StudySettings& settings);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// All replicates, parallel over replicates; output is independent of the
/// thread count. `progress` is called from worker threads.
std::vector<ReplicateRecord> run_study(const ScenarioConfig& config, const StudySettings& settings,
                                       const ProgressFn& progress = {});

/// Performance measures per method over valid replicates.
std::vector<PerformanceSummary> summarize(const std::vector<ReplicateRecord>& records,
                                          double truth);

/// Same measures from raw estimates (used by summarize and the report).
PerformanceSummary summarize_estimates(Method method, std::span<const EffectEstimate> estimates,
                                       double truth);

void to_json(nlohmann::json& j, const PerformanceSummary& s);
void from_json(const nlohmann::json& j, PerformanceSummary& s);

inline constexpr const char* kReplicateCsvHeader = "replicate,method,delta_hat,se,ci_low,ci_high,valid";

/// CSV with '#'-prefixed provenance lines, the fixed header, then one row
/// per (replicate, method). Numbers use %.17g so files round-trip exactly.
void write_replicates_csv(std::ostream& os, const std::vector<ReplicateRecord>& records,
                          const std::vector<std::string>& provenance);

}  // namespace margeff
