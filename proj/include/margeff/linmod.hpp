#pragma once

// Generalized linear model fitting for the two families the engine needs:
// logistic (canonical logit link) and linear (identity link), both with
// optional non-negative case weights.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "margeff/matrix.hpp"

namespace margeff {

enum class Family { logistic, linear };

std::string_view to_string(Family f) noexcept;
/// Throws Error(InvalidArgument) for unknown names.
Family family_from_string(std::string_view name);

/// Regressors (intercept column included by the caller), response and
/// optional case weights. An empty weight vector means all weights are 1.
struct DesignData {
  Matrix features;
  std::vector<double> response;
  std::vector<double> weights;

  std::size_t rows() const noexcept { return features.rows(); }
  std::size_t cols() const noexcept { return features.cols(); }

  /// Throws Error(DimensionMismatch / InvalidArgument) when the invariants
  /// for `family` do not hold.
  void validate(Family family) const;
};

struct FitSettings {
  double gradient_tolerance = 1e-8;
  int max_iterations = 50;
  int max_halvings = 10;
  /// Relative pivot tolerance of the Cholesky factorization on the
  /// unit-diagonal scaled normal-equations matrix.
  double pivot_tolerance = 1e-12;
  /// A converged logistic fit with |eta| above this on any weighted row has
  /// fitted probabilities numerically 0 or 1 and is reported as
  /// NonConvergence (separation).
  double separation_eta = 30.0;
};

struct GlmFit {
  std::vector<double> coefficients;
  Family family = Family::logistic;
  bool converged = false;
  int iterations = 0;
  /// max_j |x_j' W (y - mu)| / sqrt(x_j' W x_j), weights scaled to mean 1.
  double final_gradient_norm = 0.0;
  /// Weighted log-likelihood with the caller's (unscaled) weights.
  double log_likelihood = 0.0;
};

/// Maximum likelihood by IRLS with step-halving.
/// Errors: NonConvergence, SingularDesign, plus validation errors.
GlmFit fit_logistic(const DesignData& data, const FitSettings& settings = {});

/// Weighted least squares via Cholesky with one refinement step.
/// Errors: SingularDesign, plus validation errors.
GlmFit fit_linear(const DesignData& data, const FitSettings& settings = {});

GlmFit fit(Family family, const DesignData& data, const FitSettings& settings = {});

/// Mean response per row: expit(X b) for logistic, X b for linear.
/// Errors: DimensionMismatch.
std::vector<double> predict_mean(const GlmFit& fit, const Matrix& features);

/// Linear predictor X b. Errors: DimensionMismatch.
std::vector<double> linear_predictor(const Matrix& features, std::span<const double> coefficients);

/// Weighted Bernoulli log-likelihood sum_i w_i (y_i eta_i - log(1 + e^eta_i)).
double logistic_log_likelihood(const DesignData& data, std::span<const double> coefficients);

/// Weighted score sum_i w_i (y_i - expit(eta_i)) x_i.
std::vector<double> logistic_score(const DesignData& data, std::span<const double> coefficients);

/// Solve the symmetric positive definite system a x = b (a is p x p,
/// row-major) by Cholesky on the Jacobi-scaled matrix. Throws
/// SingularDesign when a scaled pivot falls below `pivot_tolerance`.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, std::size_t p,
                              double pivot_tolerance);

}  // namespace margeff
