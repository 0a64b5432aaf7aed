#include "margeff/linmod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "margeff/error.hpp"
#include "margeff/kernels.hpp"

namespace margeff {
namespace {

// Case weights rescaled to mean 1 over all rows. Coefficients are invariant
// to the scale and this keeps score magnitudes comparable across callers.
struct ScaledWeights {
  std::vector<double> w;
  double scale = 1.0;  // original = scale * w
};

ScaledWeights scaled_weights(const DesignData& data) {
  const std::size_t n = data.rows();
  ScaledWeights out;
  if (data.weights.empty()) {
    out.w.assign(n, 1.0);
    return out;
  }
  out.scale = kernels::sum(data.weights) / static_cast<double>(n);
  out.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.w[i] = data.weights[i] / out.scale;
  return out;
}

std::vector<double> column_norms(const Matrix& x, std::span<const double> w) {
  std::vector<double> norms(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    norms[j] = std::sqrt(kernels::dot3(w, x.col(j), x.col(j)));
    if (!(norms[j] > 0.0))
      throw Error(ErrorKind::SingularDesign,
                  "regressor " + std::to_string(j) + " is zero on all weighted rows");
  }
  return norms;
}

// Upper triangle of X' diag(v) X, mirrored; row-major p x p.
std::vector<double> weighted_gram(const Matrix& x, std::span<const double> v) {
  const std::size_t p = x.cols();
  std::vector<double> h(p * p);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = j; k < p; ++k)
      h[j * p + k] = h[k * p + j] = kernels::dot3(v, x.col(j), x.col(k));
  return h;
}

void predictor_into(const Matrix& x, std::span<const double> beta, std::span<double> eta) {
  std::fill(eta.begin(), eta.end(), 0.0);
  for (std::size_t j = 0; j < x.cols(); ++j)
    if (beta[j] != 0.0) kernels::axpy(beta[j], x.col(j), eta);
}

double scaled_sup_norm(std::span<const double> g, std::span<const double> norms) {
  double m = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) m = std::max(m, std::fabs(g[j]) / norms[j]);
  return m;
}

}  // namespace

std::string_view to_string(Family f) noexcept {
  return f == Family::logistic ? "logistic" : "linear";
}

Family family_from_string(std::string_view name) {
  if (name == "logistic") return Family::logistic;
  if (name == "linear") return Family::linear;
  throw Error(ErrorKind::InvalidArgument, "unknown family '" + std::string(name) + "'");
}

void DesignData::validate(Family family) const {
  const std::size_t n = rows();
  if (cols() == 0) throw Error(ErrorKind::DimensionMismatch, "design has no regressors");
  if (response.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "response length " + std::to_string(response.size()) +
                                                  " != design rows " + std::to_string(n));
  if (!weights.empty() && weights.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "weights length " + std::to_string(weights.size()) +
                                                  " != design rows " + std::to_string(n));
  std::size_t positive = weights.empty() ? n : 0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw Error(ErrorKind::InvalidArgument, "weights must be finite and non-negative");
    if (w > 0.0) ++positive;
  }
  if (positive < 2)
    throw Error(ErrorKind::InvalidArgument, "need at least two rows with positive weight");
  for (double y : response) {
    if (family == Family::logistic ? (y != 0.0 && y != 1.0) : !std::isfinite(y))
      throw Error(ErrorKind::InvalidArgument, family == Family::logistic
                                                  ? "logistic response must be 0 or 1"
                                                  : "response must be finite");
  }
  for (double v : features.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "features must be finite");
}

std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, std::size_t p,
                              double pivot_tolerance) {
  std::vector<double> d(p);
  for (std::size_t j = 0; j < p; ++j) {
    const double ajj = a[j * p + j];
    if (!(ajj > 0.0) || !std::isfinite(ajj))
      throw Error(ErrorKind::SingularDesign, "non-positive diagonal in normal equations");
    d[j] = std::sqrt(ajj);
  }
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < p; ++k) a[j * p + k] /= d[j] * d[k];

  // in-place lower Cholesky factor
  for (std::size_t j = 0; j < p; ++j) {
    double pivot = a[j * p + j];
    for (std::size_t k = 0; k < j; ++k) pivot -= a[j * p + k] * a[j * p + k];
    if (!(pivot > pivot_tolerance))
      throw Error(ErrorKind::SingularDesign,
                  "normal-equations pivot " + std::to_string(j) + " below tolerance");
    const double l = std::sqrt(pivot);
    a[j * p + j] = l;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
      a[i * p + j] = s / l;
    }
  }

  for (std::size_t j = 0; j < p; ++j) b[j] /= d[j];
  for (std::size_t i = 0; i < p; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * p + k] * b[k];
    b[i] = s / a[i * p + i];
  }
  for (std::size_t i = p; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < p; ++k) s -= a[k * p + i] * b[k];
    b[i] = s / a[i * p + i];
  }
  for (std::size_t j = 0; j < p; ++j) b[j] /= d[j];
  return b;
}

GlmFit fit_logistic(const DesignData& data, const FitSettings& settings) {
  data.validate(Family::logistic);
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  const Matrix& x = data.features;
  const auto [w, scale] = scaled_weights(data);
  const auto norms = column_norms(x, w);

  GlmFit out;
  out.family = Family::logistic;
  std::vector<double> beta(p, 0.0), candidate(p);
  std::vector<double> eta(n, 0.0), eta_candidate(n);
  std::vector<double> mu(n), resid(n), var(n), score(p);
  double ll = kernels::logistic_loglik(eta, data.response, w);

  for (int iter = 0;; ++iter) {
    kernels::logistic_terms(eta, data.response, w, mu, resid, var);
    for (std::size_t j = 0; j < p; ++j) score[j] = kernels::dot(resid, x.col(j));
    const double gnorm = scaled_sup_norm(score, norms);
    if (!std::isfinite(gnorm))
      throw Error(ErrorKind::NonConvergence, "non-finite score during IRLS");
    out.iterations = iter;
    out.final_gradient_norm = gnorm;
    if (gnorm <= settings.gradient_tolerance) break;
    if (iter >= settings.max_iterations)
      throw Error(ErrorKind::NonConvergence,
                  "IRLS did not converge in " + std::to_string(settings.max_iterations) +
                      " iterations (score norm " + std::to_string(gnorm) + ")");

    const auto delta = solve_spd(weighted_gram(x, var), score, p, settings.pivot_tolerance);

    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h <= settings.max_halvings; ++h, step *= 0.5) {
      for (std::size_t j = 0; j < p; ++j) candidate[j] = beta[j] + step * delta[j];
      predictor_into(x, candidate, eta_candidate);
      const double ll_candidate = kernels::logistic_loglik(eta_candidate, data.response, w);
      if (std::isfinite(ll_candidate) &&
          ll_candidate >= ll - 1e-12 * std::max(1.0, std::fabs(ll))) {
        ll = ll_candidate;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw Error(ErrorKind::NonConvergence, "step-halving failed to increase the likelihood");
    beta.swap(candidate);
    eta.swap(eta_candidate);
  }

  for (std::size_t i = 0; i < n; ++i)
    if (w[i] > 0.0 && std::fabs(eta[i]) > settings.separation_eta)
      throw Error(ErrorKind::NonConvergence,
                  "fitted probabilities numerically 0 or 1 (quasi-separation)");

  out.coefficients = std::move(beta);
  out.converged = true;
  out.log_likelihood = scale * ll;
  return out;
}

GlmFit fit_linear(const DesignData& data, const FitSettings& settings) {
  data.validate(Family::linear);
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  const Matrix& x = data.features;
  const auto [w, scale] = scaled_weights(data);
  const auto norms = column_norms(x, w);
  const auto gram = weighted_gram(x, w);

  std::vector<double> rhs(p);
  for (std::size_t j = 0; j < p; ++j) rhs[j] = kernels::dot3(w, data.response, x.col(j));
  auto beta = solve_spd(gram, rhs, p, settings.pivot_tolerance);

  std::vector<double> resid(n), score(p);
  auto residual_score = [&] {
    predictor_into(x, beta, resid);
    for (std::size_t i = 0; i < n; ++i) resid[i] = data.response[i] - resid[i];
    for (std::size_t j = 0; j < p; ++j) score[j] = kernels::dot3(w, resid, x.col(j));
  };
  residual_score();
  // one step of iterative refinement
  const auto correction = solve_spd(gram, score, p, settings.pivot_tolerance);
  for (std::size_t j = 0; j < p; ++j) beta[j] += correction[j];
  residual_score();

  GlmFit out;
  out.family = Family::linear;
  out.final_gradient_norm = scaled_sup_norm(score, norms);
  out.converged = out.final_gradient_norm <= settings.gradient_tolerance;
  out.iterations = 1;

  const double wsum = kernels::sum(w);
  const double sigma2 = kernels::dot3(w, resid, resid) / wsum;
  out.log_likelihood =
      sigma2 > 0.0 ? -0.5 * scale * wsum * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0)
                   : std::numeric_limits<double>::infinity();
  out.coefficients = std::move(beta);
  return out;
}

GlmFit fit(Family family, const DesignData& data, const FitSettings& settings) {
  return family == Family::logistic ? fit_logistic(data, settings) : fit_linear(data, settings);
}

std::vector<double> linear_predictor(const Matrix& features, std::span<const double> coefficients) {
  if (features.cols() != coefficients.size())
    throw Error(ErrorKind::DimensionMismatch,
                "feature columns " + std::to_string(features.cols()) + " != coefficients " +
                    std::to_string(coefficients.size()));
  std::vector<double> eta(features.rows());
  predictor_into(features, coefficients, eta);
  return eta;
}

std::vector<double> predict_mean(const GlmFit& fit, const Matrix& features) {
  auto eta = linear_predictor(features, fit.coefficients);
  if (fit.family == Family::logistic) kernels::expit(eta, eta);
  return eta;
}

double logistic_log_likelihood(const DesignData& data, std::span<const double> coefficients) {
  const auto eta = linear_predictor(data.features, coefficients);
  if (data.weights.empty()) {
    const std::vector<double> ones(data.rows(), 1.0);
    return kernels::logistic_loglik(eta, data.response, ones);
  }
  return kernels::logistic_loglik(eta, data.response, data.weights);
}

std::vector<double> logistic_score(const DesignData& data, std::span<const double> coefficients) {
  const std::size_t n = data.rows();
  const auto eta = linear_predictor(data.features, coefficients);
  const std::vector<double> ones = data.weights.empty() ? std::vector<double>(n, 1.0)
                                                        : std::vector<double>{};
  std::span<const double> w = data.weights.empty() ? std::span<const double>(ones)
                                                   : std::span<const double>(data.weights);
  std::vector<double> mu(n), resid(n), var(n), score(data.cols());
  kernels::logistic_terms(eta, data.response, w, mu, resid, var);
  for (std::size_t j = 0; j < data.cols(); ++j) score[j] = kernels::dot(resid, data.features.col(j));
  return score;
}

}  // namespace margeff
