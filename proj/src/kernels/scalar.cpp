// Scalar reference kernels. These define the semantics the SIMD variants
// are tested against.

#include <cmath>

#include "table.hpp"

namespace margeff::kernels::detail {
namespace {

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3_scalar(const double* a, const double* b, const double* c, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i] * c[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void exp_offset_scalar(const double* x, double offset, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i] + offset);
}

inline double expit1(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void expit_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = expit1(x[i]);
}

Moments expit_moments_scalar(const double* x, double offset, std::size_t n) {
  Moments m;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = expit1(x[i] + offset);
    m.sum += p;
    m.sum_sq += p * p;
  }
  return m;
}

void logistic_terms_scalar(const double* eta, const double* y, const double* w, double* mu,
                           double* resid, double* var, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double p = expit1(eta[i]);
    mu[i] = p;
    resid[i] = w[i] * (y[i] - p);
    var[i] = w[i] * p * (1.0 - p);
  }
}

double logistic_loglik_scalar(const double* eta, const double* y, const double* w,
                              std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = eta[i];
    // log(1 + exp(e)) without overflow
    const double softplus = std::fmax(e, 0.0) + std::log1p(std::exp(-std::fabs(e)));
    s += w[i] * (y[i] * e - softplus);
  }
  return s;
}

constexpr Table kScalar{
    Backend::scalar,       sum_scalar,           dot_scalar,
    dot3_scalar,           axpy_scalar,          mul_scalar,
    exp_offset_scalar,     expit_scalar,         expit_moments_scalar,
    logistic_terms_scalar, logistic_loglik_scalar,
};

}  // namespace

const Table& scalar_table() noexcept { return kScalar; }

}  // namespace margeff::kernels::detail
