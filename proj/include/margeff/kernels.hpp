#pragma once

// Data-parallel inner loops shared by the fitters, the MAIC solver and the
// Monte Carlo integrator. Each kernel has a scalar reference implementation
// and, on x86-64, an AVX2/FMA variant. The variant is chosen once at startup
// (CPU detection, overridable with MARGEFF_SIMD=scalar|avx2) and can be
// switched explicitly for equivalence testing.
//
// Reductions are evaluated in a fixed order per backend, so results are
// reproducible for a given backend regardless of threading.

#include <cstddef>
#include <span>
#include <string_view>

namespace margeff::kernels {

enum class Backend { scalar, avx2 };

std::string_view to_string(Backend b) noexcept;

bool available(Backend b) noexcept;
Backend active_backend() noexcept;
/// Throws margeff::Error(InvalidArgument) if the backend is not available.
void set_backend(Backend b);

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
};

// Spans passed together must have equal length; this is checked in debug
// builds only.

double sum(std::span<const double> x) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;
/// sum_i a_i * b_i * c_i
double dot3(std::span<const double> a, std::span<const double> b,
            std::span<const double> c) noexcept;

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
/// out_i = a_i * b_i
void mul(std::span<const double> a, std::span<const double> b, std::span<double> out) noexcept;

/// out_i = exp(x_i + offset)
void exp_offset(std::span<const double> x, double offset, std::span<double> out) noexcept;
/// out_i = 1 / (1 + exp(-x_i))
void expit(std::span<const double> x, std::span<double> out) noexcept;
/// Sum and sum of squares of expit(x_i + offset).
Moments expit_moments(std::span<const double> x, double offset) noexcept;

/// IRLS working quantities for the logistic model at linear predictor eta:
/// mu = expit(eta), resid = w (y - mu), var = w mu (1 - mu).
void logistic_terms(std::span<const double> eta, std::span<const double> y,
                    std::span<const double> w, std::span<double> mu,
                    std::span<double> resid, std::span<double> var) noexcept;

/// sum_i w_i (y_i eta_i - log(1 + exp(eta_i)))
double logistic_loglik(std::span<const double> eta, std::span<const double> y,
                       std::span<const double> w) noexcept;

}  // namespace margeff::kernels
