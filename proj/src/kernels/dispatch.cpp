#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string>

#include "margeff/error.hpp"
#include "table.hpp"

namespace margeff::kernels {
namespace {

using detail::Table;

bool cpu_has_avx2() noexcept {
#if defined(MARGEFF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table& table_for(Backend b) noexcept {
#if defined(MARGEFF_HAVE_AVX2)
  if (b == Backend::avx2) return detail::avx2_table();
#else
  (void)b;
#endif
  return detail::scalar_table();
}

const Table* initial_table() noexcept {
  Backend choice = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
  if (const char* env = std::getenv("MARGEFF_SIMD")) {
    const std::string v(env);
    if (v == "scalar") choice = Backend::scalar;
    if (v == "avx2" && available(Backend::avx2)) choice = Backend::avx2;
  }
  return &table_for(choice);
}

std::atomic<const Table*>& current() noexcept {
  static std::atomic<const Table*> t{initial_table()};
  return t;
}

inline const Table& tbl() noexcept { return *current().load(std::memory_order_relaxed); }

}  // namespace

std::string_view to_string(Backend b) noexcept {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

bool available(Backend b) noexcept {
  return b == Backend::scalar || cpu_has_avx2();
}

Backend active_backend() noexcept { return tbl().backend; }

void set_backend(Backend b) {
  if (!available(b))
    throw Error(ErrorKind::InvalidArgument,
                "kernel backend " + std::string(to_string(b)) + " not available on this CPU");
  current().store(&table_for(b), std::memory_order_relaxed);
}

double sum(std::span<const double> x) noexcept { return tbl().sum(x.data(), x.size()); }

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
  return tbl().dot(a.data(), b.data(), a.size());
}

double dot3(std::span<const double> a, std::span<const double> b,
            std::span<const double> c) noexcept {
  assert(a.size() == b.size() && a.size() == c.size());
  return tbl().dot3(a.data(), b.data(), c.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  assert(x.size() == y.size());
  tbl().axpy(alpha, x.data(), y.data(), x.size());
}

void mul(std::span<const double> a, std::span<const double> b, std::span<double> out) noexcept {
  assert(a.size() == b.size() && a.size() == out.size());
  tbl().mul(a.data(), b.data(), out.data(), a.size());
}

void exp_offset(std::span<const double> x, double offset, std::span<double> out) noexcept {
  assert(x.size() == out.size());
  tbl().exp_offset(x.data(), offset, out.data(), x.size());
}

void expit(std::span<const double> x, std::span<double> out) noexcept {
  assert(x.size() == out.size());
  tbl().expit(x.data(), out.data(), x.size());
}

Moments expit_moments(std::span<const double> x, double offset) noexcept {
  return tbl().expit_moments(x.data(), offset, x.size());
}

void logistic_terms(std::span<const double> eta, std::span<const double> y,
                    std::span<const double> w, std::span<double> mu, std::span<double> resid,
                    std::span<double> var) noexcept {
  assert(eta.size() == y.size() && eta.size() == w.size());
  assert(eta.size() == mu.size() && eta.size() == resid.size() && eta.size() == var.size());
  tbl().logistic_terms(eta.data(), y.data(), w.data(), mu.data(), resid.data(), var.data(),
                       eta.size());
}

double logistic_loglik(std::span<const double> eta, std::span<const double> y,
                       std::span<const double> w) noexcept {
  assert(eta.size() == y.size() && eta.size() == w.size());
  return tbl().logistic_loglik(eta.data(), y.data(), w.data(), eta.size());
}

}  // namespace margeff::kernels
