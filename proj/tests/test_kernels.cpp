#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "margeff/error.hpp"
#include "margeff/kernels.hpp"

using namespace margeff;
namespace k = margeff::kernels;

namespace {

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

std::vector<double> random_vector(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

bool close(double a, double b, double rel) {
  return std::fabs(a - b) <= rel * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

bool rel_close(double a, double b, double rel) { return std::fabs(a - b) <= rel * std::fabs(b); }

}  // namespace

TEST_CASE("scalar backend is always available") {
  CHECK(k::available(k::Backend::scalar));
  BackendGuard guard;
  k::set_backend(k::Backend::scalar);
  CHECK(k::active_backend() == k::Backend::scalar);
}

TEST_CASE("scalar kernels on small inputs") {
  BackendGuard guard;
  k::set_backend(k::Backend::scalar);
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6}, c{1, 0, 2};
  CHECK(k::sum(a) == 6.0);
  CHECK(k::dot(a, b) == 32.0);
  CHECK(k::dot3(a, b, c) == 4.0 + 36.0);
  std::vector<double> y{1, 1, 1};
  k::axpy(2.0, a, y);
  CHECK(y == std::vector<double>{3, 5, 7});
  std::vector<double> out(3);
  k::expit(std::vector<double>{0.0, 800.0, -800.0}, out);
  CHECK(out[0] == 0.5);
  CHECK(out[1] == 1.0);
  CHECK(out[2] == 0.0);
  const double ll = k::logistic_loglik(std::vector<double>{0.0}, std::vector<double>{1.0},
                                       std::vector<double>{2.0});
  CHECK(ll == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("kernels handle lengths that are not a multiple of the vector width") {
  BackendGuard guard;
  for (k::Backend be : {k::Backend::scalar, k::Backend::avx2}) {
    if (!k::available(be)) continue;
    k::set_backend(be);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 15u, 16u, 17u, 33u}) {
      std::vector<double> x(n, 1.5);
      CHECK(k::sum(x) == doctest::Approx(1.5 * static_cast<double>(n)));
      CHECK(k::dot(x, x) == doctest::Approx(2.25 * static_cast<double>(n)));
    }
  }
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!k::available(k::Backend::avx2)) {
    MESSAGE("AVX2 not available on this machine; equivalence test skipped");
    return;
  }
  BackendGuard guard;
  const std::size_t n = 1037;
  const auto a = random_vector(n, -3, 3, 1);
  const auto b = random_vector(n, -3, 3, 2);
  const auto c = random_vector(n, 0, 2, 3);
  auto eta = random_vector(n, -40, 40, 4);
  eta[0] = 0.0;
  eta[1] = 709.0;
  eta[2] = -745.0;
  eta[3] = 1e-300;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = (i % 3 == 0) ? 1.0 : 0.0;

  struct Results {
    double sum, dot, dot3, ll;
    k::Moments mom;
    std::vector<double> axpy, mul, ex, ep, mu, resid, var;
  };
  auto run = [&](k::Backend be) {
    k::set_backend(be);
    Results r;
    r.sum = k::sum(a);
    r.dot = k::dot(a, b);
    r.dot3 = k::dot3(a, b, c);
    r.ll = k::logistic_loglik(eta, y, c);
    r.mom = k::expit_moments(a, 0.3);
    r.axpy = b;
    k::axpy(0.7, a, r.axpy);
    r.mul.resize(n);
    k::mul(a, b, r.mul);
    r.ex.resize(n);
    k::exp_offset(a, -1.25, r.ex);
    r.ep.resize(n);
    k::expit(eta, r.ep);
    r.mu.resize(n);
    r.resid.resize(n);
    r.var.resize(n);
    k::logistic_terms(eta, y, c, r.mu, r.resid, r.var);
    return r;
  };
  const Results s = run(k::Backend::scalar);
  const Results v = run(k::Backend::avx2);

  CHECK(close(s.sum, v.sum, 1e-13));
  CHECK(close(s.dot, v.dot, 1e-13));
  CHECK(close(s.dot3, v.dot3, 1e-13));
  CHECK(close(s.ll, v.ll, 1e-13));
  CHECK(close(s.mom.sum, v.mom.sum, 1e-13));
  CHECK(close(s.mom.sum_sq, v.mom.sum_sq, 1e-13));
  for (std::size_t i = 0; i < n; ++i) {
    INFO("i = " << i << ", eta = " << eta[i]);
    CHECK(close(s.axpy[i], v.axpy[i], 2.3e-16));
    CHECK(s.mul[i] == v.mul[i]);
    CHECK(rel_close(v.ex[i], s.ex[i], 1e-15));
    CHECK(std::fabs(s.ep[i] - v.ep[i]) <= 1e-15 * std::max(1e-300, s.ep[i]) + 1e-300);
    CHECK(std::fabs(s.mu[i] - v.mu[i]) <= 1e-15 * std::max(1e-300, s.mu[i]) + 1e-300);
    CHECK(std::fabs(s.resid[i] - v.resid[i]) <= 1e-15 * std::max(1.0, std::fabs(s.resid[i])));
    CHECK(std::fabs(s.var[i] - v.var[i]) <= 1e-15 * std::max(1e-300, s.var[i]) + 1e-300);
  }
}

TEST_CASE("exp and log1p accuracy of the vector path across the range") {
  if (!k::available(k::Backend::avx2)) return;
  BackendGuard guard;
  k::set_backend(k::Backend::avx2);
  std::vector<double> x;
  for (double t = -700.0; t <= 700.0; t += 0.37) x.push_back(t);
  std::vector<double> out(x.size());
  k::exp_offset(x, 0.0, out);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(rel_close(out[i], std::exp(x[i]), 1e-15));

  for (std::size_t i = 0; i < x.size(); ++i) {
    const double one[] = {x[i]}, zero[] = {0.0}, unit[] = {1.0};
    const double expected = -(std::fmax(x[i], 0.0) + std::log1p(std::exp(-std::fabs(x[i]))));
    const double got = k::logistic_loglik(one, zero, unit);
    CHECK(close(got, expected, 1e-15));
  }
}

TEST_CASE("set_backend rejects unavailable backends") {
  if (k::available(k::Backend::avx2)) return;
  CHECK_THROWS_AS(k::set_backend(k::Backend::avx2), Error);
}
