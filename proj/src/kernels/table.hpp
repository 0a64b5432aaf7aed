#pragma once

#include <cstddef>

#include "margeff/kernels.hpp"

namespace margeff::kernels::detail {

struct Table {
  Backend backend;
  double (*sum)(const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*dot3)(const double*, const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*mul)(const double*, const double*, double*, std::size_t);
  void (*exp_offset)(const double*, double, double*, std::size_t);
  void (*expit)(const double*, double*, std::size_t);
  Moments (*expit_moments)(const double*, double, std::size_t);
  void (*logistic_terms)(const double*, const double*, const double*, double*, double*,
                         double*, std::size_t);
  double (*logistic_loglik)(const double*, const double*, const double*, std::size_t);
};

const Table& scalar_table() noexcept;
#if defined(MARGEFF_HAVE_AVX2)
const Table& avx2_table() noexcept;
#endif

}  // namespace margeff::kernels::detail
