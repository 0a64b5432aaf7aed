#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace margeff {

/// Dense column-major matrix. Columns are contiguous so the kernels can
/// stream a regressor at a time.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[c * rows_ + r]; }

  std::span<double> col(std::size_t c) noexcept { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const noexcept {
    return {data_.data() + c * rows_, rows_};
  }

  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace margeff
