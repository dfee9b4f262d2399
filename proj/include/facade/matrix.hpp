#pragma once

#include "facade/error.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace facade {

/// Dense row-major matrix of doubles.
class Matrix
{
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows)
    , cols_(cols)
    , values_(rows * cols, 0.0)
  {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return { values_.data() + r * cols_, cols_ }; }
  std::span<const double> row(std::size_t r) const { return { values_.data() + r * cols_, cols_ }; }

  void push_row(std::span<const double> row)
  {
    if (rows_ == 0 && values_.empty())
      cols_ = row.size();
    if (row.size() != cols_)
      throw Error("row has " + std::to_string(row.size()) + " values, matrix has " +
                  std::to_string(cols_) + " columns");
    values_.insert(values_.end(), row.begin(), row.end());
    ++rows_;
  }

  const std::vector<double>& values() const noexcept { return values_; }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

} // namespace facade
