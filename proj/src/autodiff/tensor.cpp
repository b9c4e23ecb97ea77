#include "metroflow/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "metroflow/error.hpp"

namespace metroflow {

std::string shape_string(std::size_t rows, std::size_t cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    fail(ErrorCategory::shape, "tensor " + metroflow::shape_string(rows, cols) + " given " +
                                   std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCategory::shape, "ragged rows in tensor literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(values));
}

std::string Tensor::shape_string() const { return metroflow::shape_string(rows_, cols_); }

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) {
    fail(ErrorCategory::shape, "row slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                   ") out of range for " + shape_string());
  }
  std::vector<double> values(values_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                             values_.begin() + static_cast<std::ptrdiff_t>(end * cols_));
  return Tensor(end - begin, cols_, std::move(values));
}

}  // namespace metroflow
