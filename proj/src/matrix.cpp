#include "logitforge/matrix.hpp"

#include <algorithm>
#include <string>

#include "logitforge/error.hpp"

namespace logitforge {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "matrix storage holds " + std::to_string(data_.size()) + " values, expected " +
                    std::to_string(rows_ * cols_));
  }
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace logitforge
