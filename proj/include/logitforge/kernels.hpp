#pragma once

// Dense kernels used by the classifier and the aggregation paths.
//
// `kernels::` runs OpenMP worksharing over independent output rows;
// `kernels::serial::` is the single-threaded reference. Both evaluate every
// output element with the same operation order, so results are bitwise
// identical regardless of thread count. Tests and the benchmark compare them.

#include <cstddef>
#include <span>

#include "logitforge/matrix.hpp"

namespace logitforge::kernels {

// out = a * b^T (+ bias broadcast over rows when non-empty).
// a: n x k, b: m x k, out: n x m.
void matmul_nt(const Matrix& a, const Matrix& b, std::span<const double> bias, Matrix& out);
// out = a^T * b. a: n x p, b: n x q, out: p x q.
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
// out = a * b. a: n x k, b: k x m, out: n x m.
void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out);

// Mean of the rows of `m` grouped by `group[i]` in [0, groups). Rows of
// `out` with no members are left zero; `counts` receives member counts.
void grouped_row_mean(const Matrix& m, std::span<const int> group, std::size_t groups,
                      Matrix& out, std::span<std::size_t> counts);

// out = sum_k weights[k] * inputs[k], elementwise. All inputs share a shape.
void weighted_sum(std::span<const Matrix* const> inputs, std::span<const double> weights,
                  Matrix& out);

namespace serial {
void matmul_nt(const Matrix& a, const Matrix& b, std::span<const double> bias, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out);
void grouped_row_mean(const Matrix& m, std::span<const int> group, std::size_t groups,
                      Matrix& out, std::span<std::size_t> counts);
void weighted_sum(std::span<const Matrix* const> inputs, std::span<const double> weights,
                  Matrix& out);
}  // namespace serial

// Number of OpenMP workers honoring LOGITFORGE_THREADS (0 or unset = auto).
int configure_threads();

}  // namespace logitforge::kernels
