#include "logitforge/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

#include "logitforge/error.hpp"

namespace logitforge::kernels {
namespace {

inline double dot(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void check(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kDimensionMismatch, what);
}

void prepare_nt(const Matrix& a, const Matrix& b, std::span<const double> bias, Matrix& out) {
  check(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  check(bias.empty() || bias.size() == b.rows(), "matmul_nt: bias length");
  if (out.rows() != a.rows() || out.cols() != b.rows()) out = Matrix(a.rows(), b.rows());
}

inline void row_nt(const Matrix& a, const Matrix& b, std::span<const double> bias, Matrix& out,
                   std::size_t i) {
  const double* ai = a.row(i).data();
  double* oi = out.row(i).data();
  for (std::size_t j = 0; j < b.rows(); ++j) {
    oi[j] = dot(ai, b.row(j).data(), a.cols()) + (bias.empty() ? 0.0 : bias[j]);
  }
}

void prepare_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  check(a.rows() == b.rows(), "matmul_tn: row counts differ");
  out = Matrix(a.cols(), b.cols());
}

// Row p of a^T b: sum over n of a(n,p) * b.row(n), n ascending.
inline void row_tn(const Matrix& a, const Matrix& b, Matrix& out, std::size_t p) {
  double* op = out.row(p).data();
  for (std::size_t n = 0; n < a.rows(); ++n) {
    const double coeff = a(n, p);
    if (coeff != 0.0) axpy(coeff, b.row(n).data(), op, b.cols());
  }
}

void prepare_nn(const Matrix& a, const Matrix& b, Matrix& out) {
  check(a.cols() == b.rows(), "matmul_nn: inner dimensions differ");
  out = Matrix(a.rows(), b.cols());
}

inline void row_nn(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
  double* oi = out.row(i).data();
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double coeff = a(i, k);
    if (coeff != 0.0) axpy(coeff, b.row(k).data(), oi, b.cols());
  }
}

void prepare_grouped(const Matrix& m, std::span<const int> group, std::size_t groups,
                     Matrix& out, std::span<std::size_t> counts) {
  check(group.size() == m.rows(), "grouped_row_mean: group list length");
  check(counts.size() == groups, "grouped_row_mean: counts length");
  for (int g : group) {
    if (g < 0 || static_cast<std::size_t>(g) >= groups) {
      throw Error(ErrorCode::kUnknownClass, "grouped_row_mean: group id " + std::to_string(g));
    }
  }
  out = Matrix(groups, m.cols());
  std::fill(counts.begin(), counts.end(), 0);
}

inline void finish_group(Matrix& out, std::span<std::size_t> counts, std::size_t g) {
  if (counts[g] == 0) return;
  const double inv = static_cast<double>(counts[g]);
  for (double& v : out.row(g)) v /= inv;
}

void prepare_weighted(std::span<const Matrix* const> inputs, std::span<const double> weights,
                      Matrix& out) {
  check(!inputs.empty(), "weighted_sum: no inputs");
  check(inputs.size() == weights.size(), "weighted_sum: weight count");
  for (const Matrix* m : inputs) {
    check(m->rows() == inputs[0]->rows() && m->cols() == inputs[0]->cols(),
          "weighted_sum: shapes differ");
  }
  out = Matrix(inputs[0]->rows(), inputs[0]->cols());
}

inline double weighted_element(std::span<const Matrix* const> inputs,
                               std::span<const double> weights, std::size_t e) {
  double s = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) s += weights[k] * inputs[k]->values()[e];
  return s;
}

}  // namespace

void matmul_nt(const Matrix& a, const Matrix& b, std::span<const double> bias, Matrix& out) {
  prepare_nt(a, b, bias, out);
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) row_nt(a, b, bias, out, static_cast<std::size_t>(i));
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  prepare_tn(a, b, out);
  const auto p = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < p; ++i) row_tn(a, b, out, static_cast<std::size_t>(i));
}

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
  prepare_nn(a, b, out);
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) row_nn(a, b, out, static_cast<std::size_t>(i));
}

void grouped_row_mean(const Matrix& m, std::span<const int> group, std::size_t groups,
                      Matrix& out, std::span<std::size_t> counts) {
  prepare_grouped(m, group, groups, out, counts);
  const auto ng = static_cast<std::ptrdiff_t>(groups);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t gi = 0; gi < ng; ++gi) {
    const auto g = static_cast<std::size_t>(gi);
    double* og = out.row(g).data();
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (static_cast<std::size_t>(group[i]) != g) continue;
      axpy(1.0, m.row(i).data(), og, m.cols());
      ++counts[g];
    }
    finish_group(out, counts, g);
  }
}

void weighted_sum(std::span<const Matrix* const> inputs, std::span<const double> weights,
                  Matrix& out) {
  prepare_weighted(inputs, weights, out);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  auto values = out.values();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t e = 0; e < n; ++e) {
    values[static_cast<std::size_t>(e)] =
        weighted_element(inputs, weights, static_cast<std::size_t>(e));
  }
}

namespace serial {

void matmul_nt(const Matrix& a, const Matrix& b, std::span<const double> bias, Matrix& out) {
  prepare_nt(a, b, bias, out);
  for (std::size_t i = 0; i < a.rows(); ++i) row_nt(a, b, bias, out, i);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  prepare_tn(a, b, out);
  for (std::size_t p = 0; p < a.cols(); ++p) row_tn(a, b, out, p);
}

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
  prepare_nn(a, b, out);
  for (std::size_t i = 0; i < a.rows(); ++i) row_nn(a, b, out, i);
}

void grouped_row_mean(const Matrix& m, std::span<const int> group, std::size_t groups,
                      Matrix& out, std::span<std::size_t> counts) {
  prepare_grouped(m, group, groups, out, counts);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto g = static_cast<std::size_t>(group[i]);
    axpy(1.0, m.row(i).data(), out.row(g).data(), m.cols());
    ++counts[g];
  }
  for (std::size_t g = 0; g < groups; ++g) finish_group(out, counts, g);
}

void weighted_sum(std::span<const Matrix* const> inputs, std::span<const double> weights,
                  Matrix& out) {
  prepare_weighted(inputs, weights, out);
  auto values = out.values();
  for (std::size_t e = 0; e < values.size(); ++e) {
    values[e] = weighted_element(inputs, weights, e);
  }
}

}  // namespace serial

int configure_threads() {
  if (const char* env = std::getenv("LOGITFORGE_THREADS")) {
    const int requested = std::atoi(env);
    if (requested > 0) omp_set_num_threads(requested);
  }
  return omp_get_max_threads();
}

}  // namespace logitforge::kernels
