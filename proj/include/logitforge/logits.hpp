#pragma once

// Logit vectors, class representatives, and the two poisoning-effect scores.
//
// The relevance ("distance") matrix of a logit vector e has entries
//   s_ij = |e_i - e_j| / sum_k |e_i - e_k|,  s_ii = 0,
// so every non-degenerate row is a probability vector. A larger s_ij means
// classes i and j are judged less alike. S1 is the entrywise L1 distance
// between the matrices of an original and a poisoned vector; S2 weighs the
// value change at the poisoned argmax by how far that class sits from the
// original argmax.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "logitforge/matrix.hpp"

namespace logitforge {

class LogitVector {
 public:
  // Throws kInvalidArgument unless size >= 2 and every value is finite.
  explicit LogitVector(std::vector<double> values);

  std::size_t class_count() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const LogitVector&, const LogitVector&) = default;

 private:
  std::vector<double> values_;
};

// N x C raw outputs over the public set, row i aligned with sample i.
class LogitBatch {
 public:
  explicit LogitBatch(Matrix rows);

  std::size_t sample_count() const noexcept { return rows_.rows(); }
  std::size_t class_count() const noexcept { return rows_.cols(); }
  std::span<const double> row(std::size_t i) const { return rows_.row(i); }
  LogitVector vector(std::size_t i) const;
  const Matrix& matrix() const noexcept { return rows_; }

  friend bool operator==(const LogitBatch&, const LogitBatch&) = default;

 private:
  Matrix rows_;
};

struct RepresentativeVector {
  int class_id;
  LogitVector vector;
  std::size_t sample_count;
};

struct DistanceMatrix {
  std::size_t class_count = 0;
  std::vector<double> entries;  // row-major C x C
  std::vector<bool> degenerate_rows;

  double operator()(std::size_t i, std::size_t j) const { return entries[i * class_count + j]; }
  bool degenerate() const;
};

// Component-wise mean over exactly the rows labeled `class_id`.
RepresentativeVector representative_vector(const LogitBatch& batch, std::span<const int> labels,
                                           int class_id);

// Representatives for classes 0..class_count-1 in one grouped pass.
// Throws kNoSamplesForClass if any class has no rows.
std::vector<RepresentativeVector> class_representatives(const LogitBatch& batch,
                                                        std::span<const int> labels);

// Rows whose denominator is zero (all components equal to e_i, i.e. a
// constant vector) are emitted as zeros and flagged.
DistanceMatrix relevance_matrix(std::span<const double> v);
inline DistanceMatrix relevance_matrix(const LogitVector& v) { return relevance_matrix(v.values()); }

double score_s1(std::span<const double> original, std::span<const double> poisoned);
double score_s2(std::span<const double> original, std::span<const double> poisoned);
inline double score_s1(const LogitVector& a, const LogitVector& b) {
  return score_s1(a.values(), b.values());
}
inline double score_s2(const LogitVector& a, const LogitVector& b) {
  return score_s2(a.values(), b.values());
}

// Lowest index attaining the maximum.
std::size_t argmax_index(std::span<const double> v);
std::size_t argmin_index(std::span<const double> v);

struct ScoreSummary {
  double mean_s1 = 0.0;
  double mean_s2 = 0.0;
  std::size_t rows = 0;
};

// Row-wise S1/S2 averaged over two aligned batches.
ScoreSummary mean_scores(const LogitBatch& original, const LogitBatch& poisoned);

// CSV: one row per sample, C columns, no header, shortest round-trip decimals.
void write_logits_csv(std::ostream& out, const LogitBatch& batch);
void write_logits_csv(const std::filesystem::path& path, const LogitBatch& batch);
LogitBatch read_logits_csv(std::istream& in);
LogitBatch read_logits_csv(const std::filesystem::path& path);

}  // namespace logitforge
