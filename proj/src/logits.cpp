#include "logitforge/logits.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "logitforge/error.hpp"
#include "logitforge/kernels.hpp"
#include "logitforge/parallel.hpp"

namespace logitforge {
namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " holds a non-finite value");
  }
}

void require_same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "logit vectors of length " + std::to_string(a.size()) +
                                                   " and " + std::to_string(b.size()));
  }
}

}  // namespace

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw Error(ErrorCode::kInvalidArgument, "a logit vector needs at least 2 classes");
  require_finite(values_, "logit vector");
}

LogitBatch::LogitBatch(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1) throw Error(ErrorCode::kInvalidArgument, "a logit batch needs at least one row");
  if (rows_.cols() < 2) throw Error(ErrorCode::kInvalidArgument, "a logit batch needs at least 2 classes");
  require_finite(rows_.values(), "logit batch");
}

LogitVector LogitBatch::vector(std::size_t i) const {
  const auto r = row(i);
  return LogitVector(std::vector<double>(r.begin(), r.end()));
}

bool DistanceMatrix::degenerate() const {
  return std::any_of(degenerate_rows.begin(), degenerate_rows.end(), [](bool d) { return d; });
}

RepresentativeVector representative_vector(const LogitBatch& batch, std::span<const int> labels,
                                           int class_id) {
  if (labels.size() != batch.sample_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "label count differs from batch length");
  }
  std::vector<double> sum(batch.class_count(), 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != class_id) continue;
    const auto r = batch.row(i);
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += r[j];
    ++count;
  }
  if (count == 0) {
    throw Error(ErrorCode::kNoSamplesForClass, "class " + std::to_string(class_id) + " has no rows");
  }
  for (double& v : sum) v /= static_cast<double>(count);
  return {class_id, LogitVector(std::move(sum)), count};
}

std::vector<RepresentativeVector> class_representatives(const LogitBatch& batch,
                                                        std::span<const int> labels) {
  if (labels.size() != batch.sample_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "label count differs from batch length");
  }
  const std::size_t classes = batch.class_count();
  Matrix means;
  std::vector<std::size_t> counts(classes);
  kernels::grouped_row_mean(batch.matrix(), labels, classes, means, counts);
  std::vector<RepresentativeVector> reps;
  reps.reserve(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorCode::kNoSamplesForClass, "class " + std::to_string(c) + " has no rows");
    }
    const auto r = means.row(c);
    reps.push_back({static_cast<int>(c), LogitVector(std::vector<double>(r.begin(), r.end())),
                    counts[c]});
  }
  return reps;
}

DistanceMatrix relevance_matrix(std::span<const double> v) {
  require_finite(v, "relevance_matrix input");
  const std::size_t n = v.size();
  DistanceMatrix m{n, std::vector<double>(n * n, 0.0), std::vector<bool>(n, false)};
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) denom += std::abs(v[i] - v[k]);
    if (denom == 0.0) {
      m.degenerate_rows[i] = true;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) m.entries[i * n + j] = std::abs(v[i] - v[j]) / denom;
    }
  }
  return m;
}

double score_s1(std::span<const double> original, std::span<const double> poisoned) {
  require_same_size(original, poisoned);
  const DistanceMatrix a = relevance_matrix(original);
  const DistanceMatrix b = relevance_matrix(poisoned);
  double total = 0.0;
  for (std::size_t e = 0; e < a.entries.size(); ++e) total += std::abs(a.entries[e] - b.entries[e]);
  return total;
}

std::size_t argmax_index(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::kInvalidArgument, "argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::size_t argmin_index(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::kInvalidArgument, "argmin of an empty vector");
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

double score_s2(std::span<const double> original, std::span<const double> poisoned) {
  require_same_size(original, poisoned);
  const std::size_t top = argmax_index(original);
  const std::size_t moved = argmax_index(poisoned);
  if (top == moved) return 0.0;
  const DistanceMatrix m = relevance_matrix(original);
  return std::abs(original[moved] - poisoned[moved]) * m(top, moved);
}

ScoreSummary mean_scores(const LogitBatch& original, const LogitBatch& poisoned) {
  if (original.sample_count() != poisoned.sample_count() ||
      original.class_count() != poisoned.class_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "score batches differ in shape");
  }
  const std::size_t n = original.sample_count();
  std::vector<double> s1(n), s2(n);
  parallel_for(n, [&](std::size_t r) {
    s1[r] = score_s1(original.row(r), poisoned.row(r));
    s2[r] = score_s2(original.row(r), poisoned.row(r));
  });
  ScoreSummary out;
  for (std::size_t i = 0; i < n; ++i) {
    out.mean_s1 += s1[i];
    out.mean_s2 += s2[i];
  }
  out.mean_s1 /= static_cast<double>(n);
  out.mean_s2 /= static_cast<double>(n);
  out.rows = n;
  return out;
}

void write_logits_csv(std::ostream& out, const LogitBatch& batch) {
  char buf[64];
  for (std::size_t i = 0; i < batch.sample_count(); ++i) {
    const auto r = batch.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out.put(',');
      const auto res = std::to_chars(buf, buf + sizeof buf, r[j]);
      out.write(buf, res.ptr - buf);
    }
    out.put('\n');
  }
}

void write_logits_csv(const std::filesystem::path& path, const LogitBatch& batch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_logits_csv(out, batch);
}

LogitBatch read_logits_csv(std::istream& in) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t fields = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      const auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc() || res.ptr != comma) {
        throw Error(ErrorCode::kInvalidArgument, "logit CSV line " + std::to_string(rows + 1) +
                                                     ": bad number '" + std::string(p, comma) + "'");
      }
      values.push_back(v);
      ++fields;
      p = comma + 1;
    }
    if (rows == 0) cols = fields;
    if (fields != cols) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "logit CSV line " + std::to_string(rows + 1) + " has " + std::to_string(fields) +
                      " columns, expected " + std::to_string(cols));
    }
    ++rows;
  }
  return LogitBatch(Matrix(rows, cols, std::move(values)));
}

LogitBatch read_logits_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_logits_csv(in);
}

}  // namespace logitforge
