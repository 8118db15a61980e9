#include "logitforge/defense.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "logitforge/clustering.hpp"
#include "logitforge/error.hpp"
#include "logitforge/kernels.hpp"
#include "logitforge/parallel.hpp"

namespace logitforge {
namespace {

void check_cohort(std::span<const LogitBatch> batches, std::span<const int> public_labels) {
  if (batches.empty()) throw Error(ErrorCode::kInvalidArgument, "no uploads");
  for (const LogitBatch& b : batches) {
    if (b.sample_count() != public_labels.size() || b.class_count() != batches[0].class_count()) {
      throw Error(ErrorCode::kDimensionMismatch, "uploads are not aligned with the public labels");
    }
  }
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<std::vector<RepresentativeVector>> user_class_representatives(
    std::span<const LogitBatch> batches, std::span<const int> public_labels) {
  check_cohort(batches, public_labels);
  std::vector<std::vector<RepresentativeVector>> reps;
  reps.reserve(batches.size());
  for (const LogitBatch& b : batches) {
    try {
      reps.push_back(class_representatives(b, public_labels));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNoSamplesForClass) throw Error(ErrorCode::kMissingClass, e.what());
      throw;
    }
  }
  return reps;
}

BenignCentroid benign_centroid(std::span<const LogitVector> reps_for_class, int clusters,
                               std::uint64_t seed) {
  const std::size_t k = reps_for_class.size();
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "benign centroid needs at least 2 users");
  const std::size_t c = reps_for_class[0].class_count();
  Matrix points(k, c);
  for (std::size_t i = 0; i < k; ++i) {
    const auto v = reps_for_class[i].values();
    std::copy(v.begin(), v.end(), points.row(i).begin());
  }
  SpectralOptions opts;
  opts.seed = seed;
  const SpectralResult sr = spectral_cluster(points, std::min<int>(clusters, static_cast<int>(k)), opts);
  const auto winner = static_cast<int>(
      std::max_element(sr.cluster_sizes.begin(), sr.cluster_sizes.end()) - sr.cluster_sizes.begin());

  BenignCentroid out;
  out.mean.assign(c, 0.0);
  out.benign.assign(k, false);
  std::size_t members = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (sr.labels[i] != winner) continue;
    out.benign[i] = true;
    ++members;
    const auto v = reps_for_class[i].values();
    for (std::size_t j = 0; j < c; ++j) out.mean[j] += v[j];
  }
  for (double& v : out.mean) v /= static_cast<double>(members);
  return out;
}

std::vector<double> temperature_softmax(std::span<const double> similarities, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kNonPositiveTemperature, "temperature must be positive");
  }
  if (similarities.empty()) return {};
  const double top = *std::max_element(similarities.begin(), similarities.end()) / temperature;
  std::vector<double> w(similarities.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(similarities[i] / temperature - top);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "cosine of unequal lengths");
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroNormRepresentative, "cosine with a zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

std::vector<double> normalized_user_weights(const AggregationWeights& w) {
  double total = 0.0;
  for (double v : w.per_user) total += v;
  std::vector<double> out(w.per_user.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = w.per_user[k] / total;
  return out;
}

RobustAggregate robust_aggregate(std::span<const LogitBatch> batches,
                                 std::span<const int> public_labels, DefenseOptions options) {
  check_cohort(batches, public_labels);
  if (batches.size() < 2) throw Error(ErrorCode::kInvalidArgument, "robust aggregation needs K >= 2");
  if (!(options.temperature > 0.0)) {
    throw Error(ErrorCode::kNonPositiveTemperature, "defense temperature must be positive");
  }
  const std::size_t users = batches.size();
  const std::size_t classes = batches[0].class_count();
  const auto reps = user_class_representatives(batches, public_labels);
  for (std::size_t k = 0; k < users; ++k) {
    for (std::size_t c = 0; c < classes; ++c) {
      if (norm2(reps[k][c].vector.values()) == 0.0) {
        throw Error(ErrorCode::kZeroNormRepresentative,
                    "user " + std::to_string(k) + " class " + std::to_string(c));
      }
    }
  }

  std::vector<std::vector<double>> similarity(users, std::vector<double>(classes));
  std::vector<std::vector<double>> per_class(users, std::vector<double>(classes));
  std::vector<std::vector<double>> benign(classes);

  parallel_for(classes, [&](std::size_t c) {
    std::vector<LogitVector> column;
    column.reserve(users);
    for (std::size_t k = 0; k < users; ++k) column.push_back(reps[k][c].vector);
    const BenignCentroid centroid = benign_centroid(column, options.clusters, options.seed);
    std::vector<double> s(users);
    for (std::size_t k = 0; k < users; ++k) s[k] = cosine_similarity(column[k].values(), centroid.mean);
    const std::vector<double> w = temperature_softmax(s, options.temperature);
    for (std::size_t k = 0; k < users; ++k) {
      similarity[k][c] = s[k];
      per_class[k][c] = w[k];
    }
    benign[c] = centroid.mean;
  });

  AggregationWeights weights;
  weights.temperature = options.temperature;
  weights.per_class = per_class;
  weights.per_user.assign(users, 0.0);
  for (std::size_t k = 0; k < users; ++k) {
    for (double v : per_class[k]) weights.per_user[k] += v;
    weights.per_user[k] /= static_cast<double>(classes);
  }

  const std::vector<double> mix = normalized_user_weights(weights);
  std::vector<const Matrix*> inputs;
  for (const LogitBatch& b : batches) inputs.push_back(&b.matrix());
  Matrix global;
  kernels::weighted_sum(inputs, mix, global);
  return {LogitBatch(std::move(global)), std::move(weights), std::move(similarity), std::move(benign)};
}

DefenseAudit audit_error_terms(std::span<const LogitBatch> batches, const std::vector<bool>& malicious,
                               std::span<const int> public_labels, DefenseOptions options) {
  check_cohort(batches, public_labels);
  if (malicious.size() != batches.size()) throw Error(ErrorCode::kDimensionMismatch, "malicious flags");
  const std::size_t cells = batches[0].matrix().size();
  std::vector<double> honest(cells, 0.0), attack(cells, 0.0), plain(cells, 0.0);
  std::size_t h = 0, a = 0;
  for (std::size_t k = 0; k < batches.size(); ++k) {
    const auto v = batches[k].matrix().values();
    auto& acc = malicious[k] ? attack : honest;
    (malicious[k] ? a : h) += 1;
    for (std::size_t e = 0; e < cells; ++e) {
      acc[e] += v[e];
      plain[e] += v[e];
    }
  }
  if (h == 0) throw Error(ErrorCode::kInvalidArgument, "audit needs at least one honest user");
  for (double& v : honest) v /= static_cast<double>(h);
  for (double& v : plain) v /= static_cast<double>(batches.size());
  if (a > 0)
    for (double& v : attack) v /= static_cast<double>(a);

  const RobustAggregate robust = robust_aggregate(batches, public_labels, options);
  DefenseAudit out;
  out.benign_mean = robust.benign_mean;
  out.similarity = robust.similarity;
  out.gap.assign(cells, 0.0);
  out.error_term.assign(cells, 0.0);
  out.deviation_undefended.resize(cells);
  out.deviation_defended.resize(cells);
  const double na = static_cast<double>(a), nh = static_cast<double>(h);
  const auto global = robust.global.matrix().values();
  for (std::size_t e = 0; e < cells; ++e) {
    if (a > 0) out.gap[e] = attack[e] - honest[e];
    out.error_term[e] = na * out.gap[e] + (na / nh - 1.0) * nh * honest[e];
    out.deviation_undefended[e] = plain[e] - honest[e];
    out.deviation_defended[e] = global[e] - honest[e];
  }
  out.undefended_norm = norm2(out.deviation_undefended);
  out.defended_norm = norm2(out.deviation_defended);
  return out;
}

}  // namespace logitforge
