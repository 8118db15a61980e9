#pragma once

// Robust logit aggregation.
//
// For every class c the server averages each user's uploads over the public
// samples labeled c, clusters those K representatives spectrally, takes the
// largest cluster's mean as the benign reference, scores each user by
// cosine similarity to it, and turns the scores into per-class weights with
// a temperature softmax across users. A user's final weight is its mean over
// classes; weights are renormalized to sum to one before the weighted mean
// of the uploaded batches is formed.

#include <cstddef>
#include <span>
#include <vector>

#include "logitforge/logits.hpp"

namespace logitforge {

struct AggregationWeights {
  std::vector<std::vector<double>> per_class;  // [K][C], columns sum to 1
  std::vector<double> per_user;                // w_k = mean_c w_kc
  double temperature = 0.5;
};

struct DefenseOptions {
  double temperature = 0.5;
  int clusters = 2;
  std::uint64_t seed = 0;
};

// reps[k][c] is user k's mean over rows labeled c.
std::vector<std::vector<RepresentativeVector>> user_class_representatives(
    std::span<const LogitBatch> batches, std::span<const int> public_labels);

struct BenignCentroid {
  std::vector<double> mean;
  std::vector<bool> benign;
};

// Largest spectral cluster among the K vectors (lowest label on size ties).
BenignCentroid benign_centroid(std::span<const LogitVector> reps_for_class, int clusters = 2,
                               std::uint64_t seed = 0);

// exp(s_k / T) / sum_j exp(s_j / T), max-subtracted.
std::vector<double> temperature_softmax(std::span<const double> similarities, double temperature);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct RobustAggregate {
  LogitBatch global;
  AggregationWeights weights;
  std::vector<std::vector<double>> similarity;  // S_kc, [K][C]
  std::vector<std::vector<double>> benign_mean;  // y_benign per class, [C][C]
};

RobustAggregate robust_aggregate(std::span<const LogitBatch> batches,
                                 std::span<const int> public_labels, DefenseOptions options = {});

// Normalized user weights w_k / sum_j w_j.
std::vector<double> normalized_user_weights(const AggregationWeights& w);

// Error-term audit over one cohort. Uploads are split into honest and
// malicious users; every deviation is measured against the honest mean.
struct DefenseAudit {
  std::vector<std::vector<double>> benign_mean;     // per class y_benign
  std::vector<std::vector<double>> similarity;      // S_kc
  std::vector<double> gap;                          // delta = mean(malicious) - mean(honest)
  std::vector<double> error_term;                   // |A| delta + (|A|/|H| - 1) |H| y
  std::vector<double> deviation_undefended;         // plain mean - honest mean
  std::vector<double> deviation_defended;           // robust aggregate - honest mean
  double undefended_norm = 0.0;
  double defended_norm = 0.0;
};

DefenseAudit audit_error_terms(std::span<const LogitBatch> batches, const std::vector<bool>& malicious,
                               std::span<const int> public_labels, DefenseOptions options = {});

}  // namespace logitforge
