#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "logitforge/defense.hpp"
#include "logitforge/error.hpp"

using namespace logitforge;

namespace {

struct Cohort {
  std::vector<LogitBatch> batches;
  std::vector<int> labels;
  std::vector<bool> malicious;
  Matrix honest_mean;
};

// Honest users scatter around a class-dependent mean y; malicious users
// upload -eta * their clean rows.
Cohort make_cohort(std::size_t k, std::size_t bad, double eta, std::uint64_t seed) {
  const std::size_t n = 60, c = 5;
  std::mt19937_64 g(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  Cohort out;
  out.labels.resize(n);
  Matrix y(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = static_cast<int>(i % c);
    for (std::size_t j = 0; j < c; ++j) y(i, j) = (j == i % c ? 6.0 : -1.0) + 0.5 * static_cast<double>(j);
  }
  out.honest_mean = Matrix(n, c);
  for (std::size_t u = 0; u < k; ++u) {
    Matrix m = y;
    for (double& v : m.values()) v += noise(g);
    const bool is_bad = u >= k - bad;
    out.malicious.push_back(is_bad);
    if (is_bad) {
      for (double& v : m.values()) v *= -eta;
    } else {
      for (std::size_t e = 0; e < m.size(); ++e) out.honest_mean.values()[e] += m.values()[e] / static_cast<double>(k - bad);
    }
    out.batches.emplace_back(std::move(m));
  }
  return out;
}

double row_mean_l2(const Matrix& a, const Matrix& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    total += std::sqrt(s);
  }
  return total / static_cast<double>(a.rows());
}

}  // namespace

TEST(UserReps, MatchPerUserMeanOracle) {
  const Cohort co = make_cohort(4, 1, 2.0, 1);
  const auto reps = user_class_representatives(co.batches, co.labels);
  ASSERT_EQ(reps.size(), 4u);
  for (std::size_t u = 0; u < 4; ++u) {
    for (int c = 0; c < 5; ++c) {
      for (std::size_t j = 0; j < 5; ++j) {
        double s = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < co.labels.size(); ++i)
          if (co.labels[i] == c) {
            s += co.batches[u].matrix()(i, j);
            ++n;
          }
        EXPECT_NEAR(reps[u][static_cast<std::size_t>(c)].vector[j], s / n, 1e-12);
      }
    }
  }
  const auto single = user_class_representatives(std::span<const LogitBatch>(co.batches.data(), 1), co.labels);
  const auto direct = representative_vector(co.batches[0], co.labels, 2);
  EXPECT_EQ(single[0][2].vector, direct.vector);
}

TEST(UserReps, MissingClass) {
  const std::vector<LogitBatch> b{LogitBatch(Matrix(2, 3, {1, 2, 3, 4, 5, 6}))};
  try {
    user_class_representatives(b, std::vector<int>{0, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingClass);
  }
}

TEST(BenignCentroid, IdenticalAndSplitCohorts) {
  const std::vector<LogitVector> same(4, LogitVector({1.0, 2.0, -0.5}));
  const auto a = benign_centroid(same);
  EXPECT_EQ(a.benign, std::vector<bool>(4, true));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.mean[j], same[0][j], 1e-12);

  std::mt19937_64 g(3);
  std::normal_distribution<double> d(0, 0.05);
  std::vector<LogitVector> mixed;
  std::vector<double> expect(3, 0.0);
  for (int k = 0; k < 10; ++k) {
    const double s = k < 7 ? 1.0 : -1.0;
    std::vector<double> v{s + d(g), 0.5 * s + d(g), d(g)};
    if (k < 7)
      for (std::size_t j = 0; j < 3; ++j) expect[j] += v[j] / 7.0;
    mixed.emplace_back(v);
  }
  const auto b = benign_centroid(mixed);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(b.benign[static_cast<std::size_t>(k)], k < 7);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(b.mean[j], expect[j], 1e-12);
}

TEST(TemperatureSoftmax, HandValuesAndLimits) {
  const auto w = temperature_softmax(std::vector<double>{1.0, -1.0}, 0.5);
  const double e2 = std::exp(2.0), em2 = std::exp(-2.0);
  EXPECT_NEAR(w[0], e2 / (e2 + em2), 1e-15);
  EXPECT_NEAR(w[0], 0.9820, 5e-5);
  EXPECT_NEAR(w[1], 0.0180, 5e-5);
  for (double t : {0.1, 1.0, 7.0}) {
    for (double v : temperature_softmax(std::vector<double>(4, 0.3), t)) EXPECT_NEAR(v, 0.25, 1e-15);
  }
  const std::vector<double> s{0.9, 0.2, -0.4};
  double prev = 1.0;
  for (double t : {0.1, 1.0, 10.0}) {
    const double top = temperature_softmax(s, t)[0];
    EXPECT_LT(top, prev);
    prev = top;
  }
  try {
    temperature_softmax(s, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPositiveTemperature);
  }
}

TEST(Cosine, ClampedAndZeroNorm) {
  EXPECT_NEAR(cosine_similarity(std::vector<double>{1, 2}, std::vector<double>{-2, -4}), -1.0, 1e-15);
  EXPECT_THROW(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 1}), Error);
}

TEST(RobustAggregate, IdenticalUsers) {
  const LogitBatch b(Matrix(4, 2, {1, 0, 0, 1, 2, -1, -1, 3}));
  const std::vector<LogitBatch> batches(3, b);
  const auto r = robust_aggregate(batches, std::vector<int>{0, 1, 0, 1});
  for (double w : r.weights.per_user) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  for (std::size_t e = 0; e < b.matrix().size(); ++e)
    EXPECT_NEAR(r.global.matrix().values()[e], b.matrix().values()[e], 1e-12);
}

TEST(RobustAggregate, SuppressesNegatedScaledUploads) {
  const Cohort co = make_cohort(10, 3, 5.0, 7);
  const auto r = robust_aggregate(co.batches, co.labels, {0.5, 2, 1});
  for (std::size_t k = 0; k < 10; ++k) {
    if (co.malicious[k]) EXPECT_LT(r.weights.per_user[k], 0.5 * 0.1);
  }
  for (std::size_t c = 0; c < 5; ++c) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 10; ++k) {
      EXPECT_GE(r.weights.per_class[k][c], 0.0);
      sum += r.weights.per_class[k][c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  Matrix plain(co.honest_mean.rows(), co.honest_mean.cols());
  for (const auto& b : co.batches)
    for (std::size_t e = 0; e < plain.size(); ++e) plain.values()[e] += b.matrix().values()[e] / 10.0;
  EXPECT_LT(row_mean_l2(r.global.matrix(), co.honest_mean), row_mean_l2(plain, co.honest_mean));
}

TEST(RobustAggregate, HugeTemperatureIsPlainMean) {
  const Cohort co = make_cohort(6, 0, 1.0, 2);
  const auto r = robust_aggregate(co.batches, co.labels, {1e6, 2, 0});
  Matrix plain(co.honest_mean.rows(), co.honest_mean.cols());
  for (const auto& b : co.batches)
    for (std::size_t e = 0; e < plain.size(); ++e) plain.values()[e] += b.matrix().values()[e] / 6.0;
  for (std::size_t e = 0; e < plain.size(); ++e)
    EXPECT_NEAR(r.global.matrix().values()[e], plain.values()[e], 1e-6 * std::max(1.0, std::fabs(plain.values()[e])));
}

TEST(RobustAggregate, ScaleInvariantAndDeterministic) {
  const Cohort co = make_cohort(8, 2, 4.0, 5);
  std::vector<LogitBatch> scaled;
  for (const auto& b : co.batches) {
    Matrix m = b.matrix();
    for (double& v : m.values()) v *= 3.5;
    scaled.emplace_back(std::move(m));
  }
  const auto a = robust_aggregate(co.batches, co.labels, {0.5, 2, 4});
  const auto b = robust_aggregate(scaled, co.labels, {0.5, 2, 4});
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(a.weights.per_class[k][c], b.weights.per_class[k][c], 1e-9);
  const auto again = robust_aggregate(co.batches, co.labels, {0.5, 2, 4});
  EXPECT_EQ(a.weights.per_class, again.weights.per_class);
  EXPECT_EQ(a.global, again.global);
}

TEST(RobustAggregate, MonotoneInOwnSimilarity) {
  const std::vector<double> base{0.2, 0.5, -0.1, 0.9};
  double prev = 0.0;
  for (double s : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    auto sims = base;
    sims[2] = s;
    const double w = temperature_softmax(sims, 0.5)[2];
    EXPECT_GE(w, prev);
    prev = w;
  }
}

TEST(RobustAggregate, Errors) {
  const LogitBatch b(Matrix(2, 2, {1, 2, 3, 4}));
  const std::vector<LogitBatch> one{b};
  EXPECT_THROW(robust_aggregate(one, std::vector<int>{0, 1}), Error);
  const std::vector<LogitBatch> zero{b, LogitBatch(Matrix(2, 2, 0.0))};
  try {
    robust_aggregate(zero, std::vector<int>{0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroNormRepresentative);
  }
}

TEST(Audit, ErrorTermAndDeviations) {
  const Cohort co = make_cohort(10, 3, 5.0, 11);
  const auto audit = audit_error_terms(co.batches, co.malicious, co.labels, {0.5, 2, 0});
  const std::size_t cells = co.honest_mean.size();
  for (std::size_t e = 0; e < cells; ++e) {
    double sum_a = 0.0, sum_h = 0.0, plain = 0.0;
    for (std::size_t k = 0; k < 10; ++k) {
      const double v = co.batches[k].matrix().values()[e];
      (co.malicious[k] ? sum_a : sum_h) += v;
      plain += v / 10.0;
    }
    EXPECT_NEAR(audit.error_term[e], sum_a - sum_h, 1e-9);
    EXPECT_NEAR(audit.deviation_undefended[e], plain - co.honest_mean.values()[e], 1e-9);
  }
  for (const auto& row : audit.similarity)
    for (double s : row) {
      EXPECT_GE(s, -1.0 - 1e-12);
      EXPECT_LE(s, 1.0 + 1e-12);
    }
  EXPECT_LT(audit.defended_norm, 0.1 * audit.undefended_norm);
}
