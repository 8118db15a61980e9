#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "logitforge/clustering.hpp"
#include "logitforge/error.hpp"

using namespace logitforge;

namespace {

double partition_inertia(const Matrix& p, const std::vector<int>& a, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    std::vector<double> mean(p.cols(), 0.0);
    int n = 0;
    for (std::size_t i = 0; i < p.rows(); ++i)
      if (a[i] == c) {
        ++n;
        for (std::size_t j = 0; j < p.cols(); ++j) mean[j] += p(i, j);
      }
    if (n == 0) continue;
    for (double& m : mean) m /= n;
    for (std::size_t i = 0; i < p.rows(); ++i)
      if (a[i] == c)
        for (std::size_t j = 0; j < p.cols(); ++j) total += (p(i, j) - mean[j]) * (p(i, j) - mean[j]);
  }
  return total;
}

// Minimum inertia over every assignment of n points to k labels.
double brute_force_inertia(const Matrix& p, int k) {
  const std::size_t n = p.rows();
  std::vector<int> a(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    best = std::min(best, partition_inertia(p, a, k));
    std::size_t i = 0;
    while (i < n && ++a[i] == k) a[i++] = 0;
    if (i == n) break;
  }
  return best;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d(0, 1);
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = d(g);
  return m;
}

}  // namespace

TEST(KMeans, KEqualsNHasZeroInertia) {
  const Matrix p(4, 1, {0, 1, 5, 9});
  const auto r = kmeans(p, 4, 1);
  EXPECT_EQ(r.inertia, 0.0);
  EXPECT_TRUE(same_partition(r.assignments, {0, 1, 2, 3}));
}

TEST(KMeans, TwoBlobsSplitPerfectly) {
  const Matrix p(4, 1, {0.0, 0.1, 9.9, 10.0});
  const auto r = kmeans(p, 2, 3);
  EXPECT_TRUE(same_partition(r.assignments, {0, 0, 1, 1}));
  EXPECT_NEAR(r.inertia, brute_force_inertia(p, 2), 1e-12);
}

TEST(KMeans, InvalidK) {
  const Matrix p(3, 1, {1, 2, 3});
  EXPECT_THROW(kmeans(p, 0, 1), Error);
  EXPECT_THROW(kmeans(p, 4, 1), Error);
}

TEST(KMeans, InertiaTraceNonIncreasing) {
  std::mt19937_64 g(4);
  Matrix p(60, 2);
  for (double& v : p.values()) v = std::normal_distribution<double>(0, 1)(g);
  const auto r = kmeans(p, 4, 9);
  for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) EXPECT_LE(r.inertia_trace[i], r.inertia_trace[i - 1] + 1e-12);
}

TEST(KMeans, AssignmentsAreNearestCentroid) {
  std::mt19937_64 g(5);
  Matrix p(40, 3);
  for (double& v : p.values()) v = std::normal_distribution<double>(0, 1)(g);
  const auto r = kmeans(p, 3, 2);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto dist = [&](std::size_t c) {
      double s = 0;
      for (std::size_t j = 0; j < 3; ++j) s += (p(i, j) - r.centroids(c, j)) * (p(i, j) - r.centroids(c, j));
      return s;
    };
    for (std::size_t c = 0; c < 3; ++c) EXPECT_LE(dist(static_cast<std::size_t>(r.assignments[i])), dist(c) + 1e-12);
  }
}

TEST(KMeans, DeterministicGivenSeed) {
  std::mt19937_64 g(6);
  Matrix p(30, 2);
  for (double& v : p.values()) v = std::normal_distribution<double>(0, 1)(g);
  EXPECT_EQ(kmeans(p, 3, 77, {100, 3}).assignments, kmeans(p, 3, 77, {100, 3}).assignments);
}

TEST(KMeans, SmallInstancesMatchBruteForce) {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 4 + trial % 5;
    const int k = 2 + trial % 2;
    const std::size_t d = 1 + trial % 2;
    Matrix p(n, d);
    for (double& v : p.values()) v = std::normal_distribution<double>(0, 1)(g);
    const auto r = kmeans(p, k, static_cast<std::uint64_t>(trial), {100, 10});
    EXPECT_NEAR(r.inertia, brute_force_inertia(p, k), 1e-9) << "trial " << trial;
  }
}

TEST(Eigen, IdentityAndDiagonal) {
  const auto id = symmetric_eigen(Matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  for (double v : id.values) EXPECT_NEAR(v, 1.0, 1e-14);
  const auto d = symmetric_eigen(Matrix(3, 3, {3, 0, 0, 0, 1, 0, 0, 0, 2}));
  EXPECT_EQ(d.values, (std::vector<double>{1, 2, 3}));
  EXPECT_NEAR(std::fabs(d.vectors(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::fabs(d.vectors(2, 1)), 1.0, 1e-14);
  EXPECT_NEAR(std::fabs(d.vectors(0, 2)), 1.0, 1e-14);
}

TEST(Eigen, ReconstructsRandomSymmetric) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix m = random_symmetric(6, s);
    const auto r = symmetric_eigen(m);
    double err = 0.0, trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      trace += m(i, i);
      sum += r.values[i];
      for (std::size_t j = 0; j < 6; ++j) {
        double v = 0.0, dot = 0.0;
        for (std::size_t k = 0; k < 6; ++k) {
          v += r.vectors(i, k) * r.values[k] * r.vectors(j, k);
          dot += r.vectors(k, i) * r.vectors(k, j);
        }
        err += (v - m(i, j)) * (v - m(i, j));
        EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-10);
      }
    }
    EXPECT_LT(std::sqrt(err), 1e-8);
    EXPECT_NEAR(sum, trace, 1e-8);
    for (std::size_t i = 1; i < 6; ++i) EXPECT_LE(r.values[i - 1], r.values[i]);
  }
}

TEST(Eigen, Errors) {
  try {
    symmetric_eigen(Matrix(2, 2, {1, 2, 3, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotSymmetric);
  }
  try {
    symmetric_eigen(random_symmetric(8, 1), 1e-300, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoConvergence);
  }
}

TEST(Spectral, OneClusterAndCopies) {
  const Matrix v(5, 3, {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3});
  const auto one = spectral_cluster(v, 1);
  EXPECT_EQ(one.cluster_sizes, (std::vector<std::size_t>{5}));
  const auto two = spectral_cluster(v, 2);
  for (int l : two.labels) EXPECT_EQ(l, two.labels[0]);
  EXPECT_EQ(two.cluster_sizes[static_cast<std::size_t>(two.labels[0])], 5u);
}

TEST(Spectral, SeparatesOpposedBundles) {
  std::mt19937_64 g(12);
  std::normal_distribution<double> d(0, 0.1);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix v(10, 4);
    std::vector<int> oracle(10);
    for (std::size_t i = 0; i < 10; ++i) {
      const double sign = (i * 7 + static_cast<std::size_t>(trial)) % 3 == 0 ? -1.0 : 1.0;
      v(i, 0) = sign;
      for (std::size_t j = 1; j < 4; ++j) v(i, j) = d(g);
      oracle[i] = v(i, 0) > 0 ? 1 : 0;
    }
    const auto r = spectral_cluster(v, 2, {static_cast<std::uint64_t>(trial), 10});
    EXPECT_TRUE(same_partition(r.labels, oracle)) << "trial " << trial;
    EXPECT_EQ(r.cluster_sizes[0] + r.cluster_sizes[1], 10u);
  }
}

TEST(Spectral, ZeroVectorRejected) {
  try {
    spectral_cluster(Matrix(3, 2, {1, 0, 0, 0, 0, 1}), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroVector);
  }
}

TEST(Eigen, NormalizedLaplacianSpectrumInRange) {
  std::mt19937_64 g(21);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  const std::size_t n = 7;
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = i == j ? 1.0 : u(g);
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) l(i, j) = (i == j ? 1.0 : 0.0) - a(i, j) / std::sqrt(deg[i] * deg[j]);
  const auto r = symmetric_eigen(l);
  for (double v : r.values) {
    EXPECT_GE(v, -1e-8);
    EXPECT_LE(v, 2.0 + 1e-8);
  }
  EXPECT_NEAR(r.values.front(), 0.0, 1e-8);
}
