#include "logitforge/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "logitforge/error.hpp"
#include "logitforge/rng.hpp"

namespace logitforge {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Matrix kmeanspp_seeds(const Matrix& points, int k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(static_cast<std::size_t>(k), points.cols());
  std::vector<bool> chosen(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

  std::size_t pick = uniform_index(rng, n);
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += nearest[i];
      if (total > 0.0) {
        double target = uniform01(rng) * total;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (nearest[i] <= 0.0) continue;
          pick = i;
          target -= nearest[i];
          if (target < 0.0) break;
        }
      } else {
        // All remaining mass sits on existing seeds: take the lowest unused index.
        pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
      }
    }
    chosen[pick] = true;
    const auto src = points.row(pick);
    std::copy(src.begin(), src.end(), centroids.row(static_cast<std::size_t>(c)).begin());
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), src));
    }
  }
  return centroids;
}

// Returns true when any assignment changed.
bool assign(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
            double& inertia) {
  bool changed = false;
  inertia = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      const double d = squared_distance(points.row(i), centroids.row(c));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    if (labels[i] >= 0 &&
        squared_distance(points.row(i), centroids.row(static_cast<std::size_t>(labels[i]))) == best_d) {
      best = labels[i];
    }
    if (best != labels[i]) changed = true;
    labels[i] = best;
    inertia += best_d;
  }
  return changed;
}

void update_means(const Matrix& points, const std::vector<int>& labels, Matrix& centroids,
                  std::vector<std::size_t>& counts) {
  const Matrix previous = centroids;
  centroids = Matrix(centroids.rows(), centroids.cols());
  counts.assign(centroids.rows(), 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    auto dst = centroids.row(c);
    const auto src = points.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    ++counts[c];
  }
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    auto dst = centroids.row(c);
    if (counts[c] == 0) {
      std::copy(previous.row(c).begin(), previous.row(c).end(), dst.begin());
      continue;
    }
    for (double& v : dst) v /= static_cast<double>(counts[c]);
  }
}

// Empty cluster repair: move the point farthest from its own centroid (drawn
// from clusters with more than one member) into the empty cluster.
bool repair_empty(const Matrix& points, std::vector<int>& labels, Matrix& centroids,
                  std::vector<std::size_t>& counts) {
  bool repaired = false;
  for (std::size_t e = 0; e < counts.size(); ++e) {
    if (counts[e] != 0) continue;
    std::size_t far = points.rows();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      const auto own = static_cast<std::size_t>(labels[i]);
      if (counts[own] < 2) continue;
      const double d = squared_distance(points.row(i), centroids.row(own));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == points.rows()) break;
    --counts[static_cast<std::size_t>(labels[far])];
    labels[far] = static_cast<int>(e);
    counts[e] = 1;
    repaired = true;
  }
  if (repaired) update_means(points, labels, centroids, counts);
  return repaired;
}

KMeansResult kmeans_once(const Matrix& points, int k, Rng& rng, int max_iter) {
  KMeansResult res;
  res.centroids = kmeanspp_seeds(points, k, rng);
  res.assignments.assign(points.rows(), -1);
  assign(points, res.centroids, res.assignments, res.inertia);
  std::vector<std::size_t> counts;
  for (int iter = 0; iter < max_iter; ++iter) {
    update_means(points, res.assignments, res.centroids, counts);
    repair_empty(points, res.assignments, res.centroids, counts);
    const bool changed = assign(points, res.centroids, res.assignments, res.inertia);
    res.inertia_trace.push_back(res.inertia);
    res.iterations = iter + 1;
    if (!changed) break;
  }
  return res;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, KMeansOptions options) {
  if (k < 1 || static_cast<std::size_t>(k) > points.rows()) {
    throw Error(ErrorCode::kInvalidK, "k = " + std::to_string(k) + " with " +
                                          std::to_string(points.rows()) + " points");
  }
  if (options.restarts < 1 || options.max_iter < 1) {
    throw Error(ErrorCode::kInvalidArgument, "restarts and max_iter must be positive");
  }
  KMeansResult best;
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng(derive_seed(seed, "kmeans", static_cast<std::uint64_t>(r)));
    KMeansResult run = kmeans_once(points, k, rng, options.max_iter);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

EigenResult symmetric_eigen(const Matrix& m, double tol, int max_sweeps) {
  const std::size_t n = m.rows();
  if (m.cols() != n) throw Error(ErrorCode::kNotSymmetric, "matrix is not square");
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-10) {
        throw Error(ErrorCode::kNotSymmetric, "entries (" + std::to_string(i) + "," +
                                                  std::to_string(j) + ") differ from transpose");
      }
      norm += m(i, j) * m(i, j);
    }
  }
  norm = std::sqrt(norm);

  Matrix a = m;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  auto off_norm = [&a, n] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  EigenResult res;
  while (off_norm() > tol * norm) {
    if (res.sweeps == max_sweeps) {
      throw Error(ErrorCode::kNoConvergence, "Jacobi did not converge in " +
                                                 std::to_string(max_sweeps) + " sweeps");
    }
    ++res.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&a](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  res.values.resize(n);
  res.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    res.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) res.vectors(i, j) = v(i, order[j]);
  }
  return res;
}

SpectralResult spectral_cluster(const Matrix& vectors, int k, SpectralOptions options) {
  const std::size_t n = vectors.rows();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error(ErrorCode::kInvalidK, "k = " + std::to_string(k) + " with " + std::to_string(n) + " vectors");
  }
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double x : vectors.row(i)) s += x * x;
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) throw Error(ErrorCode::kZeroVector, "vector " + std::to_string(i) + " has zero norm");
  }

  Matrix dissim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      const auto a = vectors.row(i);
      const auto b = vectors.row(j);
      for (std::size_t t = 0; t < a.size(); ++t) dot += a[t] * b[t];
      const double d = std::max(0.0, 1.0 - dot / (norms[i] * norms[j]));
      dissim(i, j) = dissim(j, i) = d;
    }
  }

  // Direction classes: rows within 1e-12 cosine distance of an earlier leader.
  std::vector<std::size_t> leader(n);
  std::vector<std::size_t> leaders;
  for (std::size_t i = 0; i < n; ++i) {
    leader[i] = i;
    for (std::size_t l : leaders) {
      if (dissim(i, l) <= 1e-12) {
        leader[i] = l;
        break;
      }
    }
    if (leader[i] == i) leaders.push_back(i);
  }

  SpectralResult res;
  res.labels.assign(n, 0);
  if (k > 1 && leaders.size() < static_cast<std::size_t>(k)) {
    for (std::size_t i = 0; i < n; ++i) {
      res.labels[i] = static_cast<int>(std::find(leaders.begin(), leaders.end(), leader[i]) - leaders.begin());
    }
  } else if (k > 1) {
    std::vector<double> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.push_back(dissim(i, j));
    double sigma = 1.0;
    if (!pairs.empty()) {
      std::sort(pairs.begin(), pairs.end());
      const std::size_t mid = pairs.size() / 2;
      sigma = pairs.size() % 2 ? pairs[mid] : 0.5 * (pairs[mid - 1] + pairs[mid]);
    }
    sigma = std::max(sigma, 1e-6);

    Matrix affinity(n, n);
    std::vector<double> degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        affinity(i, j) = std::exp(-dissim(i, j) / sigma);
        degree[i] += affinity(i, j);
      }
    }
    Matrix laplacian(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double norm_a = affinity(i, j) / std::sqrt(degree[i] * degree[j]);
        laplacian(i, j) = (i == j ? 1.0 : 0.0) - norm_a;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) laplacian(j, i) = laplacian(i, j);

    const EigenResult eig = symmetric_eigen(laplacian);
    const auto kk = static_cast<std::size_t>(k);
    Matrix embedding(n, kk);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < kk; ++j) {
        embedding(i, j) = eig.vectors(i, j);
        s += embedding(i, j) * embedding(i, j);
      }
      s = std::sqrt(s);
      if (s > 0.0)
        for (double& x : embedding.row(i)) x /= s;
    }
    KMeansOptions km;
    km.restarts = options.kmeans_restarts;
    res.labels = kmeans(embedding, k, options.seed, km).assignments;
    for (std::size_t i = 0; i < n; ++i) res.labels[i] = res.labels[leader[i]];
  }

  res.cluster_sizes.assign(static_cast<std::size_t>(k), 0);
  for (int l : res.labels) ++res.cluster_sizes[static_cast<std::size_t>(l)];
  return res;
}

}  // namespace logitforge
