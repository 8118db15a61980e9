#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "logitforge/matrix.hpp"

namespace logitforge {

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centroids;  // k x d
  double inertia = 0.0;
  int iterations = 0;
  // Inertia after each Lloyd iteration of the winning restart.
  std::vector<double> inertia_trace;
};

struct KMeansOptions {
  int max_iter = 100;
  int restarts = 1;
};

// Lloyd iterations from k-means++ seeding until the assignment stops
// changing or max_iter is reached. With restarts > 1 the lowest-inertia run
// wins (earliest on ties). Points exactly equidistant to several centroids
// keep their current cluster, then prefer the lowest cluster id.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, KMeansOptions options = {});

struct EigenResult {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column j is the eigenvector of values[j]
  int sweeps = 0;
};

// Cyclic Jacobi rotations. Throws kNotSymmetric if |m - m^T| > 1e-10
// anywhere, kNoConvergence if the off-diagonal mass is still above
// tol * ||m||_F after max_sweeps.
EigenResult symmetric_eigen(const Matrix& m, double tol = 1e-10, int max_sweeps = 100);

struct SpectralResult {
  std::vector<int> labels;
  std::vector<std::size_t> cluster_sizes;
};

struct SpectralOptions {
  std::uint64_t seed = 0;
  int kmeans_restarts = 10;
};

// Normalized spectral clustering of the rows of `vectors` under the cosine
// affinity A_ij = exp(-(1 - cos(v_i, v_j)) / sigma), sigma = median pairwise
// (1 - cos) floored at 1e-6. Rows pointing in the same direction always
// share a label; when fewer than k distinct directions exist, each direction
// gets its own label and the remaining clusters stay empty.
SpectralResult spectral_cluster(const Matrix& vectors, int k, SpectralOptions options = {});

}  // namespace logitforge
