#pragma once

// Two-stage logit poisoning.
//
// Stage one builds a per-class shuffle table from a classifier's class
// representatives: the representative's elements are split by value into
// three groups (most likely / likely / least likely), the groups are mixed by
// entropy-maximizing swaps, the resulting regrouping is read back as an index
// permutation, and a final swap guarantees that the slot of the smallest
// representative element receives the largest one.
//
// Stage two rewrites every uploaded row as eta * P_c(y), where
// P_c(y)[i] = y[pi_c[i]] and c is the row's class key.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logitforge/logits.hpp"
#include "logitforge/model.hpp"

namespace logitforge {

enum class AttackKind { kLogitShuffle, kLabelFlip, kNaive };

std::string_view to_string(AttackKind kind);
std::optional<AttackKind> parse_attack_kind(std::string_view name);

struct AttackConfig {
  AttackKind kind = AttackKind::kLogitShuffle;
  double scaling_factor = 2.0;                // eta
  std::optional<double> naive_magnitude;      // default: eta * max |logit| of the clean batch
  int shuffle_rounds = 500;                   // N_r
  int classifier_epochs = 20;                 // attacker's pre-trained classifier
  double classifier_learning_rate = 0.05;
  std::size_t classifier_hidden = 64;
  std::uint64_t seed = 0;
};

// Origin-group tags: 0 = A (highest centroid), 1 = B, 2 = C.
using GroupTag = int;

// Entropy in bits of the tag frequencies. Throws kEmptyGroup for no tags.
double shannon_entropy(std::span<const GroupTag> tags);

struct ElementGrouping {
  // groups[g] lists element indices in list-position order.
  std::vector<std::vector<std::size_t>> groups;
  // Original index slots owned by each group, ascending; fixed by grouping.
  std::vector<std::vector<std::size_t>> slots;
  // origin[i] = group element i was first assigned to.
  std::vector<GroupTag> origin;

  double total_entropy() const;
};

// k = 3 k-means over the scalar element values, groups ordered by
// descending centroid. Throws kTooFewClasses for fewer than 3 elements.
ElementGrouping group_elements(const RepresentativeVector& rep, std::uint64_t seed);
ElementGrouping group_elements(std::span<const double> values, std::uint64_t seed);

struct EntropyTrace {
  std::vector<double> accepted;  // total entropy after each accepted swap
};

// N_r random cross-group swap proposals; a swap is kept only when the summed
// group entropy strictly increases.
ElementGrouping maximize_entropy(ElementGrouping grouping, int rounds, std::uint64_t seed,
                                 EntropyTrace* trace = nullptr);

// pi[slot_g[j]] = groups[g][j] for every group and list position.
std::vector<std::size_t> permutation_from_grouping(const ElementGrouping& grouping);

// Move the representative's largest element into the slot of its smallest.
void fine_tune_permutation(std::vector<std::size_t>& pi, std::span<const double> representative);

// Full per-class pipeline on one representative vector.
std::vector<std::size_t> class_permutation(std::span<const double> representative, int rounds,
                                           std::uint64_t seed);

struct ShuffleTable {
  std::map<int, std::vector<std::size_t>> per_class;
  std::vector<RepresentativeVector> source_stats;
  double eta = 2.0;
  std::uint64_t seed = 0;

  // {"classes": {"<c>": [...]}, "eta": eta, "seed": seed}
  std::string to_json() const;
};

// Builds pi_c for every class from `classifier`'s representatives on
// (data, labels). Throws kMissingClass if a class has no sample.
ShuffleTable build_shuffle_table(const Classifier& classifier, const Matrix& data,
                                 std::span<const int> labels, const AttackConfig& cfg);

// Same pipeline from precomputed representatives (class ids 0..C-1).
ShuffleTable shuffle_table_from_representatives(std::vector<RepresentativeVector> reps,
                                                const AttackConfig& cfg);

// Row i becomes eta * P_{classes[i]}(row i). Throws kUnknownClass.
LogitBatch apply_poison(const LogitBatch& batch, std::span<const int> sample_classes,
                        const ShuffleTable& table, double eta);

// l -> (C - 1) - l.
std::vector<int> label_flip(std::span<const int> labels, int class_count);

// Fixed perturbation with infinity-norm `magnitude`, drawn from the seed.
// Components are magnitude * (1 - 0.1 * u_j), u_j uniform in [0, 1), with
// the largest set to exactly `magnitude`: a large push of the whole
// distribution with a small random tilt.
std::vector<double> naive_direction(std::size_t class_count, double magnitude, std::uint64_t seed);

// Adds naive_direction(...) to every row. Without an explicit magnitude the
// default is eta * max |logit| over the batch.
LogitBatch naive_poison(const LogitBatch& batch, double magnitude, std::uint64_t seed);
double default_naive_magnitude(const LogitBatch& clean, double eta);

}  // namespace logitforge
