#include "logitforge/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "logitforge/clustering.hpp"
#include "logitforge/error.hpp"
#include "logitforge/rng.hpp"

namespace logitforge {
namespace {

// Swaps must beat the current entropy by more than rounding noise.
constexpr double kEntropyEpsilon = 1e-12;

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kLogitShuffle: return "logit_shuffle";
    case AttackKind::kLabelFlip: return "label_flip";
    case AttackKind::kNaive: return "naive";
  }
  return "unknown";
}

std::optional<AttackKind> parse_attack_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "logit_shuffle") return AttackKind::kLogitShuffle;
  if (lower == "label_flip") return AttackKind::kLabelFlip;
  if (lower == "naive") return AttackKind::kNaive;
  return std::nullopt;
}

double shannon_entropy(std::span<const GroupTag> tags) {
  if (tags.empty()) throw Error(ErrorCode::kEmptyGroup, "entropy of an empty group");
  std::map<GroupTag, std::size_t> counts;
  for (GroupTag t : tags) ++counts[t];
  std::vector<std::size_t> c;
  for (const auto& [tag, n] : counts) c.push_back(n);
  std::sort(c.begin(), c.end());
  const double total = static_cast<double>(tags.size());
  double e = 0.0;
  for (std::size_t n : c) {
    const double p = static_cast<double>(n) / total;
    e -= p * std::log2(p);
  }
  return e == 0.0 ? 0.0 : e;  // avoid -0
}

double ElementGrouping::total_entropy() const {
  double total = 0.0;
  std::vector<GroupTag> tags;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    tags.clear();
    for (std::size_t e : g) tags.push_back(origin[e]);
    total += shannon_entropy(tags);
  }
  return total;
}

ElementGrouping group_elements(std::span<const double> values, std::uint64_t seed) {
  const std::size_t n = values.size();
  if (n < 3) throw Error(ErrorCode::kTooFewClasses, "three-way grouping needs at least 3 elements");
  Matrix points(n, 1, std::vector<double>(values.begin(), values.end()));
  KMeansOptions opts;
  opts.restarts = 10;
  const KMeansResult km = kmeans(points, 3, seed, opts);

  std::vector<int> by_centroid = {0, 1, 2};
  std::stable_sort(by_centroid.begin(), by_centroid.end(), [&km](int a, int b) {
    return km.centroids(static_cast<std::size_t>(a), 0) > km.centroids(static_cast<std::size_t>(b), 0);
  });
  std::vector<GroupTag> tag_of_cluster(3);
  for (int g = 0; g < 3; ++g) tag_of_cluster[static_cast<std::size_t>(by_centroid[static_cast<std::size_t>(g)])] = g;

  ElementGrouping out;
  out.groups.assign(3, {});
  out.origin.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const GroupTag g = tag_of_cluster[static_cast<std::size_t>(km.assignments[i])];
    out.origin[i] = g;
    out.groups[static_cast<std::size_t>(g)].push_back(i);
  }
  out.slots = out.groups;
  return out;
}

ElementGrouping group_elements(const RepresentativeVector& rep, std::uint64_t seed) {
  return group_elements(rep.vector.values(), seed);
}

ElementGrouping maximize_entropy(ElementGrouping grouping, int rounds, std::uint64_t seed,
                                 EntropyTrace* trace) {
  std::vector<std::size_t> live;
  for (std::size_t g = 0; g < grouping.groups.size(); ++g) {
    if (!grouping.groups[g].empty()) live.push_back(g);
  }
  if (live.size() < 2) return grouping;

  Rng rng(seed);
  double entropy = grouping.total_entropy();
  for (int r = 0; r < rounds; ++r) {
    const std::size_t ia = uniform_index(rng, live.size());
    std::size_t ib = uniform_index(rng, live.size() - 1);
    if (ib >= ia) ++ib;
    auto& ga = grouping.groups[live[ia]];
    auto& gb = grouping.groups[live[ib]];
    const std::size_t pa = uniform_index(rng, ga.size());
    const std::size_t pb = uniform_index(rng, gb.size());
    std::swap(ga[pa], gb[pb]);
    const double candidate = grouping.total_entropy();
    if (candidate <= entropy + kEntropyEpsilon) {
      std::swap(ga[pa], gb[pb]);
    } else {
      entropy = candidate;
      if (trace) trace->accepted.push_back(entropy);
    }
  }
  return grouping;
}

std::vector<std::size_t> permutation_from_grouping(const ElementGrouping& grouping) {
  std::size_t n = 0;
  for (const auto& s : grouping.slots) n += s.size();
  std::vector<std::size_t> pi(n, n);
  for (std::size_t g = 0; g < grouping.groups.size(); ++g) {
    const auto& members = grouping.groups[g];
    const auto& slots = grouping.slots[g];
    if (members.size() != slots.size()) {
      throw Error(ErrorCode::kInvalidArgument, "group sizes changed during shuffling");
    }
    for (std::size_t j = 0; j < members.size(); ++j) pi[slots[j]] = members[j];
  }
  return pi;
}

void fine_tune_permutation(std::vector<std::size_t>& pi, std::span<const double> representative) {
  const std::size_t top = argmax_index(representative);
  const std::size_t bottom = argmin_index(representative);
  const auto holder = static_cast<std::size_t>(std::find(pi.begin(), pi.end(), top) - pi.begin());
  std::swap(pi[holder], pi[bottom]);
}

std::vector<std::size_t> class_permutation(std::span<const double> representative, int rounds,
                                           std::uint64_t seed) {
  std::vector<std::size_t> pi(representative.size());
  std::iota(pi.begin(), pi.end(), std::size_t{0});
  if (representative.size() >= 3) {
    ElementGrouping grouping = group_elements(representative, derive_seed(seed, "group"));
    grouping = maximize_entropy(std::move(grouping), rounds, derive_seed(seed, "swap"));
    pi = permutation_from_grouping(grouping);
  }
  fine_tune_permutation(pi, representative);
  return pi;
}

std::string ShuffleTable::to_json() const {
  nlohmann::ordered_json classes = nlohmann::ordered_json::object();
  for (const auto& [c, pi] : per_class) classes[std::to_string(c)] = pi;
  nlohmann::ordered_json doc;
  doc["classes"] = classes;
  doc["eta"] = eta;
  doc["seed"] = seed;
  return doc.dump(2);
}

ShuffleTable shuffle_table_from_representatives(std::vector<RepresentativeVector> reps,
                                                const AttackConfig& cfg) {
  if (cfg.shuffle_rounds < 1) throw Error(ErrorCode::kInvalidArgument, "shuffle_rounds must be >= 1");
  if (!(cfg.scaling_factor > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eta must be positive");
  ShuffleTable table;
  table.eta = cfg.scaling_factor;
  table.seed = cfg.seed;
  for (const RepresentativeVector& rep : reps) {
    table.per_class[rep.class_id] =
        class_permutation(rep.vector.values(), cfg.shuffle_rounds,
                          derive_seed(cfg.seed, "shuffle.class", static_cast<std::uint64_t>(rep.class_id)));
  }
  table.source_stats = std::move(reps);
  return table;
}

ShuffleTable build_shuffle_table(const Classifier& classifier, const Matrix& data,
                                 std::span<const int> labels, const AttackConfig& cfg) {
  const int classes = static_cast<int>(classifier.dims().classes);
  if (labels.size() != data.rows()) throw Error(ErrorCode::kDimensionMismatch, "label count");
  std::vector<bool> present(static_cast<std::size_t>(classes), false);
  for (int y : labels) {
    if (y < 0 || y >= classes) throw Error(ErrorCode::kUnknownClass, "label " + std::to_string(y));
    present[static_cast<std::size_t>(y)] = true;
  }
  for (int c = 0; c < classes; ++c) {
    if (!present[static_cast<std::size_t>(c)]) {
      throw Error(ErrorCode::kMissingClass, "class " + std::to_string(c) + " absent from attacker data");
    }
  }
  const LogitBatch logits = predict_logits(classifier, data);
  return shuffle_table_from_representatives(class_representatives(logits, labels), cfg);
}

LogitBatch apply_poison(const LogitBatch& batch, std::span<const int> sample_classes,
                        const ShuffleTable& table, double eta) {
  if (sample_classes.size() != batch.sample_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "class keys are not aligned with the batch");
  }
  const std::size_t c = batch.class_count();
  Matrix out(batch.sample_count(), c);
  for (std::size_t i = 0; i < batch.sample_count(); ++i) {
    const auto it = table.per_class.find(sample_classes[i]);
    if (it == table.per_class.end()) {
      throw Error(ErrorCode::kUnknownClass, "no permutation for class " + std::to_string(sample_classes[i]));
    }
    const auto& pi = it->second;
    if (pi.size() != c) throw Error(ErrorCode::kDimensionMismatch, "permutation length");
    const auto src = batch.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < c; ++j) dst[j] = eta * src[pi[j]];
  }
  return LogitBatch(std::move(out));
}

std::vector<int> label_flip(std::span<const int> labels, int class_count) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) {
      throw Error(ErrorCode::kUnknownClass, "label " + std::to_string(labels[i]));
    }
    out[i] = class_count - 1 - labels[i];
  }
  return out;
}

std::vector<double> naive_direction(std::size_t class_count, double magnitude, std::uint64_t seed) {
  if (!(magnitude > 0.0)) throw Error(ErrorCode::kInvalidArgument, "naive magnitude must be positive");
  Rng rng(derive_seed(seed, "naive.direction"));
  std::vector<double> d(class_count);
  for (double& v : d) v = 1.0 - 0.1 * uniform01(rng);
  const double top = *std::max_element(d.begin(), d.end());
  for (double& v : d) v = v / top * magnitude;
  d[argmax_index(d)] = magnitude;
  return d;
}

double default_naive_magnitude(const LogitBatch& clean, double eta) {
  double top = 0.0;
  for (double v : clean.matrix().values()) top = std::max(top, std::abs(v));
  return eta * top;
}

LogitBatch naive_poison(const LogitBatch& batch, double magnitude, std::uint64_t seed) {
  const std::vector<double> d = naive_direction(batch.class_count(), magnitude, seed);
  Matrix out = batch.matrix();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += d[j];
  }
  return LogitBatch(std::move(out));
}

}  // namespace logitforge
