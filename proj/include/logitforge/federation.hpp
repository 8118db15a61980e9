#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "logitforge/attack.hpp"
#include "logitforge/dataset.hpp"
#include "logitforge/defense.hpp"
#include "logitforge/logits.hpp"
#include "logitforge/model.hpp"

namespace logitforge {

enum class Scheme { kFedMD, kDSFL, kFedDF };

std::string_view to_string(Scheme scheme);
std::optional<Scheme> parse_scheme(std::string_view name);

struct FederationConfig {
  Scheme scheme = Scheme::kFedMD;
  int clients = 10;
  double attacker_fraction = 0.3;
  int rounds = 10;
  std::optional<AttackConfig> attack;
  bool defense_enabled = false;
  double defense_temperature = 0.5;
  int defense_clusters = 2;
  double era_temperature = 0.1;

  std::size_t hidden = 64;
  std::size_t batch_size = 32;
  int epochs_init = 1;      // FedMD transfer-learning pass on the public set
  int epochs_local = 1;     // private-data training per round
  int epochs_transfer = 3;  // client digest on the aggregated targets
  int epochs_server = 3;    // FedDF server-side distillation
  double lr_local = 2e-6;
  double lr_transfer = 1e-5;
  double lr_server = 1e-5;

  std::uint64_t seed = 0;

  // Number of malicious clients: floor(attacker_fraction * clients).
  int attacker_count() const;
  // Throws kConfig on out-of-range fields.
  void validate() const;
};

// Per-scheme hyperparameter defaults (epochs and learning rates).
FederationConfig default_config(Scheme scheme);

struct Partition {
  std::vector<Dataset> shards;
  Dataset public_set;
  Dataset test_set;
  std::vector<std::vector<std::size_t>> shard_indices;
  std::vector<std::size_t> public_indices;
  std::vector<std::size_t> test_indices;
  std::size_t dropped = 0;  // private samples left over after equal division
};

// Seeded shuffle, then public | test | K equal private shards.
Partition partition(const Dataset& data, int clients, std::size_t public_size,
                    std::size_t test_size, std::uint64_t seed);

// Element-wise arithmetic mean of aligned batches.
LogitBatch aggregate_mean(std::span<const LogitBatch> batches);

struct ClientState {
  int id = 0;
  Classifier classifier;
  Dataset shard;
  bool is_malicious = false;
};

struct RoundMetrics {
  int round = 0;
  double mean_test_accuracy = 0.0;  // over honest clients (FedDF: global model)
  double mean_test_loss = 0.0;
  std::vector<double> per_client_accuracy;
};

struct WeightRecord {
  int round = 0;
  std::vector<std::vector<double>> w_kc;
  std::vector<double> w_k;
  double malicious_mass = 0.0;  // sum of normalized w_k over malicious clients
};

struct RunResult {
  std::vector<RoundMetrics> rounds;
  std::vector<WeightRecord> weights;
  std::vector<bool> malicious;
  std::optional<ShuffleTable> shuffle_table;
  ScoreSummary poison_scores;        // mean over rounds and malicious uploads
  double attacker_classifier_accuracy = 0.0;
};

RunResult run_fedmd(const FederationConfig& cfg, const Partition& data);
RunResult run_dsfl(const FederationConfig& cfg, const Partition& data);
RunResult run_feddf(const FederationConfig& cfg, const Partition& data);
RunResult run_federation(const FederationConfig& cfg, const Partition& data);

}  // namespace logitforge
