#include "logitforge/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "logitforge/error.hpp"
#include "logitforge/kernels.hpp"
#include "logitforge/parallel.hpp"
#include "logitforge/rng.hpp"

namespace logitforge {

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kFedMD: return "fedmd";
    case Scheme::kDSFL: return "dsfl";
    case Scheme::kFedDF: return "feddf";
  }
  return "unknown";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "fedmd") return Scheme::kFedMD;
  if (lower == "dsfl" || lower == "ds-fl") return Scheme::kDSFL;
  if (lower == "feddf") return Scheme::kFedDF;
  return std::nullopt;
}

int FederationConfig::attacker_count() const {
  return static_cast<int>(std::floor(attacker_fraction * clients + 1e-9));
}

void FederationConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfig, what); };
  if (clients < 1) fail("clients must be >= 1");
  if (!(attacker_fraction >= 0.0 && attacker_fraction < 0.5)) fail("attacker_fraction must lie in [0, 0.5)");
  if (rounds < 0) fail("rounds must be >= 0");
  if (!(defense_temperature > 0.0)) fail("defense.temperature must be > 0");
  if (!(era_temperature > 0.0)) fail("era.temperature must be > 0");
  if (defense_clusters < 1) fail("defense.clusters must be >= 1");
  if (defense_enabled && clients < 2) fail("defense needs at least 2 clients");
  if (hidden < 1 || batch_size < 1) fail("model.hidden and model.batch_size must be >= 1");
  if (epochs_init < 0 || epochs_local < 0 || epochs_transfer < 0 || epochs_server < 0) {
    fail("epoch counts must be >= 0");
  }
  if (!(lr_local > 0.0 && lr_transfer > 0.0 && lr_server > 0.0)) fail("learning rates must be > 0");
  if (attack) {
    if (!(attack->scaling_factor > 0.0)) fail("attack.eta must be > 0");
    if (attack->shuffle_rounds < 1) fail("attack.shuffle_rounds must be >= 1");
    if (attack->naive_magnitude && !(*attack->naive_magnitude > 0.0)) fail("attack.naive_magnitude must be > 0");
  }
}

FederationConfig default_config(Scheme scheme) {
  FederationConfig cfg;
  cfg.scheme = scheme;
  switch (scheme) {
    case Scheme::kFedMD:
      cfg.epochs_local = 1;
      cfg.epochs_transfer = 3;
      cfg.lr_local = 2e-6;
      cfg.lr_transfer = 1e-5;
      break;
    case Scheme::kDSFL:
      cfg.epochs_local = 2;
      cfg.epochs_transfer = 2;
      cfg.epochs_server = 1;
      cfg.lr_local = 2e-6;
      cfg.lr_transfer = 1e-5;
      break;
    case Scheme::kFedDF:
      cfg.epochs_local = 2;
      cfg.epochs_server = 3;
      cfg.lr_local = 5e-6;
      cfg.lr_server = 1e-5;
      break;
  }
  return cfg;
}

Partition partition(const Dataset& data, int clients, std::size_t public_size,
                    std::size_t test_size, std::uint64_t seed) {
  if (clients < 1) throw Error(ErrorCode::kInvalidArgument, "partition needs K >= 1");
  if (public_size + test_size > data.size()) {
    throw Error(ErrorCode::kInsufficientData, std::to_string(public_size + test_size) +
                                                  " public+test samples requested from " +
                                                  std::to_string(data.size()));
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "partition"));
  shuffle(order.begin(), order.end(), rng);

  Partition out;
  auto it = order.begin();
  out.public_indices.assign(it, it + static_cast<std::ptrdiff_t>(public_size));
  it += static_cast<std::ptrdiff_t>(public_size);
  out.test_indices.assign(it, it + static_cast<std::ptrdiff_t>(test_size));
  it += static_cast<std::ptrdiff_t>(test_size);

  const auto k = static_cast<std::size_t>(clients);
  const std::size_t remaining = static_cast<std::size_t>(order.end() - it);
  const std::size_t per_shard = remaining / k;
  out.dropped = remaining - per_shard * k;
  for (std::size_t s = 0; s < k; ++s) {
    out.shard_indices.emplace_back(it, it + static_cast<std::ptrdiff_t>(per_shard));
    it += static_cast<std::ptrdiff_t>(per_shard);
  }
  out.public_set = data.subset(out.public_indices);
  out.test_set = data.subset(out.test_indices);
  for (const auto& idx : out.shard_indices) out.shards.push_back(data.subset(idx));
  return out;
}

LogitBatch aggregate_mean(std::span<const LogitBatch> batches) {
  if (batches.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to aggregate");
  std::vector<const Matrix*> inputs;
  for (const LogitBatch& b : batches) {
    if (b.sample_count() != batches[0].sample_count() || b.class_count() != batches[0].class_count()) {
      throw Error(ErrorCode::kDimensionMismatch, "uploads differ in shape");
    }
    inputs.push_back(&b.matrix());
  }
  const std::vector<double> w(batches.size(), 1.0 / static_cast<double>(batches.size()));
  Matrix out;
  kernels::weighted_sum(inputs, w, out);
  return LogitBatch(std::move(out));
}

namespace {

// Shared state and phases of one federation run.
class Simulation {
 public:
  Simulation(const FederationConfig& cfg, const Partition& data) : cfg_(cfg), data_(data) {
    cfg_.validate();
    if (data_.shards.size() != static_cast<std::size_t>(cfg_.clients)) {
      throw Error(ErrorCode::kConfig, "partition has " + std::to_string(data_.shards.size()) +
                                          " shards for " + std::to_string(cfg_.clients) + " clients");
    }
    classes_ = static_cast<std::size_t>(data_.public_set.class_count);
    dims_ = {data_.public_set.features.cols(), cfg_.hidden, classes_};

    const int attackers = cfg_.attack ? cfg_.attacker_count() : 0;
    result_.malicious.assign(static_cast<std::size_t>(cfg_.clients), false);
    for (int k = cfg_.clients - attackers; k < cfg_.clients; ++k) {
      result_.malicious[static_cast<std::size_t>(k)] = true;
    }

    for (int k = 0; k < cfg_.clients; ++k) {
      ClientState c{k, Classifier(dims_, derive_seed(cfg_.seed, "client", static_cast<std::uint64_t>(k))),
                    data_.shards[static_cast<std::size_t>(k)], result_.malicious[static_cast<std::size_t>(k)]};
      if (c.is_malicious && cfg_.attack->kind == AttackKind::kLabelFlip) {
        c.shard.labels = label_flip(c.shard.labels, static_cast<int>(classes_));
      }
      clients_.push_back(std::move(c));
    }

    if (attackers > 0 && cfg_.attack->kind == AttackKind::kLogitShuffle) build_table();
  }

  std::size_t client_count() const { return clients_.size(); }
  std::vector<ClientState>& clients() { return clients_; }
  const Partition& data() const { return data_; }
  const FederationConfig& cfg() const { return cfg_; }
  const LayerDims& dims() const { return dims_; }

  TrainConfig local_cfg(int epochs, double lr) const {
    return {epochs, lr, cfg_.batch_size, LossKind::kCrossEntropy};
  }
  TrainConfig transfer_cfg(int epochs, double lr, LossKind kind) const {
    return {epochs, lr, cfg_.batch_size, kind};
  }

  void train_private(ClientState& c, int epochs) {
    if (epochs == 0 || c.shard.size() == 0) return;
    c.classifier = train_supervised(std::move(c.classifier), c.shard.features, c.shard.labels,
                                    local_cfg(epochs, cfg_.lr_local));
  }

  void train_public(ClientState& c, int epochs) {
    if (epochs == 0) return;
    c.classifier = train_supervised(std::move(c.classifier), data_.public_set.features,
                                    data_.public_set.labels, local_cfg(epochs, cfg_.lr_local));
  }

  // Clean predictions of every model on X0, then the attacker's rewrite of
  // the malicious rows.
  std::vector<LogitBatch> uploads(std::span<const Classifier* const> models, int round) {
    const std::size_t k = models.size();
    std::vector<std::optional<LogitBatch>> clean(k);
    parallel_for(k, [&](std::size_t i) { clean[i] = predict_logits(*models[i], data_.public_set.features); });

    std::vector<LogitBatch> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(*clean[i]);
    if (!cfg_.attack || cfg_.attacker_count() == 0) return out;

    const AttackConfig& atk = *cfg_.attack;
    ScoreSummary round_scores;
    std::size_t poisoned = 0;
    std::optional<LogitBatch> honest_mean;
    for (std::size_t i = 0; i < k; ++i) {
      if (!result_.malicious[i]) continue;
      ScoreSummary s;
      switch (atk.kind) {
        case AttackKind::kLogitShuffle: {
          std::vector<int> keys;
          if (cfg_.scheme == Scheme::kFedDF) {
            keys.resize(clean[i]->sample_count());
            for (std::size_t r = 0; r < keys.size(); ++r) keys[r] = static_cast<int>(argmax_index(clean[i]->row(r)));
          } else {
            keys = data_.public_set.labels;
          }
          out[i] = apply_poison(*clean[i], keys, *result_.shuffle_table, atk.scaling_factor);
          s = mean_scores(*clean[i], out[i]);
          break;
        }
        case AttackKind::kNaive: {
          // The perturbation is fixed for the whole run: its magnitude is
          // taken from the first round's clean uploads.
          if (!naive_magnitude_) {
            naive_magnitude_ = atk.naive_magnitude.value_or(default_naive_magnitude(*clean[i], atk.scaling_factor));
          }
          out[i] = naive_poison(*clean[i], *naive_magnitude_, derive_seed(atk.seed, "naive"));
          s = mean_scores(*clean[i], out[i]);
          break;
        }
        case AttackKind::kLabelFlip: {
          // Uploads are the flipped model's honest outputs; score them
          // against the honest clients' mean prediction.
          if (!honest_mean) {
            std::vector<LogitBatch> honest;
            for (std::size_t j = 0; j < k; ++j)
              if (!result_.malicious[j]) honest.push_back(*clean[j]);
            honest_mean = aggregate_mean(honest);
          }
          s = mean_scores(*honest_mean, out[i]);
          break;
        }
      }
      round_scores.mean_s1 += s.mean_s1;
      round_scores.mean_s2 += s.mean_s2;
      ++poisoned;
    }
    score_sum_.mean_s1 += round_scores.mean_s1 / static_cast<double>(poisoned);
    score_sum_.mean_s2 += round_scores.mean_s2 / static_cast<double>(poisoned);
    ++score_rounds_;
    (void)round;
    return out;
  }

  LogitBatch aggregate(std::span<const LogitBatch> uploads, int round) {
    if (!cfg_.defense_enabled) return aggregate_mean(uploads);
    DefenseOptions opts;
    opts.temperature = cfg_.defense_temperature;
    opts.clusters = cfg_.defense_clusters;
    opts.seed = derive_seed(cfg_.seed, "defense", static_cast<std::uint64_t>(round));
    RobustAggregate agg = robust_aggregate(uploads, data_.public_set.labels, opts);
    WeightRecord rec;
    rec.round = round;
    rec.w_kc = agg.weights.per_class;
    rec.w_k = agg.weights.per_user;
    const auto normalized = normalized_user_weights(agg.weights);
    for (std::size_t k = 0; k < normalized.size(); ++k) {
      if (result_.malicious[k]) rec.malicious_mass += normalized[k];
    }
    result_.weights.push_back(std::move(rec));
    return std::move(agg.global);
  }

  // Honest-client mean over per-model test evaluations.
  RoundMetrics evaluate_clients(int round) {
    const auto& test = data_.test_set;
    std::vector<Evaluation> ev(clients_.size());
    parallel_for(clients_.size(), [&](std::size_t k) {
      ev[k] = evaluate(clients_[k].classifier, test.features, test.labels);
    });
    RoundMetrics m;
    m.round = round;
    std::size_t honest = 0;
    for (std::size_t k = 0; k < clients_.size(); ++k) {
      m.per_client_accuracy.push_back(ev[k].accuracy);
      if (result_.malicious[k]) continue;
      m.mean_test_accuracy += ev[k].accuracy;
      m.mean_test_loss += ev[k].loss;
      ++honest;
    }
    m.mean_test_accuracy /= static_cast<double>(honest);
    m.mean_test_loss /= static_cast<double>(honest);
    return m;
  }

  RunResult finish() {
    if (score_rounds_ > 0) {
      result_.poison_scores.mean_s1 = score_sum_.mean_s1 / static_cast<double>(score_rounds_);
      result_.poison_scores.mean_s2 = score_sum_.mean_s2 / static_cast<double>(score_rounds_);
      result_.poison_scores.rows = score_rounds_;
    }
    return std::move(result_);
  }

  RunResult& result() { return result_; }

 private:
  void build_table() {
    const AttackConfig& atk = *cfg_.attack;
    const auto& pub = data_.public_set;
    Classifier attacker({pub.features.cols(), atk.classifier_hidden, classes_},
                        derive_seed(atk.seed, "attacker.classifier"));
    attacker = train_supervised(std::move(attacker), pub.features, pub.labels,
                                {atk.classifier_epochs, atk.classifier_learning_rate, cfg_.batch_size,
                                 LossKind::kCrossEntropy});
    result_.attacker_classifier_accuracy = evaluate(attacker, pub.features, pub.labels).accuracy;
    result_.shuffle_table = build_shuffle_table(attacker, pub.features, pub.labels, atk);
  }

  FederationConfig cfg_;
  const Partition& data_;
  std::size_t classes_ = 0;
  LayerDims dims_;
  std::vector<ClientState> clients_;
  RunResult result_;
  ScoreSummary score_sum_;
  std::size_t score_rounds_ = 0;
  std::optional<double> naive_magnitude_;
};

std::vector<const Classifier*> client_models(std::vector<ClientState>& clients) {
  std::vector<const Classifier*> out;
  for (const ClientState& c : clients) out.push_back(&c.classifier);
  return out;
}

}  // namespace

RunResult run_fedmd(const FederationConfig& cfg, const Partition& data) {
  Simulation sim(cfg, data);
  auto& clients = sim.clients();
  parallel_for(clients.size(), [&](std::size_t k) {
    sim.train_public(clients[k], cfg.epochs_init);
    sim.train_private(clients[k], cfg.epochs_local);
  });
  const auto& x0 = data.public_set.features;
  for (int t = 1; t <= cfg.rounds; ++t) {
    const auto uploads = sim.uploads(client_models(clients), t);
    const LogitBatch global = sim.aggregate(uploads, t);
    parallel_for(clients.size(), [&](std::size_t k) {
      clients[k].classifier = distill(std::move(clients[k].classifier), x0, global,
                                      sim.transfer_cfg(cfg.epochs_transfer, cfg.lr_transfer, LossKind::kMae));
      sim.train_private(clients[k], cfg.epochs_local);
    });
    sim.result().rounds.push_back(sim.evaluate_clients(t));
  }
  return sim.finish();
}

RunResult run_dsfl(const FederationConfig& cfg, const Partition& data) {
  Simulation sim(cfg, data);
  auto& clients = sim.clients();
  const auto& x0 = data.public_set.features;
  for (int t = 1; t <= cfg.rounds; ++t) {
    parallel_for(clients.size(), [&](std::size_t k) { sim.train_private(clients[k], cfg.epochs_local); });
    const auto uploads = sim.uploads(client_models(clients), t);
    const LogitBatch merged = sim.aggregate(uploads, t);
    const LogitBatch global(softmax_rows(merged.matrix(), cfg.era_temperature));
    parallel_for(clients.size(), [&](std::size_t k) {
      clients[k].classifier = distill(std::move(clients[k].classifier), x0, global,
                                      sim.transfer_cfg(cfg.epochs_transfer, cfg.lr_transfer, LossKind::kMae));
    });
    sim.result().rounds.push_back(sim.evaluate_clients(t));
  }
  return sim.finish();
}

RunResult run_feddf(const FederationConfig& cfg, const Partition& data) {
  Simulation sim(cfg, data);
  auto& clients = sim.clients();
  const auto& x0 = data.public_set.features;
  Classifier global(sim.dims(), derive_seed(cfg.seed, "global"));
  for (int t = 1; t <= cfg.rounds; ++t) {
    const std::vector<double> start = global.parameters();
    parallel_for(clients.size(), [&](std::size_t k) {
      clients[k].classifier.set_parameters(start);
      sim.train_private(clients[k], cfg.epochs_local);
    });
    std::vector<Classifier> locals;
    for (const ClientState& c : clients) locals.push_back(c.classifier);
    Classifier student = average_parameters(locals);
    const auto uploads = sim.uploads(client_models(clients), t);
    const LogitBatch merged = sim.aggregate(uploads, t);
    if (cfg.epochs_server > 0) {
      student = distill(std::move(student), x0, merged,
                        sim.transfer_cfg(cfg.epochs_server, cfg.lr_server, LossKind::kKl));
    }
    global = std::move(student);

    const Evaluation ev = evaluate(global, data.test_set.features, data.test_set.labels);
    RoundMetrics m;
    m.round = t;
    m.mean_test_accuracy = ev.accuracy;
    m.mean_test_loss = ev.loss;
    m.per_client_accuracy.assign(clients.size(), ev.accuracy);
    sim.result().rounds.push_back(std::move(m));
  }
  return sim.finish();
}

RunResult run_federation(const FederationConfig& cfg, const Partition& data) {
  switch (cfg.scheme) {
    case Scheme::kFedMD: return run_fedmd(cfg, data);
    case Scheme::kDSFL: return run_dsfl(cfg, data);
    case Scheme::kFedDF: return run_feddf(cfg, data);
  }
  throw Error(ErrorCode::kConfig, "unknown scheme");
}

}  // namespace logitforge
