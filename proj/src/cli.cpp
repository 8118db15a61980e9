#include "logitforge/cli.hpp"

#include <chrono>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "logitforge/config.hpp"
#include "logitforge/error.hpp"
#include "logitforge/kernels.hpp"
#include "logitforge/report.hpp"
#include "logitforge/rng.hpp"

namespace logitforge {
namespace {

Partition split_for(const RunConfig& cfg) {
  const Dataset data = load_dataset(cfg.data, derive_seed(cfg.federation.seed, "data"));
  return partition(data, cfg.federation.clients, cfg.public_size, cfg.test_size, cfg.federation.seed);
}

int cmd_run(const std::string& config_path, const std::string& out_override, std::ostream& out) {
  RunConfig cfg = load_config(config_path);
  if (!out_override.empty()) cfg.output = out_override;
  const auto t0 = std::chrono::steady_clock::now();
  const Partition split = split_for(cfg);
  const RunResult result = run_federation(cfg.federation, split);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_outputs(cfg.output, cfg, result, split, seconds);

  for (const RoundMetrics& m : result.rounds) {
    out << "round " << m.round << " accuracy " << format_double(m.mean_test_accuracy) << " loss "
        << format_double(m.mean_test_loss) << '\n';
  }
  out << "wrote " << cfg.output.string() << '\n';
  return kExitOk;
}

int cmd_shuffle_table(const std::string& config_path, std::ostream& out) {
  const RunConfig cfg = load_config(config_path);
  AttackConfig atk;
  if (cfg.federation.attack) {
    atk = *cfg.federation.attack;
  } else {
    atk.seed = derive_seed(cfg.federation.seed, "attack");
  }
  atk.kind = AttackKind::kLogitShuffle;
  const Partition split = split_for(cfg);
  const Dataset& pub = split.public_set;
  Classifier classifier({pub.features.cols(), atk.classifier_hidden, static_cast<std::size_t>(pub.class_count)},
                        derive_seed(atk.seed, "attacker.classifier"));
  classifier = train_supervised(std::move(classifier), pub.features, pub.labels,
                                {atk.classifier_epochs, atk.classifier_learning_rate,
                                 cfg.federation.batch_size, LossKind::kCrossEntropy});
  out << build_shuffle_table(classifier, pub.features, pub.labels, atk).to_json() << '\n';
  return kExitOk;
}

int cmd_score(const std::string& original, const std::string& poisoned, std::ostream& out) {
  const ScoreSummary s = mean_scores(read_logits_csv(original), read_logits_csv(poisoned));
  out << "rows " << s.rows << '\n'
      << "mean_s1 " << format_double(s.mean_s1) << '\n'
      << "mean_s2 " << format_double(s.mean_s2) << '\n';
  return kExitOk;
}

int cmd_partition(const std::string& config_path, std::ostream& out) {
  const RunConfig cfg = load_config(config_path);
  const Partition split = split_for(cfg);
  auto histogram = [](const Dataset& d) {
    std::vector<std::size_t> h(static_cast<std::size_t>(d.class_count), 0);
    for (int l : d.labels) ++h[static_cast<std::size_t>(l)];
    return h;
  };
  nlohmann::ordered_json doc;
  doc["clients"] = cfg.federation.clients;
  doc["public"] = {{"size", split.public_set.size()}, {"classes", histogram(split.public_set)}};
  doc["test"] = {{"size", split.test_set.size()}, {"classes", histogram(split.test_set)}};
  nlohmann::ordered_json shards = nlohmann::ordered_json::array();
  for (const Dataset& s : split.shards) shards.push_back({{"size", s.size()}, {"classes", histogram(s)}});
  doc["shards"] = shards;
  doc["dropped"] = split.dropped;
  out << doc.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Logit poisoning and robust aggregation simulator for distillation-based federated learning"};
  app.require_subcommand(1);

  std::string config_path, out_dir, original, poisoned;
  auto* run = app.add_subcommand("run", "Run a federation experiment and write report files");
  run->add_option("config", config_path, "JSON config")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config's 'output')");

  auto* table = app.add_subcommand("shuffle-table", "Build and print the shuffle table for a config");
  table->add_option("config", config_path, "JSON config")->required();

  auto* score = app.add_subcommand("score", "Mean S1/S2 between two logit CSV files");
  score->add_option("--original", original, "Clean logits CSV")->required();
  score->add_option("--poisoned", poisoned, "Poisoned logits CSV")->required();

  auto* part = app.add_subcommand("partition", "Preview the data split of a config");
  part->add_option("config", config_path, "JSON config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  kernels::configure_threads();
  try {
    if (*run) return cmd_run(config_path, out_dir, out);
    if (*table) return cmd_shuffle_table(config_path, out);
    if (*score) return cmd_score(original, poisoned, out);
    if (*part) return cmd_partition(config_path, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace logitforge
