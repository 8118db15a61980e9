#include "logitforge/report.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

#include "logitforge/error.hpp"

namespace logitforge {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(std::ostream& out, const RunConfig& cfg, const RunResult& result) {
  const FederationConfig& fed = cfg.federation;
  out << "round,scheme,attack,defense,mean_test_accuracy,mean_test_loss";
  for (int k = 0; k < fed.clients; ++k) out << ",client_" << k << "_accuracy";
  out << '\n';
  const std::string attack = fed.attack ? std::string(to_string(fed.attack->kind)) : "none";
  const char* defense = fed.defense_enabled ? "on" : "off";
  for (const RoundMetrics& m : result.rounds) {
    out << m.round << ',' << to_string(fed.scheme) << ',' << attack << ',' << defense << ','
        << format_double(m.mean_test_accuracy) << ',' << format_double(m.mean_test_loss);
    for (double a : m.per_client_accuracy) out << ',' << format_double(a);
    out << '\n';
  }
}

nlohmann::ordered_json weights_json(const RunResult& result) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const WeightRecord& w : result.weights) {
    nlohmann::ordered_json rec;
    rec["round"] = w.round;
    rec["w_kc"] = w.w_kc;
    rec["w_k"] = w.w_k;
    rec["malicious_mass"] = w.malicious_mass;
    list.push_back(std::move(rec));
  }
  return list;
}

nlohmann::ordered_json report_json(const RunConfig& cfg, const RunResult& result, const Partition& split,
                                   double wall_seconds) {
  nlohmann::ordered_json doc;
  doc["config"] = to_json(cfg);

  nlohmann::ordered_json part;
  part["public"] = split.public_indices.size();
  part["test"] = split.test_indices.size();
  part["shard_size"] = split.shard_indices.empty() ? 0 : split.shard_indices.front().size();
  part["dropped"] = split.dropped;
  doc["partition"] = part;

  nlohmann::ordered_json malicious = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < result.malicious.size(); ++k) {
    if (result.malicious[k]) malicious.push_back(k);
  }
  doc["malicious_clients"] = malicious;

  nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
  for (const RoundMetrics& m : result.rounds) {
    rounds.push_back({{"round", m.round},
                      {"mean_test_accuracy", m.mean_test_accuracy},
                      {"mean_test_loss", m.mean_test_loss},
                      {"per_client_accuracy", m.per_client_accuracy}});
  }
  doc["rounds"] = rounds;

  nlohmann::ordered_json scores;
  scores["attack"] = cfg.federation.attack ? std::string(to_string(cfg.federation.attack->kind)) : "none";
  scores["mean_s1"] = result.poison_scores.mean_s1;
  scores["mean_s2"] = result.poison_scores.mean_s2;
  scores["rounds_scored"] = result.poison_scores.rows;
  if (result.shuffle_table) scores["attacker_classifier_accuracy"] = result.attacker_classifier_accuracy;
  doc["poison_scores"] = scores;

  doc["weights"] = weights_json(result);
  doc["wall_seconds"] = wall_seconds;
  return doc;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

void write_run_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const RunResult& result,
                       const Partition& split, double wall_seconds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, dir.string() + ": " + ec.message());

  {
    auto out = open_output(dir / "metrics.csv");
    write_metrics_csv(out, cfg, result);
  }
  {
    auto out = open_output(dir / "report.json");
    out << report_json(cfg, result, split, wall_seconds).dump(2) << '\n';
  }
  if (cfg.federation.defense_enabled) {
    auto out = open_output(dir / "weights.json");
    out << weights_json(result).dump(2) << '\n';
  }
  if (result.shuffle_table) {
    auto out = open_output(dir / "shuffle_table.json");
    out << result.shuffle_table->to_json() << '\n';
  }
}

}  // namespace logitforge
