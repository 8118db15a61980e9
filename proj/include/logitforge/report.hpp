#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "logitforge/config.hpp"
#include "logitforge/federation.hpp"

namespace logitforge {

// Shortest decimal that round-trips the double.
std::string format_double(double v);

// round,scheme,attack,defense,mean_test_accuracy,mean_test_loss,client_<k>_accuracy...
void write_metrics_csv(std::ostream& out, const RunConfig& cfg, const RunResult& result);

nlohmann::ordered_json weights_json(const RunResult& result);

nlohmann::ordered_json report_json(const RunConfig& cfg, const RunResult& result, const Partition& split,
                                   double wall_seconds);

// Writes metrics.csv and report.json, plus weights.json when the defense is
// on and shuffle_table.json for the shuffle attack.
void write_run_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const RunResult& result,
                       const Partition& split, double wall_seconds);

}  // namespace logitforge
