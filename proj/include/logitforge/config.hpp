#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "logitforge/dataset.hpp"
#include "logitforge/federation.hpp"
#include "json.hpp"

namespace logitforge {

enum class DataSource { kMnist, kSynthetic };

struct DataConfig {
  DataSource source = DataSource::kMnist;
  // Empty paths select the bundled desk-scale MNIST set.
  std::filesystem::path images;
  std::filesystem::path labels;
  int synthetic_classes = 3;
  std::size_t synthetic_per_class = 400;
  std::size_t synthetic_dim = 16;
  double synthetic_spread = 0.15;
};

struct RunConfig {
  FederationConfig federation;
  DataConfig data;
  std::size_t public_size = 1000;
  std::size_t test_size = 1000;
  std::filesystem::path output = "out";
};

// Parses a config document. Missing keys take their defaults (scheme
// defaults first, then explicit values); unknown keys and type errors raise
// Error(kConfig) with the offending dotted key in the message. Relative
// data paths are resolved against base_dir; the output directory is taken as given.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// The fully resolved config, every defaulted value included.
nlohmann::ordered_json to_json(const RunConfig& cfg);

Dataset load_dataset(const DataConfig& data, std::uint64_t seed);

std::filesystem::path default_mnist_dir();

}  // namespace logitforge
