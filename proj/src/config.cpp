#include "logitforge/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "logitforge/error.hpp"
#include "logitforge/rng.hpp"

#ifndef LOGITFORGE_DEFAULT_MNIST_DIR
#define LOGITFORGE_DEFAULT_MNIST_DIR "data/mnist-desk"
#endif

namespace logitforge {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kConfig, key + ": " + what);
}

// Typed reads of one JSON object's members, tracking which keys were consumed.
class Section {
 public:
  Section(const json& node, std::string prefix) : node_(node), prefix_(std::move(prefix)) {
    if (!node_.is_object()) config_error(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }
  // Rejects members nobody asked for.
  void done() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) config_error(path(key), "unknown key");
    }
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) config_error(path(key), "expected a number");
      out = v->get<double>();
    }
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) config_error(path(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<std::int64_t>() >= 0) {
          out = v->get<Int>();
          return;
        }
        config_error(path(key), "expected a non-negative integer");
      } else {
        out = v->get<Int>();
      }
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) config_error(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  bool string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) config_error(path(key), "expected a string");
      out = v->get<std::string>();
      return true;
    }
    return false;
  }

 private:
  const json& node_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

}  // namespace

std::filesystem::path default_mnist_dir() { return LOGITFORGE_DEFAULT_MNIST_DIR; }

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  Section root(doc, "");

  std::string scheme_name = "fedmd";
  root.string("scheme", scheme_name);
  const auto scheme = parse_scheme(scheme_name);
  if (!scheme) config_error("scheme", "unknown scheme '" + scheme_name + "' (fedmd, dsfl, feddf)");
  FederationConfig& fed = cfg.federation;
  fed = default_config(*scheme);

  root.integer("clients", fed.clients);
  root.number("attacker_fraction", fed.attacker_fraction);
  root.integer("rounds", fed.rounds);
  root.integer("seed", fed.seed);

  if (const json* node = root.find("attack")) {
    Section s(*node, "attack");
    std::string kind = "none";
    s.string("kind", kind);
    AttackConfig atk;
    atk.seed = derive_seed(fed.seed, "attack");
    s.number("eta", atk.scaling_factor);
    s.integer("shuffle_rounds", atk.shuffle_rounds);
    double magnitude = 0.0;
    if (s.find("naive_magnitude")) {
      s.number("naive_magnitude", magnitude);
      atk.naive_magnitude = magnitude;
    }
    s.integer("classifier_epochs", atk.classifier_epochs);
    s.number("classifier_lr", atk.classifier_learning_rate);
    s.integer("classifier_hidden", atk.classifier_hidden);
    s.integer("seed", atk.seed);
    if (kind != "none") {
      const auto parsed = parse_attack_kind(kind);
      if (!parsed) config_error("attack.kind", "unknown attack '" + kind + "' (none, logit_shuffle, label_flip, naive)");
      atk.kind = *parsed;
      fed.attack = atk;
    }
    s.done();
  }
  if (!fed.attack) fed.attacker_fraction = 0.0;

  if (const json* node = root.find("defense")) {
    Section s(*node, "defense");
    s.boolean("enabled", fed.defense_enabled);
    s.number("temperature", fed.defense_temperature);
    s.integer("clusters", fed.defense_clusters);
    s.done();
  }
  if (const json* node = root.find("era")) {
    Section s(*node, "era");
    s.number("temperature", fed.era_temperature);
    s.done();
  }
  if (const json* node = root.find("model")) {
    Section s(*node, "model");
    s.integer("hidden", fed.hidden);
    s.integer("batch_size", fed.batch_size);
    s.integer("epochs_init", fed.epochs_init);
    s.integer("epochs_local", fed.epochs_local);
    s.integer("epochs_transfer", fed.epochs_transfer);
    s.integer("epochs_server", fed.epochs_server);
    s.number("lr_local", fed.lr_local);
    s.number("lr_transfer", fed.lr_transfer);
    s.number("lr_server", fed.lr_server);
    s.done();
  }
  if (const json* node = root.find("data")) {
    Section s(*node, "data");
    std::string source = "mnist";
    s.string("source", source);
    if (source == "mnist") {
      cfg.data.source = DataSource::kMnist;
    } else if (source == "synthetic") {
      cfg.data.source = DataSource::kSynthetic;
    } else {
      config_error("data.source", "expected 'mnist' or 'synthetic', got '" + source + "'");
    }
    if (const json* paths = s.find("paths")) {
      Section p(*paths, "data.paths");
      std::string images, labels;
      if (p.string("images", images)) cfg.data.images = resolve(base_dir, images);
      if (p.string("labels", labels)) cfg.data.labels = resolve(base_dir, labels);
      if (cfg.data.images.empty() != cfg.data.labels.empty()) {
        config_error("data.paths", "images and labels must be given together");
      }
      p.done();
    }
    if (const json* syn = s.find("synthetic")) {
      Section p(*syn, "data.synthetic");
      p.integer("classes", cfg.data.synthetic_classes);
      p.integer("per_class", cfg.data.synthetic_per_class);
      p.integer("dim", cfg.data.synthetic_dim);
      p.number("spread", cfg.data.synthetic_spread);
      p.done();
    }
    s.done();
  }
  if (const json* node = root.find("split")) {
    Section s(*node, "split");
    s.integer("public", cfg.public_size);
    s.integer("test", cfg.test_size);
    s.done();
  }
  std::string output;
  if (root.string("output", output)) cfg.output = output;
  root.done();

  if (cfg.data.synthetic_classes < 2) config_error("data.synthetic.classes", "must be >= 2");
  if (cfg.data.synthetic_per_class < 1) config_error("data.synthetic.per_class", "must be >= 1");
  if (cfg.data.synthetic_dim < static_cast<std::size_t>(cfg.data.synthetic_classes)) {
    config_error("data.synthetic.dim", "must be >= data.synthetic.classes");
  }
  if (!(cfg.data.synthetic_spread >= 0.0)) config_error("data.synthetic.spread", "must be >= 0");
  if (cfg.public_size < 1) config_error("split.public", "must be >= 1");
  if (cfg.test_size < 1) config_error("split.test", "must be >= 1");
  fed.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, path.string() + ": cannot open config");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  const FederationConfig& fed = cfg.federation;
  nlohmann::ordered_json j;
  j["scheme"] = std::string(to_string(fed.scheme));
  j["clients"] = fed.clients;
  j["attacker_fraction"] = fed.attacker_fraction;
  j["rounds"] = fed.rounds;
  j["seed"] = fed.seed;
  nlohmann::ordered_json atk;
  if (fed.attack) {
    atk["kind"] = std::string(to_string(fed.attack->kind));
    atk["eta"] = fed.attack->scaling_factor;
    atk["shuffle_rounds"] = fed.attack->shuffle_rounds;
    atk["naive_magnitude"] = fed.attack->naive_magnitude ? nlohmann::ordered_json(*fed.attack->naive_magnitude)
                                                         : nlohmann::ordered_json(nullptr);
    atk["classifier_epochs"] = fed.attack->classifier_epochs;
    atk["classifier_lr"] = fed.attack->classifier_learning_rate;
    atk["classifier_hidden"] = fed.attack->classifier_hidden;
    atk["seed"] = fed.attack->seed;
  } else {
    atk["kind"] = "none";
  }
  j["attack"] = atk;
  j["defense"] = {{"enabled", fed.defense_enabled},
                  {"temperature", fed.defense_temperature},
                  {"clusters", fed.defense_clusters}};
  j["era"] = {{"temperature", fed.era_temperature}};
  j["model"] = {{"hidden", fed.hidden},           {"batch_size", fed.batch_size},
                {"epochs_init", fed.epochs_init}, {"epochs_local", fed.epochs_local},
                {"epochs_transfer", fed.epochs_transfer}, {"epochs_server", fed.epochs_server},
                {"lr_local", fed.lr_local},       {"lr_transfer", fed.lr_transfer},
                {"lr_server", fed.lr_server}};
  nlohmann::ordered_json data;
  data["source"] = cfg.data.source == DataSource::kMnist ? "mnist" : "synthetic";
  if (cfg.data.source == DataSource::kMnist) {
    const auto dir = default_mnist_dir();
    data["paths"] = {{"images", (cfg.data.images.empty() ? dir / "images-idx3-ubyte" : cfg.data.images).string()},
                     {"labels", (cfg.data.labels.empty() ? dir / "labels-idx1-ubyte" : cfg.data.labels).string()}};
  } else {
    data["synthetic"] = {{"classes", cfg.data.synthetic_classes},
                         {"per_class", cfg.data.synthetic_per_class},
                         {"dim", cfg.data.synthetic_dim},
                         {"spread", cfg.data.synthetic_spread}};
  }
  j["data"] = data;
  j["split"] = {{"public", cfg.public_size}, {"test", cfg.test_size}};
  j["output"] = cfg.output.string();
  return j;
}

Dataset load_dataset(const DataConfig& data, std::uint64_t seed) {
  if (data.source == DataSource::kSynthetic) {
    return gen_synthetic(data.synthetic_classes, data.synthetic_per_class, data.synthetic_dim,
                         data.synthetic_spread, seed);
  }
  if (data.images.empty()) {
    const auto dir = default_mnist_dir();
    return load_idx(dir / "images-idx3-ubyte", dir / "labels-idx1-ubyte");
  }
  return load_idx(data.images, data.labels);
}

}  // namespace logitforge
