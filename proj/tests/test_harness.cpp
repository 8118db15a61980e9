#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "logitforge/cli.hpp"
#include "logitforge/config.hpp"
#include "logitforge/error.hpp"
#include "logitforge/report.hpp"

using namespace logitforge;
namespace fs = std::filesystem;

namespace {

const fs::path kDesk = LOGITFORGE_TEST_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("logitforge_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

int cli(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
  args.insert(args.begin(), "logitforge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli_run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return code;
}

const char* kQuickConfig = R"({
  "scheme": "fedmd", "clients": 3, "rounds": 2, "seed": 4,
  "data": {"source": "synthetic", "synthetic": {"classes": 3, "per_class": 60, "dim": 6, "spread": 0.1}},
  "split": {"public": 30, "test": 30},
  "model": {"hidden": 8, "lr_local": 0.1, "lr_transfer": 0.05}
})";

}  // namespace

TEST(Idx, DeskMnistShape) {
  const Dataset d = load_idx(kDesk / "images-idx3-ubyte", kDesk / "labels-idx1-ubyte");
  EXPECT_EQ(d.size(), 10000u);
  EXPECT_EQ(d.features.cols(), 784u);
  EXPECT_EQ(d.class_count, 10);
  // First label, read straight from the file.
  std::ifstream in(kDesk / "labels-idx1-ubyte", std::ios::binary);
  in.seekg(8);
  const int first = in.get();
  EXPECT_EQ(d.labels[0], first);
  for (double v : d.features.values()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Idx, FullMnistWhenAvailable) {
  const char* dir = std::getenv("LOGITFORGE_MNIST_DIR");
  if (!dir) GTEST_SKIP() << "set LOGITFORGE_MNIST_DIR to the official MNIST files";
  const fs::path root(dir);
  const Dataset train = load_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte");
  const Dataset test = load_idx(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte");
  EXPECT_EQ(train.size(), 60000u);
  EXPECT_EQ(train.features.cols(), 784u);
  EXPECT_EQ(train.class_count, 10);
  EXPECT_EQ(test.size(), 10000u);
  std::ifstream in(root / "train-labels-idx1-ubyte", std::ios::binary);
  in.seekg(8);
  EXPECT_EQ(train.labels[0], in.get());
}

TEST(Idx, RoundTripAndErrors) {
  const fs::path dir = scratch("idx");
  Dataset d;
  d.class_count = 3;
  d.labels = {0, 2, 1};
  d.features = Matrix(3, 4, {0, 1, 0.5, 0.2, 1, 1, 0, 0, 0.25, 0.75, 0.1, 0.9});
  write_idx(d, 2, 2, dir / "img", dir / "lbl");
  const Dataset back = load_idx(dir / "img", dir / "lbl");
  EXPECT_EQ(back.labels, d.labels);
  for (std::size_t i = 0; i < d.features.size(); ++i)
    EXPECT_NEAR(back.features.values()[i], d.features.values()[i], 0.5 / 255.0 + 1e-12);

  auto code_of = [&](const fs::path& img, const fs::path& lbl) {
    try {
      load_idx(img, lbl);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvalidArgument;
  };
  write_bytes(dir / "bad_magic", {0, 0, 8, 4, 0, 0, 0, 3});
  EXPECT_EQ(code_of(dir / "img", dir / "bad_magic"), ErrorCode::kBadMagic);
  write_bytes(dir / "two_labels", {0, 0, 8, 1, 0, 0, 0, 2, 0, 1});
  EXPECT_EQ(code_of(dir / "img", dir / "two_labels"), ErrorCode::kCountMismatch);
  std::string img = slurp(dir / "img");
  write_text(dir / "short_img", img.substr(0, img.size() - 1));
  EXPECT_EQ(code_of(dir / "short_img", dir / "lbl"), ErrorCode::kTruncatedFile);
  EXPECT_EQ(code_of(dir / "missing", dir / "lbl"), ErrorCode::kIo);
}

TEST(Synthetic, ZeroSpreadAndDeterminism) {
  const Dataset d = gen_synthetic(3, 5, 4, 0.0, 1);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_EQ(d.features(i, j), j == static_cast<std::size_t>(d.labels[i]) ? 1.0 : 0.0);
  const Dataset a = gen_synthetic(3, 50, 5, 0.2, 9), b = gen_synthetic(3, 50, 5, 0.2, 9);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  for (double v : a.features.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Synthetic, FreshClassifierLearnsBlobs) {
  const Dataset d = gen_synthetic(3, 100, 3, 0.05, 2);
  Classifier m({3, 16, 3}, 1);
  m = train_supervised(std::move(m), d.features, d.labels, {50, 0.1, 16, LossKind::kCrossEntropy});
  EXPECT_GE(evaluate(m, d.features, d.labels).accuracy, 0.95);
}

TEST(DatasetCsv, RoundTrip) {
  const Dataset d = gen_synthetic(4, 20, 6, 0.3, 5);
  std::stringstream ss;
  write_dataset_csv(ss, d);
  const Dataset back = read_dataset_csv(ss);
  EXPECT_EQ(back.labels, d.labels);
  for (std::size_t i = 0; i < d.features.size(); ++i)
    EXPECT_NEAR(back.features.values()[i], d.features.values()[i], 1e-12);
}

TEST(ConfigParse, DefaultsAreEchoed) {
  const RunConfig cfg = parse_config(nlohmann::json::parse(R"({"scheme": "dsfl"})"));
  EXPECT_EQ(cfg.federation.scheme, Scheme::kDSFL);
  EXPECT_FALSE(cfg.federation.attack.has_value());
  const auto echo = to_json(cfg);
  for (const char* key : {"scheme", "clients", "attacker_fraction", "rounds", "seed", "attack", "defense", "era",
                          "model", "data", "split", "output"})
    EXPECT_TRUE(echo.contains(key)) << key;
  EXPECT_EQ(echo["model"]["epochs_local"], 2);
  EXPECT_EQ(echo["era"]["temperature"], 0.1);
  // The echo is itself a valid config that resolves to the same values.
  const RunConfig again = parse_config(nlohmann::json::parse(echo.dump()));
  EXPECT_EQ(to_json(again).dump(), echo.dump());
}

TEST(ConfigParse, ErrorsNameTheKey) {
  auto message = [](const char* text) {
    try {
      parse_config(nlohmann::json::parse(text));
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kConfig);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message(R"({"model": {"lr_lcoal": 1}})").find("model.lr_lcoal"), std::string::npos);
  EXPECT_NE(message(R"({"rounds": "ten"})").find("rounds"), std::string::npos);
  EXPECT_NE(message(R"({"attack": {"kind": "bogus"}})").find("attack.kind"), std::string::npos);
  EXPECT_NE(message(R"({"data": {"source": "cifar"}})").find("data.source"), std::string::npos);
  EXPECT_NE(message(R"({"attack": {"kind": "naive"}, "attacker_fraction": 0.7})").find("attacker_fraction"),
            std::string::npos);
}

TEST(Report, MetricsCsvSchema) {
  RunConfig cfg;
  cfg.federation.clients = 2;
  RunResult r;
  r.rounds.push_back({1, 0.75, 0.5, {0.5, 1.0}});
  std::ostringstream out;
  write_metrics_csv(out, cfg, r);
  EXPECT_EQ(out.str(),
            "round,scheme,attack,defense,mean_test_accuracy,mean_test_loss,client_0_accuracy,client_1_accuracy\n"
            "1,fedmd,none,off,0.75,0.5,0.5,1\n");
}

TEST(Cli, ScoreIdenticalFilesIsZero) {
  const fs::path dir = scratch("score");
  write_text(dir / "a.csv", "1,2,3\n0.5,-1,2\n");
  std::string out;
  EXPECT_EQ(cli({"score", "--original", (dir / "a.csv").string(), "--poisoned", (dir / "a.csv").string()}, &out), 0);
  EXPECT_NE(out.find("mean_s1 0\n"), std::string::npos);
  EXPECT_NE(out.find("mean_s2 0\n"), std::string::npos);
  write_text(dir / "b.csv", "3,2,1\n0.5,-1,2\n");
  EXPECT_EQ(cli({"score", "--original", (dir / "a.csv").string(), "--poisoned", (dir / "b.csv").string()}, &out), 0);
  EXPECT_NE(out.find("mean_s2 0.6666666666666666\n"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  write_text(dir / "broken.json", "{\"clients\": 10,");
  write_text(dir / "typo.json", R"({"defense": {"enabeld": true}})");
  write_text(dir / "nodata.json", R"({"data": {"paths": {"images": "/nonexistent/i", "labels": "/nonexistent/l"}}})");
  std::string err;
  EXPECT_EQ(cli({"run", (dir / "broken.json").string()}, nullptr, &err), kExitConfig);
  EXPECT_EQ(cli({"run", (dir / "typo.json").string()}, nullptr, &err), kExitConfig);
  EXPECT_NE(err.find("defense.enabeld"), std::string::npos);
  EXPECT_EQ(cli({"run", (dir / "nodata.json").string()}, nullptr, &err), kExitRuntime);
  EXPECT_EQ(cli({"frobnicate"}, nullptr, &err), kExitConfig);
  EXPECT_EQ(cli({"run", (dir / "absent.json").string()}, nullptr, &err), kExitConfig);
}

TEST(Cli, RunWritesReportsDeterministically) {
  const fs::path dir = scratch("run");
  write_text(dir / "quick.json", kQuickConfig);
  ASSERT_EQ(cli({"run", (dir / "quick.json").string(), "--out", (dir / "a").string()}), 0);
  ASSERT_EQ(cli({"run", (dir / "quick.json").string(), "--out", (dir / "b").string()}), 0);
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  EXPECT_EQ(report["rounds"].size(), 2u);
  EXPECT_EQ(report["config"]["model"]["hidden"], 8);
  EXPECT_FALSE(fs::exists(dir / "a" / "weights.json"));
  EXPECT_FALSE(fs::exists(dir / "a" / "shuffle_table.json"));

  std::string text = kQuickConfig;
  text.replace(text.find("\"seed\": 4"), 9,
               "\"seed\": 4, \"attacker_fraction\": 0.34, \"attack\": {\"kind\": \"logit_shuffle\", \"classifier_hidden\": 8},"
               " \"defense\": {\"enabled\": true}");
  write_text(dir / "attacked.json", text);
  ASSERT_EQ(cli({"run", (dir / "attacked.json").string(), "--out", (dir / "c").string()}), 0);
  const auto weights = nlohmann::json::parse(slurp(dir / "c" / "weights.json"));
  ASSERT_EQ(weights.size(), 2u);
  EXPECT_EQ(weights[0]["round"], 1);
  EXPECT_EQ(weights[0]["w_kc"].size(), 3u);
  EXPECT_EQ(weights[0]["w_k"].size(), 3u);
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir / "c" / "shuffle_table.json")).contains("classes"));
}

TEST(Cli, ShuffleTableAndPartition) {
  const fs::path dir = scratch("table");
  write_text(dir / "quick.json", kQuickConfig);
  std::string out;
  ASSERT_EQ(cli({"shuffle-table", (dir / "quick.json").string()}, &out), 0);
  const auto table = nlohmann::json::parse(out);
  EXPECT_EQ(table["classes"].size(), 3u);
  ASSERT_EQ(cli({"partition", (dir / "quick.json").string()}, &out), 0);
  const auto part = nlohmann::json::parse(out);
  EXPECT_EQ(part["shards"].size(), 3u);
  EXPECT_EQ(part["public"]["size"], 30);
  EXPECT_EQ(part["shards"][0]["size"], 40);
}
