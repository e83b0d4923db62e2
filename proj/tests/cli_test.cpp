#include <gtest/gtest.h>

#include <fstream>

#include <json.hpp>

#include "safesample/cli.hpp"
#include "support.hpp"

namespace {

using namespace safesample;
using namespace safesample::testkit;
using nlohmann::json;
namespace fs = std::filesystem;

struct CliTest : ::testing::Test {
  TempDir dir{"cli"};
  Workspace ws = make_workspace(dir.path());

  fs::path config(json cfg, const std::string& name = "config.json") {
    return ws.write_config(cfg, name);
  }
};

TEST_F(CliTest, HelpAndUsage) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({}).code, cli::kExitConfig);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitConfig);
  const auto v = run_cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_FALSE(v.out.empty());
}

TEST_F(CliTest, ValidateGoodInputs) {
  auto cfg = ws.config;
  cfg["methods"] = "all";
  const auto r = run_cli({"validate", "--config", config(cfg).string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(read_text(dir / "out/validation.json"));
  EXPECT_TRUE(report["ok"].get<bool>());
  EXPECT_TRUE(fs::exists(dir / "out/validate_manifest.json"));
}

TEST_F(CliTest, ValidateNamesMissingEmbedding) {
  std::ifstream in(ws.embeddings);
  std::string line;
  std::string kept;
  std::getline(in, line);
  const auto dropped = json::parse(line)["id"].get<std::string>();
  while (std::getline(in, line)) kept += line + "\n";
  write_text(ws.embeddings, kept);

  auto cfg = ws.config;
  cfg["methods"] = "pss";
  const auto r = run_cli({"validate", "--config", config(cfg).string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE((r.out + r.err).find(dropped), std::string::npos);
  const auto report = json::parse(read_text(dir / "out/validation.json"));
  EXPECT_FALSE(report["ok"].get<bool>());
  EXPECT_NE(report.dump().find(dropped), std::string::npos);
}

TEST_F(CliTest, ValidateRejectsDimensionMismatch) {
  write_text(dir / "other.jsonl",
             R"({"id":"zz","model":"synthetic-encoder","dim":3,"vector":[1,2,3]})" "\n");
  auto cfg = ws.config;
  cfg["embeddings"] = {"embeddings.jsonl", "other.jsonl"};
  cfg["methods"] = "pss";
  const auto r = run_cli({"validate", "--config", config(cfg).string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.out.find("dimension"), std::string::npos) << r.out << r.err;
}

TEST_F(CliTest, UnknownConfigKeyIsAConfigError) {
  auto cfg = ws.config;
  cfg["budgte"] = 50;
  const auto r = run_cli({"validate", "--config", config(cfg).string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("budgte"), std::string::npos);
  EXPECT_EQ(run_cli({"sample", "--config", (dir / "absent.json").string()}).code, cli::kExitConfig);
}

TEST_F(CliTest, SampleWritesSelectionsAndManifests) {
  const auto path = config(ws.config);
  const auto r = run_cli({"sample", "--config", path.string(), "--method", "pss,random",
                          "--budgets", "5,10", "--seed", "7", "--trials", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* rel : {"out/pss/n5/selection.json", "out/pss/n10/subset.jsonl",
                          "out/pss/n10/augmented.jsonl", "out/random/n5/seed7/selection.json",
                          "out/random/n10/seed8/augment.json", "out/sample_manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / rel)) << rel;
  }
  EXPECT_FALSE(fs::exists(dir / "out/random/n5/seed9"));
  const auto sel = json::parse(read_text(dir / "out/pss/n10/selection.json"));
  EXPECT_EQ(sel["selected_ids"].size(), 10u);
  EXPECT_TRUE(sel["seed"].is_null());
  EXPECT_EQ(json::parse(read_text(dir / "out/random/n5/seed7/selection.json"))["seed"], 7);

  const auto manifest = json::parse(read_text(dir / "out/sample_manifest.json"));
  EXPECT_TRUE(manifest.contains("timestamp"));
  EXPECT_EQ(manifest["runs"].size(), 2u + 4u);
  EXPECT_FALSE(manifest["config_hash"].get<std::string>().empty());

  // A rerun reproduces every selection byte for byte.
  const auto first = read_text(dir / "out/random/n10/seed8/selection.json");
  ASSERT_EQ(run_cli({"sample", "--config", path.string(), "--method", "pss,random", "--budgets",
                     "5,10", "--seed", "7", "--trials", "2"})
                .code,
            0);
  EXPECT_EQ(read_text(dir / "out/random/n10/seed8/selection.json"), first);
}

TEST_F(CliTest, SampleNeedsMethodsAndLabels) {
  EXPECT_EQ(run_cli({"sample", "--config", config(ws.config).string(), "--budget", "5"}).code,
            cli::kExitConfig);
  EXPECT_EQ(run_cli({"sample", "--config", config(ws.config).string(), "--method", "pss",
                     "--budget", "5", "--budgets", "5,6"})
                .code,
            cli::kExitConfig);

  TempDir raw_dir("cli-raw");
  WorkspaceShape shape;
  shape.labelled = false;
  auto raw = make_workspace(raw_dir.path(), shape);
  auto cfg = raw.config;
  cfg["method"] = "sss";
  cfg["budget"] = 5;
  EXPECT_EQ(run_cli({"sample", "--config", raw.write_config(cfg, "c.json").string()}).code,
            cli::kExitData);
}

TEST_F(CliTest, BehaviorFilterRejectsRandom) {
  auto cfg = ws.config;
  cfg["behavior_filter"] = true;
  cfg["budget"] = 5;
  EXPECT_EQ(run_cli({"sample", "--config", config(cfg).string(), "--method", "random"}).code,
            cli::kExitConfig);
  const auto r = run_cli({"sample", "--config", config(cfg).string(), "--method", "pss"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "out/pss_b/n5/selection.json"));
}

TEST_F(CliTest, LabelWithMockClientIsIdempotent) {
  TempDir raw_dir("cli-label");
  WorkspaceShape shape;
  shape.labelled = false;
  auto raw = make_workspace(raw_dir.path(), shape);
  auto cfg = raw.config;
  cfg["cache"] = "cache.jsonl";
  cfg["label"] = {{"tasks", {"behavior", "categories"}},
                  {"client", "mock"},
                  {"categories_template", std::string(SAFESAMPLE_TEMPLATES) + "/categories.txt"}};
  const auto path = raw.write_config(cfg, "c.json");

  const auto first = run_cli({"label", "--config", path.string()});
  ASSERT_EQ(first.code, 0) << first.err;
  const auto labelled = read_text(raw_dir / "out/labeled.jsonl");
  auto manifest = json::parse(read_text(raw_dir / "out/label_manifest.json"));
  EXPECT_GT(manifest["reports"][0]["client_calls"].get<std::size_t>(), 0u);

  const auto second = run_cli({"label", "--config", path.string()});
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(read_text(raw_dir / "out/labeled.jsonl"), labelled);
  manifest = json::parse(read_text(raw_dir / "out/label_manifest.json"));
  for (const auto& report : manifest["reports"]) EXPECT_EQ(report["client_calls"], 0);

  // The labelled pool is usable for sampling straight away.
  auto sample_cfg = raw.config;
  sample_cfg["safety_pool"] = "out/labeled.jsonl";
  sample_cfg["methods"] = "sss,pss_b";
  sample_cfg["budget"] = 6;
  const auto s = run_cli({"sample", "--config", raw.write_config(sample_cfg, "s.json").string()});
  EXPECT_EQ(s.code, 0) << s.err;
}

TEST_F(CliTest, LabelRejectsUnknownTaskAndMissingEndpoint) {
  auto cfg = ws.config;
  cfg["label"] = {{"tasks", {"summarise"}}, {"client", "mock"}};
  EXPECT_EQ(run_cli({"label", "--config", config(cfg).string()}).code, cli::kExitConfig);
  cfg["label"] = {{"tasks", {"behavior"}}};
  ::unsetenv("SAFESAMPLE_CLI_TEST_ENDPOINT");
  EXPECT_EQ(run_cli({"label", "--config", config(cfg).string(), "--endpoint-env",
                     "SAFESAMPLE_CLI_TEST_ENDPOINT", "--tasks", "behavior"})
                .code,
            cli::kExitClient);
}

TEST_F(CliTest, MetricsFromVerdictFiles) {
  const std::string fixtures = std::string(SAFESAMPLE_FIXTURES) + "/verdicts/";
  auto cfg = ws.config;
  cfg["verdicts"] = {{{"path", fixtures + "mixed.jsonl"}, {"method", "pss"}, {"budget", 50}},
                     {{"path", fixtures + "xstest_3_of_10.jsonl"}, {"method", "random"},
                      {"budget", 50}, {"seed", 1}}};
  const auto r = run_cli({"metrics", "--config", config(cfg).string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_text(dir / "out/metrics.csv");
  EXPECT_NE(csv.find("pss,50,0,asr_base,25"), std::string::npos);
  EXPECT_NE(csv.find("random,50,1,over_rejection,0.3"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out/tables.txt"));
  EXPECT_TRUE(fs::exists(dir / "out/plot_data.csv"));
}

TEST_F(CliTest, MetricsOnEmptyVerdictsIsADataError) {
  auto cfg = ws.config;
  cfg["verdicts"] = {{{"path", std::string(SAFESAMPLE_FIXTURES) + "/verdicts/empty.jsonl"},
                      {"method", "pss"},
                      {"budget", 50}}};
  EXPECT_EQ(run_cli({"metrics", "--config", config(cfg).string()}).code, cli::kExitData);
}

TEST_F(CliTest, DuplicateVerdictKeyIsAConfigError) {
  const std::string v = std::string(SAFESAMPLE_FIXTURES) + "/verdicts/mixed.jsonl";
  auto cfg = ws.config;
  cfg["verdicts"] = {{{"path", v}, {"method", "pss"}, {"budget", 50}},
                     {{"path", v}, {"method", "pss"}, {"budget", 50}}};
  EXPECT_EQ(run_cli({"metrics", "--config", config(cfg).string()}).code, cli::kExitConfig);
}

}  // namespace
