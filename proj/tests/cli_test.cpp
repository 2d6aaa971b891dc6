#include <gtest/gtest.h>

#include <sys/wait.h>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "phishguard/dataset.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
namespace pg = phishguard;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("phishguard_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    pg::write_csv(dir_ / "toy.csv", pgtest::canonical_dataset(300, 80));
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static Outcome run(const std::string& args) {
    const auto cmd = "cd '" + dir_.string() + "' && '" + std::string(PHISHGUARD_BIN) + "' " + args + " 2>&1";
    Outcome r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (const auto n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(dir_ / p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, VersionAndUsageErrors) {
  const auto v = run("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("1.0.0"), std::string::npos);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("train --data missing.csv").code, 2);
  EXPECT_EQ(run("train --data toy.csv --model nope").code, 2);
}

TEST_F(Cli, FeaturesPrintsTheCanonicalMap) {
  const auto r = run("features --url http://192.168.1.1/login");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc[0]["features"].size(), 23u);
  EXPECT_EQ(doc[0]["features"]["having_IP_Address"], 1.0);
  EXPECT_EQ(run("features --url ht!tp://").code, 2);
}

TEST_F(Cli, IngestIsIdempotent) {
  ASSERT_EQ(run("ingest --input toy.csv --output a.csv").code, 0);
  ASSERT_EQ(run("ingest --input a.csv --output b.csv").code, 0);
  EXPECT_EQ(slurp("a.csv"), slurp("b.csv"));
  std::ofstream(dir_ / "empty.csv") << "";
  EXPECT_EQ(run("ingest --input empty.csv --output e.csv").code, 2);
}

TEST_F(Cli, TrainIsDeterministicAndWritesAManifest) {
  for (const auto* kind : {"logistic", "gbt"}) {
    const std::string k = kind;
    ASSERT_EQ(run("train --data toy.csv --model " + k + " --folds 3 --seed 4 --output m1_" + k + ".json").code, 0);
    ASSERT_EQ(run("train --data toy.csv --model " + k + " --folds 3 --seed 4 --output m2_" + k + ".json").code, 0);
    EXPECT_EQ(slurp("m1_" + k + ".json"), slurp("m2_" + k + ".json")) << kind;
  }
  const auto manifest = json::parse(slurp("m1_logistic.json.manifest.json"));
  EXPECT_EQ(manifest["subcommand"], "train");
  EXPECT_EQ(manifest["seed"], 4);
  EXPECT_EQ(manifest["exit_code"], 0);
  EXPECT_TRUE(manifest.contains("started_at"));
}

TEST_F(Cli, EvaluateExplainFuseRobustness) {
  ASSERT_EQ(run("train --data toy.csv --model logistic --folds 3 --output m.json").code, 0);
  auto r = run("evaluate --model-file m.json --data toy.csv --roc-csv roc.csv --json");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp("roc.csv").substr(slurp("roc.csv").find('\n') + 1, 6), "inf,0,");

  r = run("explain --model-file m.json --data toy.csv --method ig --json");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(run("explain --model-file m.json --data toy.csv --method shap --index 100000").code, 2);

  ASSERT_EQ(run("fuse --model-file m.json --data toy.csv --alpha 0.5 --output fusion.json --seed 1").code, 0);
  EXPECT_FALSE(json::parse(slurp("fusion.json"))["f_final"].empty());

  r = run("robustness --model-file m.json --data toy.csv --rate 0 --delta 0 --subset 50 --json null.json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = json::parse(slurp("null.json"));
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& row : rows) {
    EXPECT_EQ(row["cis"], 1.0);
    EXPECT_EQ(row["apf"], 0.0);
  }
  ASSERT_EQ(run("robustness --model-file m.json --data toy.csv --rate 0.3 --subset 50 --json r1.json --seed 2").code, 0);
  ASSERT_EQ(run("robustness --model-file m.json --data toy.csv --rate 0.3 --subset 50 --json r2.json --seed 2").code, 0);
  EXPECT_EQ(slurp("r1.json"), slurp("r2.json"));
}

TEST_F(Cli, ServeAnswersOverStdio) {
  ASSERT_EQ(run("train --data toy.csv --model logistic --folds 3 --output s.json").code, 0);
  std::ofstream(dir_ / "requests.txt") << R"({"id":"1","tool":"server_info","arguments":{}})" << "\n"
                                       << "{oops\n";
  const auto r = run("serve --model-file s.json --audit audit.jsonl < requests.txt");
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream lines(r.out);
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_EQ(json::parse(first)["status"], "ok");
  EXPECT_EQ(json::parse(second)["error"]["code"], "PARSE_ERROR");
}
