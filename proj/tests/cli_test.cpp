#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kData = KPCERT_DATA_DIR;

struct Run {
  int code;
  std::string out;
};

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "kpcert_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args) {
  const fs::path out = scratch("stdout.txt");
  std::string cmd = std::string(KPCERT_CLI) + " " + args + " > " + out.string() +
                    " 2> " + scratch("stderr.txt").string();
  int status = std::system(cmd.c_str());
  return {WEXITSTATUS(status), slurp(out)};
}

std::string data(const std::string& rel) { return (kData / rel).string(); }

TEST(Cli, VerifyExitCodes) {
  auto r1 = run("verify " + data("walkthrough/walkthrough_scenario1.json"));
  EXPECT_EQ(r1.code, 0);
  EXPECT_EQ(json::parse(r1.out)["status"], "robust");

  auto r2 = run("verify " + data("walkthrough/walkthrough_scenario2.json") + " --no-prune");
  EXPECT_EQ(r2.code, 1);
  auto doc = json::parse(r2.out);
  EXPECT_EQ(doc["status"], "unknown");
  EXPECT_TRUE(doc["counterexample"]["validated"].get<bool>());
  EXPECT_EQ(doc["counterexample"]["violated_facets"], json::array({1}));
  EXPECT_EQ(doc["schema_version"], 1);
}

TEST(Cli, MalformedInputIs64) {
  std::string text = slurp(data("walkthrough/walkthrough_scenario1.json"));
  const fs::path cut = scratch("truncated.json");
  std::ofstream(cut) << text.substr(0, text.size() / 3);
  EXPECT_EQ(run("verify " + cut.string()).code, 64);
  EXPECT_NE(slurp(scratch("stderr.txt")).find("line "), std::string::npos);
  EXPECT_EQ(run("verify " + scratch("missing.json").string()).code, 64);
  EXPECT_EQ(run("verify").code, 64);
}

TEST(Cli, OracleCrossCheckAgrees) {
  for (const char* m : {"enum", "sample", "grid"}) {
    auto r = run("verify " + data("walkthrough/walkthrough_scenario2.json") + " --oracle " + m +
                 " --samples 3000 --seed 4");
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(json::parse(r.out)["oracle"]["agrees"].get<bool>()) << m;
  }
  EXPECT_EQ(run("oracle " + data("walkthrough/walkthrough_scenario1.json")).code, 0);
  EXPECT_EQ(run("oracle " + data("walkthrough/walkthrough_scenario2.json")).code, 1);
}

TEST(Cli, BatchRates) {
  auto r = run("batch " + data("walkthrough") + " --jobs 2 --empirical-n 3000 --seed 8");
  ASSERT_EQ(r.code, 0);
  auto s = json::parse(r.out)["summary"];
  EXPECT_DOUBLE_EQ(s["verified_rate"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(s["empirical_verified_rate"].get<double>(), 0.5);
  auto again = json::parse(run("batch " + data("walkthrough") + " --empirical-n 3000 --seed 8").out);
  EXPECT_EQ(again["summary"]["empirical_verified_rate"], s["empirical_verified_rate"]);
  EXPECT_EQ(json::parse(r.out)["instances"][0]["file"], "walkthrough_scenario1.json");
}

TEST(Cli, BatchIsolatesErrors) {
  fs::path dir = scratch("mixed");
  fs::create_directories(dir);
  fs::copy_file(data("walkthrough/walkthrough_scenario1.json"), dir / "a.json",
                fs::copy_options::overwrite_existing);
  std::ofstream(dir / "b.json") << "{ nope";
  auto r = run("batch " + dir.string());
  ASSERT_EQ(r.code, 0);
  auto doc = json::parse(r.out);
  EXPECT_EQ(doc["summary"]["errors"], 1);
  EXPECT_TRUE(doc["instances"][1].contains("error"));

  fs::path empty = scratch("empty");
  fs::remove_all(empty);
  fs::create_directories(empty);
  EXPECT_EQ(run("batch " + empty.string()).code, 64);
}

TEST(Cli, MakeInstanceIsByteStable) {
  const std::string args = "make-instance --network " + data("tiny/network.json") +
                           " --spec " + data("tiny/spec.json") + " " +
                           data("tiny/seed.json") + " " + data("tiny/perturbed_1.json") +
                           " " + data("tiny/perturbed_2.json");
  auto a = run(args);
  auto b = run(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, slurp(data("tiny/instance.json")));
}

TEST(Cli, SeedOnlyInstanceMatchesCleanCheck) {
  const fs::path inst = scratch("seed_only.json");
  auto r = run("make-instance --network " + data("tiny/network.json") + " --spec " +
               data("tiny/spec.json") + " " + data("tiny/seed.json") + " --out " +
               inst.string());
  ASSERT_EQ(r.code, 0);
  auto doc = json::parse(slurp(inst));
  EXPECT_TRUE(doc["zonotope"]["generators"].empty());
  // spec.json's ground truth is the seed's clean argmax, so the check passes.
  EXPECT_EQ(run("verify " + inst.string()).code, 0);
}

TEST(Cli, MakeInstanceRejectsMismatchedImages) {
  const fs::path small = scratch("small.json");
  std::ofstream(small) << R"({"h": 2, "w": 2, "c": 1, "pixels": [[0], [0], [0], [0]]})";
  auto r = run("make-instance --network " + data("tiny/network.json") + " --spec " +
               data("tiny/spec.json") + " " + data("tiny/seed.json") + " " + small.string());
  EXPECT_EQ(r.code, 64);
  EXPECT_NE(slurp(scratch("stderr.txt")).find("2x2x1"), std::string::npos);
}

TEST(Cli, ExportLp) {
  auto r = run("export-lp " + data("walkthrough/walkthrough_scenario1.json"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("3.000001 r_1"), std::string::npos);
  EXPECT_NE(r.out.find("End"), std::string::npos);
}

}  // namespace
