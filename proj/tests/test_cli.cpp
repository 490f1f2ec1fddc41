#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "json.hpp"

#include "advlab/checkpoint.hpp"
#include "test_support.hpp"

namespace {

const char* cli = ADVLAB_CLI_PATH;

int run_cli(const std::string& args, const std::filesystem::path& log) {
  std::string cmd = std::string(cli) + " " + args + " >" + log.string() +
                    " 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli: eval without a target exits 3 and names the field") {
  testsupport::TempDir dir("cli-noval");
  int code = run_cli("eval --out " + (dir.path / "r").string(),
                     dir.path / "log.txt");
  CHECK(code == 3);
  CHECK(slurp(dir.path / "log.txt").find("target") != std::string::npos);
}

TEST_CASE("cli: unknown flag exits 3") {
  testsupport::TempDir dir("cli-flag");
  int code = run_cli("verify --no-such-flag", dir.path / "log.txt");
  CHECK(code == 3);
}

TEST_CASE("cli: missing checkpoint exits 2 naming the path") {
  testsupport::TempDir dir("cli-missing");
  int code = run_cli("attack --model " + (dir.path / "none.advckpt").string() +
                         " --out " + (dir.path / "x.advset").string(),
                     dir.path / "log.txt");
  CHECK(code == 2);
  CHECK(slurp(dir.path / "log.txt").find("none.advckpt") != std::string::npos);
}

TEST_CASE("cli: verify passes on a fresh build and reports suite sizes") {
  testsupport::TempDir dir("cli-verify");
  int code = run_cli("verify --trials 120 --fuzz-cases 400 --seed 5",
                     dir.path / "log.txt");
  CHECK(code == 0);
  auto log = slurp(dir.path / "log.txt");
  CHECK(log.find("hull-closure: 120/120") != std::string::npos);
  CHECK(log.find("attack-budget-fuzz: 400/400") != std::string::npos);
}

TEST_CASE("cli: an injected budget violation makes verify fail") {
  testsupport::TempDir dir("cli-inject");
  int code = run_cli(
      "verify --trials 50 --fuzz-cases 200 --budget-tolerance -1 --seed 5",
      dir.path / "log.txt");
  CHECK(code == 1);
  CHECK(slurp(dir.path / "log.txt").find("first failure") != std::string::npos);
}

// End-to-end smoke: the full train/attack/defend/evaluate chain on a small
// corner of mnist, then a repeat of the eval to confirm identical artifact
// digests in the manifests.
TEST_CASE("cli: full pipeline smoke on a small mnist slice") {
  testsupport::TempDir dir("cli-pipeline");
  auto p = [&](const std::string& rel) { return (dir.path / rel).string(); };
  std::string common = " --fraction 0.02 --seed 9";

  REQUIRE(run_cli("train-target --dataset mnist --arch small_cnn --epochs 1 "
                  "--lr 0.001 --out " + p("target.advckpt") + common,
                  dir.path / "t1.log") == 0);
  REQUIRE(run_cli("attack --model " + p("target.advckpt") +
                  " --method fgsm --eps 51 --n 64 --out " + p("fgsm.advset") +
                  common,
                  dir.path / "t2.log") == 0);
  REQUIRE(run_cli("train-id --target " + p("target.advckpt") +
                  " --attacks fgsm:51 --epochs 1 --lr 0.001 --batch 32 "
                  "--train-subset 96 --augment-rounds 1 --augment-sigmas 0.05 "
                  "--out " + p("id.advckpt") + " --metrics-csv " +
                  p("id_metrics.csv") + common,
                  dir.path / "t3.log") == 0);
  REQUIRE(run_cli("train-fr --target " + p("target.advckpt") + " --id " +
                  p("id.advckpt") +
                  " --attacks fgsm:51 --epochs 2 --lr 0.001 --batch 32 "
                  "--train-subset 96 --out " + p("fr.advckpt") + common,
                  dir.path / "t4.log") == 0);
  REQUIRE(run_cli("eval --target " + p("target.advckpt") + " --id " +
                  p("id.advckpt") + " --fr " + p("fr.advckpt") +
                  " --attacks fgsm --eps 51 --boxes white --n 64 --out " +
                  p("run1") + common,
                  dir.path / "t5.log") == 0);

  CHECK(std::filesystem::exists(dir.path / "run1" / "report.csv"));
  CHECK(std::filesystem::exists(dir.path / "run1" / "report.md"));
  CHECK(std::filesystem::exists(dir.path / "run1" / "plots" / "fgsm.png"));
  CHECK(std::filesystem::exists(dir.path / "run1" / "manifest.json"));

  // artifacts carry sensible metrics
  auto ckpt = advlab::load_checkpoint(dir.path / "target.advckpt");
  CHECK(ckpt.metrics.at("clean_test_accuracy") > 0.3);

  // identical rerun of the eval reproduces identical artifact digests
  REQUIRE(run_cli("eval --target " + p("target.advckpt") + " --id " +
                  p("id.advckpt") + " --fr " + p("fr.advckpt") +
                  " --attacks fgsm --eps 51 --boxes white --n 64 --out " +
                  p("run2") + common,
                  dir.path / "t6.log") == 0);
  nlohmann::json m1, m2;
  std::ifstream(dir.path / "run1" / "manifest.json") >> m1;
  std::ifstream(dir.path / "run2" / "manifest.json") >> m2;
  auto digests = [](const nlohmann::json& m) {
    std::vector<std::string> out;
    for (const auto& e : m.at("entries"))
      for (const auto& a : e.at("artifacts"))
        out.push_back(a.at("digest").get<std::string>());
    return out;
  };
  CHECK(digests(m1) == digests(m2));
  CHECK(advlab::file_digest_hex(dir.path / "run1" / "report.csv") ==
        advlab::file_digest_hex(dir.path / "run2" / "report.csv"));
}
