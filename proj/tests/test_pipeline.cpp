#include <fstream>

#include "doctest.h"

#include "advlab/errors.hpp"
#include "advlab/pipeline.hpp"
#include "test_support.hpp"

using namespace advlab;

namespace {

struct Rig {
  TargetModel target{testsupport::toy_descriptor(4), "small_cnn", 1};
  TargetModel surrogate{testsupport::toy_descriptor(4), "resnet_mini", 2};
  Denoiser denoiser{1, 3};
  Restorer restorer{512, 4};
  ExampleSet test = testsupport::synthetic_set(48, 4, 5);

  EvalComponents components() {
    return {&target, &surrogate, &denoiser, &restorer};
  }
};

}  // namespace

TEST_CASE("defended_predict: mode none equals the raw target") {
  Rig rig;
  Tensor x = rig.test.batch(0, 16);
  auto a = defended_predict(DefenseMode::kNone, rig.target, nullptr, nullptr, x);
  auto b = rig.target.predict(x);
  CHECK(a == b);
  CHECK(a.size() == 16);
}

TEST_CASE("defended_predict: compositions match manual operator chains") {
  Rig rig;
  Tensor x = rig.test.batch(0, 8);

  Tensor denoised = rig.denoiser.forward(x, false);
  auto manual_id = argmax_rows(rig.target.classify(rig.target.encode(denoised)));
  auto got_id = defended_predict(DefenseMode::kIdOnly, rig.target,
                                 &rig.denoiser, nullptr, x);
  CHECK(manual_id == got_id);

  Tensor emb = rig.target.encode(rig.denoiser.forward(x, false));
  auto manual_fr =
      argmax_rows(rig.target.classify(rig.restorer.forward(emb)));
  auto got_fr = defended_predict(DefenseMode::kIdFr, rig.target, &rig.denoiser,
                                 &rig.restorer, x);
  CHECK(manual_fr == got_fr);
}

TEST_CASE("defended_predict: missing components are configuration errors") {
  Rig rig;
  Tensor x = rig.test.batch(0, 4);
  CHECK_THROWS_AS(
      defended_predict(DefenseMode::kIdOnly, rig.target, nullptr, nullptr, x),
      ConfigError);
  CHECK_THROWS_AS(defended_predict(DefenseMode::kIdFr, rig.target,
                                   &rig.denoiser, nullptr, x),
                  ConfigError);
}

TEST_CASE("evaluate: one fgsm cell over three modes plus clean is six rows") {
  Rig rig;
  EvalGrid grid;
  grid.attacks = {AttackConfig::make("fgsm", 8.0)};
  grid.epsilons_255 = {8.0};
  grid.boxes = {"black"};
  grid.modes = {DefenseMode::kNone, DefenseMode::kIdOnly, DefenseMode::kIdFr};
  grid.n_examples = 32;
  EvalReport report = evaluate(rig.components(), rig.test, grid, 7);
  CHECK(report.rows.size() == 6);
  int clean = 0, attacked = 0;
  for (const auto& r : report.rows) {
    CHECK(r.n == 32);
    CHECK(r.accuracy == doctest::Approx(double(r.correct) / r.n));
    (r.box == "clean" ? clean : attacked)++;
  }
  CHECK(clean == 3);
  CHECK(attacked == 3);
  CHECK(report.find("fgsm", 8.0, "black", DefenseMode::kIdFr) != nullptr);
}

TEST_CASE("evaluate: black box without a surrogate is a config error") {
  Rig rig;
  EvalGrid grid;
  grid.attacks = {AttackConfig::make("fgsm", 8.0)};
  grid.epsilons_255 = {8.0};
  grid.boxes = {"black"};
  grid.modes = {DefenseMode::kNone};
  grid.n_examples = 8;
  EvalComponents c = rig.components();
  c.surrogate = nullptr;
  CHECK_THROWS_AS(evaluate(c, rig.test, grid, 0), ConfigError);
}

TEST_CASE("evaluate: deterministic row-for-row") {
  Rig rig;
  EvalGrid grid;
  grid.attacks = {AttackConfig::make("fgsm", 8.0), AttackConfig::make("bim", 8.0)};
  grid.epsilons_255 = {4.0, 16.0};
  grid.boxes = {"white"};
  grid.modes = {DefenseMode::kNone, DefenseMode::kIdFr};
  grid.n_examples = 24;
  EvalReport a = evaluate(rig.components(), rig.test, grid, 11);
  EvalReport b = evaluate(rig.components(), rig.test, grid, 11);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].attack == b.rows[i].attack);
    CHECK(a.rows[i].correct == b.rows[i].correct);
  }
}

TEST_CASE("run_ablation: exactly the three modes per cell") {
  Rig rig;
  EvalGrid grid;
  grid.attacks = {AttackConfig::make("fgsm", 8.0)};
  grid.epsilons_255 = {8.0};
  grid.boxes = {"white"};
  grid.modes = {DefenseMode::kNone};  // ablation overrides this
  grid.n_examples = 16;
  EvalReport report = run_ablation(rig.components(), rig.test, grid, 3);
  int per_cell = 0;
  for (const auto& r : report.rows)
    if (r.box == "white") ++per_cell;
  CHECK(per_cell == 3);

  EvalComponents no_fr = rig.components();
  no_fr.restorer = nullptr;
  CHECK_THROWS_AS(run_ablation(no_fr, rig.test, grid, 3), ConfigError);
}

TEST_CASE("emit_report: csv round-trips, markdown covers every row, plots "
          "exist per attack") {
  Rig rig;
  testsupport::TempDir dir("report");
  EvalGrid grid;
  grid.attacks = {AttackConfig::make("fgsm", 8.0), AttackConfig::make("cw", 8.0)};
  grid.epsilons_255 = {4.0, 8.0};
  grid.boxes = {"black"};
  grid.modes = {DefenseMode::kNone, DefenseMode::kIdOnly, DefenseMode::kIdFr};
  grid.n_examples = 16;
  EvalReport report = evaluate(rig.components(), rig.test, grid, 5);
  emit_report(report, dir.path);

  EvalReport parsed = parse_report_csv(dir.path / "report.csv");
  REQUIRE(parsed.rows.size() == report.rows.size());
  for (size_t i = 0; i < report.rows.size(); ++i) {
    CHECK(parsed.rows[i].attack == report.rows[i].attack);
    CHECK(parsed.rows[i].epsilon_255 == report.rows[i].epsilon_255);
    CHECK(parsed.rows[i].box == report.rows[i].box);
    CHECK(parsed.rows[i].mode == report.rows[i].mode);
    CHECK(parsed.rows[i].correct == report.rows[i].correct);
    CHECK(parsed.rows[i].n == report.rows[i].n);
    CHECK(parsed.rows[i].accuracy == report.rows[i].accuracy);
  }
  CHECK(parsed.meta.dataset == report.meta.dataset);
  CHECK(parsed.meta.seed == report.meta.seed);

  // every report cell appears in the markdown tables: count data cells
  std::ifstream md(dir.path / "report.md");
  std::string line;
  int cells = 0;
  while (std::getline(md, line)) {
    if (line.rfind("| ", 0) != 0 || line.find("---") != std::string::npos)
      continue;
    if (line.find("Defense") != std::string::npos) continue;
    // row: | mode | clean | a/b | a/b |  -> count numeric entries
    for (size_t pos = 0; (pos = line.find('.', pos)) != std::string::npos; ++pos)
      ++cells;
  }
  CHECK(cells == static_cast<int>(report.rows.size()));

  CHECK(std::filesystem::exists(dir.path / "plots" / "fgsm.png"));
  CHECK(std::filesystem::exists(dir.path / "plots" / "cw.png"));

  // byte-identical on re-emission
  auto digest1 = file_digest_hex(dir.path / "report.csv");
  emit_report(report, dir.path);
  CHECK(file_digest_hex(dir.path / "report.csv") == digest1);
}

TEST_CASE("defense mode names round-trip") {
  for (auto m : {DefenseMode::kNone, DefenseMode::kIdOnly, DefenseMode::kIdFr})
    CHECK(defense_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(defense_mode_from_string("full"), ConfigError);
}
