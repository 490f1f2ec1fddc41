#include "advlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "advlab/errors.hpp"
#include "advlab/plot.hpp"

namespace advlab {

std::string to_string(DefenseMode mode) {
  switch (mode) {
    case DefenseMode::kNone: return "none";
    case DefenseMode::kIdOnly: return "id_only";
    case DefenseMode::kIdFr: return "id_fr";
  }
  throw ConfigError("bad defense mode");
}

DefenseMode defense_mode_from_string(const std::string& s) {
  if (s == "none") return DefenseMode::kNone;
  if (s == "id_only") return DefenseMode::kIdOnly;
  if (s == "id_fr") return DefenseMode::kIdFr;
  throw ConfigError("unknown defense mode: " + s);
}

std::vector<int> defended_predict(DefenseMode mode, TargetModel& target,
                                  Denoiser* denoiser, Restorer* restorer,
                                  const Tensor& images, int batch_size) {
  if (mode != DefenseMode::kNone && denoiser == nullptr)
    throw ConfigError("defense mode " + to_string(mode) +
                      " requires a denoiser");
  if (mode == DefenseMode::kIdFr && restorer == nullptr)
    throw ConfigError("defense mode id_fr requires a restorer");

  int n = images.dim(0);
  int64_t stride = images.size() / std::max(n, 1);
  std::vector<int> out;
  out.reserve(static_cast<size_t>(n));
  for (int start = 0; start < n; start += batch_size) {
    int bs = std::min(batch_size, n - start);
    Tensor batch({bs, images.dim(1), images.dim(2), images.dim(3)});
    std::memcpy(batch.data(), images.data() + start * stride,
                static_cast<size_t>(bs * stride) * sizeof(float));
    Tensor x = mode == DefenseMode::kNone ? std::move(batch)
                                          : denoiser->forward(batch, false);
    Tensor emb = target.encode(x, false);
    if (mode == DefenseMode::kIdFr) emb = restorer->forward(emb);
    auto pred = argmax_rows(target.classify(emb));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

const EvalRow* EvalReport::find(const std::string& attack, double eps255,
                                const std::string& box,
                                DefenseMode mode) const {
  for (const auto& r : rows)
    if (r.attack == attack && r.box == box && r.mode == mode &&
        std::abs(r.epsilon_255 - eps255) < 1e-9)
      return &r;
  return nullptr;
}

namespace {

int mode_rank(DefenseMode m) { return static_cast<int>(m); }

void sort_rows(std::vector<EvalRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    bool ca = a.box == "clean", cb = b.box == "clean";
    if (ca != cb) return ca;  // clean block first
    if (a.attack != b.attack) return a.attack < b.attack;
    if (a.epsilon_255 != b.epsilon_255) return a.epsilon_255 < b.epsilon_255;
    if (a.box != b.box) return a.box < b.box;
    return mode_rank(a.mode) < mode_rank(b.mode);
  });
}

EvalRow score(const std::string& attack, double eps255, const std::string& box,
              DefenseMode mode, const EvalComponents& c, const Tensor& images,
              const std::vector<int>& labels) {
  auto pred =
      defended_predict(mode, *c.target, c.denoiser, c.restorer, images);
  EvalRow row;
  row.attack = attack;
  row.epsilon_255 = eps255;
  row.box = box;
  row.mode = mode;
  row.n = static_cast<int>(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    if (pred[i] == labels[i]) ++row.correct;
  row.accuracy = static_cast<double>(row.correct) / std::max(row.n, 1);
  return row;
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return {buf};
}

}  // namespace

EvalReport evaluate(const EvalComponents& components, const ExampleSet& test,
                    const EvalGrid& grid, uint64_t seed) {
  if (components.target == nullptr) throw ConfigError("evaluate: target missing");
  if (grid.attacks.empty() && !grid.include_clean)
    throw ConfigError("evaluate: empty grid");
  for (const auto& box : grid.boxes) {
    if (box != "black" && box != "white")
      throw ConfigError("unknown box setting: " + box);
    if (box == "black" && components.surrogate == nullptr)
      throw ConfigError("black-box rows need a surrogate model");
  }
  bool needs_denoiser = false, needs_restorer = false;
  for (auto m : grid.modes) {
    needs_denoiser |= m != DefenseMode::kNone;
    needs_restorer |= m == DefenseMode::kIdFr;
  }
  if (needs_denoiser && components.denoiser == nullptr)
    throw ConfigError("grid includes defended modes but no denoiser given");
  if (needs_restorer && components.restorer == nullptr)
    throw ConfigError("grid includes id_fr but no restorer given");

  int n = std::min(grid.n_examples, test.size());
  ExampleSet subset = n == test.size() ? test : test.stratified_sample(n, seed);
  Tensor clean_images = subset.pixels();
  const std::vector<int>& labels = subset.labels();

  EvalReport report;
  report.meta.dataset = test.descriptor().name;
  report.meta.n_examples = n;
  report.meta.seed = seed;
  {
    auto t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    report.meta.timestamp = buf;
  }
  report.meta.component_digests.emplace_back(
      "target", hex64(components.target->parameter_digest()));
  if (components.surrogate)
    report.meta.component_digests.emplace_back(
        "surrogate", hex64(components.surrogate->parameter_digest()));
  if (components.denoiser)
    report.meta.component_digests.emplace_back(
        "denoiser", hex64(components.denoiser->parameter_digest()));
  if (components.restorer)
    report.meta.component_digests.emplace_back(
        "restorer", hex64(components.restorer->parameter_digest()));

  if (grid.include_clean)
    for (auto mode : grid.modes)
      report.rows.push_back(score("clean", 0.0, "clean", mode, components,
                                  clean_images, labels));

  for (const auto& base : grid.attacks) {
    for (double eps255 : grid.epsilons_255) {
      AttackConfig cfg = base;
      cfg.epsilon_255 = eps255;
      cfg.validate();
      for (const auto& box : grid.boxes) {
        TargetModel* generator =
            box == "black" ? components.surrogate : components.target;
        AttackSet aes = generate_attack_set(*generator, subset, cfg, seed);
        for (auto mode : grid.modes)
          report.rows.push_back(score(cfg.method, eps255, box, mode,
                                      components, aes.pixels, labels));
      }
    }
  }
  sort_rows(report.rows);
  return report;
}

EvalReport run_ablation(const EvalComponents& components,
                        const ExampleSet& test, EvalGrid grid, uint64_t seed) {
  if (components.denoiser == nullptr || components.restorer == nullptr)
    throw ConfigError("ablation needs trained denoiser and restorer");
  grid.modes = {DefenseMode::kNone, DefenseMode::kIdOnly, DefenseMode::kIdFr};
  grid.include_clean = true;
  return evaluate(components, test, grid, seed);
}

void emit_report(const EvalReport& report, const std::filesystem::path& out_dir) {
  if (report.rows.empty()) throw ConfigError("emit_report: empty report");
  std::filesystem::create_directories(out_dir);
  std::filesystem::create_directories(out_dir / "plots");

  // CSV: deterministic bytes given identical rows and metadata (the
  // timestamp intentionally stays out).
  {
    std::ofstream csv(out_dir / "report.csv", std::ios::trunc);
    if (!csv) throw Error("cannot write report.csv");
    csv << "# dataset: " << report.meta.dataset << "\n";
    csv << "# n_examples: " << report.meta.n_examples << "\n";
    csv << "# seed: " << report.meta.seed << "\n";
    for (const auto& [k, v] : report.meta.component_digests)
      csv << "# digest." << k << ": " << v << "\n";
    csv << "attack,epsilon_255,box,mode,correct,n,accuracy\n";
    char line[160];
    for (const auto& r : report.rows) {
      std::snprintf(line, sizeof(line), "%s,%.6g,%s,%s,%d,%d,%.6f\n",
                    r.attack.c_str(), r.epsilon_255, r.box.c_str(),
                    to_string(r.mode).c_str(), r.correct, r.n, r.accuracy);
      csv << line;
    }
  }

  // Markdown: one table per box, defense modes as rows, attacked cells as
  // percent triples over the epsilon grid.
  {
    std::vector<double> eps_list;
    std::vector<std::string> attacks, boxes;
    std::vector<DefenseMode> modes;
    for (const auto& r : report.rows) {
      if (r.box != "clean") {
        if (std::find(eps_list.begin(), eps_list.end(), r.epsilon_255) ==
            eps_list.end())
          eps_list.push_back(r.epsilon_255);
        if (std::find(attacks.begin(), attacks.end(), r.attack) == attacks.end())
          attacks.push_back(r.attack);
        if (std::find(boxes.begin(), boxes.end(), r.box) == boxes.end())
          boxes.push_back(r.box);
      }
      if (std::find(modes.begin(), modes.end(), r.mode) == modes.end())
        modes.push_back(r.mode);
    }
    std::sort(eps_list.begin(), eps_list.end());
    std::sort(attacks.begin(), attacks.end());
    std::sort(boxes.begin(), boxes.end());
    std::sort(modes.begin(), modes.end(),
              [](auto a, auto b) { return mode_rank(a) < mode_rank(b); });

    std::ofstream md(out_dir / "report.md", std::ios::trunc);
    if (!md) throw Error("cannot write report.md");
    md << "# Evaluation report\n\n";
    md << "dataset: `" << report.meta.dataset << "`, n per cell: "
       << report.meta.n_examples << ", seed: " << report.meta.seed << "\n";
    auto pct = [](double a) {
      char b[16];
      std::snprintf(b, sizeof(b), "%.1f", 100.0 * a);
      return std::string(b);
    };
    auto eps_label = [&eps_list] {
      std::string s;
      for (size_t i = 0; i < eps_list.size(); ++i) {
        char b[16];
        std::snprintf(b, sizeof(b), "%g", eps_list[i]);
        s += b;
        if (i + 1 < eps_list.size()) s += "/";
      }
      return s;
    }();
    for (const auto& box : boxes) {
      md << "\n## " << box << "-box attacks\n\n";
      md << "| Defense | Clean |";
      for (const auto& a : attacks) md << " " << a << " (eps=" << eps_label << ") |";
      md << "\n|---|---|";
      for (size_t i = 0; i < attacks.size(); ++i) md << "---|";
      md << "\n";
      for (auto mode : modes) {
        md << "| " << to_string(mode) << " |";
        const EvalRow* clean = report.find("clean", 0.0, "clean", mode);
        md << " " << (clean ? pct(clean->accuracy) : std::string("-")) << " |";
        for (const auto& a : attacks) {
          std::string cell;
          for (size_t i = 0; i < eps_list.size(); ++i) {
            const EvalRow* r = report.find(a, eps_list[i], box, mode);
            cell += r ? pct(r->accuracy) : std::string("-");
            if (i + 1 < eps_list.size()) cell += "/";
          }
          md << " " << cell << " |";
        }
        md << "\n";
      }
    }
    for (const auto& [k, v] : report.meta.component_digests)
      md << "\n- digest `" << k << "`: `" << v << "`";
    md << "\n";

    // Accuracy-vs-epsilon chart per attack method.
    static const std::array<std::array<uint8_t, 3>, 6> palette = {{
        {31, 119, 180}, {255, 127, 14}, {44, 160, 44},
        {214, 39, 40}, {148, 103, 189}, {140, 86, 75},
    }};
    for (const auto& a : attacks) {
      std::vector<ChartSeries> series;
      size_t color = 0;
      for (const auto& box : boxes) {
        for (auto mode : modes) {
          ChartSeries s;
          s.label = box + "/" + to_string(mode);
          s.color = palette[color++ % palette.size()];
          for (double e : eps_list) {
            const EvalRow* r = report.find(a, e, box, mode);
            if (r) {
              s.xs.push_back(e);
              s.ys.push_back(r->accuracy);
            }
          }
          if (!s.xs.empty()) series.push_back(std::move(s));
        }
      }
      render_line_chart(out_dir / "plots" / (a + ".png"), series, 0.0, 1.0);
    }
  }
}

EvalReport parse_report_csv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw MissingInputError("cannot open " + csv_path.string());
  EvalReport report;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto colon = line.find(':');
      if (colon != std::string::npos) {
        std::string key = line.substr(2, colon - 2);
        std::string value = line.substr(colon + 2);
        if (key == "dataset") report.meta.dataset = value;
        else if (key == "n_examples") report.meta.n_examples = std::stoi(value);
        else if (key == "seed") report.meta.seed = std::stoull(value);
        else if (key.rfind("digest.", 0) == 0)
          report.meta.component_digests.emplace_back(key.substr(7), value);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    std::stringstream ss(line);
    std::string tok;
    EvalRow r;
    std::getline(ss, r.attack, ',');
    std::getline(ss, tok, ',');
    r.epsilon_255 = std::stod(tok);
    std::getline(ss, r.box, ',');
    std::getline(ss, tok, ',');
    r.mode = defense_mode_from_string(tok);
    std::getline(ss, tok, ',');
    r.correct = std::stoi(tok);
    std::getline(ss, tok, ',');
    r.n = std::stoi(tok);
    r.accuracy = static_cast<double>(r.correct) / std::max(r.n, 1);
    report.rows.push_back(std::move(r));
  }
  return report;
}

}  // namespace advlab
