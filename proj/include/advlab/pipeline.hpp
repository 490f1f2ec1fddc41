#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/dataset.hpp"
#include "advlab/denoiser.hpp"
#include "advlab/restorer.hpp"
#include "advlab/target_model.hpp"

namespace advlab {

// The three defended-inference compositions: raw target, denoiser in front,
// denoiser plus restorer spliced after the encoder.
enum class DefenseMode { kNone, kIdOnly, kIdFr };

std::string to_string(DefenseMode mode);
DefenseMode defense_mode_from_string(const std::string& s);

// none:    classify(encode(x))
// id_only: classify(encode(denoise(x)))
// id_fr:   classify(restore(encode(denoise(x))))   (restorer always applied)
std::vector<int> defended_predict(DefenseMode mode, TargetModel& target,
                                  Denoiser* denoiser, Restorer* restorer,
                                  const Tensor& images, int batch_size = 128);

struct EvalRow {
  std::string attack;       // clean | fgsm | bim | cw
  double epsilon_255 = 0.0; // 0 for clean rows
  std::string box;          // clean | black | white
  DefenseMode mode = DefenseMode::kNone;
  int correct = 0;
  int n = 0;
  double accuracy = 0.0;  // correct / n, exactly
};

struct EvalMeta {
  std::string dataset;
  int n_examples = 0;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> component_digests;
  std::string timestamp;  // informational; never written to the CSV
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalMeta meta;

  const EvalRow* find(const std::string& attack, double eps255,
                      const std::string& box, DefenseMode mode) const;
};

struct EvalGrid {
  std::vector<AttackConfig> attacks;  // one entry per method
  std::vector<double> epsilons_255;
  std::vector<std::string> boxes;  // subset of {black, white}
  std::vector<DefenseMode> modes;
  int n_examples = 1000;
  bool include_clean = true;
};

struct EvalComponents {
  TargetModel* target = nullptr;
  TargetModel* surrogate = nullptr;  // black-box attack source
  Denoiser* denoiser = nullptr;
  Restorer* restorer = nullptr;
};

// One row per (attack, epsilon, box, mode) plus clean rows per mode. Black
// rows attack through the surrogate, white rows through the target itself;
// the defense only ever runs at inference time.
EvalReport evaluate(const EvalComponents& components, const ExampleSet& test,
                    const EvalGrid& grid, uint64_t seed);

// The three-mode ablation layout over the same grid.
EvalReport run_ablation(const EvalComponents& components,
                        const ExampleSet& test, EvalGrid grid, uint64_t seed);

// Writes report.csv (exact values, deterministic bytes), report.md
// (paper-style tables) and plots/<method>.png under out_dir.
void emit_report(const EvalReport& report, const std::filesystem::path& out_dir);
EvalReport parse_report_csv(const std::filesystem::path& csv_path);

}  // namespace advlab
