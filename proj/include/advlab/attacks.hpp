#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "advlab/config.hpp"
#include "advlab/dataset.hpp"
#include "advlab/gradient_model.hpp"

namespace advlab {

// Budgets are quoted on the 0-255 scale and converted once, here.
double normalize_epsilon(double epsilon_255);

struct AdversarialExample {
  Tensor pixels;         // [C,H,W], in [0,1]
  Tensor source_pixels;  // the clean original
  int label = -1;        // ground truth, inherited from the source
  double epsilon = 0.0;  // normalized budget
  std::string method;
};

// Columnar batch of adversarial examples plus their sources; self-contained
// so budget checks and defended evaluation need no side lookups.
struct AttackSet {
  Tensor pixels;   // [N,C,H,W]
  Tensor sources;  // [N,C,H,W]
  std::vector<int> labels;
  std::string method;
  double epsilon_255 = 0.0;
  double epsilon = 0.0;
  uint64_t seed = 0;
  uint64_t source_digest = 0;

  int size() const { return pixels.empty() ? 0 : pixels.dim(0); }
  AdversarialExample example(int i) const;
  // Throws ValidationError if any example leaves the epsilon ball or [0,1].
  void validate_budget(double tol = 1e-6) const;
  double max_linf_deviation() const;
};

// Batch attack primitives. All clamp to [0,1] and keep the perturbation
// inside the epsilon ball around the source; sign(0) = 0, so zero-gradient
// coordinates stay untouched.
Tensor fgsm(GradientModel& model, const Tensor& x, const std::vector<int>& y,
            double eps);
Tensor bim(GradientModel& model, const Tensor& x, const std::vector<int>& y,
           double eps, int iterations, double step);
// Projected iterative margin descent; returns the iterate with the lowest
// margin z_y - max_other seen (mean over the batch per iterate).
Tensor cw_linf(GradientModel& model, const Tensor& x, const std::vector<int>& y,
               double eps, int iterations, double step, double confidence);

// Single-example conveniences.
AdversarialExample attack_example(GradientModel& model, const Example& ex,
                                  const AttackConfig& config);

AttackSet generate_attack_set(GradientModel& model, const ExampleSet& examples,
                              const AttackConfig& config, uint64_t seed,
                              int batch_size = 64);

void save_attack_set(const AttackSet& set, const std::filesystem::path& path);
AttackSet load_attack_set(const std::filesystem::path& path);

}  // namespace advlab
