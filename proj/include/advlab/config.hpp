#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace advlab {

// Shared training knobs. Defaults follow the reference protocol: 100 denoiser
// epochs, 80 restorer epochs, Adam at 0.01.
struct TrainConfig {
  int epochs_id = 100;
  int epochs_fr = 80;
  int epochs_target = 5;
  double learning_rate = 0.01;
  int batch_size = 64;
  uint64_t seed = 0;
  std::string optimizer = "adam";

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Multi-round Gaussian enhancement of clean samples: one sigma per round,
// optionally keeping the originals alongside the noisy copies.
struct AugmentConfig {
  int rounds = 3;
  std::vector<double> sigmas{0.01, 0.03, 0.05};
  bool include_original = true;

  void validate() const;
  nlohmann::json to_json() const;
  static AugmentConfig from_json(const nlohmann::json& j);
};

struct AttackConfig {
  std::string method;        // fgsm | bim | cw
  double epsilon_255 = 8.0;  // budget on the 0-255 scale
  int iterations = 0;        // 0 -> method default (1 for fgsm, 20 otherwise)
  double step_size = 0.03;   // normalized pixel units
  double confidence_margin = 0.0;  // cw only

  static AttackConfig make(const std::string& method, double epsilon_255);
  void validate() const;
  int effective_iterations() const;
  nlohmann::json to_json() const;
  static AttackConfig from_json(const nlohmann::json& j);
};

// "fgsm:4,8,16" -> one config per epsilon.
std::vector<AttackConfig> parse_attack_spec(const std::string& spec);

}  // namespace advlab
