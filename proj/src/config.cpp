#include "advlab/config.hpp"

#include <sstream>

#include "advlab/errors.hpp"

namespace advlab {

void TrainConfig::validate() const {
  if (epochs_id < 0 || epochs_fr < 0 || epochs_target < 0)
    throw ConfigError("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (optimizer != "adam") throw ConfigError("unknown optimizer: " + optimizer);
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs_id", epochs_id},       {"epochs_fr", epochs_fr},
          {"epochs_target", epochs_target}, {"learning_rate", learning_rate},
          {"batch_size", batch_size},     {"seed", seed},
          {"optimizer", optimizer}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs_id = j.value("epochs_id", c.epochs_id);
  c.epochs_fr = j.value("epochs_fr", c.epochs_fr);
  c.epochs_target = j.value("epochs_target", c.epochs_target);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.optimizer = j.value("optimizer", c.optimizer);
  c.validate();
  return c;
}

void AugmentConfig::validate() const {
  if (rounds < 1) throw ConfigError("augment.rounds must be >= 1");
  if (static_cast<int>(sigmas.size()) != rounds)
    throw ConfigError("augment.sigmas must list one sigma per round");
  for (double s : sigmas)
    if (s < 0.0) throw ConfigError("augment sigmas must be >= 0");
}

nlohmann::json AugmentConfig::to_json() const {
  return {{"rounds", rounds},
          {"sigmas", sigmas},
          {"include_original", include_original}};
}

AugmentConfig AugmentConfig::from_json(const nlohmann::json& j) {
  AugmentConfig c;
  c.rounds = j.value("rounds", c.rounds);
  if (j.contains("sigmas")) c.sigmas = j["sigmas"].get<std::vector<double>>();
  c.include_original = j.value("include_original", c.include_original);
  c.validate();
  return c;
}

AttackConfig AttackConfig::make(const std::string& method, double epsilon_255) {
  AttackConfig c;
  c.method = method;
  c.epsilon_255 = epsilon_255;
  c.validate();
  return c;
}

void AttackConfig::validate() const {
  if (method != "fgsm" && method != "bim" && method != "cw")
    throw ConfigError("unknown attack method: " + method);
  if (!(epsilon_255 > 0.0)) throw ConfigError("epsilon_255 must be > 0");
  if (iterations < 0) throw ConfigError("iterations must be >= 1 (0 = default)");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be > 0");
  if (confidence_margin < 0.0)
    throw ConfigError("confidence_margin must be >= 0");
}

int AttackConfig::effective_iterations() const {
  if (iterations > 0) return iterations;
  return method == "fgsm" ? 1 : 20;
}

nlohmann::json AttackConfig::to_json() const {
  return {{"method", method},
          {"epsilon_255", epsilon_255},
          {"iterations", iterations},
          {"step_size", step_size},
          {"confidence_margin", confidence_margin}};
}

AttackConfig AttackConfig::from_json(const nlohmann::json& j) {
  AttackConfig c;
  c.method = j.value("method", std::string());
  c.epsilon_255 = j.value("epsilon_255", c.epsilon_255);
  c.iterations = j.value("iterations", c.iterations);
  c.step_size = j.value("step_size", c.step_size);
  c.confidence_margin = j.value("confidence_margin", c.confidence_margin);
  c.validate();
  return c;
}

std::vector<AttackConfig> parse_attack_spec(const std::string& spec) {
  auto colon = spec.find(':');
  std::string method = spec.substr(0, colon);
  std::vector<AttackConfig> out;
  if (colon == std::string::npos) {
    out.push_back(AttackConfig::make(method, 8.0));
    return out;
  }
  std::stringstream eps_list(spec.substr(colon + 1));
  std::string tok;
  while (std::getline(eps_list, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(AttackConfig::make(method, std::stod(tok)));
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad epsilon in attack spec: " + tok);
    }
  }
  if (out.empty()) throw ConfigError("attack spec lists no epsilons: " + spec);
  return out;
}

}  // namespace advlab
