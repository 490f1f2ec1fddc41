#include <cmath>

#include "doctest.h"

#include "advlab/errors.hpp"
#include "advlab/id_training.hpp"
#include "test_support.hpp"

using namespace advlab;

namespace {

// classifier bias pinned so the composed prediction is a known distribution
void pin_classifier_uniform(TargetModel& target) {
  for (auto& s : target.state())
    if (s.name.rfind("classifier.", 0) == 0) s.value->zero();
}

void pin_classifier_certain(TargetModel& target, int label) {
  pin_classifier_uniform(target);
  for (auto& s : target.state())
    if (s.name == "classifier.bias") (*s.value)[label] = 50.0f;
}

}  // namespace

TEST_CASE("id_loss: uniform prediction costs ln(K)") {
  TargetModel target(testsupport::toy_descriptor(10), "small_cnn", 1);
  pin_classifier_uniform(target);
  Denoiser den(1, 2);
  Tensor x = testsupport::random_batch(4, 1, 8, 8, 3);
  double loss = id_loss(den, target, x, {0, 3, 7, 9});
  CHECK(loss == doctest::Approx(std::log(10.0)).epsilon(1e-9));
}

TEST_CASE("id_loss: certain correct prediction costs nothing") {
  TargetModel target(testsupport::toy_descriptor(10), "small_cnn", 1);
  pin_classifier_certain(target, 4);
  Denoiser den(1, 2);
  Tensor x = testsupport::random_batch(3, 1, 8, 8, 3);
  double loss = id_loss(den, target, x, {4, 4, 4});
  CHECK(loss < 1e-6);
}

TEST_CASE("train_id: zero epochs returns the seed-initialized denoiser") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  auto train = testsupport::synthetic_set(24, 4, 6);
  auto val = testsupport::synthetic_set(8, 4, 7);
  IdTrainOptions options;
  options.train.epochs_id = 0;
  options.train.seed = 77;
  options.train.learning_rate = 1e-3;
  options.attacks = {AttackConfig::make("fgsm", 16.0)};
  uint64_t target_before = target.parameter_digest();
  Denoiser result = train_id(target, train, val, options);
  CHECK(result.parameter_digest() == Denoiser(1, 77).parameter_digest());
  CHECK(target.parameter_digest() == target_before);
}

TEST_CASE("train_id: epochs draw from both pools and the loss decreases") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  auto train = testsupport::synthetic_set(48, 4, 6);
  // give the toy target something to classify first
  TrainConfig pre;
  pre.epochs_target = 4;
  pre.learning_rate = 1e-3;
  pre.batch_size = 16;
  train_target(target, train, pre);

  auto val = testsupport::synthetic_set(16, 4, 7);
  IdTrainOptions options;
  options.train.epochs_id = 4;
  options.train.learning_rate = 1e-3;
  options.train.batch_size = 16;
  options.train.seed = 3;
  options.attacks = {AttackConfig::make("fgsm", 32.0)};
  options.augment.rounds = 1;
  options.augment.sigmas = {0.03};
  IdTrainResult log;
  uint64_t digest_before = target.parameter_digest();
  Denoiser den = train_id(target, train, val, options, &log);
  REQUIRE(log.epochs.size() == 4);
  for (const auto& e : log.epochs) {
    CHECK(e.adversarial_seen > 0);
    CHECK(e.clean_seen > 0);
    CHECK(std::isfinite(e.mean_loss));
  }
  CHECK(log.epochs.back().mean_loss < log.epochs.front().mean_loss);
  CHECK(target.parameter_digest() == digest_before);

  auto result = denoise_and_classify(den, target, val.pixels(), val.labels());
  CHECK(static_cast<int>(result.labels.size()) == val.size());
}

TEST_CASE("train_id: an empty attack list is a configuration error") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  auto train = testsupport::synthetic_set(8, 4, 6);
  IdTrainOptions options;
  options.train.epochs_id = 1;
  CHECK_THROWS_AS(train_id(target, train, train, options), ConfigError);
}

TEST_CASE("denoise_and_classify: one image in, one label out") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  Denoiser den(1, 6);
  Tensor one = testsupport::random_batch(1, 1, 8, 8, 9);
  auto out = denoise_and_classify(den, target, one, {2});
  CHECK(out.labels.size() == 1);
  CHECK(out.labels[0] >= 0);
  CHECK(out.labels[0] < 4);
}

TEST_CASE("build_mixed_attack_set: cycles configs across the pool") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  auto train = testsupport::synthetic_set(30, 4, 6);
  std::vector<AttackConfig> configs{AttackConfig::make("fgsm", 4.0),
                                    AttackConfig::make("fgsm", 16.0)};
  AttackSet set = build_mixed_attack_set(target, train, configs, 1);
  CHECK(set.size() == 30);
  CHECK(set.method == "mixed");
  // the merged pool's recorded budget covers the widest configured epsilon
  CHECK(set.epsilon == doctest::Approx(16.0 / 255.0));
  CHECK_NOTHROW(set.validate_budget());
  // examples assigned the small budget must stay within it
  double eps4 = 4.0 / 255.0;
  int64_t stride = train.descriptor().pixels_per_example();
  for (int i = 0; i < set.size(); i += 2) {  // round-robin slot 0
    for (int64_t j = 0; j < stride; ++j) {
      double d = std::abs(static_cast<double>(set.pixels[i * stride + j]) -
                          set.sources[i * stride + j]);
      CHECK(d <= eps4 + 1e-6);
    }
  }
}
