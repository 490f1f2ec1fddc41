#include <cmath>

#include "doctest.h"

#include "advlab/errors.hpp"
#include "advlab/fr_training.hpp"
#include "advlab/id_training.hpp"
#include "test_support.hpp"

using namespace advlab;

TEST_CASE("convex_mix: endpoints and midpoint") {
  std::vector<float> a{0.0f, 2.0f}, b{2.0f, 0.0f};
  auto at1 = convex_mix(a, b, 1.0);
  CHECK(at1[0] == 0.0f);
  CHECK(at1[1] == 2.0f);
  auto at0 = convex_mix(a, b, 0.0);
  CHECK(at0[0] == 2.0f);
  CHECK(at0[1] == 0.0f);
  auto mid = convex_mix(a, b, 0.5);
  CHECK(mid[0] == doctest::Approx(1.0));
  CHECK(mid[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(convex_mix(a, std::vector<float>{1.0f}, 0.5),
                  ValidationError);
}

TEST_CASE("convex_mix: bilinearity over random draws") {
  RngStream rng(4, "bilinear");
  for (int t = 0; t < 200; ++t) {
    size_t d = 1 + rng.uniform_int(64);
    std::vector<float> a(d), b(d);
    for (auto& v : a) v = rng.gaussian(0.0f, 1.0f);
    for (auto& v : b) v = rng.gaussian(0.0f, 1.0f);
    double alpha = rng.uniform();
    auto m1 = convex_mix(a, b, alpha);
    auto m2 = convex_mix(a, b, 1.0 - alpha);
    for (size_t i = 0; i < d; ++i)
      CHECK(std::abs((m1[i] + m2[i]) - (a[i] + b[i])) <= 1e-6f);
  }
}

TEST_CASE("hull closure: base case, random case, degenerate case") {
  RngStream rng(6, "hull");
  // k = 2 is the definition itself
  std::vector<std::vector<float>> two{{1.0f, 2.0f}, {3.0f, -1.0f}};
  CHECK(verify_hull_closure(two, {0.3, 0.7}, 1e-5));

  // k = 5 random 512-d points with simplex weights
  std::vector<std::vector<float>> points(5, std::vector<float>(512));
  for (auto& p : points)
    for (auto& v : p) v = rng.gaussian(0.0f, 1.0f);
  std::vector<double> w(5);
  double sum = 0.0;
  for (auto& v : w) {
    v = rng.uniform() + 1e-6;
    sum += v;
  }
  for (auto& v : w) v /= sum;
  CHECK(verify_hull_closure(points, w, 1e-5));

  // all mass on the last point
  std::vector<double> last(5, 0.0);
  last.back() = 1.0;
  CHECK(verify_hull_closure(points, last, 1e-5));
}

TEST_CASE("hull closure: precondition violations throw") {
  std::vector<std::vector<float>> pts{{1.0f}, {2.0f}};
  CHECK_THROWS_AS(verify_hull_closure(pts, {0.5, 0.6}, 1e-5), ValidationError);
  CHECK_THROWS_AS(verify_hull_closure(pts, {-0.1, 1.1}, 1e-5), ValidationError);
  CHECK_THROWS_AS(verify_hull_closure({{1.0f}}, {1.0}, 1e-5), ValidationError);
}

TEST_CASE("partition_spaces: assignment matches the classifier verdict") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  auto train = testsupport::synthetic_set(40, 4, 6);
  TrainConfig pre;
  pre.epochs_target = 3;
  pre.learning_rate = 1e-3;
  pre.batch_size = 16;
  train_target(target, train, pre);
  Denoiser den(1, 7);
  AttackSet aes = generate_attack_set(target, train,
                                      AttackConfig::make("fgsm", 32.0), 1);

  ClassifiedSpaces spaces = partition_spaces(target, den, train, aes);
  CHECK(spaces.total() == 2 * train.size());

  // re-evaluating every stored embedding reproduces its pool assignment
  for (int y = 0; y < spaces.num_classes; ++y) {
    for (const auto& h : spaces.p1[static_cast<size_t>(y)].embeddings) {
      Tensor e({1, spaces.embedding_dim});
      std::copy(h.begin(), h.end(), e.data());
      CHECK(argmax_rows(target.classify(e))[0] == y);
    }
    for (const auto& h : spaces.p2[static_cast<size_t>(y)].embeddings) {
      Tensor e({1, spaces.embedding_dim});
      std::copy(h.begin(), h.end(), e.data());
      CHECK(argmax_rows(target.classify(e))[0] != y);
    }
  }
}

TEST_CASE("fr_loss: endpoint mixes reduce to the pure-pool losses") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  Restorer restorer(512, 8);
  RngStream rng(9, "emb");
  std::vector<float> h_correct(512), h_other(512);
  for (auto& v : h_correct) v = static_cast<float>(rng.uniform());
  for (auto& v : h_other) v = static_cast<float>(rng.uniform());

  auto loss_of = [&](const std::vector<float>& h) {
    Tensor t({1, 512});
    std::copy(h.begin(), h.end(), t.data());
    return fr_loss(restorer, target, t, {2});
  };
  auto mixed_loss = [&](double alpha) {
    auto m = convex_mix(h_correct, h_other, alpha);
    Tensor t({1, 512});
    std::copy(m.begin(), m.end(), t.data());
    return fr_loss(restorer, target, t, {2});
  };
  CHECK(mixed_loss(1.0) == doctest::Approx(loss_of(h_correct)));
  CHECK(mixed_loss(0.0) == doctest::Approx(loss_of(h_other)));
}

TEST_CASE("train_fr: zero epochs returns the seed-initialized restorer") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  ClassifiedSpaces spaces;
  spaces.embedding_dim = 512;
  spaces.num_classes = 4;
  spaces.p1.resize(4);
  spaces.p2.resize(4);
  spaces.p1[0].embeddings.push_back(std::vector<float>(512, 0.5f));
  spaces.p1[0].sources.push_back(ClassifiedSpaces::Source::kDenoisedClean);
  TrainConfig cfg;
  cfg.epochs_fr = 0;
  cfg.seed = 31;
  Restorer r = train_fr(target, spaces, cfg);
  CHECK(r.parameter_digest() == Restorer(512, 31).parameter_digest());
}

TEST_CASE("train_fr: empty p1 everywhere is unrecoverable") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  ClassifiedSpaces spaces;
  spaces.embedding_dim = 512;
  spaces.num_classes = 4;
  spaces.p1.resize(4);
  spaces.p2.resize(4);
  spaces.p2[1].embeddings.push_back(std::vector<float>(512, 0.1f));
  spaces.p2[1].sources.push_back(
      ClassifiedSpaces::Source::kDenoisedAdversarial);
  TrainConfig cfg;
  cfg.epochs_fr = 1;
  CHECK_THROWS_AS(train_fr(target, spaces, cfg), ConfigError);
}

TEST_CASE("train_fr: alpha draws average one half, p2-free classes still train") {
  TargetModel target(testsupport::toy_descriptor(4), "small_cnn", 5);
  RngStream rng(11, "emb");
  ClassifiedSpaces spaces;
  spaces.embedding_dim = 512;
  spaces.num_classes = 4;
  spaces.p1.resize(4);
  spaces.p2.resize(4);
  for (int y = 0; y < 4; ++y)
    for (int i = 0; i < 60; ++i) {
      std::vector<float> h(512);
      for (auto& v : h) v = static_cast<float>(rng.uniform());
      if (y != 3 && i % 3 == 0) {  // class 3 gets no p2 pool
        spaces.p2[static_cast<size_t>(y)].embeddings.push_back(std::move(h));
        spaces.p2[static_cast<size_t>(y)].sources.push_back(
            ClassifiedSpaces::Source::kDenoisedAdversarial);
      } else {
        spaces.p1[static_cast<size_t>(y)].embeddings.push_back(std::move(h));
        spaces.p1[static_cast<size_t>(y)].sources.push_back(
            ClassifiedSpaces::Source::kDenoisedClean);
      }
    }

  TrainConfig cfg;
  cfg.epochs_fr = 2;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 32;
  cfg.seed = 13;
  FrTrainResult log;
  Restorer r = train_fr(target, spaces, cfg, &log);
  REQUIRE(log.epochs.size() == 2);
  for (const auto& e : log.epochs) {
    CHECK(e.alpha_mean == doctest::Approx(0.5).epsilon(0.1));
    CHECK(std::abs(e.alpha_mean - 0.5) < 0.05);
    CHECK(std::isfinite(e.mean_loss));
  }
  // metrics cover both pools
  CHECK(log.epochs.back().p1_retention >= 0.0);
  CHECK(log.epochs.back().p2_recovery >= 0.0);
  (void)r;
}
