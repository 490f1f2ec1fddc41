#include <cmath>

#include "doctest.h"

#include "advlab/augment.hpp"
#include "advlab/errors.hpp"
#include "test_support.hpp"

using namespace advlab;

TEST_CASE("augment: zero sigma reproduces the inputs exactly") {
  auto set = testsupport::synthetic_set(20, 4, 1);
  AugmentConfig cfg;
  cfg.rounds = 1;
  cfg.sigmas = {0.0};
  cfg.include_original = false;
  RngStream rng(0, "augment");
  auto out = gaussian_enhance(set, cfg, rng);
  REQUIRE(out.size() == 20);
  for (int64_t i = 0; i < set.pixels().size(); ++i)
    CHECK(out.pixels()[i] == set.pixels()[i]);
}

TEST_CASE("augment: output cardinality is rounds plus original") {
  auto set = testsupport::synthetic_set(15, 3, 2);
  AugmentConfig cfg;  // 3 rounds + original
  RngStream rng(1, "augment");
  auto out = gaussian_enhance(set, cfg, rng);
  CHECK(out.size() == 15 * 4);
}

TEST_CASE("augment: labels are never altered") {
  auto set = testsupport::synthetic_set(12, 4, 3);
  AugmentConfig cfg;
  RngStream rng(2, "augment");
  auto out = gaussian_enhance(set, cfg, rng);
  for (int copy = 0; copy < 4; ++copy)
    for (int i = 0; i < 12; ++i)
      CHECK(out.labels()[static_cast<size_t>(copy * 12 + i)] ==
            set.labels()[static_cast<size_t>(i)]);
}

TEST_CASE("augment: noise field has the configured deviation") {
  // mid-grey images keep the clamp inactive, so the pre-clamp noise is
  // observable directly
  DatasetDescriptor desc{"grey", 2, {1, 32, 32}, {16, 1, 1}};
  Tensor px({16, 1, 32, 32}, 0.5f);
  std::vector<int> labels(16, 0);
  ExampleSet set(desc, std::move(px), std::move(labels));

  AugmentConfig cfg;
  cfg.rounds = 1;
  cfg.sigmas = {0.05};
  cfg.include_original = false;
  RngStream rng(3, "augment");
  auto out = gaussian_enhance(set, cfg, rng);

  double sum = 0.0, sum2 = 0.0;
  int64_t n = out.pixels().size();
  REQUIRE(n >= 10000);
  for (int64_t i = 0; i < n; ++i) {
    double d = out.pixels()[i] - 0.5;
    sum += d;
    sum2 += d * d;
  }
  double mean = sum / static_cast<double>(n);
  double std = std::sqrt(sum2 / static_cast<double>(n) - mean * mean);
  CHECK(std == doctest::Approx(0.05).epsilon(0.04));
  CHECK(std::abs(std - 0.05) < 0.002);
}

TEST_CASE("augment: deterministic under a fixed stream") {
  auto set = testsupport::synthetic_set(10, 2, 4);
  AugmentConfig cfg;
  RngStream a(9, "augment"), b(9, "augment");
  auto out1 = gaussian_enhance(set, cfg, a);
  auto out2 = gaussian_enhance(set, cfg, b);
  CHECK(out1.content_digest() == out2.content_digest());
}

TEST_CASE("augment: config invariants") {
  AugmentConfig cfg;
  cfg.rounds = 2;
  cfg.sigmas = {0.01};  // wrong length
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.sigmas = {0.01, -0.1};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
