#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "doctest.h"

#include "advlab/checkpoint.hpp"
#include "advlab/dataset.hpp"
#include "advlab/errors.hpp"
#include "advlab/rng.hpp"
#include "test_support.hpp"

using namespace advlab;

TEST_CASE("rng: same seed and purpose replay identically") {
  RngStream a(42, "attack"), b(42, "attack");
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: purposes decorrelate streams") {
  RngStream a(42, "attack"), b(42, "augment");
  int same = 0;
  for (int i = 0; i < 100; ++i)
    if (a.next_u64() == b.next_u64()) ++same;
  CHECK(same == 0);
}

TEST_CASE("rng: uniform mean obeys the law of large numbers") {
  RngStream rng(7, "lln");
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += rng.uniform();
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("rng: open_unit stays strictly inside (0,1)") {
  RngStream rng(3, "open");
  for (int i = 0; i < 10000; ++i) {
    double u = rng.open_unit();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("checkpoint: save/load round-trip is bit-exact") {
  testsupport::TempDir dir("ckpt");
  Checkpoint ckpt;
  ckpt.component_kind = "restorer";
  ckpt.config_snapshot = {{"embedding_dim", 512}};
  ckpt.metrics["loss"] = 0.125;
  RngStream rng(1, "ckpt");
  Tensor t({3, 17});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0f, 2.0f);
  ckpt.parameters.emplace_back("fc1.weight", t);

  auto path = dir.path / "r.advckpt";
  save_checkpoint(ckpt, path);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.component_kind == "restorer");
  CHECK(loaded.metrics.at("loss") == 0.125);
  REQUIRE(loaded.parameters.size() == 1);
  const Tensor& lt = loaded.parameters[0].second;
  REQUIRE(lt.same_shape(t));
  CHECK(std::memcmp(lt.data(), t.data(),
                    static_cast<size_t>(t.size()) * sizeof(float)) == 0);
}

TEST_CASE("checkpoint: future version is rejected") {
  testsupport::TempDir dir("ckpt-ver");
  Checkpoint ckpt;
  ckpt.component_kind = "target";
  ckpt.parameters.emplace_back("w", Tensor({2}));
  auto path = dir.path / "v.advckpt";
  save_checkpoint(ckpt, path);

  // bump the version in the header and re-seal the checksum
  std::ifstream in(path, std::ios::binary);
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();
  auto pos = blob.find("\"version\":1");
  REQUIRE(pos != std::string::npos);
  blob[pos + 10] = '2';
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(blob.data()),
            static_cast<uInt>(blob.size() - 4)));
  for (int i = 0; i < 4; ++i)
    blob[blob.size() - 4 + static_cast<size_t>(i)] =
        static_cast<char>((crc >> (8 * i)) & 0xff);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  out.close();

  CHECK_THROWS_AS(load_checkpoint(path), VersionError);
}

TEST_CASE("checkpoint: flipped payload byte fails the integrity check") {
  testsupport::TempDir dir("ckpt-flip");
  Checkpoint ckpt;
  ckpt.component_kind = "denoiser";
  Tensor t({8}, 0.5f);
  ckpt.parameters.emplace_back("w", t);
  auto path = dir.path / "f.advckpt";
  save_checkpoint(ckpt, path);

  std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
  f.seekg(0, std::ios::end);
  auto len = static_cast<long>(f.tellg());
  f.seekp(len - 12);  // inside the float payload
  char byte = 0;
  f.read(&byte, 1);
  f.seekp(len - 12);
  byte = static_cast<char>(byte ^ 0x40);
  f.write(&byte, 1);
  f.close();

  CHECK_THROWS_AS(load_checkpoint(path), IntegrityError);
}

TEST_CASE("dataset: descriptors validate") {
  auto mnist = DatasetDescriptor::mnist();
  CHECK(mnist.num_classes == 10);
  CHECK(mnist.split_sizes[0] == 60000);
  CHECK_THROWS_AS(DatasetDescriptor::by_name("svhn"), ConfigError);
}

TEST_CASE("dataset: mnist loads the full published splits") {
  auto splits = load_dataset(DatasetDescriptor::mnist(), 1.0, 0);
  CHECK(splits.train.size() == 60000);
  CHECK(splits.validation.size() == 3000);
  CHECK(splits.test.size() == 7000);
  auto counts = splits.train.class_counts();
  int total = 0;
  for (int c : counts) total += c;
  CHECK(total == 60000);
}

TEST_CASE("dataset: identical seed reproduces identical ordering") {
  auto a = load_dataset(DatasetDescriptor::mnist(), 1.0, 9);
  auto b = load_dataset(DatasetDescriptor::mnist(), 1.0, 9);
  CHECK(a.test.content_digest() == b.test.content_digest());
  CHECK(a.validation.content_digest() == b.validation.content_digest());
  CHECK(a.train.labels() == b.train.labels());
}

TEST_CASE("dataset: stratified subsample preserves class proportions") {
  auto full = load_dataset(DatasetDescriptor::mnist(), 1.0, 0);
  auto full_counts = full.train.class_counts();
  auto sub = full.train.stratified_subset(0.1, 5);
  auto counts = sub.class_counts();
  for (size_t c = 0; c < counts.size(); ++c) {
    double expected = 0.1 * full_counts[c];
    CHECK(std::abs(counts[c] - expected) <= 1.0);
  }
}

TEST_CASE("dataset: missing cache yields a missing-input error") {
  auto* old = std::getenv("ADVLAB_DATA_DIR");
  std::string saved = old ? old : "";
  setenv("ADVLAB_DATA_DIR", "/nonexistent/advlab-cache", 1);
  CHECK_THROWS_AS(load_dataset(DatasetDescriptor::mnist(), 1.0, 0),
                  MissingInputError);
  if (old)
    setenv("ADVLAB_DATA_DIR", saved.c_str(), 1);
  else
    unsetenv("ADVLAB_DATA_DIR");
}

TEST_CASE("dataset: corrupt record is named in the error") {
  testsupport::TempDir dir("corrupt");
  auto root = dir.path / "cifar10";
  std::filesystem::create_directories(root / "train");
  std::filesystem::create_directories(root / "test");
  std::string rec(3073, '\0');
  for (int b = 1; b <= 5; ++b) {
    std::ofstream f(root / "train" / ("data_batch_" + std::to_string(b) + ".bin"),
                    std::ios::binary);
    rec[0] = 1;
    f.write(rec.data(), 3073);
    rec[0] = static_cast<char>(250);
    f.write(rec.data(), 3073);
  }
  {
    std::ofstream f(root / "test" / "test_batch.bin", std::ios::binary);
    rec[0] = 1;
    f.write(rec.data(), 3073);
  }
  auto* old = std::getenv("ADVLAB_DATA_DIR");
  std::string saved = old ? old : "";
  setenv("ADVLAB_DATA_DIR", dir.path.c_str(), 1);
  try {
    load_dataset(DatasetDescriptor::cifar10(), 1.0, 0);
    CHECK(false);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
  if (old)
    setenv("ADVLAB_DATA_DIR", saved.c_str(), 1);
  else
    unsetenv("ADVLAB_DATA_DIR");
}

TEST_CASE("dataset: pixels outside [0,1] are rejected on construction") {
  auto set = testsupport::synthetic_set(32, 4, 11);
  const Tensor& px = set.pixels();
  for (int64_t i = 0; i < px.size(); ++i) {
    CHECK(px[i] >= 0.0f);
    CHECK(px[i] <= 1.0f);
  }
  CHECK_THROWS_AS(ExampleSet(testsupport::toy_descriptor(4),
                             Tensor({1, 1, 8, 8}, 1.5f), std::vector<int>{0}),
                  ValidationError);
}
