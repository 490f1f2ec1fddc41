#include "advlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "advlab/errors.hpp"
#include "advlab/rng.hpp"

namespace advlab {

DatasetDescriptor DatasetDescriptor::mnist() {
  return {"mnist", 10, {1, 28, 28}, {60000, 3000, 7000}};
}

DatasetDescriptor DatasetDescriptor::cifar10() {
  return {"cifar10", 10, {3, 32, 32}, {50000, 3000, 7000}};
}

DatasetDescriptor DatasetDescriptor::by_name(const std::string& name) {
  if (name == "mnist") return mnist();
  if (name == "cifar10") return cifar10();
  throw ConfigError("unknown dataset: " + name);
}

void DatasetDescriptor::validate() const {
  if (name.empty()) throw ConfigError("dataset name empty");
  if (num_classes <= 0) throw ConfigError("num_classes must be positive");
  for (int d : shape)
    if (d <= 0) throw ConfigError("dataset shape dims must be positive");
  for (int s : split_sizes)
    if (s <= 0) throw ConfigError("split sizes must be positive");
}

ExampleSet::ExampleSet(DatasetDescriptor desc, Tensor pixels,
                       std::vector<int> labels)
    : desc_(std::move(desc)), pixels_(std::move(pixels)),
      labels_(std::move(labels)) {
  desc_.validate();
  if (pixels_.ndim() != 4) throw ValidationError("example pixels must be [N,C,H,W]");
  count_ = pixels_.dim(0);
  if (static_cast<int>(labels_.size()) != count_)
    throw ValidationError("label count does not match pixel count");
  if (pixels_.dim(1) != desc_.channels() || pixels_.dim(2) != desc_.height() ||
      pixels_.dim(3) != desc_.width())
    throw ValidationError("pixel shape does not match descriptor " +
                          pixels_.shape_str());
  for (int i = 0; i < count_; ++i) {
    if (labels_[static_cast<size_t>(i)] < 0 ||
        labels_[static_cast<size_t>(i)] >= desc_.num_classes)
      throw ValidationError("record " + std::to_string(i) +
                            ": label out of range");
  }
  const float* p = pixels_.data();
  for (int64_t i = 0; i < pixels_.size(); ++i) {
    if (!(p[i] >= 0.0f && p[i] <= 1.0f))
      throw ValidationError("record " +
                            std::to_string(i / desc_.pixels_per_example()) +
                            ": pixel outside [0,1]");
  }
}

Example ExampleSet::example(int i) const {
  Example e;
  e.pixels = Tensor({desc_.channels(), desc_.height(), desc_.width()});
  int64_t stride = desc_.pixels_per_example();
  std::memcpy(e.pixels.data(), pixels_.data() + i * stride,
              static_cast<size_t>(stride) * sizeof(float));
  e.label = labels_[static_cast<size_t>(i)];
  return e;
}

Tensor ExampleSet::batch(int start, int count) const {
  if (start < 0 || start + count > count_)
    throw ValidationError("batch range out of bounds");
  Tensor out({count, desc_.channels(), desc_.height(), desc_.width()});
  int64_t stride = desc_.pixels_per_example();
  std::memcpy(out.data(), pixels_.data() + start * stride,
              static_cast<size_t>(count * stride) * sizeof(float));
  return out;
}

std::vector<int> ExampleSet::label_slice(int start, int count) const {
  return {labels_.begin() + start, labels_.begin() + start + count};
}

ExampleSet ExampleSet::subset(const std::vector<int>& indices) const {
  Tensor px({static_cast<int>(indices.size()), desc_.channels(),
             desc_.height(), desc_.width()});
  std::vector<int> lb(indices.size());
  int64_t stride = desc_.pixels_per_example();
  for (size_t i = 0; i < indices.size(); ++i) {
    int src = indices[i];
    if (src < 0 || src >= count_) throw ValidationError("subset index out of range");
    std::memcpy(px.data() + static_cast<int64_t>(i) * stride,
                pixels_.data() + src * stride,
                static_cast<size_t>(stride) * sizeof(float));
    lb[i] = labels_[static_cast<size_t>(src)];
  }
  return ExampleSet(desc_, std::move(px), std::move(lb));
}

ExampleSet ExampleSet::stratified_subset(double fraction, uint64_t seed) const {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("subset fraction must be in (0,1]");
  if (fraction == 1.0) return *this;
  std::vector<std::vector<int>> per_class(
      static_cast<size_t>(desc_.num_classes));
  for (int i = 0; i < count_; ++i)
    per_class[static_cast<size_t>(labels_[static_cast<size_t>(i)])].push_back(i);
  RngStream rng(seed, "stratified-subset");
  std::vector<int> keep;
  for (auto& cls : per_class) {
    int take = static_cast<int>(std::lround(fraction * cls.size()));
    take = std::min<int>(take, static_cast<int>(cls.size()));
    rng.shuffle(cls);
    keep.insert(keep.end(), cls.begin(), cls.begin() + take);
  }
  std::sort(keep.begin(), keep.end());  // preserve source ordering
  return subset(keep);
}

ExampleSet ExampleSet::stratified_sample(int n, uint64_t seed) const {
  if (n <= 0 || n > count_)
    throw ConfigError("stratified_sample: n must be in [1, size]");
  std::vector<std::vector<int>> per_class(
      static_cast<size_t>(desc_.num_classes));
  for (int i = 0; i < count_; ++i)
    per_class[static_cast<size_t>(labels_[static_cast<size_t>(i)])].push_back(i);
  RngStream rng(seed, "stratified-sample");
  double frac = static_cast<double>(n) / static_cast<double>(count_);
  std::vector<int> keep, spare;
  for (auto& cls : per_class) {
    rng.shuffle(cls);
    int take = std::min<int>(static_cast<int>(std::lround(frac * cls.size())),
                             static_cast<int>(cls.size()));
    keep.insert(keep.end(), cls.begin(), cls.begin() + take);
    spare.insert(spare.end(), cls.begin() + take, cls.end());
  }
  std::sort(keep.begin(), keep.end());
  std::sort(spare.begin(), spare.end());
  while (static_cast<int>(keep.size()) < n && !spare.empty()) {
    keep.push_back(spare.back());
    spare.pop_back();
  }
  while (static_cast<int>(keep.size()) > n) keep.pop_back();
  std::sort(keep.begin(), keep.end());
  return subset(keep);
}

ExampleSet ExampleSet::head(int n) const {
  n = std::min(n, count_);
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  return subset(idx);
}

std::vector<int> ExampleSet::class_counts() const {
  std::vector<int> counts(static_cast<size_t>(desc_.num_classes), 0);
  for (int l : labels_) counts[static_cast<size_t>(l)]++;
  return counts;
}

uint64_t ExampleSet::content_digest() const {
  uint64_t h = fnv1a64(pixels_.data(),
                       static_cast<size_t>(pixels_.size()) * sizeof(float));
  return fnv1a64(labels_.data(), labels_.size() * sizeof(int), h);
}

std::filesystem::path data_root() {
  if (const char* env = std::getenv("ADVLAB_DATA_DIR"); env && *env)
    return {env};
  if (const char* home = std::getenv("HOME"); home && *home)
    return std::filesystem::path(home) / ".cache" / "advlab";
  return std::filesystem::path(".") / "advlab-data";
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw MissingInputError("cannot open dataset file: " + p.string());
  in.seekg(0, std::ios::end);
  auto len = static_cast<size_t>(in.tellg());
  in.seekg(0);
  std::vector<unsigned char> buf(len);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len));
  if (!in) throw ValidationError("short read from " + p.string());
  return buf;
}

uint32_t be32(const unsigned char* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

// IDX image/label pair -> ExampleSet.
ExampleSet load_idx_pair(const DatasetDescriptor& desc,
                         const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path) {
  auto ibuf = read_file(images_path);
  auto lbuf = read_file(labels_path);
  if (ibuf.size() < 16 || be32(ibuf.data()) != 0x803)
    throw ValidationError("bad IDX image magic in " + images_path.string());
  if (lbuf.size() < 8 || be32(lbuf.data()) != 0x801)
    throw ValidationError("bad IDX label magic in " + labels_path.string());
  uint32_t n = be32(ibuf.data() + 4);
  uint32_t rows = be32(ibuf.data() + 8);
  uint32_t cols = be32(ibuf.data() + 12);
  if (be32(lbuf.data() + 4) != n)
    throw ValidationError("IDX image/label counts differ for " +
                          images_path.string());
  if (static_cast<int>(rows) != desc.height() ||
      static_cast<int>(cols) != desc.width())
    throw ValidationError("IDX image size mismatch in " + images_path.string());
  size_t need = 16 + static_cast<size_t>(n) * rows * cols;
  if (ibuf.size() < need)
    throw ValidationError("truncated IDX image file " + images_path.string());
  if (lbuf.size() < 8 + n)
    throw ValidationError("truncated IDX label file " + labels_path.string());

  Tensor px({static_cast<int>(n), 1, static_cast<int>(rows), static_cast<int>(cols)});
  std::vector<int> labels(n);
  const unsigned char* src = ibuf.data() + 16;
  float* dst = px.data();
  for (size_t i = 0; i < static_cast<size_t>(n) * rows * cols; ++i)
    dst[i] = static_cast<float>(src[i]) / 255.0f;
  for (uint32_t i = 0; i < n; ++i) {
    unsigned char l = lbuf[8 + i];
    if (l >= desc.num_classes)
      throw ValidationError(labels_path.string() + ": record " +
                            std::to_string(i) + ": label " + std::to_string(l) +
                            " out of range");
    labels[i] = l;
  }
  return ExampleSet(desc, std::move(px), std::move(labels));
}

// CIFAR binary batches: records of [label u8][3072 planar RGB bytes].
ExampleSet load_cifar_batches(const DatasetDescriptor& desc,
                              const std::vector<std::filesystem::path>& files) {
  constexpr size_t kRecord = 1 + 3072;
  size_t total = 0;
  std::vector<std::vector<unsigned char>> bufs;
  for (const auto& f : files) {
    bufs.push_back(read_file(f));
    if (bufs.back().size() % kRecord != 0)
      throw ValidationError("truncated cifar batch " + f.string());
    total += bufs.back().size() / kRecord;
  }
  Tensor px({static_cast<int>(total), 3, 32, 32});
  std::vector<int> labels(total);
  size_t out = 0;
  for (size_t b = 0; b < bufs.size(); ++b) {
    const auto& buf = bufs[b];
    size_t n = buf.size() / kRecord;
    for (size_t i = 0; i < n; ++i, ++out) {
      const unsigned char* rec = buf.data() + i * kRecord;
      if (rec[0] >= desc.num_classes)
        throw ValidationError(files[b].string() + ": record " +
                              std::to_string(i) + ": label " +
                              std::to_string(rec[0]) + " out of range");
      labels[out] = rec[0];
      float* dst = px.data() + static_cast<int64_t>(out) * 3072;
      for (int j = 0; j < 3072; ++j)
        dst[j] = static_cast<float>(rec[1 + j]) / 255.0f;
    }
  }
  return ExampleSet(desc, std::move(px), std::move(labels));
}

// Deterministic per-class carve of `want` examples; returns (selected, rest).
std::pair<std::vector<int>, std::vector<int>> stratified_carve(
    const std::vector<int>& labels, int num_classes, int want, uint64_t seed) {
  std::vector<std::vector<int>> per_class(static_cast<size_t>(num_classes));
  for (size_t i = 0; i < labels.size(); ++i)
    per_class[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));
  RngStream rng(seed, "validation-carve");
  double frac = static_cast<double>(want) / static_cast<double>(labels.size());
  std::vector<int> sel, rest;
  int taken = 0;
  for (auto& cls : per_class) {
    rng.shuffle(cls);
    int take = static_cast<int>(std::lround(frac * cls.size()));
    take = std::min<int>(take, static_cast<int>(cls.size()));
    for (size_t i = 0; i < cls.size(); ++i)
      (static_cast<int>(i) < take ? sel : rest).push_back(cls[i]);
    taken += take;
  }
  // Rounding can leave us a few short/over; rebalance from the rest.
  std::sort(sel.begin(), sel.end());
  std::sort(rest.begin(), rest.end());
  while (taken < want && !rest.empty()) {
    sel.push_back(rest.back());
    rest.pop_back();
    ++taken;
  }
  while (taken > want && !sel.empty()) {
    rest.push_back(sel.back());
    sel.pop_back();
    --taken;
  }
  std::sort(sel.begin(), sel.end());
  std::sort(rest.begin(), rest.end());
  return {sel, rest};
}

}  // namespace

DatasetSplits load_dataset(const DatasetDescriptor& desc,
                           double subset_fraction, uint64_t seed) {
  desc.validate();
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0))
    throw ConfigError("subset_fraction must be in (0,1]");
  auto root = data_root() / desc.name;

  ExampleSet train_pool, eval_pool;
  if (desc.name == "mnist") {
    train_pool = load_idx_pair(desc, root / "train" / "train-images-idx3-ubyte",
                               root / "train" / "train-labels-idx1-ubyte");
    eval_pool = load_idx_pair(desc, root / "test" / "t10k-images-idx3-ubyte",
                              root / "test" / "t10k-labels-idx1-ubyte");
  } else if (desc.name == "cifar10") {
    std::vector<std::filesystem::path> train_files;
    for (int i = 1; i <= 5; ++i)
      train_files.push_back(root / "train" /
                            ("data_batch_" + std::to_string(i) + ".bin"));
    train_pool = load_cifar_batches(desc, train_files);
    eval_pool = load_cifar_batches(desc, {root / "test" / "test_batch.bin"});
  } else {
    throw ConfigError("no loader for dataset: " + desc.name);
  }

  if (train_pool.size() != desc.split_sizes[0])
    throw ValidationError(desc.name + ": expected " +
                          std::to_string(desc.split_sizes[0]) +
                          " training examples, found " +
                          std::to_string(train_pool.size()));
  if (eval_pool.size() != desc.split_sizes[1] + desc.split_sizes[2])
    throw ValidationError(desc.name + ": evaluation pool size mismatch");

  auto [val_idx, test_idx] = stratified_carve(
      eval_pool.labels(), desc.num_classes, desc.split_sizes[1], seed);

  DatasetSplits splits;
  splits.train = std::move(train_pool);
  splits.validation = eval_pool.subset(val_idx);
  splits.test = eval_pool.subset(test_idx);
  if (subset_fraction < 1.0) {
    splits.train = splits.train.stratified_subset(subset_fraction, seed);
    splits.validation = splits.validation.stratified_subset(subset_fraction, seed + 1);
    splits.test = splits.test.stratified_subset(subset_fraction, seed + 2);
  }
  return splits;
}

}  // namespace advlab
