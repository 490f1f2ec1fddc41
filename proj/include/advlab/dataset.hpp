#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "advlab/tensor.hpp"

namespace advlab {

struct DatasetDescriptor {
  std::string name;
  int num_classes = 0;
  std::array<int, 3> shape{};        // channels, height, width
  std::array<int, 3> split_sizes{};  // train, validation, test

  static DatasetDescriptor mnist();
  static DatasetDescriptor cifar10();
  static DatasetDescriptor by_name(const std::string& name);

  void validate() const;
  int channels() const { return shape[0]; }
  int height() const { return shape[1]; }
  int width() const { return shape[2]; }
  int64_t pixels_per_example() const {
    return static_cast<int64_t>(shape[0]) * shape[1] * shape[2];
  }
};

struct Example {
  Tensor pixels;  // [C,H,W], values in [0,1]
  int label = -1;
};

// Columnar example storage, immutable after construction and safe to share
// across readers.
class ExampleSet {
 public:
  ExampleSet() = default;
  ExampleSet(DatasetDescriptor desc, Tensor pixels, std::vector<int> labels);

  int size() const { return count_; }
  const DatasetDescriptor& descriptor() const { return desc_; }
  const Tensor& pixels() const { return pixels_; }
  const std::vector<int>& labels() const { return labels_; }

  Example example(int i) const;
  Tensor batch(int start, int count) const;  // [count,C,H,W] copy
  std::vector<int> label_slice(int start, int count) const;

  ExampleSet subset(const std::vector<int>& indices) const;
  // Per-class proportional draw; deterministic in (fraction, seed).
  ExampleSet stratified_subset(double fraction, uint64_t seed) const;
  // Exactly n examples, per-class proportional with rounding rebalanced.
  ExampleSet stratified_sample(int n, uint64_t seed) const;
  ExampleSet head(int n) const;

  std::vector<int> class_counts() const;
  uint64_t content_digest() const;

 private:
  DatasetDescriptor desc_;
  Tensor pixels_;  // [N,C,H,W]
  std::vector<int> labels_;
  int count_ = 0;
};

struct DatasetSplits {
  ExampleSet train;
  ExampleSet validation;
  ExampleSet test;
};

// Cache root: $ADVLAB_DATA_DIR if set, else ~/.cache/advlab. Files live in
// <root>/<dataset>/{train,test} in the dataset's standard distribution
// format (IDX for mnist, binary batches for cifar10).
std::filesystem::path data_root();

// Loads and splits a dataset, applying class-stratified subsampling to every
// split when subset_fraction < 1. Deterministic given seed.
DatasetSplits load_dataset(const DatasetDescriptor& desc,
                           double subset_fraction, uint64_t seed);

}  // namespace advlab
