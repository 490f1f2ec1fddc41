#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace advlab {

// Dense row-major float32 tensor. Image batches are [N,C,H,W], embedding
// batches [N,D]. All heavy arithmetic goes through the gemm helpers below;
// everything else is plain loops.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, float fill);

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  void fill(float v);
  void zero() { fill(0.0f); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  // Shape change without touching data; element count must match.
  Tensor reshaped(std::vector<int> shape) const;
  std::string shape_str() const;

 private:
  std::vector<float> data_;
  std::vector<int> shape_;
};

int64_t shape_numel(const std::vector<int>& shape);

// Row-major C(MxN) = A(MxK) * B(KxN); accumulate adds into C instead.
void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool accumulate = false);
// C(MxN) = A^T * B where A is stored as (KxM).
void gemm_at(const float* a, const float* b, float* c, int m, int k, int n,
             bool accumulate = false);
// C(MxN) = A * B^T where B is stored as (NxK).
void gemm_bt(const float* a, const float* b, float* c, int m, int k, int n,
             bool accumulate = false);

}  // namespace advlab
