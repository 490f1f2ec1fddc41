#include "advlab/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "advlab/errors.hpp"

namespace advlab {

namespace {
using MatMap = Eigen::Map<
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ValidationError("negative tensor dimension");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape)
    : data_(static_cast<size_t>(shape_numel(shape)), 0.0f),
      shape_(std::move(shape)) {}

Tensor::Tensor(std::vector<int> shape, float fill)
    : data_(static_cast<size_t>(shape_numel(shape)), fill),
      shape_(std::move(shape)) {}

void Tensor::fill(float v) {
  for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (float x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (shape_numel(shape) != size())
    throw ValidationError("reshape changes element count: " + shape_str());
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape_.size(); ++i)
    os << shape_[i] << (i + 1 < shape_.size() ? "," : "");
  os << ")";
  return os.str();
}

void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool accumulate) {
  ConstMatMap A(a, m, k), B(b, k, n);
  MatMap C(c, m, n);
  if (accumulate)
    C.noalias() += A * B;
  else
    C.noalias() = A * B;
}

void gemm_at(const float* a, const float* b, float* c, int m, int k, int n,
             bool accumulate) {
  ConstMatMap A(a, k, m), B(b, k, n);
  MatMap C(c, m, n);
  if (accumulate)
    C.noalias() += A.transpose() * B;
  else
    C.noalias() = A.transpose() * B;
}

void gemm_bt(const float* a, const float* b, float* c, int m, int k, int n,
             bool accumulate) {
  ConstMatMap A(a, m, k), B(b, n, k);
  MatMap C(c, m, n);
  if (accumulate)
    C.noalias() += A * B.transpose();
  else
    C.noalias() = A * B.transpose();
}

}  // namespace advlab
