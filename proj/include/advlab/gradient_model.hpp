#pragma once

#include <vector>

#include "advlab/tensor.hpp"

namespace advlab {

// Which loss the input gradient is taken of.
struct LossSpec {
  enum Kind { kCrossEntropy, kCwMargin };
  Kind kind = kCrossEntropy;
  double confidence = 0.0;  // kCwMargin only
};

// The surface attacks need from a classifier: logits and the gradient of a
// loss with respect to the input pixels. Implementations run in evaluation
// mode and never touch their own parameter gradients.
class GradientModel {
 public:
  virtual ~GradientModel() = default;
  virtual int num_classes() const = 0;
  virtual Tensor logits(const Tensor& images) = 0;
  virtual Tensor input_gradient(const Tensor& images,
                                const std::vector<int>& labels,
                                const LossSpec& loss,
                                Tensor* logits_out = nullptr) = 0;
};

}  // namespace advlab
