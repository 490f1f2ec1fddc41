#pragma once

#include <cstdint>
#include <vector>

#include "advlab/layers.hpp"

namespace advlab {

// Adam with bias correction. State slots are keyed by parameter order, so a
// single optimizer instance must always be stepped with the same parameter
// list.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);

  void step(const std::vector<ParamRef>& params);
  static void zero_grads(const std::vector<ParamRef>& params);

 private:
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace advlab
