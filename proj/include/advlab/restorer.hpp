#pragma once

#include <vector>

#include "advlab/checkpoint.hpp"
#include "advlab/config.hpp"
#include "advlab/layers.hpp"

namespace advlab {

// Embedding-to-embedding restorer: six fully-connected+ReLU layers on the
// width schedule d -> d/2 -> d/4 -> d/16 -> d/4 -> d/2 -> d. The final ReLU
// makes outputs nonnegative, matching rectified encoder embeddings.
class Restorer {
 public:
  explicit Restorer(int embedding_dim, uint64_t seed);

  // {d, d/2, d/4, d/16, d/4, d/2, d}; requires d divisible by 16.
  static std::vector<int> width_schedule(int embedding_dim);

  Tensor forward(const Tensor& embeddings);  // [N,d] -> [N,d]
  Tensor backward(const Tensor& grad_out, bool param_grads = true);

  int embedding_dim() const { return embedding_dim_; }
  std::vector<int> layer_widths() const;  // output dim per layer

  std::vector<ParamRef> trainables();
  std::vector<StateRef> state();
  uint64_t parameter_digest();

  Checkpoint to_checkpoint(const TrainConfig& config,
                           std::map<std::string, double> metrics) const;
  static Restorer from_checkpoint(const Checkpoint& ckpt);

 private:
  int embedding_dim_;
  std::vector<Dense> fc_;
  std::vector<ReLU> act_;
};

}  // namespace advlab
