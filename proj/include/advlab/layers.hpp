#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

// Trainable tensor with its gradient accumulator.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

// Persistable tensor (parameters plus non-trainable buffers such as
// batch-norm running statistics).
struct StateRef {
  std::string name;
  Tensor* value;
};

// 2-D convolution, stride 1, same padding, kernel 1 or 3. Weight layout is
// [out_ch, in_ch*k*k]; forward runs one GEMM per image over an im2col
// buffer, backward recomputes the buffer from the cached input.
class Conv2d {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int ksize);

  void init_he(RngStream& rng);
  Tensor forward(const Tensor& x);  // [N,C,H,W] -> [N,out,H,W]
  Tensor backward(const Tensor& grad_out, bool want_input_grad = true,
                  bool param_grads = true);
  void collect(std::vector<ParamRef>& out);
  void collect_state(std::vector<StateRef>& out);

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }

  Tensor weight, bias, weight_grad, bias_grad;

 private:
  std::string name_;
  int in_ch_, out_ch_, k_, pad_;
  Tensor input_;        // cached forward input
  Tensor col_scratch_;  // reused im2col buffer, one image
};

// Per-channel batch normalization over (N,H,W). Training mode normalizes by
// batch statistics and updates running averages; evaluation mode uses the
// stored averages as constants. Backward supports whichever mode the last
// forward ran in.
class BatchNorm2d {
 public:
  BatchNorm2d(std::string name, int channels);

  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& grad_out, bool param_grads = true);
  void collect(std::vector<ParamRef>& out);
  void collect_state(std::vector<StateRef>& out);

  Tensor gamma, beta, gamma_grad, beta_grad;
  Tensor running_mean, running_var;
  float momentum = 0.1f;
  float eps = 1e-5f;

 private:
  std::string name_;
  int channels_;
  Tensor xhat_;     // cached normalized input
  Tensor inv_std_;  // per channel, for the mode of the last forward
  bool last_training_ = false;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor mask_;
};

// 2x2 max pooling, stride 2; trailing odd rows/columns are dropped.
class MaxPool2 {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<int> in_shape_;
  std::vector<int32_t> argmax_;
};

// 2x nearest-neighbour upsampling.
class NearestUpsample2 {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<int> in_shape_;
};

// Fully connected layer, weight [out, in].
class Dense {
 public:
  Dense(std::string name, int in_dim, int out_dim);

  void init_he(RngStream& rng);
  Tensor forward(const Tensor& x);  // [N,in] -> [N,out]
  Tensor backward(const Tensor& grad_out, bool want_input_grad = true,
                  bool param_grads = true);
  void collect(std::vector<ParamRef>& out);
  void collect_state(std::vector<StateRef>& out);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

  Tensor weight, bias, weight_grad, bias_grad;

 private:
  std::string name_;
  int in_dim_, out_dim_;
  Tensor input_;
};

// Clamp to [0,1]; gradients pass through the un-clamped region.
class ClampUnit {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor mask_;
};

// Channel-wise concatenation [N,Ca,H,W] + [N,Cb,H,W] -> [N,Ca+Cb,H,W].
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& grad, int ca, Tensor* ga, Tensor* gb);

// Mean softmax cross-entropy over the batch. dlogits (optional) receives
// (softmax - onehot) / N; probs (optional) the softmax rows.
double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels,
                             Tensor* dlogits = nullptr,
                             Tensor* probs = nullptr);

// z_y - max_{j != y} z_j for one logit row.
double cw_margin_value(const float* logits, int num_classes, int label);
// max(margin_value, -confidence); writes the subgradient into dz if given.
double cw_margin_loss_row(const float* logits, int num_classes, int label,
                          double confidence, float* dz);

std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace advlab
