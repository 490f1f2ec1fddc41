#pragma once

#include <functional>
#include <vector>

#include "advlab/checkpoint.hpp"
#include "advlab/config.hpp"
#include "advlab/layers.hpp"

namespace advlab {

// Image-to-image denoiser: nine conv+BN+ReLU stages on a contract/expand
// path. Channel plan c->32->32->64->64->128, then the stage-3 output (64ch)
// joins the upsampled stage-5 output (128ch) into stage 6 (192->192), stage 7
// narrows 192->64, and the stage-2 output (32ch) joins the upsampled stage-7
// output into stage 8 (96->96); stage 9 maps back to the image channels.
// 2x max-pool after stages 2 and 4, 2x nearest upsample before the joins.
// Output is clamped to [0,1]. Input height/width must be divisible by 4.
class Denoiser {
 public:
  Denoiser(int image_channels, uint64_t seed);

  Tensor forward(const Tensor& images, bool training = false);
  // Gradients w.r.t. parameters (optional) and input.
  Tensor backward(const Tensor& grad_out, bool param_grads = true);

  // Hook receives each stage's activation right after its ReLU and may edit
  // it in place; taps (optional) record stage outputs and the two join
  // inputs. Used by diagnostics and tests.
  struct Taps {
    std::vector<Tensor> stage_outputs;  // 9 entries
    Tensor join1_input;                 // stage-6 input, 192 channels
    Tensor join2_input;                 // stage-8 input, 96 channels
  };
  using StageHook = std::function<void(int stage, Tensor& activation)>;
  Tensor forward_instrumented(const Tensor& images, bool training,
                              const StageHook& hook, Taps* taps);

  int image_channels() const { return image_channels_; }
  static const std::vector<int>& stage_output_channels(int image_channels);

  std::vector<ParamRef> trainables();
  std::vector<StateRef> state();
  uint64_t parameter_digest();

  Checkpoint to_checkpoint(const TrainConfig& config,
                           std::map<std::string, double> metrics) const;
  static Denoiser from_checkpoint(const Checkpoint& ckpt);

 private:
  int image_channels_;
  std::vector<Conv2d> conv_;
  std::vector<BatchNorm2d> bn_;
  std::vector<ReLU> act_;
  MaxPool2 pool1_, pool2_;
  NearestUpsample2 up1_, up2_;
  ClampUnit clamp_;
};

}  // namespace advlab
