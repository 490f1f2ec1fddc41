#include "advlab/denoiser.hpp"

#include "advlab/errors.hpp"
#include "advlab/rng.hpp"

namespace advlab {

namespace {

struct StagePlan {
  int in_ch, out_ch;
};

// Table-driven channel plan; index 0 is stage 1.
std::vector<StagePlan> stage_plan(int c) {
  return {{c, 32},    {32, 32},  {32, 64},  {64, 64}, {64, 128},
          {192, 192}, {192, 64}, {96, 96},  {96, c}};
}

}  // namespace

const std::vector<int>& Denoiser::stage_output_channels(int image_channels) {
  static thread_local std::vector<int> out;
  out.clear();
  for (const auto& s : stage_plan(image_channels)) out.push_back(s.out_ch);
  return out;
}

Denoiser::Denoiser(int image_channels, uint64_t seed)
    : image_channels_(image_channels) {
  if (image_channels <= 0) throw ConfigError("denoiser needs >= 1 image channel");
  RngStream rng(seed, "denoiser-init");
  int idx = 1;
  for (const auto& s : stage_plan(image_channels)) {
    conv_.emplace_back("denoiser.s" + std::to_string(idx) + ".conv", s.in_ch,
                       s.out_ch, 3);
    bn_.emplace_back("denoiser.s" + std::to_string(idx) + ".bn", s.out_ch);
    ++idx;
  }
  act_.resize(conv_.size());
  for (auto& c : conv_) c.init_he(rng);
}

Tensor Denoiser::forward(const Tensor& images, bool training) {
  return forward_instrumented(images, training, nullptr, nullptr);
}

Tensor Denoiser::forward_instrumented(const Tensor& images, bool training,
                                      const StageHook& hook, Taps* taps) {
  if (images.ndim() != 4 || images.dim(1) != image_channels_)
    throw ValidationError("denoiser expects [N," +
                          std::to_string(image_channels_) +
                          ",H,W], got " + images.shape_str());
  if (images.dim(2) % 4 != 0 || images.dim(3) % 4 != 0)
    throw ValidationError("denoiser input height/width must be divisible by 4");

  auto stage = [&](int i, const Tensor& x) {
    Tensor t = act_[static_cast<size_t>(i)].forward(
        bn_[static_cast<size_t>(i)].forward(conv_[static_cast<size_t>(i)].forward(x),
                                            training));
    if (hook) hook(i + 1, t);
    if (taps) taps->stage_outputs.push_back(t);
    return t;
  };

  if (taps) taps->stage_outputs.clear();
  Tensor t1 = stage(0, images);
  Tensor t2 = stage(1, t1);
  Tensor t3 = stage(2, pool1_.forward(t2));
  Tensor t4 = stage(3, t3);
  Tensor t5 = stage(4, pool2_.forward(t4));
  Tensor j1 = concat_channels(t3, up1_.forward(t5));  // 64 + 128
  if (taps) taps->join1_input = j1;
  Tensor t6 = stage(5, j1);
  Tensor t7 = stage(6, t6);
  Tensor j2 = concat_channels(t2, up2_.forward(t7));  // 32 + 64
  if (taps) taps->join2_input = j2;
  Tensor t8 = stage(7, j2);
  Tensor t9 = stage(8, t8);
  return clamp_.forward(t9);
}

Tensor Denoiser::backward(const Tensor& grad_out, bool param_grads) {
  auto stage_back = [&](int i, const Tensor& g, bool want_input) {
    return conv_[static_cast<size_t>(i)].backward(
        bn_[static_cast<size_t>(i)].backward(
            act_[static_cast<size_t>(i)].backward(g), param_grads),
        want_input, param_grads);
  };

  Tensor d = clamp_.backward(grad_out);
  d = stage_back(8, d, true);
  d = stage_back(7, d, true);  // gradient at join2 input
  Tensor d_t2a, d_up7;
  split_channels(d, 32, &d_t2a, &d_up7);
  d = stage_back(6, up2_.backward(d_up7), true);
  d = stage_back(5, d, true);  // gradient at join1 input
  Tensor d_t3a, d_up5;
  split_channels(d, 64, &d_t3a, &d_up5);
  d = stage_back(4, up1_.backward(d_up5), true);
  d = stage_back(3, pool2_.backward(d), true);  // gradient at t3
  for (int64_t i = 0; i < d.size(); ++i) d[i] += d_t3a[i];
  d = stage_back(2, d, true);
  d = pool1_.backward(d);  // gradient at t2
  for (int64_t i = 0; i < d.size(); ++i) d[i] += d_t2a[i];
  d = stage_back(1, d, true);
  return stage_back(0, d, true);
}

std::vector<ParamRef> Denoiser::trainables() {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < conv_.size(); ++i) {
    conv_[i].collect(out);
    bn_[i].collect(out);
  }
  return out;
}

std::vector<StateRef> Denoiser::state() {
  std::vector<StateRef> out;
  for (size_t i = 0; i < conv_.size(); ++i) {
    conv_[i].collect_state(out);
    bn_[i].collect_state(out);
  }
  return out;
}

uint64_t Denoiser::parameter_digest() {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& s : state())
    h = fnv1a64(s.value->data(),
                static_cast<size_t>(s.value->size()) * sizeof(float), h);
  return h;
}

Checkpoint Denoiser::to_checkpoint(const TrainConfig& config,
                                   std::map<std::string, double> metrics) const {
  Checkpoint ckpt;
  ckpt.component_kind = "denoiser";
  ckpt.config_snapshot = {{"image_channels", image_channels_},
                          {"train", config.to_json()}};
  ckpt.metrics = std::move(metrics);
  auto* self = const_cast<Denoiser*>(this);
  for (const auto& s : self->state()) ckpt.parameters.emplace_back(s.name, *s.value);
  return ckpt;
}

Denoiser Denoiser::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.component_kind != "denoiser")
    throw ValidationError("checkpoint holds a " + ckpt.component_kind +
                          ", expected a denoiser");
  Denoiser d(ckpt.config_snapshot.at("image_channels").get<int>(), 0);
  for (auto& s : d.state()) {
    const Tensor& stored = ckpt.find(s.name);
    if (!stored.same_shape(*s.value))
      throw ValidationError("checkpoint tensor " + s.name + " has shape " +
                            stored.shape_str() + ", expected " +
                            s.value->shape_str());
    *s.value = stored;
  }
  return d;
}

}  // namespace advlab
