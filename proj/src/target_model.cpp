#include "advlab/target_model.hpp"

#include <cmath>
#include <cstring>

#include "advlab/errors.hpp"

namespace advlab {

namespace {

// conv + BN + ReLU stage used by both encoders.
struct ConvStage {
  Conv2d conv;
  BatchNorm2d bn;
  ReLU act;

  ConvStage(const std::string& name, int in_ch, int out_ch, int k = 3)
      : conv(name + ".conv", in_ch, out_ch, k), bn(name + ".bn", out_ch) {}

  void init(RngStream& rng) { conv.init_he(rng); }

  Tensor forward(const Tensor& x, bool training) {
    return act.forward(bn.forward(conv.forward(x), training));
  }
  Tensor backward(const Tensor& g, bool want_input, bool params) {
    return conv.backward(bn.backward(act.backward(g), params), want_input,
                         params);
  }
  void collect(std::vector<ParamRef>& out) {
    conv.collect(out);
    bn.collect(out);
  }
  void collect_state(std::vector<StateRef>& out) {
    conv.collect_state(out);
    bn.collect_state(out);
  }
};

// Two 3x3 stages plus a shortcut; 1x1 projection when widths differ.
struct ResidualBlock {
  ConvStage s1;
  Conv2d conv2;
  BatchNorm2d bn2;
  ReLU out_act;
  bool project;
  Conv2d proj;
  BatchNorm2d proj_bn;

  ResidualBlock(const std::string& name, int in_ch, int out_ch)
      : s1(name + ".a", in_ch, out_ch),
        conv2(name + ".b.conv", out_ch, out_ch, 3),
        bn2(name + ".b.bn", out_ch),
        project(in_ch != out_ch),
        proj(name + ".proj.conv", in_ch, out_ch, 1),
        proj_bn(name + ".proj.bn", out_ch) {}

  void init(RngStream& rng) {
    s1.init(rng);
    conv2.init_he(rng);
    if (project) proj.init_he(rng);
  }

  Tensor forward(const Tensor& x, bool training) {
    Tensor main = bn2.forward(conv2.forward(s1.forward(x, training)), training);
    Tensor skip = project ? proj_bn.forward(proj.forward(x), training) : x;
    Tensor sum(main.shape());
    for (int64_t i = 0; i < sum.size(); ++i) sum[i] = main[i] + skip[i];
    return out_act.forward(sum);
  }

  Tensor backward(const Tensor& g, bool want_input, bool params) {
    Tensor dsum = out_act.backward(g);
    Tensor dmain = s1.backward(
        conv2.backward(bn2.backward(dsum, params), true, params), want_input,
        params);
    if (project) {
      Tensor dskip = proj.backward(proj_bn.backward(dsum, params), want_input,
                                   params);
      if (!want_input) return {};
      for (int64_t i = 0; i < dmain.size(); ++i) dmain[i] += dskip[i];
      return dmain;
    }
    if (!want_input) return {};
    for (int64_t i = 0; i < dmain.size(); ++i) dmain[i] += dsum[i];
    return dmain;
  }

  void collect(std::vector<ParamRef>& out) {
    s1.collect(out);
    conv2.collect(out);
    bn2.collect(out);
    if (project) {
      proj.collect(out);
      proj_bn.collect(out);
    }
  }
  void collect_state(std::vector<StateRef>& out) {
    s1.collect_state(out);
    conv2.collect_state(out);
    bn2.collect_state(out);
    if (project) {
      proj.collect_state(out);
      proj_bn.collect_state(out);
    }
  }
};

int pooled(int v) { return v / 2; }

// Four conv blocks (pooling after the first three) feeding a rectified
// 512-d projection.
class SmallCnnEncoder final : public Encoder {
 public:
  SmallCnnEncoder(const DatasetDescriptor& desc, uint64_t seed)
      : b1_("encoder.b1", desc.channels(), 32),
        b2_("encoder.b2", 32, 64),
        b3_("encoder.b3", 64, 128),
        b4_("encoder.b4", 128, 128),
        head_("encoder.head", head_in(desc), kEmbeddingDim) {
    RngStream rng(seed, "small_cnn-init");
    b1_.init(rng);
    b2_.init(rng);
    b3_.init(rng);
    b4_.init(rng);
    head_.init_he(rng);
  }

  static int head_in(const DatasetDescriptor& desc) {
    int s = pooled(pooled(pooled(desc.height())));
    return 128 * s * s;
  }

  Tensor forward(const Tensor& x, bool training) override {
    Tensor t = p1_.forward(b1_.forward(x, training));
    t = p2_.forward(b2_.forward(t, training));
    t = p3_.forward(b3_.forward(t, training));
    t = b4_.forward(t, training);
    feat_shape_ = t.shape();
    return head_act_.forward(
        head_.forward(t.reshaped({t.dim(0), static_cast<int>(t.size() / t.dim(0))})));
  }

  Tensor backward(const Tensor& g, bool want_input, bool params) override {
    Tensor d = head_.backward(head_act_.backward(g), true, params);
    d = b4_.backward(d.reshaped(feat_shape_), true, params);
    d = b3_.backward(p3_.backward(d), true, params);
    d = b2_.backward(p2_.backward(d), true, params);
    return b1_.backward(p1_.backward(d), want_input, params);
  }

  void collect(std::vector<ParamRef>& out) override {
    b1_.collect(out);
    b2_.collect(out);
    b3_.collect(out);
    b4_.collect(out);
    head_.collect(out);
  }
  void collect_state(std::vector<StateRef>& out) override {
    b1_.collect_state(out);
    b2_.collect_state(out);
    b3_.collect_state(out);
    b4_.collect_state(out);
    head_.collect_state(out);
  }
  int embedding_dim() const override { return kEmbeddingDim; }

 private:
  ConvStage b1_, b2_, b3_, b4_;
  MaxPool2 p1_, p2_, p3_;
  Dense head_;
  ReLU head_act_;
  std::vector<int> feat_shape_;
};

// Stem plus three residual blocks with pooling between, same 512-d head.
class MiniResNetEncoder final : public Encoder {
 public:
  MiniResNetEncoder(const DatasetDescriptor& desc, uint64_t seed)
      : stem_("encoder.stem", desc.channels(), 16),
        r1_("encoder.r1", 16, 16),
        r2_("encoder.r2", 16, 32),
        r3_("encoder.r3", 32, 64),
        head_("encoder.head", head_in(desc), kEmbeddingDim) {
    RngStream rng(seed, "resnet_mini-init");
    stem_.init(rng);
    r1_.init(rng);
    r2_.init(rng);
    r3_.init(rng);
    head_.init_he(rng);
  }

  static int head_in(const DatasetDescriptor& desc) {
    int s = pooled(pooled(pooled(desc.height())));
    return 64 * s * s;
  }

  Tensor forward(const Tensor& x, bool training) override {
    Tensor t = stem_.forward(x, training);
    t = p1_.forward(r1_.forward(t, training));
    t = p2_.forward(r2_.forward(t, training));
    t = p3_.forward(r3_.forward(t, training));
    feat_shape_ = t.shape();
    return head_act_.forward(
        head_.forward(t.reshaped({t.dim(0), static_cast<int>(t.size() / t.dim(0))})));
  }

  Tensor backward(const Tensor& g, bool want_input, bool params) override {
    Tensor d = head_.backward(head_act_.backward(g), true, params);
    d = r3_.backward(p3_.backward(d.reshaped(feat_shape_)), true, params);
    d = r2_.backward(p2_.backward(d), true, params);
    d = r1_.backward(p1_.backward(d), true, params);
    return stem_.backward(d, want_input, params);
  }

  void collect(std::vector<ParamRef>& out) override {
    stem_.collect(out);
    r1_.collect(out);
    r2_.collect(out);
    r3_.collect(out);
    head_.collect(out);
  }
  void collect_state(std::vector<StateRef>& out) override {
    stem_.collect_state(out);
    r1_.collect_state(out);
    r2_.collect_state(out);
    r3_.collect_state(out);
    head_.collect_state(out);
  }
  int embedding_dim() const override { return kEmbeddingDim; }

 private:
  ConvStage stem_;
  ResidualBlock r1_, r2_, r3_;
  MaxPool2 p1_, p2_, p3_;
  Dense head_;
  ReLU head_act_;
  std::vector<int> feat_shape_;
};

std::unique_ptr<Encoder> make_encoder(const DatasetDescriptor& desc,
                                      const std::string& arch, uint64_t seed) {
  if (arch == "small_cnn") return std::make_unique<SmallCnnEncoder>(desc, seed);
  if (arch == "resnet_mini")
    return std::make_unique<MiniResNetEncoder>(desc, seed);
  throw ConfigError("unknown target architecture: " + arch);
}

}  // namespace

TargetModel::TargetModel(const DatasetDescriptor& desc, const std::string& arch,
                         uint64_t seed)
    : desc_(desc),
      arch_(arch),
      encoder_(make_encoder(desc, arch, seed)),
      classifier_("classifier", kEmbeddingDim, desc.num_classes) {
  desc_.validate();
  RngStream rng(seed, "classifier-init");
  classifier_.init_he(rng);
}

Tensor TargetModel::encode(const Tensor& images, bool training) {
  if (images.ndim() != 4 || images.dim(1) != desc_.channels() ||
      images.dim(2) != desc_.height() || images.dim(3) != desc_.width())
    throw ValidationError("target expects images shaped [N," +
                          std::to_string(desc_.channels()) + "," +
                          std::to_string(desc_.height()) + "," +
                          std::to_string(desc_.width()) + "], got " +
                          images.shape_str());
  return encoder_->forward(images, training);
}

Tensor TargetModel::classify(const Tensor& embeddings) {
  return classifier_.forward(embeddings);
}

Tensor TargetModel::logits(const Tensor& images) {
  return classify(encode(images, false));
}

std::vector<int> TargetModel::predict(const Tensor& images) {
  return argmax_rows(logits(images));
}

Tensor TargetModel::input_gradient(const Tensor& images,
                                   const std::vector<int>& labels,
                                   const LossSpec& loss, Tensor* logits_out) {
  Tensor z = classify(encode(images, false));
  int n = z.dim(0), k = z.dim(1);
  Tensor dz({n, k});
  if (loss.kind == LossSpec::kCrossEntropy) {
    softmax_cross_entropy(z, labels, &dz);
  } else {
    for (int i = 0; i < n; ++i)
      cw_margin_loss_row(z.data() + static_cast<int64_t>(i) * k, k,
                         labels[static_cast<size_t>(i)], loss.confidence,
                         dz.data() + static_cast<int64_t>(i) * k);
  }
  Tensor demb = classifier_.backward(dz, true, /*param_grads=*/false);
  Tensor dx = encoder_->backward(demb, true, /*param_grads=*/false);
  if (!dx.all_finite())
    throw NumericsError("input gradient is not finite (batch of " +
                        std::to_string(n) + ")");
  if (logits_out) *logits_out = std::move(z);
  return dx;
}

Tensor TargetModel::embedding_gradient(const Tensor& embeddings,
                                       const std::vector<int>& labels,
                                       double* loss_out) {
  Tensor z = classify(embeddings);
  Tensor dz;
  double loss = softmax_cross_entropy(z, labels, &dz);
  if (loss_out) *loss_out = loss;
  return classifier_.backward(dz, true, /*param_grads=*/false);
}

double TargetModel::train_step(const Tensor& images,
                               const std::vector<int>& labels,
                               AdamOptimizer& opt) {
  if (frozen_) throw ConfigError("train_step on a frozen target model");
  Tensor z = classify(encode(images, true));
  Tensor dz;
  double loss = softmax_cross_entropy(z, labels, &dz);
  Tensor demb = classifier_.backward(dz, true, true);
  encoder_->backward(demb, /*want_input_grad=*/false, /*param_grads=*/true);
  auto params = trainables();
  opt.step(params);
  AdamOptimizer::zero_grads(params);
  return loss;
}

std::vector<ParamRef> TargetModel::trainables() {
  std::vector<ParamRef> out;
  encoder_->collect(out);
  classifier_.collect(out);
  return out;
}

std::vector<StateRef> TargetModel::state() {
  std::vector<StateRef> out;
  encoder_->collect_state(out);
  classifier_.collect_state(out);
  return out;
}

uint64_t TargetModel::parameter_digest() {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& s : state())
    h = fnv1a64(s.value->data(),
                static_cast<size_t>(s.value->size()) * sizeof(float), h);
  return h;
}

Checkpoint TargetModel::to_checkpoint(const TrainConfig& config,
                                      std::map<std::string, double> metrics) const {
  Checkpoint ckpt;
  ckpt.component_kind = "target";
  ckpt.config_snapshot = {
      {"arch", arch_},
      {"dataset", desc_.name},
      {"embedding_dim", kEmbeddingDim},
      {"train", config.to_json()},
  };
  ckpt.metrics = std::move(metrics);
  auto* self = const_cast<TargetModel*>(this);
  for (const auto& s : self->state()) ckpt.parameters.emplace_back(s.name, *s.value);
  return ckpt;
}

TargetModel TargetModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.component_kind != "target")
    throw ValidationError("checkpoint holds a " + ckpt.component_kind +
                          ", expected a target");
  auto desc = DatasetDescriptor::by_name(
      ckpt.config_snapshot.at("dataset").get<std::string>());
  TargetModel model(desc, ckpt.config_snapshot.at("arch").get<std::string>(), 0);
  for (auto& s : model.state()) {
    const Tensor& stored = ckpt.find(s.name);
    if (!stored.same_shape(*s.value))
      throw ValidationError("checkpoint tensor " + s.name + " has shape " +
                            stored.shape_str() + ", expected " +
                            s.value->shape_str());
    *s.value = stored;
  }
  return model;
}

TargetTrainMetrics train_target(TargetModel& model, const ExampleSet& train,
                                const TrainConfig& config,
                                const ExampleSet* validation,
                                const ExampleSet* test) {
  config.validate();
  TargetTrainMetrics metrics;
  AdamOptimizer opt(config.learning_rate);
  RngStream shuffler(config.seed, "target-epoch-shuffle");
  std::vector<int> order(static_cast<size_t>(train.size()));
  for (int i = 0; i < train.size(); ++i) order[static_cast<size_t>(i)] = i;

  for (int epoch = 0; epoch < config.epochs_target; ++epoch) {
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    for (int start = 0; start < train.size(); start += config.batch_size) {
      int bs = std::min(config.batch_size, train.size() - start);
      Tensor images({bs, train.descriptor().channels(),
                     train.descriptor().height(), train.descriptor().width()});
      std::vector<int> labels(static_cast<size_t>(bs));
      int64_t stride = train.descriptor().pixels_per_example();
      for (int i = 0; i < bs; ++i) {
        int src = order[static_cast<size_t>(start + i)];
        std::memcpy(images.data() + i * stride,
                    train.pixels().data() + src * stride,
                    static_cast<size_t>(stride) * sizeof(float));
        labels[static_cast<size_t>(i)] = train.labels()[static_cast<size_t>(src)];
      }
      double loss = model.train_step(images, labels, opt);
      if (!std::isfinite(loss))
        throw NumericsError("target training diverged at epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      loss_sum += loss;
      ++batches;
    }
    metrics.epoch_mean_loss.push_back(loss_sum / std::max(batches, 1));
    if (validation)
      metrics.epoch_validation_accuracy.push_back(
          model_accuracy(model, *validation));
  }
  if (test) metrics.final_accuracy = model_accuracy(model, *test);
  return metrics;
}

double model_accuracy(TargetModel& model, const Tensor& images,
                      const std::vector<int>& labels, int batch_size) {
  int n = images.dim(0);
  int correct = 0;
  int64_t stride = images.size() / n;
  for (int start = 0; start < n; start += batch_size) {
    int bs = std::min(batch_size, n - start);
    Tensor batch({bs, images.dim(1), images.dim(2), images.dim(3)});
    std::memcpy(batch.data(), images.data() + start * stride,
                static_cast<size_t>(bs * stride) * sizeof(float));
    auto pred = model.predict(batch);
    for (int i = 0; i < bs; ++i)
      if (pred[static_cast<size_t>(i)] == labels[static_cast<size_t>(start + i)])
        ++correct;
  }
  return static_cast<double>(correct) / std::max(n, 1);
}

double model_accuracy(TargetModel& model, const ExampleSet& set,
                      int batch_size) {
  return model_accuracy(model, set.pixels(), set.labels(), batch_size);
}

}  // namespace advlab
