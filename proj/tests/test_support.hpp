#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "advlab/dataset.hpp"
#include "advlab/gradient_model.hpp"
#include "advlab/layers.hpp"
#include "advlab/rng.hpp"

namespace testsupport {

inline advlab::DatasetDescriptor toy_descriptor(int classes = 10) {
  return {"toy8", classes, {1, 8, 8}, {64, 16, 16}};
}

// Synthetic labeled blobs: class k gets a bright k-dependent stripe plus
// noise, so even tiny models can separate them.
inline advlab::ExampleSet synthetic_set(int n, int classes, uint64_t seed,
                                        int hw = 8) {
  advlab::DatasetDescriptor desc{"toy8", classes, {1, hw, hw}, {n, 1, 1}};
  advlab::RngStream rng(seed, "synthetic-set");
  advlab::Tensor px({n, 1, hw, hw});
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int y = i % classes;
    labels[static_cast<size_t>(i)] = y;
    for (int r = 0; r < hw; ++r)
      for (int c = 0; c < hw; ++c) {
        float base = (r % classes == y) ? 0.85f : 0.15f;
        float v = base + 0.1f * rng.gaussian(0.0f, 1.0f);
        px[(static_cast<int64_t>(i) * hw + r) * hw + c] =
            std::clamp(v, 0.0f, 1.0f);
      }
  }
  return advlab::ExampleSet(desc, std::move(px), std::move(labels));
}

// Two-class logistic model with fixed weights; the cross-entropy input
// gradient has the closed form (p1 - y) * w.
class BinaryLogistic final : public advlab::GradientModel {
 public:
  explicit BinaryLogistic(std::vector<float> weights, float bias = 0.0f)
      : w_(std::move(weights)), b_(bias) {}

  int num_classes() const override { return 2; }

  advlab::Tensor logits(const advlab::Tensor& images) override {
    int n = images.dim(0);
    int64_t d = images.size() / n;
    advlab::Tensor z({n, 2});
    for (int i = 0; i < n; ++i) {
      double s = b_;
      for (int64_t j = 0; j < d; ++j)
        s += w_[static_cast<size_t>(j)] * images[i * d + j];
      z[static_cast<int64_t>(i) * 2] = 0.0f;
      z[static_cast<int64_t>(i) * 2 + 1] = static_cast<float>(s);
    }
    return z;
  }

  advlab::Tensor input_gradient(const advlab::Tensor& images,
                                const std::vector<int>& labels,
                                const advlab::LossSpec& loss,
                                advlab::Tensor* logits_out) override {
    advlab::Tensor z = logits(images);
    int n = images.dim(0);
    int64_t d = images.size() / n;
    advlab::Tensor g(images.shape());
    for (int i = 0; i < n; ++i) {
      float s = z[static_cast<int64_t>(i) * 2 + 1];
      double p1 = 1.0 / (1.0 + std::exp(-static_cast<double>(s)));
      double coeff;
      if (loss.kind == advlab::LossSpec::kCrossEntropy) {
        coeff = p1 - (labels[static_cast<size_t>(i)] == 1 ? 1.0 : 0.0);
      } else {
        // margin z_y - z_other is +-s up to sign
        coeff = labels[static_cast<size_t>(i)] == 1 ? 1.0 : -1.0;
      }
      for (int64_t j = 0; j < d; ++j)
        g[i * d + j] = static_cast<float>(coeff) * w_[static_cast<size_t>(j)];
    }
    if (logits_out) *logits_out = std::move(z);
    return g;
  }

  const std::vector<float>& weights() const { return w_; }

 private:
  std::vector<float> w_;
  float b_;
};

// Small conv classifier over 8x8 single-channel inputs, random fixed weights.
class TinyConv final : public advlab::GradientModel {
 public:
  explicit TinyConv(uint64_t seed, int classes = 4)
      : classes_(classes), conv_("tiny.conv", 1, 4, 3),
        head_("tiny.head", 4 * 4 * 4, classes) {
    advlab::RngStream rng(seed, "tiny-conv");
    conv_.init_he(rng);
    head_.init_he(rng);
  }

  int num_classes() const override { return classes_; }

  advlab::Tensor logits(const advlab::Tensor& images) override {
    advlab::Tensor t = act_.forward(conv_.forward(images));
    t = pool_.forward(t);
    shape_ = t.shape();
    return head_.forward(
        t.reshaped({t.dim(0), static_cast<int>(t.size() / t.dim(0))}));
  }

  advlab::Tensor input_gradient(const advlab::Tensor& images,
                                const std::vector<int>& labels,
                                const advlab::LossSpec& loss,
                                advlab::Tensor* logits_out) override {
    advlab::Tensor z = logits(images);
    int n = z.dim(0), k = z.dim(1);
    advlab::Tensor dz({n, k});
    if (loss.kind == advlab::LossSpec::kCrossEntropy) {
      advlab::softmax_cross_entropy(z, labels, &dz);
    } else {
      for (int i = 0; i < n; ++i)
        advlab::cw_margin_loss_row(z.data() + static_cast<int64_t>(i) * k, k,
                                   labels[static_cast<size_t>(i)],
                                   loss.confidence,
                                   dz.data() + static_cast<int64_t>(i) * k);
    }
    advlab::Tensor d = head_.backward(dz, true, false);
    d = pool_.backward(d.reshaped(shape_));
    if (logits_out) *logits_out = std::move(z);
    return conv_.backward(act_.backward(d), true, false);
  }

 private:
  int classes_;
  advlab::Conv2d conv_;
  advlab::ReLU act_;
  advlab::MaxPool2 pool_;
  advlab::Dense head_;
  std::vector<int> shape_;
};

inline advlab::Tensor random_batch(int n, int c, int h, int w, uint64_t seed) {
  advlab::RngStream rng(seed, "random-batch");
  advlab::Tensor x({n, c, h, w});
  for (int64_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<float>(rng.uniform());
  return x;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("advlab-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testsupport
