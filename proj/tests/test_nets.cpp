#include <cmath>

#include "doctest.h"

#include "advlab/denoiser.hpp"
#include "advlab/errors.hpp"
#include "advlab/optim.hpp"
#include "advlab/restorer.hpp"
#include "advlab/target_model.hpp"
#include "test_support.hpp"

using namespace advlab;

TEST_CASE("target: logits shape and embedding width") {
  auto desc = DatasetDescriptor::mnist();
  TargetModel model(desc, "small_cnn", 1);
  Tensor x = testsupport::random_batch(5, 1, 28, 28, 2);
  Tensor emb = model.encode(x);
  CHECK(emb.shape() == std::vector<int>{5, 512});
  Tensor z = model.classify(emb);
  CHECK(z.shape() == std::vector<int>{5, 10});
  // rectified head
  for (int64_t i = 0; i < emb.size(); ++i) CHECK(emb[i] >= 0.0f);
}

TEST_CASE("target: softmax over logits is a distribution") {
  TargetModel model(testsupport::toy_descriptor(), "resnet_mini", 3);
  Tensor x = testsupport::random_batch(4, 1, 8, 8, 4);
  Tensor probs;
  softmax_cross_entropy(model.logits(x), {0, 1, 2, 3}, nullptr, &probs);
  for (int i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 10; ++j) sum += probs[i * 10 + j];
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("target: same seed gives identical initial parameters") {
  TargetModel a(DatasetDescriptor::mnist(), "small_cnn", 7);
  TargetModel b(DatasetDescriptor::mnist(), "small_cnn", 7);
  CHECK(a.parameter_digest() == b.parameter_digest());
  TargetModel c(DatasetDescriptor::mnist(), "small_cnn", 8);
  CHECK(a.parameter_digest() != c.parameter_digest());
}

TEST_CASE("target: unknown architecture is a configuration error") {
  CHECK_THROWS_AS(TargetModel(DatasetDescriptor::mnist(), "vgg16", 0),
                  ConfigError);
}

TEST_CASE("target: zero-epoch training leaves the model untouched") {
  TargetModel model(testsupport::toy_descriptor(4), "small_cnn", 5);
  uint64_t before = model.parameter_digest();
  auto train = testsupport::synthetic_set(32, 4, 6);
  TrainConfig cfg;
  cfg.epochs_target = 0;
  cfg.learning_rate = 1e-3;
  train_target(model, train, cfg);
  CHECK(model.parameter_digest() == before);
}

TEST_CASE("target: training reduces loss on separable blobs") {
  TargetModel model(testsupport::toy_descriptor(4), "small_cnn", 5);
  auto train = testsupport::synthetic_set(128, 4, 6);
  TrainConfig cfg;
  cfg.epochs_target = 4;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 16;
  auto metrics = train_target(model, train, cfg, nullptr, &train);
  REQUIRE(metrics.epoch_mean_loss.size() == 4);
  CHECK(metrics.epoch_mean_loss.back() < metrics.epoch_mean_loss.front());
  CHECK(metrics.final_accuracy > 0.5);
}

TEST_CASE("target: diverged training aborts with a numerics error") {
  TargetModel model(testsupport::toy_descriptor(4), "small_cnn", 5);
  auto train = testsupport::synthetic_set(32, 4, 6);
  TrainConfig cfg;
  cfg.epochs_target = 2;
  cfg.learning_rate = 1e30;
  cfg.batch_size = 16;
  CHECK_THROWS_AS(train_target(model, train, cfg), NumericsError);
}

TEST_CASE("target: frozen flag blocks updates") {
  TargetModel model(testsupport::toy_descriptor(4), "small_cnn", 5);
  model.set_frozen(true);
  AdamOptimizer opt(1e-3);
  Tensor x = testsupport::random_batch(2, 1, 8, 8, 1);
  CHECK_THROWS_AS(model.train_step(x, {0, 1}, opt), ConfigError);
}

TEST_CASE("denoiser: output matches input shape and stays in [0,1]") {
  for (auto [c, hw] : {std::pair{1, 28}, std::pair{3, 32}}) {
    Denoiser den(c, 9);
    Tensor x = testsupport::random_batch(3, c, hw, hw, 10);
    Tensor y = den.forward(x);
    CHECK(y.shape() == x.shape());
    for (int64_t i = 0; i < y.size(); ++i) {
      CHECK(y[i] >= 0.0f);
      CHECK(y[i] <= 1.0f);
    }
  }
}

TEST_CASE("denoiser: stage widths follow the published channel plan") {
  const auto& widths = Denoiser::stage_output_channels(3);
  CHECK(widths == std::vector<int>{32, 32, 64, 64, 128, 192, 64, 96, 3});
  // the two joins: 64 + 128 = 192 into stage 6, 32 + 64 = 96 into stage 8
  Denoiser den(3, 1);
  Denoiser::Taps taps;
  den.forward_instrumented(testsupport::random_batch(1, 3, 32, 32, 2), false,
                           nullptr, &taps);
  CHECK(taps.join1_input.dim(1) == 192);
  CHECK(taps.join2_input.dim(1) == 96);
  REQUIRE(taps.stage_outputs.size() == 9);
  CHECK(taps.stage_outputs[4].dim(1) == 128);  // contracting tail
  CHECK(taps.stage_outputs[4].dim(2) == 8);    // 32 -> 16 -> 8
}

TEST_CASE("denoiser: zeroing the stage-5 output only moves the join's last "
          "128 channels") {
  Denoiser den(1, 4);
  Tensor x = testsupport::random_batch(2, 1, 28, 28, 5);
  Denoiser::Taps base, hooked;
  den.forward_instrumented(x, false, nullptr, &base);
  den.forward_instrumented(
      x, false,
      [](int stage, Tensor& t) {
        if (stage == 5) t.zero();
      },
      &hooked);
  const Tensor& a = base.join1_input;
  const Tensor& b = hooked.join1_input;
  REQUIRE(a.same_shape(b));
  int n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
  bool first64_same = true, last128_changed = false;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int j = 0; j < hw; ++j) {
        int64_t off = (static_cast<int64_t>(i) * c + ch) * hw + j;
        if (ch < 64)
          first64_same &= a[off] == b[off];
        else
          last128_changed |= a[off] != b[off];
      }
  CHECK(first64_same);
  CHECK(last128_changed);
}

TEST_CASE("denoiser: odd spatial sizes are rejected") {
  Denoiser den(1, 0);
  CHECK_THROWS_AS(den.forward(Tensor({1, 1, 30, 30})), ValidationError);
}

TEST_CASE("restorer: 512 in, 512 out, finite on zeros") {
  Restorer r(512, 3);
  Tensor zero({4, 512});
  Tensor out = r.forward(zero);
  CHECK(out.shape() == std::vector<int>{4, 512});
  CHECK(out.all_finite());
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] >= 0.0f);
}

TEST_CASE("restorer: width schedule and bottleneck") {
  CHECK(Restorer::width_schedule(512) ==
        std::vector<int>{512, 256, 128, 32, 128, 256, 512});
  CHECK(Restorer::width_schedule(64) == std::vector<int>{64, 32, 16, 4, 16, 32, 64});
  Restorer r(512, 1);
  CHECK(r.layer_widths()[2] == 32);
  CHECK(r.layer_widths().back() == 512);
  CHECK_THROWS_AS(Restorer::width_schedule(100), ConfigError);
  CHECK_THROWS_AS(Restorer(24, 0), ConfigError);
}

TEST_CASE("restorer: dimension mismatch is rejected") {
  Restorer r(512, 3);
  CHECK_THROWS_AS(r.forward(Tensor({2, 256})), ValidationError);
}

// Two-layer toy gradient check. The double-precision mirror below is the
// reference; the float32 analytic gradients must agree within 1e-3 and the
// mirror's own analytic gradients within 1e-5 of its finite differences.
namespace {

struct TwoLayerDouble {
  std::vector<double> w1, b1, w2, b2;  // 6->8->3
  static constexpr int kIn = 6, kHid = 8, kOut = 3;

  double loss(const std::vector<double>& x, int label) const {
    std::vector<double> h(kHid), z(kOut);
    for (int i = 0; i < kHid; ++i) {
      double s = b1[static_cast<size_t>(i)];
      for (int j = 0; j < kIn; ++j) s += w1[static_cast<size_t>(i * kIn + j)] * x[static_cast<size_t>(j)];
      h[static_cast<size_t>(i)] = std::max(s, 0.0);
    }
    for (int i = 0; i < kOut; ++i) {
      double s = b2[static_cast<size_t>(i)];
      for (int j = 0; j < kHid; ++j) s += w2[static_cast<size_t>(i * kHid + j)] * h[static_cast<size_t>(j)];
      z[static_cast<size_t>(i)] = s;
    }
    double zmax = std::max({z[0], z[1], z[2]});
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    return -(z[static_cast<size_t>(label)] - zmax - std::log(sum));
  }

  // analytic gradient w.r.t. w1, via manual backprop in double
  std::vector<double> grad_w1(const std::vector<double>& x, int label) const {
    std::vector<double> h(kHid), pre(kHid), z(kOut);
    for (int i = 0; i < kHid; ++i) {
      double s = b1[static_cast<size_t>(i)];
      for (int j = 0; j < kIn; ++j) s += w1[static_cast<size_t>(i * kIn + j)] * x[static_cast<size_t>(j)];
      pre[static_cast<size_t>(i)] = s;
      h[static_cast<size_t>(i)] = std::max(s, 0.0);
    }
    for (int i = 0; i < kOut; ++i) {
      double s = b2[static_cast<size_t>(i)];
      for (int j = 0; j < kHid; ++j) s += w2[static_cast<size_t>(i * kHid + j)] * h[static_cast<size_t>(j)];
      z[static_cast<size_t>(i)] = s;
    }
    double zmax = std::max({z[0], z[1], z[2]});
    double sum = 0.0;
    std::vector<double> p(kOut);
    for (int i = 0; i < kOut; ++i) {
      p[static_cast<size_t>(i)] = std::exp(z[static_cast<size_t>(i)] - zmax);
      sum += p[static_cast<size_t>(i)];
    }
    std::vector<double> dz(kOut), dh(kHid, 0.0), dw1(kHid * kIn);
    for (int i = 0; i < kOut; ++i)
      dz[static_cast<size_t>(i)] = p[static_cast<size_t>(i)] / sum - (i == label ? 1.0 : 0.0);
    for (int j = 0; j < kHid; ++j)
      for (int i = 0; i < kOut; ++i)
        dh[static_cast<size_t>(j)] += dz[static_cast<size_t>(i)] * w2[static_cast<size_t>(i * kHid + j)];
    for (int i = 0; i < kHid; ++i) {
      double gate = pre[static_cast<size_t>(i)] > 0.0 ? 1.0 : 0.0;
      for (int j = 0; j < kIn; ++j)
        dw1[static_cast<size_t>(i * kIn + j)] = dh[static_cast<size_t>(i)] * gate * x[static_cast<size_t>(j)];
    }
    return dw1;
  }
};

}  // namespace

TEST_CASE("gradients: two-layer toy agrees with its double-precision mirror") {
  RngStream rng(13, "two-layer");
  Dense l1("l1", 6, 8), l2("l2", 8, 3);
  l1.init_he(rng);
  l2.init_he(rng);
  ReLU act;

  TwoLayerDouble mirror;
  mirror.w1.assign(l1.weight.data(), l1.weight.data() + l1.weight.size());
  mirror.b1.assign(l1.bias.data(), l1.bias.data() + l1.bias.size());
  mirror.w2.assign(l2.weight.data(), l2.weight.data() + l2.weight.size());
  mirror.b2.assign(l2.bias.data(), l2.bias.data() + l2.bias.size());

  Tensor x({1, 6});
  std::vector<double> xd(6);
  for (int i = 0; i < 6; ++i) {
    x[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    xd[static_cast<size_t>(i)] = x[i];
  }
  int label = 2;

  // float32 analytic path
  Tensor z = l2.forward(act.forward(l1.forward(x)));
  Tensor dz;
  softmax_cross_entropy(z, {label}, &dz);
  l1.backward(act.backward(l2.backward(dz, true, true)), false, true);

  // double-precision central differences of the mirror
  const double h = 1e-6;
  double num = 0.0, na = 0.0, nn = 0.0;
  double mirror_num = 0.0;
  auto mirror_grad = mirror.grad_w1(xd, label);
  for (int64_t i = 0; i < l1.weight.size(); ++i) {
    double saved = mirror.w1[static_cast<size_t>(i)];
    mirror.w1[static_cast<size_t>(i)] = saved + h;
    double lp = mirror.loss(xd, label);
    mirror.w1[static_cast<size_t>(i)] = saved - h;
    double lm = mirror.loss(xd, label);
    mirror.w1[static_cast<size_t>(i)] = saved;
    double fd = (lp - lm) / (2.0 * h);
    double an = l1.weight_grad[i];
    num += (an - fd) * (an - fd);
    na += an * an;
    nn += fd * fd;
    mirror_num += (mirror_grad[static_cast<size_t>(i)] - fd) *
                  (mirror_grad[static_cast<size_t>(i)] - fd);
  }
  double rel = std::sqrt(num) / (std::sqrt(na) + std::sqrt(nn));
  CHECK(rel < 1e-3);
  double mirror_rel = std::sqrt(mirror_num) / (2.0 * std::sqrt(nn) + 1e-30);
  CHECK(mirror_rel < 1e-5);  // float64 analytic vs float64 differences
}
