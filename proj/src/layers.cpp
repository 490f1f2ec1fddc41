#include "advlab/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "advlab/errors.hpp"

namespace advlab {

namespace {

void check_nchw(const Tensor& x, const char* who) {
  if (x.ndim() != 4) throw ValidationError(std::string(who) + ": input must be [N,C,H,W]");
}

// cols is [C*k*k, H*W]; pad = k/2, stride 1.
void im2col(const float* img, int c, int h, int w, int k, int pad, float* cols) {
  int hw = h * w;
  for (int ch = 0; ch < c; ++ch) {
    const float* src = img + static_cast<int64_t>(ch) * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* dst = cols + (static_cast<int64_t>(ch) * k * k + ky * k + kx) * hw;
        int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < h; ++y) {
          int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::memset(dst + y * w, 0, static_cast<size_t>(w) * sizeof(float));
            continue;
          }
          const float* row = src + sy * w;
          float* out = dst + y * w;
          int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          if (x0 > 0) std::memset(out, 0, static_cast<size_t>(x0) * sizeof(float));
          if (x1 > x0)
            std::memcpy(out + x0, row + x0 + dx,
                        static_cast<size_t>(x1 - x0) * sizeof(float));
          if (x1 < w)
            std::memset(out + x1, 0, static_cast<size_t>(w - x1) * sizeof(float));
        }
      }
    }
  }
}

// Scatter-add of a cols gradient back to image layout.
void col2im(const float* cols, int c, int h, int w, int k, int pad, float* img) {
  int hw = h * w;
  for (int ch = 0; ch < c; ++ch) {
    float* dst = img + static_cast<int64_t>(ch) * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* src = cols + (static_cast<int64_t>(ch) * k * k + ky * k + kx) * hw;
        int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < h; ++y) {
          int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          float* row = dst + sy * w;
          const float* in = src + y * w;
          int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          for (int x = x0; x < x1; ++x) row[x + dx] += in[x];
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int ksize)
    : weight({out_ch, in_ch * ksize * ksize}),
      bias({out_ch}),
      weight_grad({out_ch, in_ch * ksize * ksize}),
      bias_grad({out_ch}),
      name_(std::move(name)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      k_(ksize),
      pad_(ksize / 2) {
  if (ksize != 1 && ksize != 3)
    throw ConfigError("Conv2d supports kernel sizes 1 and 3");
}

void Conv2d::init_he(RngStream& rng) {
  float std = std::sqrt(2.0f / static_cast<float>(in_ch_ * k_ * k_));
  for (int64_t i = 0; i < weight.size(); ++i) weight[i] = rng.gaussian(0.0f, std);
  bias.zero();
}

Tensor Conv2d::forward(const Tensor& x) {
  check_nchw(x, "Conv2d");
  if (x.dim(1) != in_ch_)
    throw ValidationError("Conv2d " + name_ + ": expected " +
                          std::to_string(in_ch_) + " channels, got " +
                          std::to_string(x.dim(1)));
  input_ = x;
  int n = x.dim(0), h = x.dim(2), w = x.dim(3), hw = h * w;
  int ck2 = in_ch_ * k_ * k_;
  if (col_scratch_.size() != static_cast<int64_t>(ck2) * hw)
    col_scratch_ = Tensor({ck2, hw});
  Tensor y({n, out_ch_, h, w});
  for (int i = 0; i < n; ++i) {
    im2col(x.data() + static_cast<int64_t>(i) * in_ch_ * hw, in_ch_, h, w, k_,
           pad_, col_scratch_.data());
    float* out = y.data() + static_cast<int64_t>(i) * out_ch_ * hw;
    gemm(weight.data(), col_scratch_.data(), out, out_ch_, ck2, hw);
    for (int oc = 0; oc < out_ch_; ++oc) {
      float b = bias[oc];
      float* row = out + static_cast<int64_t>(oc) * hw;
      for (int j = 0; j < hw; ++j) row[j] += b;
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, bool want_input_grad,
                        bool param_grads) {
  int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3), hw = h * w;
  int ck2 = in_ch_ * k_ * k_;
  Tensor dx;
  if (want_input_grad) dx = Tensor({n, in_ch_, h, w});
  Tensor dcols({ck2, hw});
  for (int i = 0; i < n; ++i) {
    const float* gout = grad_out.data() + static_cast<int64_t>(i) * out_ch_ * hw;
    im2col(input_.data() + static_cast<int64_t>(i) * in_ch_ * hw, in_ch_, h, w,
           k_, pad_, col_scratch_.data());
    if (param_grads) {
      gemm_bt(gout, col_scratch_.data(), weight_grad.data(), out_ch_, hw, ck2,
              /*accumulate=*/true);
      for (int oc = 0; oc < out_ch_; ++oc) {
        const float* row = gout + static_cast<int64_t>(oc) * hw;
        float s = 0.0f;
        for (int j = 0; j < hw; ++j) s += row[j];
        bias_grad[oc] += s;
      }
    }
    if (want_input_grad) {
      gemm_at(weight.data(), gout, dcols.data(), ck2, out_ch_, hw);
      col2im(dcols.data(), in_ch_, h, w, k_, pad_,
             dx.data() + static_cast<int64_t>(i) * in_ch_ * hw);
    }
  }
  return dx;
}

void Conv2d::collect(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".weight", &weight, &weight_grad});
  out.push_back({name_ + ".bias", &bias, &bias_grad});
}

void Conv2d::collect_state(std::vector<StateRef>& out) {
  out.push_back({name_ + ".weight", &weight});
  out.push_back({name_ + ".bias", &bias});
}

BatchNorm2d::BatchNorm2d(std::string name, int channels)
    : gamma({channels}, 1.0f),
      beta({channels}),
      gamma_grad({channels}),
      beta_grad({channels}),
      running_mean({channels}),
      running_var({channels}, 1.0f),
      name_(std::move(name)),
      channels_(channels) {}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  check_nchw(x, "BatchNorm2d");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), hw = h * w;
  if (c != channels_) throw ValidationError("BatchNorm2d channel mismatch");
  last_training_ = training;
  xhat_ = Tensor({n, c, h, w});
  inv_std_ = Tensor({c});
  Tensor y({n, c, h, w});
  int64_t m = static_cast<int64_t>(n) * hw;
  for (int ch = 0; ch < c; ++ch) {
    double mean, var;
    if (training) {
      double sum = 0.0, sum2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* row = x.data() + (static_cast<int64_t>(i) * c + ch) * hw;
        for (int j = 0; j < hw; ++j) {
          sum += row[j];
          sum2 += static_cast<double>(row[j]) * row[j];
        }
      }
      mean = sum / static_cast<double>(m);
      var = sum2 / static_cast<double>(m) - mean * mean;
      var = std::max(var, 0.0);
      double unbiased = var * static_cast<double>(m) /
                        static_cast<double>(std::max<int64_t>(m - 1, 1));
      running_mean[ch] = (1.0f - momentum) * running_mean[ch] +
                         momentum * static_cast<float>(mean);
      running_var[ch] = (1.0f - momentum) * running_var[ch] +
                        momentum * static_cast<float>(unbiased);
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    float istd = 1.0f / std::sqrt(static_cast<float>(var) + eps);
    inv_std_[ch] = istd;
    float g = gamma[ch], b = beta[ch], mu = static_cast<float>(mean);
    for (int i = 0; i < n; ++i) {
      int64_t off = (static_cast<int64_t>(i) * c + ch) * hw;
      const float* row = x.data() + off;
      float* xh = xhat_.data() + off;
      float* out = y.data() + off;
      for (int j = 0; j < hw; ++j) {
        float v = (row[j] - mu) * istd;
        xh[j] = v;
        out[j] = g * v + b;
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out, bool param_grads) {
  int n = grad_out.dim(0), c = grad_out.dim(1), h = grad_out.dim(2),
      w = grad_out.dim(3), hw = h * w;
  Tensor dx({n, c, h, w});
  int64_t m = static_cast<int64_t>(n) * hw;
  for (int ch = 0; ch < c; ++ch) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int i = 0; i < n; ++i) {
      int64_t off = (static_cast<int64_t>(i) * c + ch) * hw;
      const float* g = grad_out.data() + off;
      const float* xh = xhat_.data() + off;
      for (int j = 0; j < hw; ++j) {
        sum_g += g[j];
        sum_gx += static_cast<double>(g[j]) * xh[j];
      }
    }
    if (param_grads) {
      gamma_grad[ch] += static_cast<float>(sum_gx);
      beta_grad[ch] += static_cast<float>(sum_g);
    }
    float ga = gamma[ch], istd = inv_std_[ch];
    if (last_training_) {
      float mg = static_cast<float>(sum_g / static_cast<double>(m));
      float mgx = static_cast<float>(sum_gx / static_cast<double>(m));
      for (int i = 0; i < n; ++i) {
        int64_t off = (static_cast<int64_t>(i) * c + ch) * hw;
        const float* g = grad_out.data() + off;
        const float* xh = xhat_.data() + off;
        float* out = dx.data() + off;
        for (int j = 0; j < hw; ++j)
          out[j] = ga * istd * (g[j] - mg - xh[j] * mgx);
      }
    } else {
      // Running statistics are constants; the transform is affine.
      for (int i = 0; i < n; ++i) {
        int64_t off = (static_cast<int64_t>(i) * c + ch) * hw;
        const float* g = grad_out.data() + off;
        float* out = dx.data() + off;
        for (int j = 0; j < hw; ++j) out[j] = ga * istd * g[j];
      }
    }
  }
  return dx;
}

void BatchNorm2d::collect(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".gamma", &gamma, &gamma_grad});
  out.push_back({name_ + ".beta", &beta, &beta_grad});
}

void BatchNorm2d::collect_state(std::vector<StateRef>& out) {
  out.push_back({name_ + ".gamma", &gamma});
  out.push_back({name_ + ".beta", &beta});
  out.push_back({name_ + ".running_mean", &running_mean});
  out.push_back({name_ + ".running_var", &running_var});
}

Tensor ReLU::forward(const Tensor& x) {
  mask_ = Tensor(x.shape());
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    bool on = x[i] > 0.0f;
    mask_[i] = on ? 1.0f : 0.0f;
    y[i] = on ? x[i] : 0.0f;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) const {
  Tensor dx(grad_out.shape());
  for (int64_t i = 0; i < grad_out.size(); ++i) dx[i] = grad_out[i] * mask_[i];
  return dx;
}

Tensor MaxPool2::forward(const Tensor& x) {
  check_nchw(x, "MaxPool2");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  int ho = h / 2, wo = w / 2;
  in_shape_ = x.shape();
  Tensor y({n, c, ho, wo});
  argmax_.assign(static_cast<size_t>(y.size()), 0);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const float* src = x.data() + (static_cast<int64_t>(i) * c + ch) * h * w;
      float* dst = y.data() + (static_cast<int64_t>(i) * c + ch) * ho * wo;
      int32_t* am = argmax_.data() + (static_cast<int64_t>(i) * c + ch) * ho * wo;
      for (int yo = 0; yo < ho; ++yo) {
        for (int xo = 0; xo < wo; ++xo) {
          int base = (2 * yo) * w + 2 * xo;
          int best = base;
          float bv = src[base];
          for (int dy = 0; dy < 2; ++dy)
            for (int dxp = 0; dxp < 2; ++dxp) {
              int idx = base + dy * w + dxp;
              if (src[idx] > bv) {
                bv = src[idx];
                best = idx;
              }
            }
          dst[yo * wo + xo] = bv;
          am[yo * wo + xo] = best;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2::backward(const Tensor& grad_out) const {
  int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  int ho = h / 2, wo = w / 2;
  Tensor dx({n, c, h, w});
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const float* g = grad_out.data() + (static_cast<int64_t>(i) * c + ch) * ho * wo;
      const int32_t* am = argmax_.data() + (static_cast<int64_t>(i) * c + ch) * ho * wo;
      float* out = dx.data() + (static_cast<int64_t>(i) * c + ch) * h * w;
      for (int j = 0; j < ho * wo; ++j) out[am[j]] += g[j];
    }
  }
  return dx;
}

Tensor NearestUpsample2::forward(const Tensor& x) {
  check_nchw(x, "NearestUpsample2");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  in_shape_ = x.shape();
  Tensor y({n, c, h * 2, w * 2});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float* src = x.data() + (static_cast<int64_t>(i) * c + ch) * h * w;
      float* dst = y.data() + (static_cast<int64_t>(i) * c + ch) * 4 * h * w;
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          float v = src[yy * w + xx];
          int o = (2 * yy) * (2 * w) + 2 * xx;
          dst[o] = v;
          dst[o + 1] = v;
          dst[o + 2 * w] = v;
          dst[o + 2 * w + 1] = v;
        }
    }
  return y;
}

Tensor NearestUpsample2::backward(const Tensor& grad_out) const {
  int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  Tensor dx({n, c, h, w});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float* g = grad_out.data() + (static_cast<int64_t>(i) * c + ch) * 4 * h * w;
      float* dst = dx.data() + (static_cast<int64_t>(i) * c + ch) * h * w;
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          int o = (2 * yy) * (2 * w) + 2 * xx;
          dst[yy * w + xx] = g[o] + g[o + 1] + g[o + 2 * w] + g[o + 2 * w + 1];
        }
    }
  return dx;
}

Dense::Dense(std::string name, int in_dim, int out_dim)
    : weight({out_dim, in_dim}),
      bias({out_dim}),
      weight_grad({out_dim, in_dim}),
      bias_grad({out_dim}),
      name_(std::move(name)),
      in_dim_(in_dim),
      out_dim_(out_dim) {}

void Dense::init_he(RngStream& rng) {
  float std = std::sqrt(2.0f / static_cast<float>(in_dim_));
  for (int64_t i = 0; i < weight.size(); ++i) weight[i] = rng.gaussian(0.0f, std);
  bias.zero();
}

Tensor Dense::forward(const Tensor& x) {
  if (x.ndim() != 2 || x.dim(1) != in_dim_)
    throw ValidationError("Dense " + name_ + ": expected [N," +
                          std::to_string(in_dim_) + "], got " + x.shape_str());
  input_ = x;
  int n = x.dim(0);
  Tensor y({n, out_dim_});
  gemm_bt(x.data(), weight.data(), y.data(), n, in_dim_, out_dim_);
  for (int i = 0; i < n; ++i) {
    float* row = y.data() + static_cast<int64_t>(i) * out_dim_;
    for (int j = 0; j < out_dim_; ++j) row[j] += bias[j];
  }
  return y;
}

Tensor Dense::backward(const Tensor& grad_out, bool want_input_grad,
                       bool param_grads) {
  int n = input_.dim(0);
  if (param_grads) {
    gemm_at(grad_out.data(), input_.data(), weight_grad.data(), out_dim_, n,
            in_dim_, /*accumulate=*/true);
    for (int i = 0; i < n; ++i) {
      const float* row = grad_out.data() + static_cast<int64_t>(i) * out_dim_;
      for (int j = 0; j < out_dim_; ++j) bias_grad[j] += row[j];
    }
  }
  Tensor dx;
  if (want_input_grad) {
    dx = Tensor({n, in_dim_});
    gemm(grad_out.data(), weight.data(), dx.data(), n, out_dim_, in_dim_);
  }
  return dx;
}

void Dense::collect(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".weight", &weight, &weight_grad});
  out.push_back({name_ + ".bias", &bias, &bias_grad});
}

void Dense::collect_state(std::vector<StateRef>& out) {
  out.push_back({name_ + ".weight", &weight});
  out.push_back({name_ + ".bias", &bias});
}

Tensor ClampUnit::forward(const Tensor& x) {
  mask_ = Tensor(x.shape());
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    float v = x[i];
    bool inside = v >= 0.0f && v <= 1.0f;
    mask_[i] = inside ? 1.0f : 0.0f;
    y[i] = std::clamp(v, 0.0f, 1.0f);
  }
  return y;
}

Tensor ClampUnit::backward(const Tensor& grad_out) const {
  Tensor dx(grad_out.shape());
  for (int64_t i = 0; i < grad_out.size(); ++i) dx[i] = grad_out[i] * mask_[i];
  return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check_nchw(a, "concat");
  check_nchw(b, "concat");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw ValidationError("concat_channels: spatial/batch mismatch " +
                          a.shape_str() + " vs " + b.shape_str());
  int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  Tensor y({n, ca + cb, a.dim(2), a.dim(3)});
  for (int i = 0; i < n; ++i) {
    std::memcpy(y.data() + static_cast<int64_t>(i) * (ca + cb) * hw,
                a.data() + static_cast<int64_t>(i) * ca * hw,
                static_cast<size_t>(ca) * hw * sizeof(float));
    std::memcpy(y.data() + (static_cast<int64_t>(i) * (ca + cb) + ca) * hw,
                b.data() + static_cast<int64_t>(i) * cb * hw,
                static_cast<size_t>(cb) * hw * sizeof(float));
  }
  return y;
}

void split_channels(const Tensor& grad, int ca, Tensor* ga, Tensor* gb) {
  int n = grad.dim(0), c = grad.dim(1), h = grad.dim(2), w = grad.dim(3);
  int cb = c - ca, hw = h * w;
  *ga = Tensor({n, ca, h, w});
  *gb = Tensor({n, cb, h, w});
  for (int i = 0; i < n; ++i) {
    std::memcpy(ga->data() + static_cast<int64_t>(i) * ca * hw,
                grad.data() + static_cast<int64_t>(i) * c * hw,
                static_cast<size_t>(ca) * hw * sizeof(float));
    std::memcpy(gb->data() + static_cast<int64_t>(i) * cb * hw,
                grad.data() + (static_cast<int64_t>(i) * c + ca) * hw,
                static_cast<size_t>(cb) * hw * sizeof(float));
  }
}

double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels, Tensor* dlogits,
                             Tensor* probs) {
  int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw ValidationError("cross entropy: label count mismatch");
  if (dlogits) *dlogits = Tensor({n, k});
  if (probs) *probs = Tensor({n, k});
  double total = 0.0;
  std::vector<double> p(static_cast<size_t>(k));
  for (int i = 0; i < n; ++i) {
    const float* z = logits.data() + static_cast<int64_t>(i) * k;
    double zmax = z[0];
    for (int j = 1; j < k; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      p[static_cast<size_t>(j)] = std::exp(static_cast<double>(z[j]) - zmax);
      sum += p[static_cast<size_t>(j)];
    }
    int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= k) throw ValidationError("cross entropy: label out of range");
    total += -(static_cast<double>(z[y]) - zmax - std::log(sum));
    for (int j = 0; j < k; ++j) {
      double pj = p[static_cast<size_t>(j)] / sum;
      if (probs) (*probs)[static_cast<int64_t>(i) * k + j] = static_cast<float>(pj);
      if (dlogits)
        (*dlogits)[static_cast<int64_t>(i) * k + j] =
            static_cast<float>((pj - (j == y ? 1.0 : 0.0)) / n);
    }
  }
  double loss = total / n;
  if (!std::isfinite(loss)) throw NumericsError("cross entropy loss is not finite");
  return loss;
}

double cw_margin_value(const float* logits, int num_classes, int label) {
  double other = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < num_classes; ++j)
    if (j != label) other = std::max(other, static_cast<double>(logits[j]));
  return static_cast<double>(logits[label]) - other;
}

double cw_margin_loss_row(const float* logits, int num_classes, int label,
                          double confidence, float* dz) {
  int runner = -1;
  double other = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < num_classes; ++j) {
    if (j == label) continue;
    if (logits[j] > other) {
      other = logits[j];
      runner = j;
    }
  }
  double margin = static_cast<double>(logits[label]) - other;
  if (dz) {
    std::fill(dz, dz + num_classes, 0.0f);
    if (margin > -confidence) {
      dz[label] = 1.0f;
      dz[runner] = -1.0f;
    }
  }
  return std::max(margin, -confidence);
}

std::vector<int> argmax_rows(const Tensor& logits) {
  int n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float* z = logits.data() + static_cast<int64_t>(i) * k;
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (z[j] > z[best]) best = j;
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

}  // namespace advlab
