#include "advlab/optim.hpp"

#include <cmath>

#include "advlab/errors.hpp"

namespace advlab {

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw ConfigError("Adam learning rate must be > 0");
}

void AdamOptimizer::step(const std::vector<ParamRef>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->shape());
      v_.emplace_back(p.value->shape());
    }
  }
  if (m_.size() != params.size())
    throw ConfigError("Adam stepped with a different parameter list");
  ++t_;
  double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].value;
    const Tensor& g = *params[i].grad;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t j = 0; j < w.size(); ++j) {
      float gj = g[j];
      m[j] = static_cast<float>(b1_) * m[j] + static_cast<float>(1.0 - b1_) * gj;
      v[j] = static_cast<float>(b2_) * v[j] + static_cast<float>(1.0 - b2_) * gj * gj;
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      w[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

void AdamOptimizer::zero_grads(const std::vector<ParamRef>& params) {
  for (const auto& p : params) p.grad->zero();
}

}  // namespace advlab
