#include "advlab/restorer.hpp"

#include "advlab/errors.hpp"
#include "advlab/rng.hpp"

namespace advlab {

std::vector<int> Restorer::width_schedule(int d) {
  if (d <= 0 || d % 16 != 0)
    throw ConfigError("restorer dimension must be a positive multiple of 16");
  return {d, d / 2, d / 4, d / 16, d / 4, d / 2, d};
}

Restorer::Restorer(int embedding_dim, uint64_t seed)
    : embedding_dim_(embedding_dim) {
  auto widths = width_schedule(embedding_dim);
  RngStream rng(seed, "restorer-init");
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    fc_.emplace_back("restorer.fc" + std::to_string(i + 1), widths[i],
                     widths[i + 1]);
    fc_.back().init_he(rng);
  }
  act_.resize(fc_.size());
}

std::vector<int> Restorer::layer_widths() const {
  std::vector<int> out;
  for (const auto& fc : fc_) out.push_back(fc.out_dim());
  return out;
}

Tensor Restorer::forward(const Tensor& embeddings) {
  if (embeddings.ndim() != 2 || embeddings.dim(1) != embedding_dim_)
    throw ValidationError("restorer expects [N," +
                          std::to_string(embedding_dim_) + "], got " +
                          embeddings.shape_str());
  Tensor t = embeddings;
  for (size_t i = 0; i < fc_.size(); ++i)
    t = act_[i].forward(fc_[i].forward(t));
  return t;
}

Tensor Restorer::backward(const Tensor& grad_out, bool param_grads) {
  Tensor d = grad_out;
  for (size_t i = fc_.size(); i-- > 0;)
    d = fc_[i].backward(act_[i].backward(d), true, param_grads);
  return d;
}

std::vector<ParamRef> Restorer::trainables() {
  std::vector<ParamRef> out;
  for (auto& fc : fc_) fc.collect(out);
  return out;
}

std::vector<StateRef> Restorer::state() {
  std::vector<StateRef> out;
  for (auto& fc : fc_) fc.collect_state(out);
  return out;
}

uint64_t Restorer::parameter_digest() {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& s : state())
    h = fnv1a64(s.value->data(),
                static_cast<size_t>(s.value->size()) * sizeof(float), h);
  return h;
}

Checkpoint Restorer::to_checkpoint(const TrainConfig& config,
                                   std::map<std::string, double> metrics) const {
  Checkpoint ckpt;
  ckpt.component_kind = "restorer";
  ckpt.config_snapshot = {{"embedding_dim", embedding_dim_},
                          {"train", config.to_json()}};
  ckpt.metrics = std::move(metrics);
  auto* self = const_cast<Restorer*>(this);
  for (const auto& s : self->state()) ckpt.parameters.emplace_back(s.name, *s.value);
  return ckpt;
}

Restorer Restorer::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.component_kind != "restorer")
    throw ValidationError("checkpoint holds a " + ckpt.component_kind +
                          ", expected a restorer");
  Restorer r(ckpt.config_snapshot.at("embedding_dim").get<int>(), 0);
  for (auto& s : r.state()) {
    const Tensor& stored = ckpt.find(s.name);
    if (!stored.same_shape(*s.value))
      throw ValidationError("checkpoint tensor " + s.name + " has shape " +
                            stored.shape_str() + ", expected " +
                            s.value->shape_str());
    *s.value = stored;
  }
  return r;
}

}  // namespace advlab
