#include "advlab/id_training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "advlab/errors.hpp"
#include "advlab/optim.hpp"

namespace advlab {

double id_loss(Denoiser& denoiser, TargetModel& target, const Tensor& images,
               const std::vector<int>& labels, bool denoiser_training_mode) {
  Tensor denoised = denoiser.forward(images, denoiser_training_mode);
  Tensor z = target.classify(target.encode(denoised, false));
  return softmax_cross_entropy(z, labels);
}

double id_loss_backward(Denoiser& denoiser, TargetModel& target,
                        const Tensor& images, const std::vector<int>& labels,
                        bool denoiser_training_mode) {
  Tensor denoised = denoiser.forward(images, denoiser_training_mode);
  Tensor z = target.classify(target.encode(denoised, false));
  Tensor dz;
  double loss = softmax_cross_entropy(z, labels, &dz);
  if (!std::isfinite(loss))
    throw NumericsError("denoiser loss is not finite");
  // Route the gradient through the frozen target down to the denoised
  // pixels, then into the denoiser's parameters.
  Tensor ddenoised = target.input_gradient(denoised, labels,
                                           {LossSpec::kCrossEntropy, 0.0});
  denoiser.backward(ddenoised, /*param_grads=*/true);
  return loss;
}

AttackSet build_mixed_attack_set(TargetModel& target, const ExampleSet& train,
                                 const std::vector<AttackConfig>& attacks,
                                 uint64_t seed) {
  if (attacks.empty())
    throw ConfigError("train_id: at least one attack config is required");
  if (attacks.size() == 1)
    return generate_attack_set(target, train, attacks[0], seed);

  // Partition example indices by round-robin config assignment, attack each
  // slice, then reassemble in source order.
  AttackSet merged;
  merged.method = "mixed";
  merged.epsilon_255 = 0.0;
  merged.epsilon = 0.0;
  merged.seed = seed;
  merged.source_digest = train.content_digest();
  merged.labels = train.labels();
  merged.sources = train.pixels();
  merged.pixels = Tensor(train.pixels().shape());
  int64_t stride = train.descriptor().pixels_per_example();
  for (size_t a = 0; a < attacks.size(); ++a) {
    std::vector<int> idx;
    for (int i = static_cast<int>(a); i < train.size();
         i += static_cast<int>(attacks.size()))
      idx.push_back(i);
    if (idx.empty()) continue;
    ExampleSet slice = train.subset(idx);
    AttackSet part = generate_attack_set(target, slice, attacks[a], seed + a);
    merged.epsilon = std::max(merged.epsilon, part.epsilon);
    merged.epsilon_255 = std::max(merged.epsilon_255, part.epsilon_255);
    for (size_t j = 0; j < idx.size(); ++j)
      std::memcpy(merged.pixels.data() + idx[j] * stride,
                  part.pixels.data() + static_cast<int64_t>(j) * stride,
                  static_cast<size_t>(stride) * sizeof(float));
  }
  return merged;
}

Denoiser train_id(TargetModel& target, const ExampleSet& train,
                  const ExampleSet& validation, const IdTrainOptions& options,
                  IdTrainResult* result) {
  options.train.validate();
  options.augment.validate();
  if (train.size() == 0) throw ConfigError("train_id: empty training set");

  uint64_t digest_before = target.parameter_digest();
  bool was_frozen = target.frozen();
  target.set_frozen(true);

  const auto& desc = train.descriptor();
  uint64_t seed = options.train.seed;

  AttackSet aes = build_mixed_attack_set(target, train, options.attacks, seed);
  if (aes.size() == 0) throw ConfigError("train_id: AE pool is empty");
  RngStream augment_rng(seed, "id-augment");
  ExampleSet enhanced = gaussian_enhance(train, options.augment, augment_rng);

  // Validation AEs for the per-epoch accuracy log, first configured attack.
  ExampleSet val_slice = validation.head(
      std::min(options.validation_ae_limit, validation.size()));
  AttackSet val_aes;
  if (val_slice.size() > 0)
    val_aes = generate_attack_set(target, val_slice, options.attacks[0],
                                  seed ^ 0x76616cULL);

  Denoiser denoiser(desc.channels(), seed);
  AdamOptimizer opt(options.train.learning_rate);
  auto params = denoiser.trainables();

  int n_ae = aes.size(), n_en = enhanced.size();
  int total = n_ae + n_en;
  std::vector<int> order(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;
  RngStream shuffler(seed, "id-epoch-shuffle");

  int64_t stride = desc.pixels_per_example();
  int bs_cfg = options.train.batch_size;

  for (int epoch = 0; epoch < options.train.epochs_id; ++epoch) {
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0, ae_seen = 0, clean_seen = 0;
    for (int start = 0; start < total; start += bs_cfg) {
      int bs = std::min(bs_cfg, total - start);
      Tensor images({bs, desc.channels(), desc.height(), desc.width()});
      std::vector<int> labels(static_cast<size_t>(bs));
      for (int i = 0; i < bs; ++i) {
        int src = order[static_cast<size_t>(start + i)];
        const float* from;
        if (src < n_ae) {
          from = aes.pixels.data() + static_cast<int64_t>(src) * stride;
          labels[static_cast<size_t>(i)] = aes.labels[static_cast<size_t>(src)];
          ++ae_seen;
        } else {
          from = enhanced.pixels().data() + static_cast<int64_t>(src - n_ae) * stride;
          labels[static_cast<size_t>(i)] =
              enhanced.labels()[static_cast<size_t>(src - n_ae)];
          ++clean_seen;
        }
        std::memcpy(images.data() + i * stride, from,
                    static_cast<size_t>(stride) * sizeof(float));
      }
      double loss = id_loss_backward(denoiser, target, images, labels);
      opt.step(params);
      AdamOptimizer::zero_grads(params);
      loss_sum += loss;
      ++batches;
    }
    // Joint-training check: an epoch must touch both pools.
    if (options.train.epochs_id > 0 && (ae_seen == 0 || clean_seen == 0))
      throw ConfigError("train_id: epoch sampled only one source pool");

    IdEpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / std::max(batches, 1);
    log.adversarial_seen = ae_seen;
    log.clean_seen = clean_seen;
    if (val_aes.size() > 0)
      log.validation_ae_accuracy =
          denoise_and_classify(denoiser, target, val_aes.pixels, val_aes.labels)
              .accuracy;
    if (result) result->epochs.push_back(log);
  }

  if (target.parameter_digest() != digest_before)
    throw ValidationError("target model changed during denoiser training");
  target.set_frozen(was_frozen);
  return denoiser;
}

Classification denoise_and_classify(Denoiser& denoiser, TargetModel& target,
                                    const Tensor& images,
                                    const std::vector<int>& true_labels,
                                    int batch_size) {
  int n = images.dim(0);
  int64_t stride = images.size() / n;
  Classification out;
  out.labels.reserve(static_cast<size_t>(n));
  int correct = 0;
  for (int start = 0; start < n; start += batch_size) {
    int bs = std::min(batch_size, n - start);
    Tensor batch({bs, images.dim(1), images.dim(2), images.dim(3)});
    std::memcpy(batch.data(), images.data() + start * stride,
                static_cast<size_t>(bs * stride) * sizeof(float));
    Tensor denoised = denoiser.forward(batch, false);
    auto pred = target.predict(denoised);
    for (int i = 0; i < bs; ++i) {
      out.labels.push_back(pred[static_cast<size_t>(i)]);
      if (pred[static_cast<size_t>(i)] == true_labels[static_cast<size_t>(start + i)])
        ++correct;
    }
  }
  out.accuracy = static_cast<double>(correct) / std::max(n, 1);
  return out;
}

}  // namespace advlab
