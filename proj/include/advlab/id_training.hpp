#pragma once

#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/augment.hpp"
#include "advlab/config.hpp"
#include "advlab/dataset.hpp"
#include "advlab/denoiser.hpp"
#include "advlab/target_model.hpp"

namespace advlab {

struct IdTrainOptions {
  TrainConfig train;                  // epochs_id, learning_rate, batch_size, seed
  std::vector<AttackConfig> attacks;  // AE pool recipe; round-robin per example
  AugmentConfig augment;
  int validation_ae_limit = 512;      // AEs scored for the per-epoch log
};

struct IdEpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double validation_ae_accuracy = 0.0;
  int adversarial_seen = 0;  // samples drawn from the AE pool this epoch
  int clean_seen = 0;        // samples drawn from the enhanced pool
};

struct IdTrainResult {
  std::vector<IdEpochLog> epochs;
};

// One AE per example; multiple configs are assigned round-robin so the pool
// mixes budgets rather than over-fitting the strongest attack.
AttackSet build_mixed_attack_set(TargetModel& target, const ExampleSet& examples,
                                 const std::vector<AttackConfig>& attacks,
                                 uint64_t seed);

// Mean cross-entropy of classify(encode(denoise(images))) against labels.
// The target stays in evaluation mode throughout.
double id_loss(Denoiser& denoiser, TargetModel& target, const Tensor& images,
               const std::vector<int>& labels,
               bool denoiser_training_mode = false);
// Same loss, but also backpropagates into the denoiser's parameter
// gradients. Target parameter gradients are never touched.
double id_loss_backward(Denoiser& denoiser, TargetModel& target,
                        const Tensor& images, const std::vector<int>& labels,
                        bool denoiser_training_mode = true);

// Builds the AE pool once from `train`, joins it with the Gaussian-enhanced
// clean pool, and fits a fresh denoiser for epochs_id epochs of Adam over
// the shuffled union. The target must be trained; it is frozen for the
// duration and its parameter digest is checked before/after.
Denoiser train_id(TargetModel& target, const ExampleSet& train,
                  const ExampleSet& validation, const IdTrainOptions& options,
                  IdTrainResult* result = nullptr);

struct Classification {
  std::vector<int> labels;
  double accuracy = 0.0;
};

Classification denoise_and_classify(Denoiser& denoiser, TargetModel& target,
                                    const Tensor& images,
                                    const std::vector<int>& true_labels,
                                    int batch_size = 128);

}  // namespace advlab
