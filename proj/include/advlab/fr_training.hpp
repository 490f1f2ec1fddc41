#pragma once

#include <span>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/config.hpp"
#include "advlab/dataset.hpp"
#include "advlab/denoiser.hpp"
#include "advlab/restorer.hpp"
#include "advlab/target_model.hpp"

namespace advlab {

// Embedding pool split by classifier verdict: p1 holds embeddings the
// classifier assigns their true label, p2 the misclassified rest. Both
// denoised cleans (possibly damaged by the denoiser) and denoised
// adversarial examples flow through the same partition, tagged by origin.
struct ClassifiedSpaces {
  enum class Source { kDenoisedClean, kDenoisedAdversarial };
  struct Pool {
    std::vector<std::vector<float>> embeddings;
    std::vector<Source> sources;
    size_t size() const { return embeddings.size(); }
  };

  int embedding_dim = 0;
  int num_classes = 0;
  std::vector<Pool> p1, p2;  // indexed by true label

  int64_t p1_total() const;
  int64_t p2_total() const;
  int64_t total() const { return p1_total() + p2_total(); }
  std::vector<int> classes_without_p1() const;
};

// Embeds denoise(x) for every clean example and AE and routes each embedding
// by argmax-vs-truth. Classes that end up with an empty p1 are reported on
// stderr; the restorer trainer skips them.
ClassifiedSpaces partition_spaces(TargetModel& target, Denoiser& denoiser,
                                  const ExampleSet& cleans,
                                  const AttackSet& aes, int batch_size = 128);

// alpha * a + (1 - alpha) * b, elementwise; dimensions must match.
std::vector<float> convex_mix(std::span<const float> a,
                              std::span<const float> b, double alpha);

// Checks the k-point hull-closure identity: the direct weighted sum must
// equal the peel-one-off inductive evaluation (renormalizing the leading
// weights at each level) within tol, and the result must sit inside the
// per-coordinate min/max envelope of the points. Weights must be
// nonnegative and sum to 1 within tol.
bool verify_hull_closure(const std::vector<std::vector<float>>& points,
                         const std::vector<double>& weights, double tol);

// Mean cross-entropy of classify(restore(mixed)) against labels.
double fr_loss(Restorer& restorer, TargetModel& target, const Tensor& mixed,
               const std::vector<int>& labels);
// Same, accumulating restorer parameter gradients; the classifier head is a
// fixed loss oracle.
double fr_loss_backward(Restorer& restorer, TargetModel& target,
                        const Tensor& mixed, const std::vector<int>& labels);

struct FrEpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double p1_retention = 0.0;  // restored accuracy over the p1 pool
  double p2_recovery = 0.0;   // restored accuracy over the p2 pool
  double alpha_mean = 0.0;    // mean of the mixing draws this epoch
};

struct FrTrainResult {
  std::vector<FrEpochLog> epochs;
};

// Fits a fresh restorer for epochs_fr epochs. Per epoch and class y (with
// nonempty p1), max(|p1[y]|,|p2[y]|) pairs are drawn uniformly with
// replacement, each mixed with a fresh alpha ~ U(0,1). Classes with empty p2
// pair two p1 draws so correct behaviour is preserved there.
Restorer train_fr(TargetModel& target, const ClassifiedSpaces& spaces,
                  const TrainConfig& config, FrTrainResult* result = nullptr);

// Restored accuracy over one pool: argmax classify(restore(h)) == class.
double restored_pool_accuracy(Restorer& restorer, TargetModel& target,
                              const ClassifiedSpaces& spaces, bool over_p1,
                              int batch_size = 256);

}  // namespace advlab
