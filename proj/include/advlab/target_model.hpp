#pragma once

#include <memory>
#include <string>
#include <vector>

#include "advlab/checkpoint.hpp"
#include "advlab/config.hpp"
#include "advlab/dataset.hpp"
#include "advlab/gradient_model.hpp"
#include "advlab/layers.hpp"
#include "advlab/optim.hpp"

namespace advlab {

inline constexpr int kEmbeddingDim = 512;

// Backbone mapping image batches to embeddings [N, embedding_dim].
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual Tensor forward(const Tensor& images, bool training) = 0;
  virtual Tensor backward(const Tensor& grad_embedding, bool want_input_grad,
                          bool param_grads) = 0;
  virtual void collect(std::vector<ParamRef>& out) = 0;
  virtual void collect_state(std::vector<StateRef>& out) = 0;
  virtual int embedding_dim() const = 0;
};

// Classifier-over-encoder composition. The split is explicit so the
// embedding space is addressable: defended inference may splice a restorer
// between encode() and classify().
class TargetModel final : public GradientModel {
 public:
  // arch: small_cnn | resnet_mini
  TargetModel(const DatasetDescriptor& desc, const std::string& arch,
              uint64_t seed);

  const DatasetDescriptor& descriptor() const { return desc_; }
  const std::string& arch() const { return arch_; }
  int num_classes() const override { return desc_.num_classes; }
  int embedding_dim() const { return kEmbeddingDim; }

  Tensor encode(const Tensor& images, bool training = false);
  Tensor classify(const Tensor& embeddings);
  Tensor logits(const Tensor& images) override;
  std::vector<int> predict(const Tensor& images);

  // d(loss)/d(images), evaluation mode, no parameter gradients.
  Tensor input_gradient(const Tensor& images, const std::vector<int>& labels,
                        const LossSpec& loss,
                        Tensor* logits_out = nullptr) override;
  // d(cross-entropy)/d(embeddings) through the classifier head alone.
  Tensor embedding_gradient(const Tensor& embeddings,
                            const std::vector<int>& labels,
                            double* loss_out = nullptr);

  double train_step(const Tensor& images, const std::vector<int>& labels,
                    AdamOptimizer& opt);

  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  std::vector<ParamRef> trainables();
  std::vector<StateRef> state();
  uint64_t parameter_digest();

  Checkpoint to_checkpoint(const TrainConfig& config,
                           std::map<std::string, double> metrics) const;
  static TargetModel from_checkpoint(const Checkpoint& ckpt);

 private:
  DatasetDescriptor desc_;
  std::string arch_;
  std::unique_ptr<Encoder> encoder_;
  Dense classifier_;
  bool frozen_ = false;
};

struct TargetTrainMetrics {
  std::vector<double> epoch_mean_loss;
  std::vector<double> epoch_validation_accuracy;  // empty without a val set
  double final_accuracy = 0.0;                    // on `test` when given
};

// Plain supervised training of the target. Aborts with NumericsError on a
// non-finite loss. epochs_target == 0 leaves the model untouched.
TargetTrainMetrics train_target(TargetModel& model, const ExampleSet& train,
                                const TrainConfig& config,
                                const ExampleSet* validation = nullptr,
                                const ExampleSet* test = nullptr);

double model_accuracy(TargetModel& model, const ExampleSet& set,
                      int batch_size = 256);
double model_accuracy(TargetModel& model, const Tensor& images,
                      const std::vector<int>& labels, int batch_size = 256);

}  // namespace advlab
