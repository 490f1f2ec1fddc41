#include "advlab/fr_training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>

#include "advlab/errors.hpp"
#include "advlab/optim.hpp"
#include "advlab/rng.hpp"

namespace advlab {

int64_t ClassifiedSpaces::p1_total() const {
  int64_t n = 0;
  for (const auto& pool : p1) n += static_cast<int64_t>(pool.size());
  return n;
}

int64_t ClassifiedSpaces::p2_total() const {
  int64_t n = 0;
  for (const auto& pool : p2) n += static_cast<int64_t>(pool.size());
  return n;
}

std::vector<int> ClassifiedSpaces::classes_without_p1() const {
  std::vector<int> out;
  for (size_t c = 0; c < p1.size(); ++c)
    if (p1[c].embeddings.empty()) out.push_back(static_cast<int>(c));
  return out;
}

namespace {

void route_batch(TargetModel& target, Denoiser& denoiser, const Tensor& images,
                 const std::vector<int>& labels,
                 ClassifiedSpaces::Source source, ClassifiedSpaces& spaces) {
  Tensor denoised = denoiser.forward(images, false);
  Tensor emb = target.encode(denoised, false);
  auto pred = argmax_rows(target.classify(emb));
  int d = emb.dim(1);
  for (int i = 0; i < emb.dim(0); ++i) {
    const float* row = emb.data() + static_cast<int64_t>(i) * d;
    std::vector<float> h(row, row + d);
    int y = labels[static_cast<size_t>(i)];
    auto& pool = (pred[static_cast<size_t>(i)] == y ? spaces.p1 : spaces.p2);
    pool[static_cast<size_t>(y)].embeddings.push_back(std::move(h));
    pool[static_cast<size_t>(y)].sources.push_back(source);
  }
}

}  // namespace

ClassifiedSpaces partition_spaces(TargetModel& target, Denoiser& denoiser,
                                  const ExampleSet& cleans,
                                  const AttackSet& aes, int batch_size) {
  ClassifiedSpaces spaces;
  spaces.embedding_dim = target.embedding_dim();
  spaces.num_classes = target.num_classes();
  spaces.p1.resize(static_cast<size_t>(spaces.num_classes));
  spaces.p2.resize(static_cast<size_t>(spaces.num_classes));

  for (int start = 0; start < cleans.size(); start += batch_size) {
    int bs = std::min(batch_size, cleans.size() - start);
    route_batch(target, denoiser, cleans.batch(start, bs),
                cleans.label_slice(start, bs),
                ClassifiedSpaces::Source::kDenoisedClean, spaces);
  }
  int n_ae = aes.size();
  int64_t stride = n_ae > 0 ? aes.pixels.size() / n_ae : 0;
  for (int start = 0; start < n_ae; start += batch_size) {
    int bs = std::min(batch_size, n_ae - start);
    Tensor images({bs, aes.pixels.dim(1), aes.pixels.dim(2), aes.pixels.dim(3)});
    std::memcpy(images.data(), aes.pixels.data() + start * stride,
                static_cast<size_t>(bs * stride) * sizeof(float));
    std::vector<int> labels(aes.labels.begin() + start,
                            aes.labels.begin() + start + bs);
    route_batch(target, denoiser, images, labels,
                ClassifiedSpaces::Source::kDenoisedAdversarial, spaces);
  }

  for (int c : spaces.classes_without_p1())
    std::cerr << "warning: class " << c
              << " has no correctly-classified embeddings; it will be "
                 "excluded from restorer pairs\n";
  return spaces;
}

std::vector<float> convex_mix(std::span<const float> a,
                              std::span<const float> b, double alpha) {
  if (a.size() != b.size())
    throw ValidationError("convex_mix: dimension mismatch " +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  std::vector<float> out(a.size());
  for (size_t i = 0; i < a.size(); ++i)
    out[i] = static_cast<float>(alpha * a[i] + (1.0 - alpha) * b[i]);
  return out;
}

namespace {

// Peel-one-off evaluation: combine the first k-1 points under renormalized
// weights, then blend the last point back in. The recursion bottoms out at a
// single point; a zero leading-weight block falls through to the last point.
std::vector<double> nested_combination(
    const std::vector<std::vector<float>>& points,
    const std::vector<double>& weights, size_t k) {
  size_t d = points[0].size();
  if (k == 1) {
    std::vector<double> out(d);
    for (size_t i = 0; i < d; ++i) out[i] = points[0][i];
    return out;
  }
  double lead = 0.0;
  for (size_t i = 0; i + 1 < k; ++i) lead += weights[i];
  std::vector<double> out(d, 0.0);
  if (lead > 0.0) {
    std::vector<double> inner_w(weights.begin(),
                                weights.begin() + static_cast<long>(k - 1));
    for (auto& w : inner_w) w /= lead;
    std::vector<double> inner = nested_combination(points, inner_w, k - 1);
    for (size_t i = 0; i < d; ++i) out[i] = lead * inner[i];
  }
  for (size_t i = 0; i < d; ++i) out[i] += weights[k - 1] * points[k - 1][i];
  return out;
}

}  // namespace

bool verify_hull_closure(const std::vector<std::vector<float>>& points,
                         const std::vector<double>& weights, double tol) {
  if (points.size() != weights.size() || points.size() < 2)
    throw ValidationError("verify_hull_closure needs k >= 2 points with one "
                          "weight each");
  size_t d = points[0].size();
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ValidationError("hull weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > tol)
    throw ValidationError("hull weights must sum to 1 (got " +
                          std::to_string(sum) + ")");
  for (const auto& p : points)
    if (p.size() != d)
      throw ValidationError("hull points must share one dimension");

  std::vector<double> direct(d, 0.0);
  for (size_t j = 0; j < points.size(); ++j)
    for (size_t i = 0; i < d; ++i) direct[i] += weights[j] * points[j][i];

  std::vector<double> nested = nested_combination(points, weights, points.size());

  for (size_t i = 0; i < d; ++i)
    if (std::abs(direct[i] - nested[i]) > tol) return false;

  // Envelope membership: the combination cannot escape the coordinate-wise
  // min/max of its constituents.
  for (size_t i = 0; i < d; ++i) {
    double lo = points[0][i], hi = points[0][i];
    for (const auto& p : points) {
      lo = std::min(lo, static_cast<double>(p[i]));
      hi = std::max(hi, static_cast<double>(p[i]));
    }
    if (direct[i] < lo - tol || direct[i] > hi + tol) return false;
  }
  return true;
}

double fr_loss(Restorer& restorer, TargetModel& target, const Tensor& mixed,
               const std::vector<int>& labels) {
  Tensor z = target.classify(restorer.forward(mixed));
  return softmax_cross_entropy(z, labels);
}

double fr_loss_backward(Restorer& restorer, TargetModel& target,
                        const Tensor& mixed, const std::vector<int>& labels) {
  Tensor restored = restorer.forward(mixed);
  double loss = 0.0;
  Tensor drestored = target.embedding_gradient(restored, labels, &loss);
  if (!std::isfinite(loss)) throw NumericsError("restorer loss is not finite");
  restorer.backward(drestored, /*param_grads=*/true);
  return loss;
}

Restorer train_fr(TargetModel& target, const ClassifiedSpaces& spaces,
                  const TrainConfig& config, FrTrainResult* result) {
  config.validate();
  if (spaces.p1_total() == 0)
    throw ConfigError("train_fr: every class has an empty p1 pool; nothing "
                      "to preserve or restore");

  Restorer restorer(spaces.embedding_dim, config.seed);
  AdamOptimizer opt(config.learning_rate);
  auto params = restorer.trainables();
  RngStream rng(config.seed, "fr-pair-sampling");

  int d = spaces.embedding_dim;
  int bs_cfg = config.batch_size;

  for (int epoch = 0; epoch < config.epochs_fr; ++epoch) {
    // Assemble this epoch's mixed pairs class by class.
    std::vector<std::vector<float>> mixed;
    std::vector<int> labels;
    double alpha_sum = 0.0;
    int64_t alpha_n = 0;
    for (int y = 0; y < spaces.num_classes; ++y) {
      const auto& pool1 = spaces.p1[static_cast<size_t>(y)];
      const auto& pool2 = spaces.p2[static_cast<size_t>(y)];
      if (pool1.embeddings.empty()) continue;  // cannot mix without p1
      size_t pairs = std::max(pool1.size(), pool2.size());
      for (size_t p = 0; p < pairs; ++p) {
        const auto& h_correct =
            pool1.embeddings[rng.uniform_int(static_cast<uint32_t>(pool1.size()))];
        const auto& h_other =
            pool2.embeddings.empty()
                ? pool1.embeddings[rng.uniform_int(
                      static_cast<uint32_t>(pool1.size()))]
                : pool2.embeddings[rng.uniform_int(
                      static_cast<uint32_t>(pool2.size()))];
        double alpha = rng.open_unit();
        alpha_sum += alpha;
        ++alpha_n;
        mixed.push_back(convex_mix(h_correct, h_other, alpha));
        labels.push_back(y);
      }
    }
    std::vector<int> order(mixed.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);

    double loss_sum = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(bs_cfg)) {
      size_t bs = std::min<size_t>(static_cast<size_t>(bs_cfg),
                                   order.size() - start);
      Tensor batch({static_cast<int>(bs), d});
      std::vector<int> batch_labels(bs);
      for (size_t i = 0; i < bs; ++i) {
        int src = order[start + i];
        std::memcpy(batch.data() + static_cast<int64_t>(i) * d,
                    mixed[static_cast<size_t>(src)].data(),
                    static_cast<size_t>(d) * sizeof(float));
        batch_labels[i] = labels[static_cast<size_t>(src)];
      }
      loss_sum += fr_loss_backward(restorer, target, batch, batch_labels);
      opt.step(params);
      AdamOptimizer::zero_grads(params);
      ++batches;
    }

    if (result) {
      FrEpochLog log;
      log.epoch = epoch;
      log.mean_loss = loss_sum / std::max(batches, 1);
      log.alpha_mean = alpha_n > 0 ? alpha_sum / static_cast<double>(alpha_n) : 0.0;
      log.p1_retention = restored_pool_accuracy(restorer, target, spaces, true);
      log.p2_recovery = restored_pool_accuracy(restorer, target, spaces, false);
      result->epochs.push_back(log);
    }
  }
  return restorer;
}

double restored_pool_accuracy(Restorer& restorer, TargetModel& target,
                              const ClassifiedSpaces& spaces, bool over_p1,
                              int batch_size) {
  const auto& pools = over_p1 ? spaces.p1 : spaces.p2;
  std::vector<const std::vector<float>*> rows;
  std::vector<int> labels;
  for (int y = 0; y < spaces.num_classes; ++y)
    for (const auto& h : pools[static_cast<size_t>(y)].embeddings) {
      rows.push_back(&h);
      labels.push_back(y);
    }
  if (rows.empty()) return 0.0;
  int d = spaces.embedding_dim;
  int correct = 0;
  for (size_t start = 0; start < rows.size();
       start += static_cast<size_t>(batch_size)) {
    size_t bs = std::min<size_t>(static_cast<size_t>(batch_size),
                                 rows.size() - start);
    Tensor batch({static_cast<int>(bs), d});
    for (size_t i = 0; i < bs; ++i)
      std::memcpy(batch.data() + static_cast<int64_t>(i) * d,
                  rows[start + i]->data(), static_cast<size_t>(d) * sizeof(float));
    auto pred = argmax_rows(target.classify(restorer.forward(batch)));
    for (size_t i = 0; i < bs; ++i)
      if (pred[i] == labels[start + i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace advlab
