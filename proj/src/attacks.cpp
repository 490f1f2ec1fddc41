#include "advlab/attacks.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "advlab/errors.hpp"
#include "advlab/layers.hpp"
#include "advlab/rng.hpp"

namespace advlab {

double normalize_epsilon(double epsilon_255) {
  if (!(epsilon_255 > 0.0)) throw ConfigError("epsilon_255 must be > 0");
  return epsilon_255 / 255.0;
}

namespace {

inline float sign0(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

void clamp_project(Tensor& x, const Tensor& src, double eps) {
  for (int64_t i = 0; i < x.size(); ++i) {
    float lo = std::max(0.0f, src[i] - static_cast<float>(eps));
    float hi = std::min(1.0f, src[i] + static_cast<float>(eps));
    x[i] = std::clamp(x[i], lo, hi);
  }
}

}  // namespace

Tensor fgsm(GradientModel& model, const Tensor& x, const std::vector<int>& y,
            double eps) {
  if (eps < 0.0) throw ConfigError("fgsm epsilon must be >= 0");
  Tensor g = model.input_gradient(x, y, {LossSpec::kCrossEntropy, 0.0});
  Tensor out = x;
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(out[i] + static_cast<float>(eps) * sign0(g[i]), 0.0f, 1.0f);
  return out;
}

Tensor bim(GradientModel& model, const Tensor& x, const std::vector<int>& y,
           double eps, int iterations, double step) {
  if (iterations < 1) throw ConfigError("bim needs iterations >= 1");
  Tensor adv = x;
  for (int it = 0; it < iterations; ++it) {
    Tensor g = model.input_gradient(adv, y, {LossSpec::kCrossEntropy, 0.0});
    for (int64_t i = 0; i < adv.size(); ++i)
      adv[i] += static_cast<float>(step) * sign0(g[i]);
    clamp_project(adv, x, eps);
  }
  return adv;
}

Tensor cw_linf(GradientModel& model, const Tensor& x, const std::vector<int>& y,
               double eps, int iterations, double step, double confidence) {
  if (iterations < 1) throw ConfigError("cw needs iterations >= 1");
  int n = x.dim(0);
  int k = model.num_classes();
  int64_t stride = x.size() / n;

  Tensor best = x;
  std::vector<double> best_margin(static_cast<size_t>(n),
                                  std::numeric_limits<double>::infinity());
  Tensor adv = x;

  auto consider = [&](const Tensor& cand, const Tensor& z) {
    for (int i = 0; i < n; ++i) {
      double m = cw_margin_value(z.data() + static_cast<int64_t>(i) * k, k,
                                 y[static_cast<size_t>(i)]);
      if (m < best_margin[static_cast<size_t>(i)]) {
        best_margin[static_cast<size_t>(i)] = m;
        std::memcpy(best.data() + i * stride, cand.data() + i * stride,
                    static_cast<size_t>(stride) * sizeof(float));
      }
    }
  };

  for (int it = 0; it < iterations; ++it) {
    Tensor z;
    Tensor g = model.input_gradient(adv, y, {LossSpec::kCwMargin, confidence}, &z);
    consider(adv, z);
    for (int64_t i = 0; i < adv.size(); ++i)
      adv[i] -= static_cast<float>(step) * sign0(g[i]);
    clamp_project(adv, x, eps);
  }
  consider(adv, model.logits(adv));
  return best;
}

AdversarialExample AttackSet::example(int i) const {
  AdversarialExample ae;
  int64_t stride = pixels.size() / size();
  ae.pixels = Tensor({pixels.dim(1), pixels.dim(2), pixels.dim(3)});
  ae.source_pixels = Tensor(ae.pixels.shape());
  std::memcpy(ae.pixels.data(), pixels.data() + i * stride,
              static_cast<size_t>(stride) * sizeof(float));
  std::memcpy(ae.source_pixels.data(), sources.data() + i * stride,
              static_cast<size_t>(stride) * sizeof(float));
  ae.label = labels[static_cast<size_t>(i)];
  ae.epsilon = epsilon;
  ae.method = method;
  return ae;
}

double AttackSet::max_linf_deviation() const {
  double worst = 0.0;
  for (int64_t i = 0; i < pixels.size(); ++i)
    worst = std::max(worst,
                     std::abs(static_cast<double>(pixels[i]) - sources[i]));
  return worst;
}

void AttackSet::validate_budget(double tol) const {
  for (int64_t i = 0; i < pixels.size(); ++i) {
    if (!(pixels[i] >= 0.0f && pixels[i] <= 1.0f))
      throw ValidationError("attack set pixel outside [0,1] at flat index " +
                            std::to_string(i));
    if (std::abs(static_cast<double>(pixels[i]) - sources[i]) > epsilon + tol)
      throw ValidationError("attack budget exceeded at flat index " +
                            std::to_string(i));
  }
}

AdversarialExample attack_example(GradientModel& model, const Example& ex,
                                  const AttackConfig& config) {
  config.validate();
  double eps = normalize_epsilon(config.epsilon_255);
  const auto& s = ex.pixels.shape();
  Tensor batch = ex.pixels.reshaped({1, s[0], s[1], s[2]});
  std::vector<int> y{ex.label};
  Tensor adv;
  if (config.method == "fgsm") {
    adv = fgsm(model, batch, y, eps);
  } else if (config.method == "bim") {
    adv = bim(model, batch, y, eps, config.effective_iterations(),
              config.step_size);
  } else {
    adv = cw_linf(model, batch, y, eps, config.effective_iterations(),
                  config.step_size, config.confidence_margin);
  }
  AdversarialExample ae;
  ae.pixels = adv.reshaped(ex.pixels.shape());
  ae.source_pixels = ex.pixels;
  ae.label = ex.label;
  ae.epsilon = eps;
  ae.method = config.method;
  return ae;
}

AttackSet generate_attack_set(GradientModel& model, const ExampleSet& examples,
                              const AttackConfig& config, uint64_t seed,
                              int batch_size) {
  config.validate();
  if (examples.size() == 0)
    throw ConfigError("generate_attack_set: example collection is empty");
  double eps = normalize_epsilon(config.epsilon_255);

  AttackSet set;
  set.method = config.method;
  set.epsilon_255 = config.epsilon_255;
  set.epsilon = eps;
  set.seed = seed;
  set.source_digest = examples.content_digest();
  set.labels = examples.labels();
  set.sources = examples.pixels();
  set.pixels = Tensor(examples.pixels().shape());

  int64_t stride = examples.descriptor().pixels_per_example();
  for (int start = 0; start < examples.size(); start += batch_size) {
    int bs = std::min(batch_size, examples.size() - start);
    Tensor x = examples.batch(start, bs);
    std::vector<int> y = examples.label_slice(start, bs);
    Tensor adv;
    try {
      if (config.method == "fgsm") {
        adv = fgsm(model, x, y, eps);
      } else if (config.method == "bim") {
        adv = bim(model, x, y, eps, config.effective_iterations(),
                  config.step_size);
      } else {
        adv = cw_linf(model, x, y, eps, config.effective_iterations(),
                      config.step_size, config.confidence_margin);
      }
    } catch (const NumericsError& e) {
      throw NumericsError(std::string(e.what()) + " (examples " +
                          std::to_string(start) + ".." +
                          std::to_string(start + bs - 1) + ")");
    }
    std::memcpy(set.pixels.data() + start * stride, adv.data(),
                static_cast<size_t>(bs * stride) * sizeof(float));
  }
  set.validate_budget();
  return set;
}

namespace {

constexpr char kSetMagic[8] = {'A', 'D', 'V', 'S', 'E', 'T', '1', '\n'};
constexpr int kSetVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void save_attack_set(const AttackSet& set, const std::filesystem::path& path) {
  nlohmann::json header = {
      {"version", kSetVersion},
      {"method", set.method},
      {"epsilon_255", set.epsilon_255},
      {"epsilon", set.epsilon},
      {"seed", set.seed},
      {"source_digest", set.source_digest},
      {"count", set.size()},
      {"shape", set.pixels.shape()},
  };
  std::string blob(kSetMagic, sizeof(kSetMagic));
  std::string hdr = header.dump();
  put_u32(blob, static_cast<uint32_t>(hdr.size()));
  blob += hdr;
  auto append = [&blob](const void* p, size_t bytes) {
    size_t off = blob.size();
    blob.resize(off + bytes);
    std::memcpy(blob.data() + off, p, bytes);
  };
  append(set.pixels.data(), static_cast<size_t>(set.pixels.size()) * sizeof(float));
  append(set.sources.data(), static_cast<size_t>(set.sources.size()) * sizeof(float));
  append(set.labels.data(), set.labels.size() * sizeof(int));
  uint32_t crc = static_cast<uint32_t>(crc32(
      0L, reinterpret_cast<const Bytef*>(blob.data()), static_cast<uInt>(blob.size())));
  put_u32(blob, crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write attack set: " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error("short write to " + path.string());
}

AttackSet load_attack_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open attack set: " + path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (blob.size() < sizeof(kSetMagic) + 8)
    throw IntegrityError("attack set too small: " + path.string());
  if (std::memcmp(blob.data(), kSetMagic, sizeof(kSetMagic)) != 0)
    throw ValidationError("not an attack set file: " + path.string());
  size_t body = blob.size() - 4;
  uint32_t stored = get_u32(blob.data() + body);
  uint32_t crc = static_cast<uint32_t>(crc32(0L, blob.data(), static_cast<uInt>(body)));
  if (crc != stored) throw IntegrityError("checksum mismatch in " + path.string());

  uint32_t hdr_len = get_u32(blob.data() + sizeof(kSetMagic));
  size_t off = sizeof(kSetMagic) + 4;
  nlohmann::json header = nlohmann::json::parse(
      blob.begin() + static_cast<long>(off), blob.begin() + static_cast<long>(off + hdr_len));
  off += hdr_len;
  if (header.at("version").get<int>() != kSetVersion)
    throw VersionError("attack set " + path.string() + " has version " +
                       std::to_string(header.at("version").get<int>()));

  AttackSet set;
  set.method = header.at("method").get<std::string>();
  set.epsilon_255 = header.at("epsilon_255").get<double>();
  set.epsilon = header.at("epsilon").get<double>();
  set.seed = header.at("seed").get<uint64_t>();
  set.source_digest = header.at("source_digest").get<uint64_t>();
  set.pixels = Tensor(header.at("shape").get<std::vector<int>>());
  set.sources = Tensor(set.pixels.shape());
  int count = header.at("count").get<int>();
  set.labels.resize(static_cast<size_t>(count));

  auto take = [&](void* dst, size_t bytes) {
    if (off + bytes > body)
      throw IntegrityError("payload truncated in " + path.string());
    std::memcpy(dst, blob.data() + off, bytes);
    off += bytes;
  };
  take(set.pixels.data(), static_cast<size_t>(set.pixels.size()) * sizeof(float));
  take(set.sources.data(), static_cast<size_t>(set.sources.size()) * sizeof(float));
  take(set.labels.data(), set.labels.size() * sizeof(int));
  if (off != body) throw IntegrityError("trailing bytes in " + path.string());
  return set;
}

}  // namespace advlab
