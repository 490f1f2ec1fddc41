#include "advlab/augment.hpp"

#include <algorithm>
#include <cstring>

namespace advlab {

ExampleSet gaussian_enhance(const ExampleSet& examples,
                            const AugmentConfig& config, RngStream& rng) {
  config.validate();
  const auto& desc = examples.descriptor();
  int n = examples.size();
  int copies = config.rounds + (config.include_original ? 1 : 0);
  int64_t stride = desc.pixels_per_example();

  Tensor px({n * copies, desc.channels(), desc.height(), desc.width()});
  std::vector<int> labels(static_cast<size_t>(n) * copies);

  int64_t out = 0;
  if (config.include_original) {
    std::memcpy(px.data(), examples.pixels().data(),
                static_cast<size_t>(n * stride) * sizeof(float));
    std::copy(examples.labels().begin(), examples.labels().end(), labels.begin());
    out = n;
  }
  for (int r = 0; r < config.rounds; ++r) {
    float sigma = static_cast<float>(config.sigmas[static_cast<size_t>(r)]);
    const float* src = examples.pixels().data();
    float* dst = px.data() + out * stride;
    for (int64_t i = 0; i < n * stride; ++i)
      dst[i] = std::clamp(src[i] + rng.gaussian(0.0f, sigma), 0.0f, 1.0f);
    std::copy(examples.labels().begin(), examples.labels().end(),
              labels.begin() + out);
    out += n;
  }
  return ExampleSet(desc, std::move(px), std::move(labels));
}

}  // namespace advlab
