#pragma once

#include "advlab/config.hpp"
#include "advlab/dataset.hpp"
#include "advlab/rng.hpp"

namespace advlab {

// Multi-round Gaussian enhancement: per round r, every example is copied
// with N(0, sigma_r^2) noise added and re-clamped to [0,1]. Originals are
// prepended when config.include_original. Labels are never altered; output
// size is |examples| * (rounds + include_original).
ExampleSet gaussian_enhance(const ExampleSet& examples,
                            const AugmentConfig& config, RngStream& rng);

}  // namespace advlab
