// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "ghostlab/patterns.hpp"
#include "ghostlab/rng.hpp"
#include "ghostlab/scene.hpp"
#include "ghostlab/tensor.hpp"

namespace ghostlab {

enum class BucketMode { analog, counts };

/// T x M detector outputs plus provenance.
struct BucketSeries {
  TensorF values;  // [T, M]; analog in [0,1], counts nonnegative integers
  BucketMode mode = BucketMode::analog;
  std::string detector = "classical";
  uint64_t seed = 0;
  double n_bar = 0.0;  // photon budget (counts mode)
  double sigma = 0.0;  // Gaussian noise level (analog mode)
};

/// mu[t][i] = <H_i, x^(t)> / R_i. Dividing by the pattern row sum keeps
/// mu in [0,1], so mu * n_bar reads as a fraction of the photon budget.
TensorF ideal_intensity(const PatternSet& ps, const SceneSequence& seq);

/// b = clip(mu + eps, 0, 1), eps ~ N(0, sigma^2) i.i.d., row-major draw
/// order from the supplied stream.
BucketSeries classical_detect(const TensorF& mu, double sigma, RngStream& rng);

/// sigma such that 10*log10(mean(mu^2) / sigma^2) = snr_db.
double sigma_for_snr(const TensorF& mu, double snr_db);

}  // namespace ghostlab
