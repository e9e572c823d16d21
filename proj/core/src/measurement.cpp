// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ghostlab {

TensorF ideal_intensity(const PatternSet& ps, const SceneSequence& seq) {
  if (seq.H() != ps.H || seq.W() != ps.W) {
    throw std::invalid_argument("ideal_intensity: scene/pattern extent mismatch");
  }
  const int64_t T = seq.T(), M = ps.M, n = ps.pixels();
  TensorF mu({T, M});
  for (int64_t t = 0; t < T; ++t) {
    const double* x = seq.frames.data.data() + t * n;
    for (int64_t i = 0; i < M; ++i) {
      const double* h = ps.patterns.data.data() + i * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += h[j] * x[j];
      mu.at(t, i) = acc / ps.row_sums[static_cast<size_t>(i)];
    }
  }
  return mu;
}

BucketSeries classical_detect(const TensorF& mu, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw std::domain_error("classical_detect: sigma must be >= 0");
  BucketSeries b;
  b.values = mu;
  b.mode = BucketMode::analog;
  b.detector = "classical";
  b.seed = rng.master_seed();
  b.sigma = sigma;
  for (auto& v : b.values.data) {
    v = std::clamp(v + rng.gaussian(0.0, sigma), 0.0, 1.0);
  }
  return b;
}

double sigma_for_snr(const TensorF& mu, double snr_db) {
  double p = 0.0;
  for (double v : mu.data) p += v * v;
  p /= static_cast<double>(mu.data.size());
  if (p <= 0.0) throw std::invalid_argument("sigma_for_snr: all-zero intensities");
  return std::sqrt(p / std::pow(10.0, snr_db / 10.0));
}

}  // namespace ghostlab
