// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ghostlab {

void DetectorSpec::validate() const {
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw std::invalid_argument("detector: efficiency must be in (0,1]");
  }
  if (dark_count_rate < 0.0) throw std::invalid_argument("detector: dark rate must be >= 0");
  if (afterpulse_prob < 0.0 || afterpulse_prob >= 1.0) {
    throw std::invalid_argument("detector: afterpulse_prob must be in [0,1)");
  }
  if (crosstalk_prob < 0.0 || crosstalk_prob >= 1.0) {
    throw std::invalid_argument("detector: crosstalk_prob must be in [0,1)");
  }
  if (!(integration_time_s > 0.0)) {
    throw std::invalid_argument("detector: integration time must be > 0");
  }
  if (dead_time_ns < 0.0) throw std::invalid_argument("detector: dead time must be >= 0");
}

DetectorSpec detector_preset(const std::string& name) {
  DetectorSpec s;
  s.name = name;
  if (name == "snspd") {
    s.efficiency = 0.95;
    s.dark_count_rate = 10.0;
    s.dead_time_ns = 40.0;
    s.afterpulse_prob = 0.0;
    s.crosstalk_prob = 0.0;
    s.timing_jitter_ps = 50.0;
  } else if (name == "spad") {
    s.efficiency = 0.70;
    s.dark_count_rate = 1000.0;
    s.dead_time_ns = 50.0;
    s.afterpulse_prob = 0.01;
    s.crosstalk_prob = 0.0;
    s.timing_jitter_ps = 300.0;
  } else if (name == "sipm") {
    s.efficiency = 0.50;
    s.dark_count_rate = 100000.0;
    s.dead_time_ns = 20.0;
    s.afterpulse_prob = 0.02;
    s.crosstalk_prob = 0.05;
    s.timing_jitter_ps = 100.0;
  } else {
    throw std::invalid_argument("detector: unknown preset: " + name);
  }
  return s;
}

int64_t apply_dead_time(int64_t raw_count, const DetectorSpec& spec) {
  if (raw_count < 0) throw std::invalid_argument("apply_dead_time: negative count");
  if (spec.dead_time_ns <= 0.0) return raw_count;
  const auto cap =
      static_cast<int64_t>(std::floor(spec.integration_time_s / (spec.dead_time_ns * 1e-9)));
  return std::min(raw_count, cap);
}

BucketSeries detect_counts(const TensorF& mu, double n_bar, const DetectorSpec& spec,
                           RngStream& rng) {
  spec.validate();
  if (!(n_bar > 0.0)) throw std::invalid_argument("detect_counts: n_bar must be > 0");
  for (double v : mu.data) {
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("detect_counts: mu outside [0,1]");
  }

  BucketSeries b;
  b.values = TensorF(mu.dims);
  b.mode = BucketMode::counts;
  b.detector = spec.name.empty() ? "custom" : spec.name;
  b.seed = rng.master_seed();
  b.n_bar = n_bar;

  const double dark_rate = spec.dark_count_rate * spec.integration_time_s;
  for (size_t idx = 0; idx < mu.data.size(); ++idx) {
    const int64_t n = rng.poisson(mu.data[idx] * n_bar * spec.efficiency);
    const int64_t d = rng.poisson(dark_rate);
    const int64_t a = rng.binomial(n + d, spec.afterpulse_prob);
    const int64_t c = rng.binomial(n + d + a, spec.crosstalk_prob);
    b.values.data[idx] = static_cast<double>(apply_dead_time(n + d + a + c, spec));
  }
  return b;
}

double signal_to_dark_ratio(double mu_mean, double n_bar, const DetectorSpec& spec) {
  const double dark = spec.dark_count_rate * spec.integration_time_s;
  const double signal = mu_mean * n_bar * spec.efficiency;
  if (dark <= 0.0) return std::numeric_limits<double>::infinity();
  return signal / dark;
}

TensorF counts_to_intensity(const BucketSeries& b, const DetectorSpec& spec) {
  if (b.mode != BucketMode::counts) throw std::invalid_argument("counts_to_intensity: not counts");
  const double gain = (1.0 + spec.afterpulse_prob) * (1.0 + spec.crosstalk_prob);
  const double dark = spec.dark_count_rate * spec.integration_time_s;
  const double denom = b.n_bar * spec.efficiency;
  TensorF mu(b.values.dims);
  for (size_t i = 0; i < b.values.data.size(); ++i) {
    mu.data[i] = std::clamp((b.values.data[i] / gain - dark) / denom, 0.0, 1.0);
  }
  return mu;
}

}  // namespace ghostlab
