// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>

#include "ghostlab/measurement.hpp"
#include "ghostlab/rng.hpp"
#include "ghostlab/tensor.hpp"

namespace ghostlab {

/// Physical photon-counting detector parameters. Timing jitter is carried
/// for reporting but has no count-level effect in this model.
struct DetectorSpec {
  std::string name;
  double efficiency = 1.0;        // eta_eff in (0, 1]
  double dark_count_rate = 0.0;   // lambda_d, Hz
  double dead_time_ns = 0.0;
  double afterpulse_prob = 0.0;   // [0, 1)
  double crosstalk_prob = 0.0;    // [0, 1)
  double timing_jitter_ps = 0.0;  // stored, behaviorally inert
  double integration_time_s = 1e-3;

  void validate() const;
};

/// Catalog presets: snspd, spad, sipm. Integration time defaults to 1 ms.
DetectorSpec detector_preset(const std::string& name);

/// Per entry, row-major, draws in the order n, d, a, c from the supplied
/// stream:
///   n ~ Poisson(mu * n_bar * eta_eff)        signal
///   d ~ Poisson(lambda_d * dt)               dark counts
///   a ~ Binomial(n + d, afterpulse_prob)
///   c ~ Binomial(n + d + a, crosstalk_prob)
/// output = dead-time cap applied to n + d + a + c.
BucketSeries detect_counts(const TensorF& mu, double n_bar, const DetectorSpec& spec,
                           RngStream& rng);

/// Non-paralyzable saturation: min(raw, floor(dt / dead_time)); identity
/// when dead_time is 0.
int64_t apply_dead_time(int64_t raw_count, const DetectorSpec& spec);

/// (mu_mean * n_bar * eta_eff) / (lambda_d * dt); +inf when dark is zero.
double signal_to_dark_ratio(double mu_mean, double n_bar, const DetectorSpec& spec);

/// Unbiased intensity estimate from counts: invert the expected chain
/// E[b] = (mu n_bar eta + lambda_d dt)(1+p_a)(1+p_c), clamped to [0,1].
TensorF counts_to_intensity(const BucketSeries& b, const DetectorSpec& spec);

}  // namespace ghostlab
