// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace ghostlab {

namespace {

constexpr uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

uint64_t splitmix64(uint64_t& x) {
  uint64_t z = (x += kGoldenGamma);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

RngStream::RngStream(uint64_t master_seed, uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  uint64_t s = master_seed + kGoldenGamma * (stream_id + 1);
  for (auto& w : state_) w = splitmix64(s);
}

uint64_t RngStream::next_u64() {
  const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_double_pos() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::gaussian(double mean, double sigma) {
  if (sigma < 0.0 || !std::isfinite(sigma)) throw std::domain_error("gaussian: sigma must be >= 0");
  if (sigma == 0.0) return mean;
  const double u1 = next_double_pos();
  const double u2 = next_double();
  return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

int64_t RngStream::poisson(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::domain_error("poisson: lambda must be finite and >= 0");
  }
  if (lambda == 0.0) return 0;

  if (lambda < 30.0) {
    // Knuth product method.
    const double limit = std::exp(-lambda);
    double prod = 1.0;
    int64_t k = 0;
    do {
      ++k;
      prod *= next_double_pos();
    } while (prod > limit);
    return k - 1;
  }

  // PTRS transformed rejection (Hormann 1993).
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = next_double() - 0.5;
    const double v = next_double_pos();
    const double us = 0.5 - std::fabs(u);
    const auto k = static_cast<int64_t>(std::floor((2.0 * a / us + b) * u + lambda + 0.43));
    if (us >= 0.07 && v <= vr) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -lambda + static_cast<double>(k) * loglam - std::lgamma(static_cast<double>(k) + 1.0)) {
      return k;
    }
  }
}

int64_t RngStream::binomial(int64_t n, double p) {
  if (p < 0.0 || p > 1.0) throw std::domain_error("binomial: p must be in [0,1]");
  int64_t c = 0;
  for (int64_t i = 0; i < n; ++i) {
    if (next_double() < p) ++c;
  }
  return c;
}

}  // namespace ghostlab
