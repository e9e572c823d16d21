// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace ghostlab {

/// Deterministic random stream. Substreams are derived by hash-mixing, not
/// by jumping, so (master_seed, stream_id) alone identifies a stream
/// regardless of creation order:
///
///   state0..3 = splitmix64 sequence seeded with
///               master_seed + GOLDEN_GAMMA * (stream_id + 1)
///
/// and the generator itself is xoshiro256++. Identical (seed, id) pairs
/// replay the identical draw sequence; distinct ids give independent
/// streams. Streams are single-owner: never share one mutably across
/// threads, split by stream_id instead.
class RngStream {
 public:
  RngStream(uint64_t master_seed, uint64_t stream_id);

  uint64_t master_seed() const { return master_seed_; }
  uint64_t stream_id() const { return stream_id_; }

  uint64_t next_u64();
  /// Uniform in [0, 1), 53-bit resolution.
  double next_double();
  /// Uniform in (0, 1], safe for log().
  double next_double_pos();

  /// N(mean, sigma^2) via Box-Muller (one fresh pair of uniforms per draw).
  /// sigma == 0 returns mean exactly. Throws std::domain_error on sigma < 0.
  double gaussian(double mean, double sigma);

  /// Poisson(lambda). Knuth's product method below the lambda = 30 seam,
  /// Hormann's PTRS transformed rejection at and above it. Throws
  /// std::domain_error on negative or non-finite lambda.
  int64_t poisson(double lambda);

  /// Binomial(n, p) as n Bernoulli trials (count scales are small here).
  int64_t binomial(int64_t n, double p);

 private:
  uint64_t state_[4];
  uint64_t master_seed_ = 0;
  uint64_t stream_id_ = 0;
};

/// Spec'd constructor spelling: stream derived from (master_seed, stream_id).
inline RngStream rng_substream(uint64_t master_seed, uint64_t stream_id) {
  return RngStream(master_seed, stream_id);
}

}  // namespace ghostlab
