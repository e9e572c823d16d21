// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "ghostlab/rng.hpp"
#include "ghostlab/tensor.hpp"

namespace ghostlab {

/// M illumination patterns with values in [0, 1] plus their row sums
/// R_i = sum_j H_ij (all > 0).
struct PatternSet {
  int64_t M = 0, H = 0, W = 0;
  TensorF patterns;              // [M, H, W]
  std::vector<double> row_sums;  // length M

  int64_t pixels() const { return H * W; }
};

/// Synthetic speckle: per pattern, a unit-variance Gaussian white field is
/// smoothed with a weight-normalized Gaussian kernel of sigma = grain_px/2
/// (correlation length ~ grain_px), then affinely mapped through
/// (f - min) / max(max - min, 0.1). Non-degenerate fields hit 0 and 1
/// exactly; ultra-smooth fields (grain ~ image size) stay near-constant
/// instead of being stretched to full range.
PatternSet generate_speckle(int64_t M, int64_t H, int64_t W, double grain_px, RngStream& rng);

/// i.i.d. {0,1} patterns with P(1) = p; all-zero patterns are re-drawn so
/// every row sum stays positive.
PatternSet generate_bernoulli(int64_t M, int64_t H, int64_t W, double p, RngStream& rng);

/// Thresholds each pattern at its own median, in place. Values become
/// exactly {0,1}; all-zero/all-one outcomes are nudged to keep row sums
/// positive.
void binarize_patterns(PatternSet& ps);

/// Row i = pattern i flattened row-major; shape [M, H*W].
TensorF sensing_matrix(const PatternSet& ps);

/// beta = M / (H*W).
double sampling_ratio(const PatternSet& ps);

void recompute_row_sums(PatternSet& ps);

}  // namespace ghostlab
