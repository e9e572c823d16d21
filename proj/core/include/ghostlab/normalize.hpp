// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "ghostlab/tensor.hpp"

namespace ghostlab {

enum class NormKind { none, sqrt_, log1p, minmax, zscore, anscombe, freeman_tukey };

NormKind norm_kind_from_string(const std::string& s);
std::string to_string(NormKind k);

/// Pointwise photon-count normalizer. minmax/zscore carry stats fitted
/// once on a calibration batch and frozen; the other kinds are stateless.
struct Normalizer {
  NormKind kind = NormKind::none;
  double stat_a = 0.0;  // min (minmax) or mean (zscore)
  double stat_b = 0.0;  // max (minmax) or std (zscore)

  double apply(double n) const;
  /// Algebraic inverse; out-of-range inputs clamp to 0 and set *clamped.
  double invert(double z, bool* clamped = nullptr) const;

  TensorF apply(const TensorF& t) const;
  TensorF invert(const TensorF& t) const;

  std::string serialize_json() const;
  static Normalizer from_json(const std::string& text);
};

/// Fits the data-dependent kinds on `counts`; stateless kinds ignore the
/// data. Throws on degenerate fits (constant data for minmax/zscore).
Normalizer fit_normalizer(NormKind kind, const TensorF& counts);

}  // namespace ghostlab
