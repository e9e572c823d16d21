// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "ghostlab/tensor.hpp"

namespace ghostlab {

/// Mean over pixels of the squared difference.
double mse(const TensorF& a, const TensorF& b);

/// Mean local SSIM over valid positions of an 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1. Inputs must be
/// 2-D with both extents >= 11.
double ssim(const TensorF& a, const TensorF& b);

/// ssim value plus its gradient with respect to `a` (used by the training
/// loss; the value matches ssim() exactly).
double ssim_with_grad(const TensorF& a, const TensorF& b, TensorF& grad_a);

/// (1/(T-1)) sum_t mean_px || (pred_{t+1}-pred_t) - (truth_{t+1}-truth_t) ||^2
/// over [T,H,W] stacks.
double temporal_consistency(const TensorF& pred, const TensorF& truth);

/// 10 log10(mean(signal^2) / mean((noisy-signal)^2)); +inf when the noise
/// power is zero.
double snr_db(const TensorF& signal, const TensorF& noisy);

struct MetricsReport {
  std::vector<double> frame_mse;
  std::vector<double> frame_ssim;
  double mean_mse = 0.0, std_mse = 0.0;
  double mean_ssim = 0.0, std_ssim = 0.0;
  double temporal = 0.0;
  double wall_ms = 0.0;
};

/// Per-frame MSE/SSIM plus sequence summaries for [T,H,W] stacks.
MetricsReport evaluate_sequence(const TensorF& pred, const TensorF& truth);

}  // namespace ghostlab
