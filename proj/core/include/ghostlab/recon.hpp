// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "ghostlab/patterns.hpp"
#include "ghostlab/tensor.hpp"

namespace ghostlab {

/// sign(v) * max(|v| - tau, 0).
double soft_threshold(double v, double tau);

/// Differential ghost imaging (Ferri-style):
///   xhat = <b H> - (<b>/<R>) <R H>,   <.> averaging over patterns,
/// then affinely rescaled to [0,1] (constant results map to all-zeros).
TensorF dgi(const PatternSet& ps, const std::vector<double>& buckets);

/// Minimum-norm least squares via SVD; the factorization is kept so
/// repeated frames reuse it. Singular values below 1e-10 * sigma_max are
/// truncated.
class PinvSolver {
 public:
  explicit PinvSolver(const PatternSet& ps);
  ~PinvSolver();
  PinvSolver(PinvSolver&&) noexcept;
  PinvSolver& operator=(PinvSolver&&) noexcept;

  /// Raw (unclamped) minimum-norm solution as an H x W image.
  TensorF solve_raw(const std::vector<double>& buckets) const;
  /// solve_raw clamped to [0,1] for reporting.
  TensorF solve(const std::vector<double>& buckets) const;

  double factorize_ms() const { return factorize_ms_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int64_t H_ = 0, W_ = 0;
  double factorize_ms_ = 0.0;
};

TensorF pseudo_inverse(const PatternSet& ps, const std::vector<double>& buckets);

struct FistaConfig {
  int iterations = 200;
  double lambda_reg = -1.0;  // < 0 selects the auto rule 0.01 * ||A^T b||_inf
  int power_iterations = 50;
  double lipschitz_hint = 0.0;  // > 0 reuses a previous estimate for this pattern set
};

struct FistaResult {
  TensorF image;          // clamped to [0,1]
  TensorF image_raw;      // unclamped Phi * alpha
  double lambda = 0.0;    // the lambda actually used
  double lipschitz = 0.0;
  std::vector<double> objective;  // 0.5||A a - b||^2 + lambda ||a||_1 per iteration
};

/// FISTA on min_a 0.5 || Psi Phi a - b ||^2 + lambda ||a||_1 with the
/// orthonormal 2-D DCT as Phi; xhat = Phi a. Lipschitz constant from
/// power iteration on (Psi Phi)^T (Psi Phi) with a 2% safety factor.
FistaResult fista(const PatternSet& ps, const std::vector<double>& buckets,
                  const FistaConfig& cfg);

}  // namespace ghostlab
