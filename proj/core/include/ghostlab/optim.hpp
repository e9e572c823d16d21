// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "ghostlab/dynghost.hpp"
#include "ghostlab/rng.hpp"

namespace ghostlab {

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
};

/// First/second moment accumulators, ParamStore-shaped.
struct AdamWState {
  AdamWConfig cfg;
  int64_t step = 0;
  ParamStore m, v;

  static AdamWState init(const ParamStore& params, const AdamWConfig& cfg);
};

/// Decoupled-weight-decay update:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * mhat / (sqrt(vhat) + eps) - lr * wd * theta
void adamw_step(ParamStore& params, const ParamStore& grads, AdamWState& state);

struct GradCheckReport {
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
  int64_t probes = 0;
};

/// Central-difference check of `analytic` against the scalar loss
/// evaluated at params +- h on `probe_count` randomly chosen parameters.
/// Relative error per probe: |ga - gf| / max(|ga|, |gf|, 1e-8).
GradCheckReport gradient_check_fn(const std::function<double(const ParamStore&)>& loss,
                                  const ParamStore& params, const ParamStore& analytic,
                                  int64_t probe_count, double h, RngStream& rng);

/// Model-level wrapper: runs dynghost_loss_and_grad for the analytic side.
GradCheckReport dynghost_gradient_check(const PatternSet& ps, const TensorF& buckets_norm,
                                        const TensorF& truth, const ParamStore& params,
                                        const DynGhostConfig& cfg, const LossWeights& w,
                                        int64_t probe_count, double h, RngStream& rng);

struct TrainSample {
  TensorF buckets_norm;  // [T, M]
  TensorF truth;         // [T, H, W]
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 4;
  AdamWConfig optimizer;
  LossWeights loss;
};

struct TrainResult {
  std::vector<double> step_loss;  // mean batch loss per optimizer step
  int64_t steps = 0;
};

/// Mini-batch training: Fisher-Yates shuffle per epoch from `rng`,
/// gradients averaged over the batch, one AdamW step per batch.
TrainResult train(ParamStore& params, const DynGhostConfig& cfg, const PatternSet& ps,
                  const std::vector<TrainSample>& dataset, const TrainConfig& tc, RngStream& rng);

}  // namespace ghostlab
