// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ghostlab/patterns.hpp"
#include "ghostlab/rng.hpp"
#include "ghostlab/tensor.hpp"

namespace ghostlab {

/// DynGhost model shape. Blocks alternate between attention over the
/// pattern axis within a frame ('S') and attention over the frame axis at
/// a fixed pattern index ('T'); the layout string spells the stack from
/// input to output. Toy defaults reconstruct 4 frames of 16x16 from 24
/// buckets per frame.
struct DynGhostConfig {
  int64_t T = 4, M = 24, H = 16, W = 16;
  int64_t embed_dim = 16;  // D; channel D-1 carries the bucket scalar
  int64_t heads = 2;
  std::string block_layout = "STST";
  int64_t mlp_hidden = 64;
  int64_t head_hidden = 256;
  bool use_temporal_pe = true;

  int64_t pixels() const { return H * W; }
  int64_t head_dim() const { return embed_dim / heads; }
  void validate() const;
};

/// Named, enumerable parameter store; the optimizer and the gradient
/// checker traverse entries in insertion order.
class ParamStore {
 public:
  TensorF& add(const std::string& name, TensorF t);
  TensorF& get(const std::string& name);
  const TensorF& get(const std::string& name) const;
  bool has(const std::string& name) const;

  size_t size() const { return entries_.size(); }
  const std::string& name(size_t i) const { return names_[i]; }
  TensorF& tensor(size_t i) { return entries_[i]; }
  const TensorF& tensor(size_t i) const { return entries_[i]; }

  int64_t total_values() const;
  /// Maps a flat index over the concatenation of all entries to
  /// (entry index, offset within entry).
  std::pair<size_t, int64_t> locate(int64_t flat_index) const;

  /// Same names/shapes, all values zero.
  ParamStore zeros_like() const;

 private:
  std::vector<std::string> names_;
  std::vector<TensorF> entries_;
  std::unordered_map<std::string, size_t> index_;
};

/// Deterministic initialization from a seed: 1/sqrt(fan_in) Gaussian
/// weights, 0.02-sigma positional tables, zero biases, unit layer-norm.
ParamStore init_params(const DynGhostConfig& cfg, uint64_t seed);

struct LossWeights {
  double mse = 1.0;
  double ssim = 0.5;
  double temporal = 0.1;
};

struct LossValue {
  double total = 0.0;
  double mse_term = 0.0;      // L_MSE
  double ssim_term = 0.0;     // L_SSIM = mean_t (1 - SSIM)
  double temporal_term = 0.0; // L_temp (0 when T == 1)
};

/// z[t,i] = [Embed(H_i) || b[t,i]] + PE_spatial(i) + PE_temporal(t).
/// Buckets must already be normalized by the configured Normalizer.
TensorF embed_tokens(const PatternSet& ps, const TensorF& buckets_norm, const ParamStore& params,
                     const DynGhostConfig& cfg);

enum class AttentionMode { spatial, temporal };

/// Softmax attention probabilities per group, dims [heads, L, L]; filled
/// when a capture pointer is passed to attention_block or forward.
struct AttnCapture {
  std::vector<TensorF> group_probs;
};

/// One pre-norm transformer encoder block (multi-head self-attention +
/// 2-layer GELU MLP, residual connections) applied along the pattern axis
/// per frame (spatial) or the frame axis per pattern (temporal).
TensorF attention_block(const TensorF& tokens, AttentionMode mode, const ParamStore& params,
                        int block_index, const DynGhostConfig& cfg,
                        AttnCapture* capture = nullptr);

/// Full model: embed, blocks per layout, then per frame a 2-layer MLP head
/// on the flattened M x D token block with an elementwise sigmoid. Output
/// is [T, H, W], strictly inside (0, 1).
TensorF dynghost_forward(const PatternSet& ps, const TensorF& buckets_norm,
                         const ParamStore& params, const DynGhostConfig& cfg,
                         AttnCapture* capture = nullptr);

/// L = w_mse L_MSE + w_ssim L_SSIM + w_temp L_temp with the metrics-module
/// definitions (pixel-mean MSE, 11x11 Gaussian SSIM). T = 1 sets L_temp = 0.
LossValue loss_total(const TensorF& pred, const TensorF& truth, const LossWeights& w = {});

/// Forward + exact reverse-mode gradients of loss_total with respect to
/// every parameter. Gradients are accumulated into `grads` (zero it first
/// when starting a batch). Throws with the offending parameter name if a
/// non-finite value appears.
LossValue dynghost_loss_and_grad(const PatternSet& ps, const TensorF& buckets_norm,
                                 const TensorF& truth, const ParamStore& params,
                                 const DynGhostConfig& cfg, const LossWeights& w,
                                 ParamStore& grads);

}  // namespace ghostlab
