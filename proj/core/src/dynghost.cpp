// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/dynghost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ghostlab/metrics.hpp"

namespace ghostlab {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

/// y[l,:] = x[l,:] W^T + b with W row-major [out, in].
void linear_fwd(const double* x, const TensorF& W, const TensorF& b, double* y, int64_t L,
                int64_t in, int64_t out) {
  for (int64_t l = 0; l < L; ++l) {
    for (int64_t o = 0; o < out; ++o) {
      const double* wrow = W.data.data() + o * in;
      const double* xrow = x + l * in;
      double acc = b.data[static_cast<size_t>(o)];
      for (int64_t i = 0; i < in; ++i) acc += wrow[i] * xrow[i];
      y[l * out + o] = acc;
    }
  }
}

/// Accumulates dx (+=), dW (+=) and db (+=) for linear_fwd.
void linear_bwd(const double* x, const TensorF& W, const double* dy, double* dx, TensorF& dW,
                TensorF& db, int64_t L, int64_t in, int64_t out) {
  for (int64_t l = 0; l < L; ++l) {
    const double* dyrow = dy + l * out;
    const double* xrow = x + l * in;
    for (int64_t o = 0; o < out; ++o) {
      const double g = dyrow[o];
      if (g == 0.0) continue;
      db.data[static_cast<size_t>(o)] += g;
      double* dwrow = dW.data.data() + o * in;
      for (int64_t i = 0; i < in; ++i) dwrow[i] += g * xrow[i];
    }
    if (dx) {
      double* dxrow = dx + l * in;
      for (int64_t o = 0; o < out; ++o) {
        const double g = dyrow[o];
        if (g == 0.0) continue;
        const double* wrow = W.data.data() + o * in;
        for (int64_t i = 0; i < in; ++i) dxrow[i] += g * wrow[i];
      }
    }
  }
}

struct LnCache {
  std::vector<double> mean, rstd, xhat;  // [L], [L], [L*D]
};

void layernorm_fwd(const double* x, const TensorF& gamma, const TensorF& beta, double* y,
                   LnCache& c, int64_t L, int64_t D) {
  c.mean.resize(static_cast<size_t>(L));
  c.rstd.resize(static_cast<size_t>(L));
  c.xhat.resize(static_cast<size_t>(L * D));
  for (int64_t l = 0; l < L; ++l) {
    const double* xr = x + l * D;
    double m = 0.0;
    for (int64_t d = 0; d < D; ++d) m += xr[d];
    m /= static_cast<double>(D);
    double v = 0.0;
    for (int64_t d = 0; d < D; ++d) v += (xr[d] - m) * (xr[d] - m);
    v /= static_cast<double>(D);
    const double rstd = 1.0 / std::sqrt(v + kLnEps);
    c.mean[static_cast<size_t>(l)] = m;
    c.rstd[static_cast<size_t>(l)] = rstd;
    for (int64_t d = 0; d < D; ++d) {
      const double xh = (xr[d] - m) * rstd;
      c.xhat[static_cast<size_t>(l * D + d)] = xh;
      y[l * D + d] = gamma.data[static_cast<size_t>(d)] * xh + beta.data[static_cast<size_t>(d)];
    }
  }
}

/// dx += backward(dy); dgamma/dbeta accumulate.
void layernorm_bwd(const double* dy, const TensorF& gamma, const LnCache& c, double* dx,
                   TensorF& dgamma, TensorF& dbeta, int64_t L, int64_t D) {
  std::vector<double> dxhat(static_cast<size_t>(D));
  for (int64_t l = 0; l < L; ++l) {
    const double* dyr = dy + l * D;
    const double* xh = c.xhat.data() + l * D;
    double m1 = 0.0, m2 = 0.0;
    for (int64_t d = 0; d < D; ++d) {
      dgamma.data[static_cast<size_t>(d)] += dyr[d] * xh[d];
      dbeta.data[static_cast<size_t>(d)] += dyr[d];
      dxhat[static_cast<size_t>(d)] = dyr[d] * gamma.data[static_cast<size_t>(d)];
      m1 += dxhat[static_cast<size_t>(d)];
      m2 += dxhat[static_cast<size_t>(d)] * xh[d];
    }
    m1 /= static_cast<double>(D);
    m2 /= static_cast<double>(D);
    const double rstd = c.rstd[static_cast<size_t>(l)];
    for (int64_t d = 0; d < D; ++d) {
      dx[l * D + d] += rstd * (dxhat[static_cast<size_t>(d)] - m1 - xh[d] * m2);
    }
  }
}

struct GroupCache {
  std::vector<double> x;       // [L*D] gathered block input
  LnCache ln1;
  std::vector<double> u1;      // [L*D]
  std::vector<double> q, k, v; // [L*D]
  std::vector<double> probs;   // [heads*L*L]
  std::vector<double> concat;  // [L*D]
  std::vector<double> x1;      // [L*D] after the attention residual
  LnCache ln2;
  std::vector<double> u2;      // [L*D]
  std::vector<double> a1, g1;  // [L*Dh]
};

struct BlockCache {
  AttentionMode mode = AttentionMode::spatial;
  std::vector<GroupCache> groups;
};

struct HeadCache {
  std::vector<double> a1, g1, logits;  // [Hh], [Hh], [HW]
};

struct ForwardCache {
  TensorF tokens0;
  std::vector<TensorF> block_out;
  std::vector<BlockCache> blocks;
  std::vector<HeadCache> head;
  TensorF pred;
};

int64_t group_count(AttentionMode mode, const DynGhostConfig& cfg) {
  return mode == AttentionMode::spatial ? cfg.T : cfg.M;
}
int64_t group_len(AttentionMode mode, const DynGhostConfig& cfg) {
  return mode == AttentionMode::spatial ? cfg.M : cfg.T;
}
int64_t token_of(AttentionMode mode, const DynGhostConfig& cfg, int64_t g, int64_t l) {
  return mode == AttentionMode::spatial ? g * cfg.M + l : l * cfg.M + g;
}

std::string bname(int block_index, const char* leaf) {
  return "block" + std::to_string(block_index) + "." + leaf;
}

/// Forward through one block for one gathered group; fills the cache.
void block_group_fwd(const ParamStore& p, int block_index, const DynGhostConfig& cfg,
                     GroupCache& gc, int64_t L, TensorF* capture_probs) {
  const int64_t D = cfg.embed_dim, Dh = cfg.mlp_hidden;
  const int64_t heads = cfg.heads, dk = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  gc.u1.resize(static_cast<size_t>(L * D));
  layernorm_fwd(gc.x.data(), p.get(bname(block_index, "ln1.g")), p.get(bname(block_index, "ln1.b")),
                gc.u1.data(), gc.ln1, L, D);

  gc.q.resize(static_cast<size_t>(L * D));
  gc.k.resize(static_cast<size_t>(L * D));
  gc.v.resize(static_cast<size_t>(L * D));
  linear_fwd(gc.u1.data(), p.get(bname(block_index, "attn.wq")), p.get(bname(block_index, "attn.bq")),
             gc.q.data(), L, D, D);
  linear_fwd(gc.u1.data(), p.get(bname(block_index, "attn.wk")), p.get(bname(block_index, "attn.bk")),
             gc.k.data(), L, D, D);
  linear_fwd(gc.u1.data(), p.get(bname(block_index, "attn.wv")), p.get(bname(block_index, "attn.bv")),
             gc.v.data(), L, D, D);

  gc.probs.assign(static_cast<size_t>(heads * L * L), 0.0);
  gc.concat.assign(static_cast<size_t>(L * D), 0.0);
  std::vector<double> row(static_cast<size_t>(L));
  for (int64_t h = 0; h < heads; ++h) {
    const int64_t oh = h * dk;
    for (int64_t l = 0; l < L; ++l) {
      double mx = -1e300;
      for (int64_t j = 0; j < L; ++j) {
        double s = 0.0;
        for (int64_t d = 0; d < dk; ++d) s += gc.q[static_cast<size_t>(l * D + oh + d)] *
                                               gc.k[static_cast<size_t>(j * D + oh + d)];
        row[static_cast<size_t>(j)] = s * scale;
        mx = std::max(mx, row[static_cast<size_t>(j)]);
      }
      double z = 0.0;
      for (int64_t j = 0; j < L; ++j) {
        row[static_cast<size_t>(j)] = std::exp(row[static_cast<size_t>(j)] - mx);
        z += row[static_cast<size_t>(j)];
      }
      double* prow = gc.probs.data() + (h * L + l) * L;
      for (int64_t j = 0; j < L; ++j) prow[j] = row[static_cast<size_t>(j)] / z;
      for (int64_t d = 0; d < dk; ++d) {
        double acc = 0.0;
        for (int64_t j = 0; j < L; ++j) acc += prow[j] * gc.v[static_cast<size_t>(j * D + oh + d)];
        gc.concat[static_cast<size_t>(l * D + oh + d)] = acc;
      }
    }
  }
  if (capture_probs) {
    *capture_probs = TensorF({heads, L, L});
    capture_probs->data = gc.probs;
  }

  gc.x1.resize(static_cast<size_t>(L * D));
  linear_fwd(gc.concat.data(), p.get(bname(block_index, "attn.wo")),
             p.get(bname(block_index, "attn.bo")), gc.x1.data(), L, D, D);
  for (int64_t i = 0; i < L * D; ++i) gc.x1[static_cast<size_t>(i)] += gc.x[static_cast<size_t>(i)];

  gc.u2.resize(static_cast<size_t>(L * D));
  layernorm_fwd(gc.x1.data(), p.get(bname(block_index, "ln2.g")), p.get(bname(block_index, "ln2.b")),
                gc.u2.data(), gc.ln2, L, D);

  gc.a1.resize(static_cast<size_t>(L * Dh));
  gc.g1.resize(static_cast<size_t>(L * Dh));
  linear_fwd(gc.u2.data(), p.get(bname(block_index, "mlp.w1")), p.get(bname(block_index, "mlp.b1")),
             gc.a1.data(), L, D, Dh);
  for (int64_t i = 0; i < L * Dh; ++i) gc.g1[static_cast<size_t>(i)] = gelu(gc.a1[static_cast<size_t>(i)]);
}

/// Completes the block: x2 = x1 + W2 g1 + b2 (separate so the caller can
/// scatter straight into the output tensor).
void block_group_out(const ParamStore& p, int block_index, const DynGhostConfig& cfg,
                     const GroupCache& gc, int64_t L, std::vector<double>& x2) {
  const int64_t D = cfg.embed_dim, Dh = cfg.mlp_hidden;
  x2.resize(static_cast<size_t>(L * D));
  linear_fwd(gc.g1.data(), p.get(bname(block_index, "mlp.w2")), p.get(bname(block_index, "mlp.b2")),
             x2.data(), L, Dh, D);
  for (int64_t i = 0; i < L * D; ++i) x2[static_cast<size_t>(i)] += gc.x1[static_cast<size_t>(i)];
}

/// Reverse of one block group; dx2 in, dx (block input grad) accumulated.
void block_group_bwd(const ParamStore& p, ParamStore& g, int block_index,
                     const DynGhostConfig& cfg, const GroupCache& gc, int64_t L,
                     const double* dx2, double* dx) {
  const int64_t D = cfg.embed_dim, Dh = cfg.mlp_hidden;
  const int64_t heads = cfg.heads, dk = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  // x2 = x1 + mlp(ln2(x1)); start with dx1 = dx2 (residual).
  std::vector<double> dx1(dx2, dx2 + L * D);

  std::vector<double> dg1(static_cast<size_t>(L * Dh), 0.0);
  linear_bwd(gc.g1.data(), p.get(bname(block_index, "mlp.w2")), dx2, dg1.data(),
             g.get(bname(block_index, "mlp.w2")), g.get(bname(block_index, "mlp.b2")), L, Dh, D);

  std::vector<double> da1(static_cast<size_t>(L * Dh));
  for (int64_t i = 0; i < L * Dh; ++i) {
    da1[static_cast<size_t>(i)] = dg1[static_cast<size_t>(i)] * gelu_grad(gc.a1[static_cast<size_t>(i)]);
  }

  std::vector<double> du2(static_cast<size_t>(L * D), 0.0);
  linear_bwd(gc.u2.data(), p.get(bname(block_index, "mlp.w1")), da1.data(), du2.data(),
             g.get(bname(block_index, "mlp.w1")), g.get(bname(block_index, "mlp.b1")), L, D, Dh);

  layernorm_bwd(du2.data(), p.get(bname(block_index, "ln2.g")), gc.ln2, dx1.data(),
                g.get(bname(block_index, "ln2.g")), g.get(bname(block_index, "ln2.b")), L, D);

  // x1 = x + attn_out; residual first.
  for (int64_t i = 0; i < L * D; ++i) dx[i] += dx1[static_cast<size_t>(i)];

  std::vector<double> dconcat(static_cast<size_t>(L * D), 0.0);
  linear_bwd(gc.concat.data(), p.get(bname(block_index, "attn.wo")), dx1.data(), dconcat.data(),
             g.get(bname(block_index, "attn.wo")), g.get(bname(block_index, "attn.bo")), L, D, D);

  std::vector<double> dq(static_cast<size_t>(L * D), 0.0);
  std::vector<double> dk_(static_cast<size_t>(L * D), 0.0);
  std::vector<double> dv(static_cast<size_t>(L * D), 0.0);
  std::vector<double> dprobs(static_cast<size_t>(L));
  std::vector<double> dscores(static_cast<size_t>(L));
  for (int64_t h = 0; h < heads; ++h) {
    const int64_t oh = h * dk;
    for (int64_t l = 0; l < L; ++l) {
      const double* prow = gc.probs.data() + (h * L + l) * L;
      // dprobs[j] = sum_d dconcat[l, oh+d] v[j, oh+d]; dv += probs^T dconcat.
      for (int64_t j = 0; j < L; ++j) {
        double acc = 0.0;
        for (int64_t d = 0; d < dk; ++d) {
          acc += dconcat[static_cast<size_t>(l * D + oh + d)] *
                 gc.v[static_cast<size_t>(j * D + oh + d)];
        }
        dprobs[static_cast<size_t>(j)] = acc;
      }
      for (int64_t j = 0; j < L; ++j) {
        const double pj = prow[j];
        if (pj == 0.0) continue;
        for (int64_t d = 0; d < dk; ++d) {
          dv[static_cast<size_t>(j * D + oh + d)] +=
              pj * dconcat[static_cast<size_t>(l * D + oh + d)];
        }
      }
      double dot = 0.0;
      for (int64_t j = 0; j < L; ++j) dot += dprobs[static_cast<size_t>(j)] * prow[j];
      for (int64_t j = 0; j < L; ++j) {
        dscores[static_cast<size_t>(j)] = prow[j] * (dprobs[static_cast<size_t>(j)] - dot);
      }
      for (int64_t j = 0; j < L; ++j) {
        const double ds = dscores[static_cast<size_t>(j)] * scale;
        if (ds == 0.0) continue;
        for (int64_t d = 0; d < dk; ++d) {
          dq[static_cast<size_t>(l * D + oh + d)] += ds * gc.k[static_cast<size_t>(j * D + oh + d)];
          dk_[static_cast<size_t>(j * D + oh + d)] += ds * gc.q[static_cast<size_t>(l * D + oh + d)];
        }
      }
    }
  }

  std::vector<double> du1(static_cast<size_t>(L * D), 0.0);
  linear_bwd(gc.u1.data(), p.get(bname(block_index, "attn.wq")), dq.data(), du1.data(),
             g.get(bname(block_index, "attn.wq")), g.get(bname(block_index, "attn.bq")), L, D, D);
  linear_bwd(gc.u1.data(), p.get(bname(block_index, "attn.wk")), dk_.data(), du1.data(),
             g.get(bname(block_index, "attn.wk")), g.get(bname(block_index, "attn.bk")), L, D, D);
  linear_bwd(gc.u1.data(), p.get(bname(block_index, "attn.wv")), dv.data(), du1.data(),
             g.get(bname(block_index, "attn.wv")), g.get(bname(block_index, "attn.bv")), L, D, D);

  layernorm_bwd(du1.data(), p.get(bname(block_index, "ln1.g")), gc.ln1, dx,
                g.get(bname(block_index, "ln1.g")), g.get(bname(block_index, "ln1.b")), L, D);
}

TensorF run_block(const TensorF& tokens, AttentionMode mode, const ParamStore& params,
                  int block_index, const DynGhostConfig& cfg, BlockCache* cache,
                  AttnCapture* capture) {
  const int64_t D = cfg.embed_dim;
  const int64_t G = group_count(mode, cfg), L = group_len(mode, cfg);
  TensorF out(tokens.dims);
  BlockCache local;
  BlockCache& bc = cache ? *cache : local;
  bc.mode = mode;
  bc.groups.assign(static_cast<size_t>(G), GroupCache{});

  std::vector<double> x2;
  for (int64_t gidx = 0; gidx < G; ++gidx) {
    GroupCache& gc = bc.groups[static_cast<size_t>(gidx)];
    gc.x.resize(static_cast<size_t>(L * D));
    for (int64_t l = 0; l < L; ++l) {
      const int64_t tok = token_of(mode, cfg, gidx, l);
      std::copy_n(tokens.data.begin() + tok * D, D, gc.x.begin() + l * D);
    }
    TensorF* cap = nullptr;
    if (capture) {
      capture->group_probs.emplace_back();
      cap = &capture->group_probs.back();
    }
    block_group_fwd(params, block_index, cfg, gc, L, cap);
    block_group_out(params, block_index, cfg, gc, L, x2);
    for (int64_t l = 0; l < L; ++l) {
      const int64_t tok = token_of(mode, cfg, gidx, l);
      std::copy_n(x2.begin() + l * D, D, out.data.begin() + tok * D);
    }
  }
  return out;
}

std::vector<AttentionMode> parse_layout(const DynGhostConfig& cfg) {
  std::vector<AttentionMode> modes;
  for (char c : cfg.block_layout) {
    if (c == 'S' || c == 's') {
      modes.push_back(AttentionMode::spatial);
    } else if (c == 'T' || c == 't') {
      modes.push_back(AttentionMode::temporal);
    } else {
      throw std::invalid_argument("dynghost: block layout must be a string over {S, T}");
    }
  }
  return modes;
}

TensorF forward_impl(const PatternSet& ps, const TensorF& buckets_norm, const ParamStore& params,
                     const DynGhostConfig& cfg, ForwardCache* cache, AttnCapture* capture) {
  cfg.validate();
  const int64_t T = cfg.T, M = cfg.M, D = cfg.embed_dim;
  const int64_t HW = cfg.pixels(), Hh = cfg.head_hidden;

  TensorF tokens = embed_tokens(ps, buckets_norm, params, cfg);
  const auto modes = parse_layout(cfg);

  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc.tokens0 = tokens;
  fc.blocks.assign(modes.size(), BlockCache{});
  fc.block_out.clear();

  for (size_t k = 0; k < modes.size(); ++k) {
    tokens = run_block(tokens, modes[k], params, static_cast<int>(k), cfg, &fc.blocks[k], capture);
    fc.block_out.push_back(tokens);
  }

  TensorF pred({T, cfg.H, cfg.W});
  fc.head.assign(static_cast<size_t>(T), HeadCache{});
  const TensorF& w1 = params.get("head.w1");
  const TensorF& b1 = params.get("head.b1");
  const TensorF& w2 = params.get("head.w2");
  const TensorF& b2 = params.get("head.b2");
  for (int64_t t = 0; t < T; ++t) {
    HeadCache& hc = fc.head[static_cast<size_t>(t)];
    const double* hflat = tokens.data.data() + t * M * D;
    hc.a1.resize(static_cast<size_t>(Hh));
    linear_fwd(hflat, w1, b1, hc.a1.data(), 1, M * D, Hh);
    hc.g1.resize(static_cast<size_t>(Hh));
    for (int64_t i = 0; i < Hh; ++i) hc.g1[static_cast<size_t>(i)] = gelu(hc.a1[static_cast<size_t>(i)]);
    hc.logits.resize(static_cast<size_t>(HW));
    linear_fwd(hc.g1.data(), w2, b2, hc.logits.data(), 1, Hh, HW);
    for (int64_t j = 0; j < HW; ++j) {
      pred.data[static_cast<size_t>(t * HW + j)] =
          1.0 / (1.0 + std::exp(-hc.logits[static_cast<size_t>(j)]));
    }
  }
  fc.pred = pred;
  return pred;
}

}  // namespace

void DynGhostConfig::validate() const {
  if (T < 1 || M < 1 || H < 1 || W < 1) throw std::invalid_argument("dynghost: bad extents");
  if (embed_dim < 2) throw std::invalid_argument("dynghost: embed_dim must be >= 2");
  if (heads < 1 || embed_dim % heads != 0) {
    throw std::invalid_argument("dynghost: embed_dim must be divisible by heads");
  }
  if (mlp_hidden < 1 || head_hidden < 1) throw std::invalid_argument("dynghost: bad hidden widths");
  parse_layout(*this);
}

TensorF& ParamStore::add(const std::string& name, TensorF t) {
  if (index_.count(name)) throw std::invalid_argument("params: duplicate name " + name);
  index_[name] = entries_.size();
  names_.push_back(name);
  entries_.push_back(std::move(t));
  return entries_.back();
}

TensorF& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("params: no entry named " + name);
  return entries_[it->second];
}

const TensorF& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("params: no entry named " + name);
  return entries_[it->second];
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

int64_t ParamStore::total_values() const {
  int64_t n = 0;
  for (const auto& t : entries_) n += t.numel();
  return n;
}

std::pair<size_t, int64_t> ParamStore::locate(int64_t flat_index) const {
  for (size_t i = 0; i < entries_.size(); ++i) {
    const int64_t n = entries_[i].numel();
    if (flat_index < n) return {i, flat_index};
    flat_index -= n;
  }
  throw std::out_of_range("params: flat index out of range");
}

ParamStore ParamStore::zeros_like() const {
  ParamStore z;
  for (size_t i = 0; i < entries_.size(); ++i) z.add(names_[i], TensorF(entries_[i].dims, 0.0));
  return z;
}

ParamStore init_params(const DynGhostConfig& cfg, uint64_t seed) {
  cfg.validate();
  RngStream rng(seed, 0x70617261);  // dedicated substream for parameters
  ParamStore p;
  const int64_t D = cfg.embed_dim, N = cfg.pixels();

  const auto gauss_fill = [&](TensorF& t, double sigma) {
    for (auto& v : t.data) v = rng.gaussian(0.0, sigma);
  };

  // 0.5 / sqrt(fan_in) keeps pre-activations inside the well-conditioned
  // part of the GELU, so no unit starts saturated.
  gauss_fill(p.add("embed.w", TensorF({D - 1, N})), 0.5 / std::sqrt(static_cast<double>(N)));
  p.add("embed.b", TensorF({D - 1}, 0.0));
  gauss_fill(p.add("pe_spatial", TensorF({cfg.M, D})), 0.02);
  gauss_fill(p.add("pe_temporal", TensorF({cfg.T, D})), 0.02);

  const double ws = 0.5 / std::sqrt(static_cast<double>(D));
  for (size_t k = 0; k < cfg.block_layout.size(); ++k) {
    const int bi = static_cast<int>(k);
    p.add(bname(bi, "ln1.g"), TensorF({D}, 1.0));
    p.add(bname(bi, "ln1.b"), TensorF({D}, 0.0));
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
      gauss_fill(p.add(bname(bi, w), TensorF({D, D})), ws);
    }
    for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) {
      p.add(bname(bi, b), TensorF({D}, 0.0));
    }
    p.add(bname(bi, "ln2.g"), TensorF({D}, 1.0));
    p.add(bname(bi, "ln2.b"), TensorF({D}, 0.0));
    gauss_fill(p.add(bname(bi, "mlp.w1"), TensorF({cfg.mlp_hidden, D})), ws);
    p.add(bname(bi, "mlp.b1"), TensorF({cfg.mlp_hidden}, 0.0));
    gauss_fill(p.add(bname(bi, "mlp.w2"), TensorF({D, cfg.mlp_hidden})),
               0.5 / std::sqrt(static_cast<double>(cfg.mlp_hidden)));
    p.add(bname(bi, "mlp.b2"), TensorF({D}, 0.0));
  }

  gauss_fill(p.add("head.w1", TensorF({cfg.head_hidden, cfg.M * D})),
             0.5 / std::sqrt(static_cast<double>(cfg.M * D)));
  p.add("head.b1", TensorF({cfg.head_hidden}, 0.0));
  gauss_fill(p.add("head.w2", TensorF({cfg.pixels(), cfg.head_hidden})),
             0.5 / std::sqrt(static_cast<double>(cfg.head_hidden)));
  p.add("head.b2", TensorF({cfg.pixels()}, 0.0));
  return p;
}

TensorF embed_tokens(const PatternSet& ps, const TensorF& buckets_norm, const ParamStore& params,
                     const DynGhostConfig& cfg) {
  cfg.validate();
  if (ps.M != cfg.M || ps.H != cfg.H || ps.W != cfg.W) {
    throw std::invalid_argument("embed_tokens: pattern set does not match config");
  }
  if (buckets_norm.rank() != 2 || buckets_norm.dim(0) != cfg.T || buckets_norm.dim(1) != cfg.M) {
    throw std::invalid_argument("embed_tokens: buckets must be [T, M]");
  }
  const int64_t T = cfg.T, M = cfg.M, D = cfg.embed_dim, N = cfg.pixels();
  const TensorF& ew = params.get("embed.w");
  const TensorF& eb = params.get("embed.b");
  const TensorF& pes = params.get("pe_spatial");
  const TensorF& pet = params.get("pe_temporal");

  // Embed(H_i) is frame-independent; compute once per pattern.
  std::vector<double> emb(static_cast<size_t>(M * (D - 1)));
  linear_fwd(ps.patterns.data.data(), ew, eb, emb.data(), M, N, D - 1);

  TensorF tokens({T, M, D});
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t i = 0; i < M; ++i) {
      double* z = tokens.data.data() + (t * M + i) * D;
      for (int64_t d = 0; d < D - 1; ++d) z[d] = emb[static_cast<size_t>(i * (D - 1) + d)];
      z[D - 1] = buckets_norm.at(t, i);
      for (int64_t d = 0; d < D; ++d) {
        z[d] += pes.at(i, d);
        if (cfg.use_temporal_pe) z[d] += pet.at(t, d);
      }
    }
  }
  return tokens;
}

TensorF attention_block(const TensorF& tokens, AttentionMode mode, const ParamStore& params,
                        int block_index, const DynGhostConfig& cfg, AttnCapture* capture) {
  if (tokens.rank() != 3 || tokens.dim(0) != cfg.T || tokens.dim(1) != cfg.M ||
      tokens.dim(2) != cfg.embed_dim) {
    throw std::invalid_argument("attention_block: tokens must be [T, M, D]");
  }
  return run_block(tokens, mode, params, block_index, cfg, nullptr, capture);
}

TensorF dynghost_forward(const PatternSet& ps, const TensorF& buckets_norm,
                         const ParamStore& params, const DynGhostConfig& cfg,
                         AttnCapture* capture) {
  return forward_impl(ps, buckets_norm, params, cfg, nullptr, capture);
}

LossValue loss_total(const TensorF& pred, const TensorF& truth, const LossWeights& w) {
  if (!pred.same_shape(truth)) throw std::invalid_argument("loss: extent mismatch");
  if (pred.rank() != 3) throw std::invalid_argument("loss: expected [T,H,W]");
  const int64_t T = pred.dim(0), H = pred.dim(1), W = pred.dim(2);

  LossValue lv;
  for (int64_t t = 0; t < T; ++t) {
    TensorF p({H, W}), g({H, W});
    std::copy_n(pred.data.begin() + t * H * W, H * W, p.data.begin());
    std::copy_n(truth.data.begin() + t * H * W, H * W, g.data.begin());
    lv.mse_term += mse(p, g);
    lv.ssim_term += 1.0 - ssim(p, g);
  }
  lv.mse_term /= static_cast<double>(T);
  lv.ssim_term /= static_cast<double>(T);
  lv.temporal_term = T >= 2 ? temporal_consistency(pred, truth) : 0.0;
  lv.total = w.mse * lv.mse_term + w.ssim * lv.ssim_term + w.temporal * lv.temporal_term;
  return lv;
}

LossValue dynghost_loss_and_grad(const PatternSet& ps, const TensorF& buckets_norm,
                                 const TensorF& truth, const ParamStore& params,
                                 const DynGhostConfig& cfg, const LossWeights& w,
                                 ParamStore& grads) {
  ForwardCache fc;
  const TensorF pred = forward_impl(ps, buckets_norm, params, cfg, &fc, nullptr);
  if (!pred.same_shape(truth)) throw std::invalid_argument("loss: extent mismatch");
  const int64_t T = cfg.T, M = cfg.M, D = cfg.embed_dim;
  const int64_t H = cfg.H, W = cfg.W, HW = cfg.pixels(), Hh = cfg.head_hidden;

  // Loss value and dL/dpred.
  LossValue lv;
  TensorF dpred({T, H, W}, 0.0);
  for (int64_t t = 0; t < T; ++t) {
    TensorF p({H, W}), g({H, W});
    std::copy_n(pred.data.begin() + t * HW, HW, p.data.begin());
    std::copy_n(truth.data.begin() + t * HW, HW, g.data.begin());

    double frame_mse = 0.0;
    for (int64_t j = 0; j < HW; ++j) {
      const double d = p.data[static_cast<size_t>(j)] - g.data[static_cast<size_t>(j)];
      frame_mse += d * d;
      dpred.data[static_cast<size_t>(t * HW + j)] +=
          w.mse * 2.0 * d / static_cast<double>(T * HW);
    }
    lv.mse_term += frame_mse / static_cast<double>(HW);

    TensorF sgrad;
    const double s = ssim_with_grad(p, g, sgrad);
    lv.ssim_term += 1.0 - s;
    for (int64_t j = 0; j < HW; ++j) {
      dpred.data[static_cast<size_t>(t * HW + j)] -=
          w.ssim * sgrad.data[static_cast<size_t>(j)] / static_cast<double>(T);
    }
  }
  lv.mse_term /= static_cast<double>(T);
  lv.ssim_term /= static_cast<double>(T);

  if (T >= 2) {
    double acc = 0.0;
    const double c = 1.0 / (static_cast<double>(T - 1) * static_cast<double>(HW));
    for (int64_t t = 0; t + 1 < T; ++t) {
      for (int64_t j = 0; j < HW; ++j) {
        const double dp = pred.data[static_cast<size_t>((t + 1) * HW + j)] -
                          pred.data[static_cast<size_t>(t * HW + j)];
        const double dg = truth.data[static_cast<size_t>((t + 1) * HW + j)] -
                          truth.data[static_cast<size_t>(t * HW + j)];
        const double d = dp - dg;
        acc += d * d * c;
        const double gd = w.temporal * 2.0 * d * c;
        dpred.data[static_cast<size_t>((t + 1) * HW + j)] += gd;
        dpred.data[static_cast<size_t>(t * HW + j)] -= gd;
      }
    }
    lv.temporal_term = acc;
  }
  lv.total = w.mse * lv.mse_term + w.ssim * lv.ssim_term + w.temporal * lv.temporal_term;

  // Head backward (per frame): sigmoid, then the two linear layers.
  const TensorF& final_tokens = fc.block_out.empty() ? fc.tokens0 : fc.block_out.back();
  TensorF dtokens(final_tokens.dims, 0.0);
  std::vector<double> dlogits(static_cast<size_t>(HW));
  std::vector<double> dg1(static_cast<size_t>(Hh));
  std::vector<double> da1(static_cast<size_t>(Hh));
  for (int64_t t = 0; t < T; ++t) {
    const HeadCache& hc = fc.head[static_cast<size_t>(t)];
    for (int64_t j = 0; j < HW; ++j) {
      const double y = fc.pred.data[static_cast<size_t>(t * HW + j)];
      dlogits[static_cast<size_t>(j)] =
          dpred.data[static_cast<size_t>(t * HW + j)] * y * (1.0 - y);
    }
    std::fill(dg1.begin(), dg1.end(), 0.0);
    linear_bwd(hc.g1.data(), params.get("head.w2"), dlogits.data(), dg1.data(),
               grads.get("head.w2"), grads.get("head.b2"), 1, Hh, HW);
    for (int64_t i = 0; i < Hh; ++i) {
      da1[static_cast<size_t>(i)] = dg1[static_cast<size_t>(i)] * gelu_grad(hc.a1[static_cast<size_t>(i)]);
    }
    const double* hflat = final_tokens.data.data() + t * M * D;
    linear_bwd(hflat, params.get("head.w1"), da1.data(), dtokens.data.data() + t * M * D,
               grads.get("head.w1"), grads.get("head.b1"), 1, M * D, Hh);
  }

  // Blocks in reverse.
  const auto modes = parse_layout(cfg);
  for (int k = static_cast<int>(modes.size()) - 1; k >= 0; --k) {
    const TensorF& input = k == 0 ? fc.tokens0 : fc.block_out[static_cast<size_t>(k - 1)];
    const AttentionMode mode = modes[static_cast<size_t>(k)];
    const int64_t G = group_count(mode, cfg), L = group_len(mode, cfg);
    TensorF dinput(input.dims, 0.0);
    std::vector<double> dx2(static_cast<size_t>(L * D));
    std::vector<double> dx(static_cast<size_t>(L * D));
    for (int64_t gi = 0; gi < G; ++gi) {
      const GroupCache& gc = fc.blocks[static_cast<size_t>(k)].groups[static_cast<size_t>(gi)];
      for (int64_t l = 0; l < L; ++l) {
        const int64_t tok = token_of(mode, cfg, gi, l);
        std::copy_n(dtokens.data.begin() + tok * D, D, dx2.begin() + l * D);
      }
      std::fill(dx.begin(), dx.end(), 0.0);
      block_group_bwd(params, grads, k, cfg, gc, L, dx2.data(), dx.data());
      for (int64_t l = 0; l < L; ++l) {
        const int64_t tok = token_of(mode, cfg, gi, l);
        std::copy_n(dx.begin() + l * D, D, dinput.data.begin() + tok * D);
      }
    }
    dtokens = std::move(dinput);
  }

  // Embedding backward.
  TensorF& d_pes = grads.get("pe_spatial");
  TensorF& d_pet = grads.get("pe_temporal");
  std::vector<double> demb(static_cast<size_t>(M * (D - 1)), 0.0);
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t i = 0; i < M; ++i) {
      const double* dz = dtokens.data.data() + (t * M + i) * D;
      for (int64_t d = 0; d < D; ++d) {
        d_pes.at(i, d) += dz[d];
        if (cfg.use_temporal_pe) d_pet.at(t, d) += dz[d];
      }
      for (int64_t d = 0; d < D - 1; ++d) demb[static_cast<size_t>(i * (D - 1) + d)] += dz[d];
    }
  }
  linear_bwd(ps.patterns.data.data(), params.get("embed.w"), demb.data(), nullptr,
             grads.get("embed.w"), grads.get("embed.b"), M, cfg.pixels(), D - 1);

  for (size_t i = 0; i < grads.size(); ++i) {
    for (double v : grads.tensor(i).data) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("dynghost: non-finite gradient in parameter " + grads.name(i));
      }
    }
  }
  return lv;
}

}  // namespace ghostlab
