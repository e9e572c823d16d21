// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ghostlab/checkpoint.hpp"
#include "ghostlab/dynghost.hpp"
#include "ghostlab/optim.hpp"
#include "ghostlab/patterns.hpp"

using namespace ghostlab;
namespace fs = std::filesystem;

namespace {

DynGhostConfig toy_config() { return DynGhostConfig{}; }  // T=4 M=24 16x16 D=16 STST

PatternSet toy_patterns(uint64_t stream = 0) {
  RngStream rng(900, stream);
  return generate_speckle(24, 16, 16, 2.0, rng);
}

TensorF random_buckets(const DynGhostConfig& cfg, uint64_t stream) {
  RngStream rng(901, stream);
  TensorF b({cfg.T, cfg.M});
  for (auto& v : b.data) v = rng.next_double();
  return b;
}

TensorF random_truth(const DynGhostConfig& cfg, uint64_t stream) {
  RngStream rng(902, stream);
  TensorF t({cfg.T, cfg.H, cfg.W});
  for (auto& v : t.data) v = rng.next_double();
  return t;
}

double gelu_ref(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

TEST_CASE("config validation") {
  DynGhostConfig cfg = toy_config();
  cfg.heads = 3;  // 16 % 3 != 0
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = toy_config();
  cfg.embed_dim = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = toy_config();
  cfg.block_layout = "SXT";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("parameter initialization is deterministic and finite") {
  const DynGhostConfig cfg = toy_config();
  const ParamStore a = init_params(cfg, 5);
  const ParamStore b = init_params(cfg, 5);
  const ParamStore c = init_params(cfg, 6);
  REQUIRE(a.size() == b.size());
  bool all_equal = true, any_diff = false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a.tensor(i).data != b.tensor(i).data) all_equal = false;
    if (a.tensor(i).data != c.tensor(i).data) any_diff = true;
    a.tensor(i).require_finite(a.name(i));
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("embed: zero parameters and zero buckets give zero tokens") {
  const DynGhostConfig cfg = toy_config();
  const PatternSet ps = toy_patterns();
  const ParamStore zeros = init_params(cfg, 0).zeros_like();
  const TensorF tokens = embed_tokens(ps, TensorF({cfg.T, cfg.M}, 0.0), zeros, cfg);
  REQUIRE(tokens.dims == std::vector<int64_t>{cfg.T, cfg.M, cfg.embed_dim});
  for (double v : tokens.data) CHECK(v == 0.0);
}

TEST_CASE("embed: a bucket edit touches exactly one token channel") {
  const DynGhostConfig cfg = toy_config();
  const PatternSet ps = toy_patterns();
  const ParamStore params = init_params(cfg, 1);
  TensorF b = random_buckets(cfg, 0);
  const TensorF t0 = embed_tokens(ps, b, params, cfg);
  b.at(1, 2) += 0.5;
  const TensorF t1 = embed_tokens(ps, b, params, cfg);
  const int64_t D = cfg.embed_dim;
  for (int64_t t = 0; t < cfg.T; ++t) {
    for (int64_t i = 0; i < cfg.M; ++i) {
      for (int64_t d = 0; d < D; ++d) {
        const auto idx = static_cast<size_t>((t * cfg.M + i) * D + d);
        if (t == 1 && i == 2 && d == D - 1) {
          CHECK(t1.data[idx] == doctest::Approx(t0.data[idx] + 0.5).epsilon(1e-12));
        } else {
          CHECK(t1.data[idx] == t0.data[idx]);
        }
      }
    }
  }
}

TEST_CASE("attention rows are proper distributions") {
  const DynGhostConfig cfg = toy_config();
  const PatternSet ps = toy_patterns();
  const ParamStore params = init_params(cfg, 2);
  const TensorF tokens = embed_tokens(ps, random_buckets(cfg, 1), params, cfg);

  for (AttentionMode mode : {AttentionMode::spatial, AttentionMode::temporal}) {
    AttnCapture cap;
    attention_block(tokens, mode, params, 0, cfg, &cap);
    REQUIRE(!cap.group_probs.empty());
    for (const TensorF& probs : cap.group_probs) {
      const int64_t heads = probs.dim(0), L = probs.dim(1);
      for (int64_t h = 0; h < heads; ++h) {
        for (int64_t l = 0; l < L; ++l) {
          double sum = 0;
          for (int64_t j = 0; j < L; ++j) sum += probs.at(h, l, j);
          CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("spatial blocks are frame-equivariant, temporal blocks pattern-equivariant") {
  const DynGhostConfig cfg = toy_config();
  const PatternSet ps = toy_patterns();
  const ParamStore params = init_params(cfg, 3);
  const TensorF tokens = embed_tokens(ps, random_buckets(cfg, 2), params, cfg);
  const int64_t T = cfg.T, M = cfg.M, D = cfg.embed_dim;

  // Reverse the frame order; a spatial block must commute with that.
  TensorF reversed(tokens.dims);
  for (int64_t t = 0; t < T; ++t) {
    std::copy_n(tokens.data.begin() + (T - 1 - t) * M * D, M * D,
                reversed.data.begin() + t * M * D);
  }
  const TensorF out = attention_block(tokens, AttentionMode::spatial, params, 0, cfg);
  const TensorF out_rev = attention_block(reversed, AttentionMode::spatial, params, 0, cfg);
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t k = 0; k < M * D; ++k) {
      CHECK(out_rev.data[static_cast<size_t>(t * M * D + k)] ==
            out.data[static_cast<size_t>((T - 1 - t) * M * D + k)]);
    }
  }

  // Swap two pattern indices; a temporal block must commute with that.
  TensorF swapped = tokens;
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t d = 0; d < D; ++d) {
      std::swap(swapped.data[static_cast<size_t>((t * M + 3) * D + d)],
                swapped.data[static_cast<size_t>((t * M + 17) * D + d)]);
    }
  }
  const TensorF tout = attention_block(tokens, AttentionMode::temporal, params, 1, cfg);
  const TensorF tout_sw = attention_block(swapped, AttentionMode::temporal, params, 1, cfg);
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t i = 0; i < M; ++i) {
      const int64_t src = i == 3 ? 17 : i == 17 ? 3 : i;
      for (int64_t d = 0; d < D; ++d) {
        CHECK(tout_sw.data[static_cast<size_t>((t * M + i) * D + d)] ==
              tout.data[static_cast<size_t>((t * M + src) * D + d)]);
      }
    }
  }
}

TEST_CASE("forward output lies strictly inside (0,1) and is reproducible") {
  const DynGhostConfig cfg = toy_config();
  const PatternSet ps = toy_patterns();
  const ParamStore params = init_params(cfg, 4);
  const TensorF b = random_buckets(cfg, 3);
  const TensorF p1 = dynghost_forward(ps, b, params, cfg);
  const TensorF p2 = dynghost_forward(ps, b, params, cfg);
  REQUIRE(p1.dims == std::vector<int64_t>{cfg.T, cfg.H, cfg.W});
  CHECK(p1.data == p2.data);
  for (double v : p1.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("zero-block model equals the staged embed+head composition") {
  DynGhostConfig cfg = toy_config();
  cfg.block_layout = "";
  const PatternSet ps = toy_patterns();
  const ParamStore params = init_params(cfg, 5);
  const TensorF b = random_buckets(cfg, 4);
  const TensorF pred = dynghost_forward(ps, b, params, cfg);

  // Staged oracle: tokens -> flatten -> W1/gelu/W2 -> sigmoid, restated
  // from the layer formulas.
  const TensorF tokens = embed_tokens(ps, b, params, cfg);
  const TensorF& w1 = params.get("head.w1");
  const TensorF& b1 = params.get("head.b1");
  const TensorF& w2 = params.get("head.w2");
  const TensorF& b2 = params.get("head.b2");
  const int64_t MD = cfg.M * cfg.embed_dim, Hh = cfg.head_hidden, HW = cfg.pixels();
  for (int64_t t = 0; t < cfg.T; ++t) {
    std::vector<double> g(static_cast<size_t>(Hh));
    for (int64_t o = 0; o < Hh; ++o) {
      double acc = b1.at(o);
      for (int64_t i = 0; i < MD; ++i) acc += w1.at(o, i) * tokens.data[static_cast<size_t>(t * MD + i)];
      g[static_cast<size_t>(o)] = gelu_ref(acc);
    }
    for (int64_t j = 0; j < HW; ++j) {
      double acc = b2.at(j);
      for (int64_t o = 0; o < Hh; ++o) acc += w2.at(j, o) * g[static_cast<size_t>(o)];
      const double want = 1.0 / (1.0 + std::exp(-acc));
      CHECK(pred.data[static_cast<size_t>(t * HW + j)] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("loss values: perfect prediction, weights, constant frames") {
  const DynGhostConfig cfg = toy_config();
  const TensorF truth = random_truth(cfg, 5);
  const LossValue perfect = loss_total(truth, truth);
  CHECK(perfect.total == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(perfect.mse_term == 0.0);
  CHECK(perfect.ssim_term == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(perfect.temporal_term == 0.0);

  // Weight arithmetic: total = mse + 0.5 ssim + 0.1 temporal.
  const TensorF pred = random_truth(cfg, 6);
  const LossValue lv = loss_total(pred, truth);
  CHECK(lv.total ==
        doctest::Approx(lv.mse_term + 0.5 * lv.ssim_term + 0.1 * lv.temporal_term).epsilon(1e-15));
  CHECK(0.02 + 0.5 * 0.1 + 0.1 * 0.05 == doctest::Approx(0.075).epsilon(1e-15));

  // Static constant frames 0.3 vs 0.7.
  TensorF p({2, 16, 16}, 0.3), g({2, 16, 16}, 0.7);
  const LossValue lc = loss_total(p, g);
  CHECK(lc.mse_term == doctest::Approx(0.16).epsilon(1e-12));
  const double ssim_const = (2.0 * 0.3 * 0.7 + 1e-4) / (0.09 + 0.49 + 1e-4);
  CHECK(lc.ssim_term == doctest::Approx(1.0 - ssim_const).epsilon(1e-9));
  CHECK(lc.ssim_term == doctest::Approx(0.2759).epsilon(1e-3));
  CHECK(lc.temporal_term == 0.0);

  // T = 1 defines the temporal term as zero.
  TensorF p1({1, 16, 16}, 0.4), g1({1, 16, 16}, 0.6);
  CHECK(loss_total(p1, g1).temporal_term == 0.0);
}

TEST_CASE("gradients: dead parameters and linearity in the loss scale") {
  DynGhostConfig cfg = toy_config();
  cfg.use_temporal_pe = false;  // pe_temporal becomes a dead parameter
  const PatternSet ps = toy_patterns();
  const ParamStore params = init_params(cfg, 7);
  const TensorF b = random_buckets(cfg, 7);
  const TensorF truth = random_truth(cfg, 8);

  ParamStore g1 = params.zeros_like();
  dynghost_loss_and_grad(ps, b, truth, params, cfg, {1.0, 0.5, 0.1}, g1);
  for (double v : g1.get("pe_temporal").data) CHECK(v == 0.0);

  ParamStore g2 = params.zeros_like();
  dynghost_loss_and_grad(ps, b, truth, params, cfg, {2.0, 1.0, 0.2}, g2);
  for (size_t e = 0; e < g1.size(); ++e) {
    for (size_t i = 0; i < g1.tensor(e).data.size(); ++i) {
      const double want = 2.0 * g1.tensor(e).data[i];
      CHECK(g2.tensor(e).data[i] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("finite differences validate the analytic gradients (toy config)") {
  const DynGhostConfig cfg = toy_config();
  const PatternSet ps = toy_patterns();
  const ParamStore params = init_params(cfg, 9);
  const TensorF b = random_buckets(cfg, 9);
  const TensorF truth = random_truth(cfg, 10);

  RngStream probe_rng(903, 0);
  const auto rep =
      dynghost_gradient_check(ps, b, truth, params, cfg, {}, 200, 1e-5, probe_rng);
  CHECK(rep.max_rel_err < 1e-4);

  // Step-size robustness.
  RngStream probe_rng2(903, 0);
  const auto rep2 =
      dynghost_gradient_check(ps, b, truth, params, cfg, {}, 50, 2e-5, probe_rng2);
  CHECK(rep2.max_rel_err < 1e-4);
}

TEST_CASE("gradient checker is near-exact on a pure quadratic") {
  // Linear single-token model y = W x, L = ||y - t||^2: the central
  // difference of a quadratic is exact up to roundoff.
  ParamStore params;
  TensorF w({4, 3});
  RngStream rng(904, 0);
  for (auto& v : w.data) v = rng.gaussian(0, 1);
  params.add("w", w);
  const std::vector<double> x = {0.3, -0.7, 1.1};
  const std::vector<double> target = {0.2, 0.4, -0.1, 0.9};

  const auto loss = [&](const ParamStore& p) {
    const TensorF& ww = p.get("w");
    double acc = 0;
    for (int64_t o = 0; o < 4; ++o) {
      double y = 0;
      for (int64_t i = 0; i < 3; ++i) y += ww.at(o, i) * x[static_cast<size_t>(i)];
      const double d = y - target[static_cast<size_t>(o)];
      acc += d * d;
    }
    return acc;
  };
  ParamStore analytic = params.zeros_like();
  {
    TensorF& gw = analytic.get("w");
    const TensorF& ww = params.get("w");
    for (int64_t o = 0; o < 4; ++o) {
      double y = 0;
      for (int64_t i = 0; i < 3; ++i) y += ww.at(o, i) * x[static_cast<size_t>(i)];
      for (int64_t i = 0; i < 3; ++i) {
        gw.at(o, i) = 2.0 * (y - target[static_cast<size_t>(o)]) * x[static_cast<size_t>(i)];
      }
    }
  }
  RngStream probes(905, 0);
  const auto rep = gradient_check_fn(loss, params, analytic, 12, 1e-5, probes);
  CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("with zero temporal blocks frames cannot interact") {
  DynGhostConfig cfg = toy_config();
  cfg.block_layout = "SS";
  const PatternSet ps = toy_patterns();
  const ParamStore params = init_params(cfg, 11);
  TensorF b = random_buckets(cfg, 11);
  const TensorF base = dynghost_forward(ps, b, params, cfg);

  // Perturb every bucket of frame 2; frames 0, 1, 3 must be bit-identical.
  for (int64_t i = 0; i < cfg.M; ++i) b.at(2, i) += 0.3;
  const TensorF pert = dynghost_forward(ps, b, params, cfg);
  const int64_t HW = cfg.pixels();
  for (int64_t t = 0; t < cfg.T; ++t) {
    for (int64_t j = 0; j < HW; ++j) {
      const auto idx = static_cast<size_t>(t * HW + j);
      if (t == 2) continue;
      CHECK(pert.data[idx] == base.data[idx]);
    }
  }
  // And frame 2 must actually change.
  double delta = 0;
  for (int64_t j = 0; j < HW; ++j) {
    delta += std::fabs(pert.data[static_cast<size_t>(2 * HW + j)] -
                       base.data[static_cast<size_t>(2 * HW + j)]);
  }
  CHECK(delta > 0.0);
}

TEST_CASE("adamw anchor updates") {
  // Single scalar parameter theta = 1, g = 0.5, lr = 0.1, wd = 0.
  ParamStore params;
  params.add("theta", TensorF({1}, 1.0));
  ParamStore grads = params.zeros_like();
  grads.get("theta").data[0] = 0.5;
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  AdamWState st = AdamWState::init(params, cfg);
  adamw_step(params, grads, st);
  CHECK(st.m.get("theta").data[0] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(st.v.get("theta").data[0] == doctest::Approx(2.5e-4).epsilon(1e-15));
  CHECK(params.get("theta").data[0] == doctest::Approx(0.9).epsilon(1e-7));

  // Zero gradient, zero decay: parameters unchanged.
  ParamStore p2;
  p2.add("w", TensorF({3}, 0.7));
  AdamWState st2 = AdamWState::init(p2, cfg);
  adamw_step(p2, p2.zeros_like(), st2);
  for (double v : p2.get("w").data) CHECK(v == 0.7);

  // Zero gradient with decay: exactly theta * (1 - lr wd) per step.
  AdamWConfig cfg3;
  cfg3.lr = 0.1;
  cfg3.weight_decay = 0.01;
  ParamStore p3;
  p3.add("w", TensorF({2}, 0.5));
  AdamWState st3 = AdamWState::init(p3, cfg3);
  adamw_step(p3, p3.zeros_like(), st3);
  for (double v : p3.get("w").data) CHECK(v == doctest::Approx(0.5 * (1.0 - 0.001)).epsilon(1e-15));
}

TEST_CASE("training loop: frozen optimizer, determinism, descent") {
  const DynGhostConfig cfg = toy_config();
  const PatternSet ps = toy_patterns();
  std::vector<TrainSample> data;
  data.push_back({random_buckets(cfg, 20), random_truth(cfg, 21)});
  data.push_back({random_buckets(cfg, 22), random_truth(cfg, 23)});

  // lr = 0 leaves parameters bit-identical.
  ParamStore frozen = init_params(cfg, 12);
  const ParamStore before = frozen;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 2;
  tc.optimizer.lr = 0.0;
  tc.optimizer.weight_decay = 0.0;
  RngStream shuffle(906, 0);
  train(frozen, cfg, ps, data, tc, shuffle);
  for (size_t e = 0; e < frozen.size(); ++e) {
    CHECK(frozen.tensor(e).data == before.tensor(e).data);
  }

  // Same seed gives an identical loss history.
  TrainConfig tc2;
  tc2.epochs = 3;
  tc2.batch_size = 2;
  ParamStore m1 = init_params(cfg, 13);
  ParamStore m2 = init_params(cfg, 13);
  RngStream s1(907, 0), s2(907, 0);
  const TrainResult r1 = train(m1, cfg, ps, data, tc2, s1);
  const TrainResult r2 = train(m2, cfg, ps, data, tc2, s2);
  CHECK(r1.step_loss == r2.step_loss);

  // A short run already reduces the loss.
  TrainConfig tc3;
  tc3.epochs = 25;
  tc3.batch_size = 2;
  tc3.optimizer.lr = 3e-3;
  ParamStore m3 = init_params(cfg, 14);
  RngStream s3(908, 0);
  const TrainResult r3 = train(m3, cfg, ps, data, tc3, s3);
  CHECK(r3.step_loss.back() < r3.step_loss.front());

  CHECK_THROWS_AS(train(m3, cfg, ps, {}, tc3, s3), std::invalid_argument);
}

TEST_CASE("checkpoint round trip") {
  const DynGhostConfig cfg = toy_config();
  Checkpoint ck;
  ck.config = cfg;
  ck.params = init_params(cfg, 15);
  ck.normalizer.kind = NormKind::anscombe;
  ck.loss = {1.0, 0.5, 0.1};
  ck.step = 42;

  const auto dir = fs::temp_directory_path() / "ghostlab_ckpt_test";
  fs::remove_all(dir);
  save_checkpoint(ck, dir.string());
  const Checkpoint back = load_checkpoint(dir.string());
  CHECK(back.step == 42);
  CHECK(back.config.block_layout == cfg.block_layout);
  CHECK(back.normalizer.kind == NormKind::anscombe);
  REQUIRE(back.params.size() == ck.params.size());
  for (size_t e = 0; e < ck.params.size(); ++e) {
    CHECK(back.params.name(e) == ck.params.name(e));
    for (size_t i = 0; i < ck.params.tensor(e).data.size(); ++i) {
      const double orig = ck.params.tensor(e).data[i];
      CHECK(back.params.tensor(e).data[i] == static_cast<double>(static_cast<float>(orig)));
    }
  }
  fs::remove_all(dir);
}
