// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ghostlab {

AdamWState AdamWState::init(const ParamStore& params, const AdamWConfig& cfg) {
  AdamWState st;
  st.cfg = cfg;
  st.m = params.zeros_like();
  st.v = params.zeros_like();
  return st;
}

void adamw_step(ParamStore& params, const ParamStore& grads, AdamWState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adamw: parameter/gradient/state shape mismatch");
  }
  state.step += 1;
  const auto& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (size_t e = 0; e < params.size(); ++e) {
    auto& theta = params.tensor(e).data;
    const auto& g = grads.tensor(e).data;
    auto& m = state.m.tensor(e).data;
    auto& v = state.v.tensor(e).data;
    if (theta.size() != g.size()) throw std::invalid_argument("adamw: entry shape mismatch");
    for (size_t i = 0; i < theta.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps) + c.lr * c.weight_decay * theta[i];
    }
  }
}

GradCheckReport gradient_check_fn(const std::function<double(const ParamStore&)>& loss,
                                  const ParamStore& params, const ParamStore& analytic,
                                  int64_t probe_count, double h, RngStream& rng) {
  if (h < 1e-6 || h > 1e-4) throw std::invalid_argument("gradient_check: h must be in [1e-6, 1e-4]");
  const int64_t total = params.total_values();
  GradCheckReport rep;
  rep.probes = probe_count;
  double sum = 0.0;
  for (int64_t p = 0; p < probe_count; ++p) {
    const int64_t flat = static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(total));
    const auto [entry, offset] = params.locate(flat);

    ParamStore probe = params;
    double& slot = probe.tensor(entry).data[static_cast<size_t>(offset)];
    const double orig = slot;
    slot = orig + h;
    const double lp = loss(probe);
    slot = orig - h;
    const double lm = loss(probe);
    slot = orig;

    const double gfd = (lp - lm) / (2.0 * h);
    const double ga = analytic.tensor(entry).data[static_cast<size_t>(offset)];
    const double rel = std::fabs(ga - gfd) / std::max({std::fabs(ga), std::fabs(gfd), 1e-8});
    rep.max_rel_err = std::max(rep.max_rel_err, rel);
    sum += rel;
  }
  rep.mean_rel_err = probe_count > 0 ? sum / static_cast<double>(probe_count) : 0.0;
  return rep;
}

GradCheckReport dynghost_gradient_check(const PatternSet& ps, const TensorF& buckets_norm,
                                        const TensorF& truth, const ParamStore& params,
                                        const DynGhostConfig& cfg, const LossWeights& w,
                                        int64_t probe_count, double h, RngStream& rng) {
  ParamStore grads = params.zeros_like();
  dynghost_loss_and_grad(ps, buckets_norm, truth, params, cfg, w, grads);
  const auto loss = [&](const ParamStore& p) {
    return loss_total(dynghost_forward(ps, buckets_norm, p, cfg), truth, w).total;
  };
  return gradient_check_fn(loss, params, grads, probe_count, h, rng);
}

TrainResult train(ParamStore& params, const DynGhostConfig& cfg, const PatternSet& ps,
                  const std::vector<TrainSample>& dataset, const TrainConfig& tc, RngStream& rng) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (tc.epochs < 1 || tc.batch_size < 1) throw std::invalid_argument("train: bad loop config");

  AdamWState state = AdamWState::init(params, tc.optimizer);
  TrainResult res;
  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    // Fisher-Yates from the supplied stream.
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    for (size_t base = 0; base < order.size(); base += static_cast<size_t>(tc.batch_size)) {
      const size_t end = std::min(order.size(), base + static_cast<size_t>(tc.batch_size));
      ParamStore grads = params.zeros_like();
      double batch_loss = 0.0;
      for (size_t s = base; s < end; ++s) {
        const TrainSample& smp = dataset[order[s]];
        batch_loss +=
            dynghost_loss_and_grad(ps, smp.buckets_norm, smp.truth, params, cfg, tc.loss, grads)
                .total;
      }
      const double inv = 1.0 / static_cast<double>(end - base);
      for (size_t e = 0; e < grads.size(); ++e) {
        for (auto& v : grads.tensor(e).data) v *= inv;
      }
      adamw_step(params, grads, state);
      res.step_loss.push_back(batch_loss * inv);
      res.steps += 1;
    }
  }
  return res;
}

}  // namespace ghostlab
