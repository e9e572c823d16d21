// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ghostlab {

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

/// 11x11 Gaussian window, sigma 1.5, normalized to sum 1.
const double* window() {
  static double w[kWin * kWin];
  static bool init = [] {
    double sum = 0.0;
    for (int y = 0; y < kWin; ++y) {
      for (int x = 0; x < kWin; ++x) {
        const double dy = y - (kWin - 1) / 2.0, dx = x - (kWin - 1) / 2.0;
        w[y * kWin + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
        sum += w[y * kWin + x];
      }
    }
    for (double& v : w) v /= sum;
    return true;
  }();
  (void)init;
  return w;
}

void check_pair(const TensorF& a, const TensorF& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("metrics: extent mismatch");
}

struct WindowStats {
  double mu1, mu2, s1, s2, s12;
};

WindowStats window_stats(const TensorF& a, const TensorF& b, int64_t oy, int64_t ox) {
  const double* w = window();
  const int64_t W = a.dim(1);
  double mu1 = 0, mu2 = 0, m11 = 0, m22 = 0, m12 = 0;
  for (int y = 0; y < kWin; ++y) {
    for (int x = 0; x < kWin; ++x) {
      const double wk = w[y * kWin + x];
      const double va = a.data[static_cast<size_t>((oy + y) * W + (ox + x))];
      const double vb = b.data[static_cast<size_t>((oy + y) * W + (ox + x))];
      mu1 += wk * va;
      mu2 += wk * vb;
      m11 += wk * va * va;
      m22 += wk * vb * vb;
      m12 += wk * va * vb;
    }
  }
  return {mu1, mu2, m11 - mu1 * mu1, m22 - mu2 * mu2, m12 - mu1 * mu2};
}

}  // namespace

double mse(const TensorF& a, const TensorF& b) {
  check_pair(a, b);
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

double ssim(const TensorF& a, const TensorF& b) {
  check_pair(a, b);
  if (a.rank() != 2) throw std::invalid_argument("ssim: inputs must be 2-D");
  const int64_t H = a.dim(0), W = a.dim(1);
  if (H < kWin || W < kWin) throw std::invalid_argument("ssim: image smaller than 11x11 window");

  double acc = 0.0;
  int64_t count = 0;
  for (int64_t oy = 0; oy + kWin <= H; ++oy) {
    for (int64_t ox = 0; ox + kWin <= W; ++ox) {
      const auto st = window_stats(a, b, oy, ox);
      const double A = 2.0 * st.mu1 * st.mu2 + kC1;
      const double B = 2.0 * st.s12 + kC2;
      const double C = st.mu1 * st.mu1 + st.mu2 * st.mu2 + kC1;
      const double D = st.s1 + st.s2 + kC2;
      acc += (A * B) / (C * D);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

double ssim_with_grad(const TensorF& a, const TensorF& b, TensorF& grad_a) {
  check_pair(a, b);
  const int64_t H = a.dim(0), W = a.dim(1);
  if (H < kWin || W < kWin) throw std::invalid_argument("ssim: image smaller than 11x11 window");
  grad_a = TensorF(a.dims, 0.0);
  const double* w = window();

  double acc = 0.0;
  const int64_t count = (H - kWin + 1) * (W - kWin + 1);
  const double inv_count = 1.0 / static_cast<double>(count);

  for (int64_t oy = 0; oy + kWin <= H; ++oy) {
    for (int64_t ox = 0; ox + kWin <= W; ++ox) {
      const auto st = window_stats(a, b, oy, ox);
      const double A = 2.0 * st.mu1 * st.mu2 + kC1;
      const double B = 2.0 * st.s12 + kC2;
      const double C = st.mu1 * st.mu1 + st.mu2 * st.mu2 + kC1;
      const double D = st.s1 + st.s2 + kC2;
      const double S = (A * B) / (C * D);
      acc += S;

      // dS/dmu1, dS/ds1, dS/ds12 at this window.
      const double dS_dmu1 = 2.0 * st.mu2 * B / (C * D) - 2.0 * st.mu1 * S / C;
      const double dS_ds1 = -S / D;
      const double dS_ds12 = 2.0 * A / (C * D);

      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          const double wk = w[y * kWin + x];
          const size_t idx = static_cast<size_t>((oy + y) * W + (ox + x));
          const double va = a.data[idx], vb = b.data[idx];
          grad_a.data[idx] += inv_count * wk *
                              (dS_dmu1 + 2.0 * (va - st.mu1) * dS_ds1 +
                               (vb - st.mu2) * dS_ds12);
        }
      }
    }
  }
  return acc / static_cast<double>(count);
}

double temporal_consistency(const TensorF& pred, const TensorF& truth) {
  check_pair(pred, truth);
  if (pred.rank() != 3) throw std::invalid_argument("temporal_consistency: expected [T,H,W]");
  const int64_t T = pred.dim(0);
  if (T < 2) throw std::invalid_argument("temporal_consistency: needs T >= 2");
  const int64_t n = pred.dim(1) * pred.dim(2);

  double acc = 0.0;
  for (int64_t t = 0; t + 1 < T; ++t) {
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const double dp = pred.data[static_cast<size_t>((t + 1) * n + j)] -
                        pred.data[static_cast<size_t>(t * n + j)];
      const double dt = truth.data[static_cast<size_t>((t + 1) * n + j)] -
                        truth.data[static_cast<size_t>(t * n + j)];
      const double d = dp - dt;
      s += d * d;
    }
    acc += s / static_cast<double>(n);
  }
  return acc / static_cast<double>(T - 1);
}

double snr_db(const TensorF& signal, const TensorF& noisy) {
  check_pair(signal, noisy);
  double ps = 0.0, pn = 0.0;
  for (size_t i = 0; i < signal.data.size(); ++i) {
    ps += signal.data[i] * signal.data[i];
    const double d = noisy.data[i] - signal.data[i];
    pn += d * d;
  }
  if (ps <= 0.0) throw std::invalid_argument("snr_db: all-zero signal");
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ps / pn);
}

MetricsReport evaluate_sequence(const TensorF& pred, const TensorF& truth) {
  check_pair(pred, truth);
  if (pred.rank() != 3) throw std::invalid_argument("evaluate_sequence: expected [T,H,W]");
  const int64_t T = pred.dim(0), H = pred.dim(1), W = pred.dim(2);

  MetricsReport r;
  for (int64_t t = 0; t < T; ++t) {
    TensorF p({H, W}), g({H, W});
    std::copy_n(pred.data.begin() + t * H * W, H * W, p.data.begin());
    std::copy_n(truth.data.begin() + t * H * W, H * W, g.data.begin());
    r.frame_mse.push_back(mse(p, g));
    r.frame_ssim.push_back(ssim(p, g));
  }
  const auto mean_std = [](const std::vector<double>& v, double& m, double& s) {
    m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    s = std::sqrt(s / static_cast<double>(v.size()));
  };
  mean_std(r.frame_mse, r.mean_mse, r.std_mse);
  mean_std(r.frame_ssim, r.mean_ssim, r.std_ssim);
  r.temporal = T >= 2 ? temporal_consistency(pred, truth) : 0.0;
  return r;
}

}  // namespace ghostlab
