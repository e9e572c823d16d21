// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ghostlab {

namespace {

/// Separable Gaussian blur with a weight-normalized kernel (truncated at
/// 3 sigma, renormalized per position so boundaries are not dimmed).
void gaussian_blur(std::vector<double>& img, int64_t H, int64_t W, double sigma) {
  const auto radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  for (int64_t i = -radius; i <= radius; ++i) {
    k[static_cast<size_t>(i + radius)] =
        std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
  }
  std::vector<double> tmp(img.size());
  // Horizontal pass.
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int64_t i = -radius; i <= radius; ++i) {
        const int64_t xx = x + i;
        if (xx < 0 || xx >= W) continue;
        const double w = k[static_cast<size_t>(i + radius)];
        acc += w * img[static_cast<size_t>(y * W + xx)];
        wsum += w;
      }
      tmp[static_cast<size_t>(y * W + x)] = acc / wsum;
    }
  }
  // Vertical pass.
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int64_t i = -radius; i <= radius; ++i) {
        const int64_t yy = y + i;
        if (yy < 0 || yy >= H) continue;
        const double w = k[static_cast<size_t>(i + radius)];
        acc += w * tmp[static_cast<size_t>(yy * W + x)];
        wsum += w;
      }
      img[static_cast<size_t>(y * W + x)] = acc / wsum;
    }
  }
}

void check_extents(int64_t M, int64_t H, int64_t W) {
  if (M < 1) throw std::invalid_argument("patterns: M must be >= 1");
  if (H < 1 || W < 1) throw std::invalid_argument("patterns: degenerate extents");
}

}  // namespace

void recompute_row_sums(PatternSet& ps) {
  ps.row_sums.assign(static_cast<size_t>(ps.M), 0.0);
  const int64_t n = ps.pixels();
  for (int64_t i = 0; i < ps.M; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) s += ps.patterns.data[static_cast<size_t>(i * n + j)];
    ps.row_sums[static_cast<size_t>(i)] = s;
  }
}

PatternSet generate_speckle(int64_t M, int64_t H, int64_t W, double grain_px, RngStream& rng) {
  check_extents(M, H, W);
  if (grain_px < 1.0) throw std::invalid_argument("speckle: grain_px must be >= 1");

  PatternSet ps;
  ps.M = M;
  ps.H = H;
  ps.W = W;
  ps.patterns = TensorF({M, H, W});
  const int64_t n = H * W;
  const double sigma = grain_px / 2.0;

  std::vector<double> field(static_cast<size_t>(n));
  for (int64_t m = 0; m < M; ++m) {
    for (auto& v : field) v = rng.gaussian(0.0, 1.0);
    gaussian_blur(field, H, W, sigma);
    const auto [lo_it, hi_it] = std::minmax_element(field.begin(), field.end());
    const double lo = *lo_it;
    const double range = std::max(*hi_it - lo, 0.1);
    for (int64_t j = 0; j < n; ++j) {
      ps.patterns.data[static_cast<size_t>(m * n + j)] =
          std::clamp((field[static_cast<size_t>(j)] - lo) / range, 0.0, 1.0);
    }
  }
  recompute_row_sums(ps);
  return ps;
}

PatternSet generate_bernoulli(int64_t M, int64_t H, int64_t W, double p, RngStream& rng) {
  check_extents(M, H, W);
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("bernoulli: p must be in (0,1)");

  PatternSet ps;
  ps.M = M;
  ps.H = H;
  ps.W = W;
  ps.patterns = TensorF({M, H, W});
  const int64_t n = H * W;
  for (int64_t m = 0; m < M; ++m) {
    for (;;) {
      double s = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        const double v = rng.next_double() < p ? 1.0 : 0.0;
        ps.patterns.data[static_cast<size_t>(m * n + j)] = v;
        s += v;
      }
      if (s > 0.0) break;  // re-draw all-zero patterns
    }
  }
  recompute_row_sums(ps);
  return ps;
}

void binarize_patterns(PatternSet& ps) {
  const int64_t n = ps.pixels();
  std::vector<double> sorted(static_cast<size_t>(n));
  for (int64_t m = 0; m < ps.M; ++m) {
    double* row = ps.patterns.data.data() + m * n;
    std::copy(row, row + n, sorted.begin());
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    const double med = sorted[static_cast<size_t>(n / 2)];
    int64_t ones = 0;
    for (int64_t j = 0; j < n; ++j) {
      row[j] = row[j] > med ? 1.0 : 0.0;
      ones += row[j] > 0.5;
    }
    if (ones == 0) row[0] = 1.0;
    if (ones == n) row[0] = 0.0;
  }
  recompute_row_sums(ps);
}

TensorF sensing_matrix(const PatternSet& ps) {
  TensorF m({ps.M, ps.pixels()});
  m.data = ps.patterns.data;
  return m;
}

double sampling_ratio(const PatternSet& ps) {
  return static_cast<double>(ps.M) / static_cast<double>(ps.pixels());
}

}  // namespace ghostlab
