// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/dct.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace ghostlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Orthonormal DCT-II matrix C[k][n] = s_k cos(pi (n + 1/2) k / N).
const std::vector<double>& dct_matrix(int64_t n) {
  static std::map<int64_t, std::vector<double>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> c(static_cast<size_t>(n * n));
  const double nd = static_cast<double>(n);
  for (int64_t k = 0; k < n; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / nd);
    for (int64_t j = 0; j < n; ++j) {
      c[static_cast<size_t>(k * n + j)] =
          scale * std::cos(kPi * (static_cast<double>(j) + 0.5) * static_cast<double>(k) / nd);
    }
  }
  return cache.emplace(n, std::move(c)).first->second;
}

enum class Dir { forward, inverse };

/// Y = C X C^T (forward) or C^T X C (inverse), row-major X of shape h x w.
TensorF transform2d(const TensorF& in, Dir dir) {
  if (in.rank() != 2) throw std::invalid_argument("dct2: input must be 2-D");
  const int64_t h = in.dim(0), w = in.dim(1);
  const auto& ch = dct_matrix(h);
  const auto& cw = dct_matrix(w);

  // Rows first: tmp = X * Cw^T (forward) or X * Cw (inverse).
  TensorF tmp({h, w});
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t k = 0; k < w; ++k) {
      double acc = 0.0;
      for (int64_t x = 0; x < w; ++x) {
        const double c = dir == Dir::forward ? cw[static_cast<size_t>(k * w + x)]
                                             : cw[static_cast<size_t>(x * w + k)];
        acc += in.at(y, x) * c;
      }
      tmp.at(y, k) = acc;
    }
  }
  TensorF out({h, w});
  for (int64_t k = 0; k < h; ++k) {
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int64_t y = 0; y < h; ++y) {
        const double c = dir == Dir::forward ? ch[static_cast<size_t>(k * h + y)]
                                             : ch[static_cast<size_t>(y * h + k)];
        acc += tmp.at(y, x) * c;
      }
      out.at(k, x) = acc;
    }
  }
  return out;
}

}  // namespace

TensorF dct2(const TensorF& image) { return transform2d(image, Dir::forward); }
TensorF idct2(const TensorF& coeffs) { return transform2d(coeffs, Dir::inverse); }

}  // namespace ghostlab
