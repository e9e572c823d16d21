// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/tensor.hpp"

#include <cmath>
#include <numeric>

namespace ghostlab {

int64_t checked_numel(const std::vector<int64_t>& dims) {
  if (dims.empty()) throw std::invalid_argument("tensor: empty dims");
  int64_t n = 1;
  for (int64_t d : dims) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive extent " + std::to_string(d));
    if (n > (int64_t{1} << 40) / d) throw std::invalid_argument("tensor: extent overflow");
    n *= d;
  }
  return n;
}

TensorF::TensorF(std::vector<int64_t> d, double fill)
    : dims(std::move(d)), data(static_cast<size_t>(checked_numel(dims)), fill) {}

int64_t TensorF::numel() const {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

void TensorF::require_finite(const std::string& what) const {
  for (double v : data) {
    if (!std::isfinite(v)) throw std::runtime_error(what + ": non-finite value in tensor");
  }
}

double tensor_min(const TensorF& t) {
  double m = t.data.front();
  for (double v : t.data) m = std::min(m, v);
  return m;
}

double tensor_max(const TensorF& t) {
  double m = t.data.front();
  for (double v : t.data) m = std::max(m, v);
  return m;
}

double tensor_mean(const TensorF& t) {
  double s = std::accumulate(t.data.begin(), t.data.end(), 0.0);
  return s / static_cast<double>(t.data.size());
}

double tensor_var(const TensorF& t) {
  const double mu = tensor_mean(t);
  double s = 0.0;
  for (double v : t.data) s += (v - mu) * (v - mu);
  return s / static_cast<double>(t.data.size());
}

}  // namespace ghostlab
