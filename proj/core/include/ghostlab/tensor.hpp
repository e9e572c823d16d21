// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ghostlab {

/// Dense row-major tensor of 64-bit reals. The workhorse container for
/// frames [T,H,W], pattern stacks [M,H,W] and bucket series [T,M].
struct TensorF {
  std::vector<int64_t> dims;
  std::vector<double> data;

  TensorF() = default;
  explicit TensorF(std::vector<int64_t> d, double fill = 0.0);

  int64_t numel() const;
  int64_t dim(size_t i) const { return dims.at(i); }
  size_t rank() const { return dims.size(); }

  double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
  double at(int64_t i) const { return data[static_cast<size_t>(i)]; }
  double& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * dims[1] + j)]; }
  double at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * dims[1] + j)]; }
  double& at(int64_t i, int64_t j, int64_t k) {
    return data[static_cast<size_t>((i * dims[1] + j) * dims[2] + k)];
  }
  double at(int64_t i, int64_t j, int64_t k) const {
    return data[static_cast<size_t>((i * dims[1] + j) * dims[2] + k)];
  }

  bool same_shape(const TensorF& o) const { return dims == o.dims; }

  /// Throws std::runtime_error naming `what` if any value is NaN/Inf.
  void require_finite(const std::string& what) const;
};

/// product(dims); throws on non-positive extents.
int64_t checked_numel(const std::vector<int64_t>& dims);

double tensor_min(const TensorF& t);
double tensor_max(const TensorF& t);
double tensor_mean(const TensorF& t);
/// Population variance (divides by N).
double tensor_var(const TensorF& t);

}  // namespace ghostlab
