// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace ghostlab {

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "none") return NormKind::none;
  if (s == "sqrt") return NormKind::sqrt_;
  if (s == "log1p") return NormKind::log1p;
  if (s == "minmax") return NormKind::minmax;
  if (s == "zscore") return NormKind::zscore;
  if (s == "anscombe") return NormKind::anscombe;
  if (s == "freeman_tukey") return NormKind::freeman_tukey;
  throw std::invalid_argument("unknown normalizer kind: " + s);
}

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::none: return "none";
    case NormKind::sqrt_: return "sqrt";
    case NormKind::log1p: return "log1p";
    case NormKind::minmax: return "minmax";
    case NormKind::zscore: return "zscore";
    case NormKind::anscombe: return "anscombe";
    case NormKind::freeman_tukey: return "freeman_tukey";
  }
  return "?";
}

Normalizer fit_normalizer(NormKind kind, const TensorF& counts) {
  if (counts.data.empty()) throw std::invalid_argument("normalizer: empty fit data");
  for (double v : counts.data) {
    if (v < 0.0) throw std::invalid_argument("normalizer: negative count in fit data");
  }
  Normalizer nz;
  nz.kind = kind;
  if (kind == NormKind::minmax) {
    nz.stat_a = tensor_min(counts);
    nz.stat_b = tensor_max(counts);
    if (nz.stat_a == nz.stat_b) throw std::invalid_argument("minmax: degenerate fit (min == max)");
  } else if (kind == NormKind::zscore) {
    nz.stat_a = tensor_mean(counts);
    nz.stat_b = std::sqrt(tensor_var(counts));
    if (nz.stat_b == 0.0) throw std::invalid_argument("zscore: degenerate fit (zero variance)");
  }
  return nz;
}

double Normalizer::apply(double n) const {
  if (n < 0.0) throw std::domain_error("normalizer: count must be >= 0");
  switch (kind) {
    case NormKind::none: return n;
    case NormKind::sqrt_: return std::sqrt(n);
    case NormKind::log1p: return std::log1p(n);
    case NormKind::minmax: return (n - stat_a) / (stat_b - stat_a);
    case NormKind::zscore: return (n - stat_a) / stat_b;
    case NormKind::anscombe: return 2.0 * std::sqrt(n + 3.0 / 8.0);
    case NormKind::freeman_tukey: return std::sqrt(n) + std::sqrt(n + 1.0);
  }
  return n;
}

double Normalizer::invert(double z, bool* clamped) const {
  if (clamped) *clamped = false;
  const auto clamp0 = [&](double v) {
    if (v < 0.0) {
      if (clamped) *clamped = true;
      return 0.0;
    }
    return v;
  };
  switch (kind) {
    case NormKind::none: return clamp0(z);
    case NormKind::sqrt_: return clamp0(z) * clamp0(z);
    case NormKind::log1p: return clamp0(std::expm1(z));
    case NormKind::minmax: return clamp0(z * (stat_b - stat_a) + stat_a);
    case NormKind::zscore: return clamp0(z * stat_b + stat_a);
    case NormKind::anscombe: return clamp0((z / 2.0) * (z / 2.0) - 3.0 / 8.0);
    case NormKind::freeman_tukey: {
      // z = sqrt(n) + sqrt(n+1)  =>  (z^2 - 1) / (2z) = sqrt(n).
      if (z <= 1.0) {
        if (clamped) *clamped = z < 1.0;
        return 0.0;
      }
      const double root = (z * z - 1.0) / (2.0 * z);
      return root * root;
    }
  }
  return z;
}

TensorF Normalizer::apply(const TensorF& t) const {
  TensorF out(t.dims);
  for (size_t i = 0; i < t.data.size(); ++i) out.data[i] = apply(t.data[i]);
  return out;
}

TensorF Normalizer::invert(const TensorF& t) const {
  TensorF out(t.dims);
  for (size_t i = 0; i < t.data.size(); ++i) out.data[i] = invert(t.data[i]);
  return out;
}

std::string Normalizer::serialize_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  if (kind == NormKind::minmax || kind == NormKind::zscore) {
    j["stats"] = {stat_a, stat_b};
  }
  return j.dump();
}

Normalizer Normalizer::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Normalizer nz;
  nz.kind = norm_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("stats")) {
    nz.stat_a = j["stats"].at(0).get<double>();
    nz.stat_b = j["stats"].at(1).get<double>();
  }
  return nz;
}

}  // namespace ghostlab
