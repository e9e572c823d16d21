// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/recon.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "ghostlab/dct.hpp"

namespace ghostlab {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Eigen::MatrixXd sensing_eigen(const PatternSet& ps) {
  const int64_t n = ps.pixels();
  Eigen::MatrixXd m(ps.M, n);
  for (int64_t i = 0; i < ps.M; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      m(i, j) = ps.patterns.data[static_cast<size_t>(i * n + j)];
    }
  }
  return m;
}

TensorF to_image(const Eigen::VectorXd& v, int64_t H, int64_t W) {
  TensorF img({H, W});
  for (int64_t i = 0; i < H * W; ++i) img.data[static_cast<size_t>(i)] = v(i);
  return img;
}

void clamp01_inplace(TensorF& t) {
  for (auto& v : t.data) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace

double soft_threshold(double v, double tau) {
  if (tau < 0.0) throw std::domain_error("soft_threshold: tau must be >= 0");
  const double m = std::fabs(v) - tau;
  return m > 0.0 ? std::copysign(m, v) : 0.0;
}

TensorF dgi(const PatternSet& ps, const std::vector<double>& buckets) {
  if (buckets.size() != static_cast<size_t>(ps.M) || ps.M == 0) {
    throw std::invalid_argument("dgi: bucket count must equal pattern count M >= 1");
  }
  const int64_t n = ps.pixels();
  const double M = static_cast<double>(ps.M);

  double b_mean = 0.0, r_mean = 0.0;
  for (int64_t i = 0; i < ps.M; ++i) {
    b_mean += buckets[static_cast<size_t>(i)];
    r_mean += ps.row_sums[static_cast<size_t>(i)];
  }
  b_mean /= M;
  r_mean /= M;

  TensorF img({ps.H, ps.W}, 0.0);
  for (int64_t i = 0; i < ps.M; ++i) {
    const double wb = buckets[static_cast<size_t>(i)] / M;
    const double wr = (b_mean / r_mean) * ps.row_sums[static_cast<size_t>(i)] / M;
    const double* h = ps.patterns.data.data() + i * n;
    for (int64_t j = 0; j < n; ++j) {
      img.data[static_cast<size_t>(j)] += (wb - wr) * h[j];
    }
  }

  const double lo = tensor_min(img), hi = tensor_max(img);
  if (hi - lo < 1e-300) {
    std::fill(img.data.begin(), img.data.end(), 0.0);
  } else {
    for (auto& v : img.data) v = (v - lo) / (hi - lo);
  }
  return img;
}

struct PinvSolver::Impl {
  Eigen::BDCSVD<Eigen::MatrixXd> svd;
  Eigen::VectorXd inv_singular;
};

PinvSolver::PinvSolver(const PatternSet& ps) : impl_(new Impl), H_(ps.H), W_(ps.W) {
  const auto t0 = Clock::now();
  impl_->svd.compute(sensing_eigen(ps), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = impl_->svd.singularValues();
  const double cutoff = sv.size() > 0 ? 1e-10 * sv(0) : 0.0;
  impl_->inv_singular = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) impl_->inv_singular(i) = 1.0 / sv(i);
  }
  factorize_ms_ = ms_since(t0);
}

PinvSolver::~PinvSolver() = default;
PinvSolver::PinvSolver(PinvSolver&&) noexcept = default;
PinvSolver& PinvSolver::operator=(PinvSolver&&) noexcept = default;

TensorF PinvSolver::solve_raw(const std::vector<double>& buckets) const {
  const Eigen::Map<const Eigen::VectorXd> b(buckets.data(),
                                            static_cast<Eigen::Index>(buckets.size()));
  const Eigen::VectorXd x = impl_->svd.matrixV() *
                            (impl_->inv_singular.asDiagonal() * (impl_->svd.matrixU().adjoint() * b));
  return to_image(x, H_, W_);
}

TensorF PinvSolver::solve(const std::vector<double>& buckets) const {
  TensorF img = solve_raw(buckets);
  clamp01_inplace(img);
  return img;
}

TensorF pseudo_inverse(const PatternSet& ps, const std::vector<double>& buckets) {
  return PinvSolver(ps).solve(buckets);
}

FistaResult fista(const PatternSet& ps, const std::vector<double>& buckets,
                  const FistaConfig& cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("fista: iterations must be >= 1");
  const int64_t H = ps.H, W = ps.W, n = ps.pixels();
  const Eigen::MatrixXd psi = sensing_eigen(ps);
  const Eigen::Map<const Eigen::VectorXd> b(buckets.data(),
                                            static_cast<Eigen::Index>(buckets.size()));

  // A alpha = Psi vec(idct2(alpha)); At r = dct2(unvec(Psi^T r)).
  const auto apply_A = [&](const Eigen::VectorXd& alpha) {
    TensorF a({H, W});
    for (int64_t i = 0; i < n; ++i) a.data[static_cast<size_t>(i)] = alpha(i);
    const TensorF img = idct2(a);
    const Eigen::Map<const Eigen::VectorXd> x(img.data.data(), n);
    return Eigen::VectorXd(psi * x);
  };
  const auto apply_At = [&](const Eigen::VectorXd& r) {
    const Eigen::VectorXd v = psi.transpose() * r;
    TensorF img({H, W});
    for (int64_t i = 0; i < n; ++i) img.data[static_cast<size_t>(i)] = v(i);
    const TensorF c = dct2(img);
    Eigen::VectorXd out(n);
    for (int64_t i = 0; i < n; ++i) out(i) = c.data[static_cast<size_t>(i)];
    return out;
  };

  // Lipschitz constant of the gradient: top eigenvalue of (A^T A).
  double lipschitz = cfg.lipschitz_hint;
  if (lipschitz <= 0.0) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
    double lam_max = 0.0;
    for (int it = 0; it < std::max(cfg.power_iterations, 50); ++it) {
      Eigen::VectorXd w = apply_At(apply_A(v));
      lam_max = w.norm();
      if (lam_max <= 0.0) throw std::runtime_error("fista: zero operator");
      v = w / lam_max;
    }
    lipschitz = 1.02 * lam_max;
  }

  const double lambda =
      cfg.lambda_reg >= 0.0 ? cfg.lambda_reg : 0.01 * apply_At(b).cwiseAbs().maxCoeff();

  FistaResult res;
  res.lambda = lambda;
  res.lipschitz = lipschitz;
  res.objective.reserve(static_cast<size_t>(cfg.iterations));

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = alpha;
  double t_momentum = 1.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const Eigen::VectorXd resid = apply_A(y) - b;
    const Eigen::VectorXd grad = apply_At(resid);
    Eigen::VectorXd next = y - grad / lipschitz;
    const double tau = lambda / lipschitz;
    for (Eigen::Index i = 0; i < next.size(); ++i) next(i) = soft_threshold(next(i), tau);

    const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum)) / 2.0;
    y = next + ((t_momentum - 1.0) / t_next) * (next - alpha);
    alpha = next;
    t_momentum = t_next;

    const Eigen::VectorXd r2 = apply_A(alpha) - b;
    res.objective.push_back(0.5 * r2.squaredNorm() + lambda * alpha.lpNorm<1>());
  }

  TensorF coeffs({H, W});
  for (int64_t i = 0; i < n; ++i) coeffs.data[static_cast<size_t>(i)] = alpha(i);
  res.image_raw = idct2(coeffs);
  res.image = res.image_raw;
  clamp01_inplace(res.image);
  return res;
}

}  // namespace ghostlab
