// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ghostlab/measurement.hpp"
#include "ghostlab/metrics.hpp"
#include "ghostlab/rng.hpp"
#include "ghostlab/scene.hpp"

using namespace ghostlab;

TEST_CASE("mse anchor values") {
  TensorF a({16, 16}, 0.0), b({16, 16}, 0.0);
  CHECK(mse(a, a) == 0.0);

  TensorF ones({16, 16}, 1.0);
  CHECK(mse(a, ones) == doctest::Approx(1.0).epsilon(1e-15));

  // Half the pixels differ by 0.2: mse = 0.5 * 0.04 = 0.02.
  TensorF c = a;
  for (int64_t i = 0; i < 128; ++i) c.data[static_cast<size_t>(i)] = 0.2;
  CHECK(mse(a, c) == doctest::Approx(0.02).epsilon(1e-15));

  TensorF small({4, 4}, 0.0);
  CHECK_THROWS_AS(mse(a, small), std::invalid_argument);
}

TEST_CASE("ssim identity and constant-image closed form") {
  RngStream rng(50, 0);
  TensorF x({16, 16});
  for (auto& v : x.data) v = rng.next_double();
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));

  // Constant images: only the luminance term is active.
  TensorF a({16, 16}, 0.3), b({16, 16}, 0.7);
  const double expected = (2.0 * 0.3 * 0.7 + 1e-4) / (0.09 + 0.49 + 1e-4);
  CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(expected == doctest::Approx(0.7241).epsilon(1e-3));

  TensorF tiny({8, 8}, 0.5);
  CHECK_THROWS_AS(ssim(tiny, tiny), std::invalid_argument);
}

TEST_CASE("ssim punishes inverted structure") {
  RngStream rng(51, 0);
  const TensorF sprite = generate_sprite(SpriteKind::disc, 8.0, 16, rng);
  TensorF inv({16, 16});
  for (size_t i = 0; i < inv.data.size(); ++i) inv.data[i] = 1.0 - sprite.data[i];
  CHECK(ssim(sprite, inv) < 0.2);
}

TEST_CASE("ssim is symmetric") {
  RngStream rng(52, 0);
  TensorF a({16, 16}), b({16, 16});
  for (auto& v : a.data) v = rng.next_double();
  for (auto& v : b.data) v = rng.next_double();
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("ssim gradient matches finite differences") {
  RngStream rng(53, 0);
  TensorF a({12, 12}), b({12, 12});
  for (auto& v : a.data) v = 0.2 + 0.6 * rng.next_double();
  for (auto& v : b.data) v = 0.2 + 0.6 * rng.next_double();

  TensorF grad;
  const double base = ssim_with_grad(a, b, grad);
  CHECK(base == doctest::Approx(ssim(a, b)).epsilon(1e-12));

  const double h = 1e-6;
  for (size_t probe : {size_t{0}, size_t{70}, size_t{143}}) {
    TensorF ap = a;
    ap.data[probe] += h;
    TensorF am = a;
    am.data[probe] -= h;
    const double fd = (ssim(ap, b) - ssim(am, b)) / (2.0 * h);
    CHECK(grad.data[probe] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("temporal consistency anchors") {
  TensorF pred({2, 16, 16}, 0.0), truth({2, 16, 16}, 0.0);
  CHECK(temporal_consistency(pred, truth) == 0.0);

  // Static pred vs static truth with different content is still 0.
  TensorF p2({2, 16, 16}, 0.9), t2({2, 16, 16}, 0.1);
  CHECK(temporal_consistency(p2, t2) == 0.0);

  // Prediction difference exceeds the true difference by c everywhere.
  const double c = 0.25;
  TensorF p3({2, 16, 16}, 0.0);
  for (int64_t j = 0; j < 256; ++j) p3.data[static_cast<size_t>(256 + j)] = c;
  TensorF t3({2, 16, 16}, 0.0);
  CHECK(temporal_consistency(p3, t3) == doctest::Approx(c * c).epsilon(1e-12));

  TensorF one({1, 16, 16}, 0.0);
  CHECK_THROWS_AS(temporal_consistency(one, one), std::invalid_argument);
}

TEST_CASE("mse and temporal consistency are permutation invariant") {
  RngStream rng(54, 0);
  TensorF a({2, 8, 8}), b({2, 8, 8});
  for (auto& v : a.data) v = rng.next_double();
  for (auto& v : b.data) v = rng.next_double();

  std::vector<size_t> perm(64);
  std::iota(perm.begin(), perm.end(), size_t{0});
  for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.next_u64() % i]);

  TensorF ap({2, 8, 8}), bp({2, 8, 8});
  for (int64_t t = 0; t < 2; ++t) {
    for (size_t j = 0; j < 64; ++j) {
      ap.data[static_cast<size_t>(t * 64) + j] = a.data[static_cast<size_t>(t * 64) + perm[j]];
      bp.data[static_cast<size_t>(t * 64) + j] = b.data[static_cast<size_t>(t * 64) + perm[j]];
    }
  }
  CHECK(mse(ap, bp) == doctest::Approx(mse(a, b)).epsilon(1e-12));
  CHECK(temporal_consistency(ap, bp) == doctest::Approx(temporal_consistency(a, b)).epsilon(1e-12));
}

TEST_CASE("snr_db anchors and log law") {
  TensorF s({4, 4}, 0.2);  // mean power 0.04
  TensorF n = s;
  for (auto& v : n.data) v += 0.02;  // noise power 4e-4
  CHECK(snr_db(s, n) == doctest::Approx(20.0).epsilon(1e-9));

  TensorF n2 = s;
  for (auto& v : n2.data) v += 0.04;  // double the amplitude
  CHECK(snr_db(s, n) - snr_db(s, n2) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-9));

  CHECK(snr_db(s, s) == std::numeric_limits<double>::infinity());
  TensorF z({4, 4}, 0.0);
  CHECK_THROWS_AS(snr_db(z, s), std::invalid_argument);
}

TEST_CASE("sigma_for_snr and snr_db round-trip") {
  RngStream rng(55, 0);
  TensorF mu({100, 1000});
  for (auto& v : mu.data) v = 0.1 + 0.8 * rng.next_double();
  for (double target : {5.0, 15.0, 30.0}) {
    const double sigma = sigma_for_snr(mu, target);
    TensorF noisy = mu;
    for (auto& v : noisy.data) v += rng.gaussian(0.0, sigma);  // no clip
    CHECK(std::fabs(snr_db(mu, noisy) - target) < 0.2);
  }
}

TEST_CASE("evaluate_sequence aggregates per-frame metrics") {
  RngStream rng(56, 0);
  TensorF truth({3, 16, 16});
  for (auto& v : truth.data) v = rng.next_double();
  const MetricsReport r = evaluate_sequence(truth, truth);
  REQUIRE(r.frame_mse.size() == 3);
  for (double v : r.frame_mse) CHECK(v == 0.0);
  for (double v : r.frame_ssim) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.mean_ssim == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.temporal == 0.0);
}
