// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>

#include "ghostlab/detector.hpp"

using namespace ghostlab;

TEST_CASE("catalog presets carry the physical parameter table") {
  const DetectorSpec snspd = detector_preset("snspd");
  CHECK(snspd.efficiency == 0.95);
  CHECK(snspd.dark_count_rate == 10.0);
  CHECK(snspd.dead_time_ns == 40.0);
  CHECK(snspd.afterpulse_prob == 0.0);
  CHECK(snspd.crosstalk_prob == 0.0);
  CHECK(snspd.timing_jitter_ps == 50.0);
  CHECK(snspd.integration_time_s == 1e-3);

  const DetectorSpec spad = detector_preset("spad");
  CHECK(spad.efficiency == 0.70);
  CHECK(spad.dark_count_rate == 1000.0);
  CHECK(spad.dead_time_ns == 50.0);
  CHECK(spad.afterpulse_prob == 0.01);
  CHECK(spad.crosstalk_prob == 0.0);
  CHECK(spad.timing_jitter_ps == 300.0);

  const DetectorSpec sipm = detector_preset("sipm");
  CHECK(sipm.efficiency == 0.50);
  CHECK(sipm.dark_count_rate == 100000.0);
  CHECK(sipm.dead_time_ns == 20.0);
  CHECK(sipm.afterpulse_prob == 0.02);
  CHECK(sipm.crosstalk_prob == 0.05);
  CHECK(sipm.timing_jitter_ps == 100.0);

  CHECK_THROWS_AS(detector_preset("pmt"), std::invalid_argument);
}

TEST_CASE("snspd counts at full intensity match the analytic mean") {
  // Signal 1 * 100 * 0.95 = 95; dark 10 Hz * 1 ms = 0.01; no extras.
  TensorF mu({100, 1000}, 1.0);
  RngStream rng(70, 0);
  const BucketSeries b = detect_counts(mu, 100.0, detector_preset("snspd"), rng);
  double mean = 0;
  for (double v : b.values.data) {
    CHECK(v >= 0.0);
    CHECK(v == std::floor(v));
    mean += v;
  }
  mean /= static_cast<double>(b.values.data.size());
  CHECK(std::fabs(mean - 95.01) <= 0.3);
}

TEST_CASE("zero rates give zero counts") {
  DetectorSpec spec;
  spec.name = "quiet";
  spec.efficiency = 0.9;
  spec.dark_count_rate = 0.0;
  TensorF mu({10, 10}, 0.0);
  RngStream rng(71, 0);
  const BucketSeries b = detect_counts(mu, 100.0, spec, rng);
  for (double v : b.values.data) CHECK(v == 0.0);
}

TEST_CASE("sipm dark rate contributes lambda_d * dt = 100 counts") {
  DetectorSpec spec = detector_preset("sipm");
  CHECK(spec.dark_count_rate * spec.integration_time_s == 100.0);

  // Observe the dark Poisson alone: zero out the secondary processes.
  spec.afterpulse_prob = 0.0;
  spec.crosstalk_prob = 0.0;
  TensorF mu({100, 1000}, 0.0);
  RngStream rng(72, 0);
  const BucketSeries b = detect_counts(mu, 100.0, spec, rng);
  double mean = 0;
  for (double v : b.values.data) mean += v;
  mean /= static_cast<double>(b.values.data.size());
  CHECK(std::fabs(mean - 100.0) <= 3.0 * std::sqrt(100.0 / 1e5));
}

TEST_CASE("dead time saturation") {
  DetectorSpec spec = detector_preset("snspd");
  CHECK(apply_dead_time(100, spec) == 100);
  // cap = floor(1e-3 / 40e-9) = 25000
  CHECK(apply_dead_time(30000, spec) == 25000);
  spec.dead_time_ns = 0.0;
  CHECK(apply_dead_time(30000, spec) == 30000);
  CHECK_THROWS_AS(apply_dead_time(-1, spec), std::invalid_argument);
}

TEST_CASE("signal-to-dark ratios at the 100-photon budget") {
  CHECK(signal_to_dark_ratio(1.0, 100.0, detector_preset("sipm")) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(signal_to_dark_ratio(1.0, 100.0, detector_preset("snspd")) ==
        doctest::Approx(9500.0).epsilon(1e-12));
  CHECK(signal_to_dark_ratio(1.0, 100.0, detector_preset("spad")) ==
        doctest::Approx(70.0).epsilon(1e-12));

  DetectorSpec clean = detector_preset("snspd");
  clean.dark_count_rate = 0.0;
  CHECK(signal_to_dark_ratio(1.0, 100.0, clean) == std::numeric_limits<double>::infinity());
}

TEST_CASE("with no secondary processes the output is Poisson (mean == variance)") {
  DetectorSpec spec;
  spec.name = "plain";
  spec.efficiency = 0.8;
  spec.dark_count_rate = 500.0;  // dark = 0.5 at 1 ms
  const double lambda = 0.7 * 100.0 * 0.8 + 0.5;

  TensorF mu({100, 1000}, 0.7);
  RngStream rng(73, 0);
  const BucketSeries b = detect_counts(mu, 100.0, spec, rng);
  double mean = 0;
  for (double v : b.values.data) mean += v;
  const double n = static_cast<double>(b.values.data.size());
  mean /= n;
  double var = 0;
  for (double v : b.values.data) var += (v - mean) * (v - mean);
  var /= n;

  const double se_mean = std::sqrt(lambda / n);
  const double se_var = std::sqrt((lambda + 2.0 * lambda * lambda) / n);
  CHECK(std::fabs(mean - lambda) <= 5.0 * se_mean);
  CHECK(std::fabs(var - lambda) <= 5.0 * se_var);
}

TEST_CASE("expected counts rise with efficiency and photon budget") {
  TensorF mu({10, 1000}, 0.5);
  const auto mean_counts = [&](double eta, double n_bar) {
    DetectorSpec spec;
    spec.name = "probe";
    spec.efficiency = eta;
    spec.dark_count_rate = 100.0;
    RngStream rng(74, 0);  // paired stream
    const BucketSeries b = detect_counts(mu, n_bar, spec, rng);
    double m = 0;
    for (double v : b.values.data) m += v;
    return m / static_cast<double>(b.values.data.size());
  };
  CHECK(mean_counts(0.9, 100.0) >= mean_counts(0.5, 100.0));
  CHECK(mean_counts(0.7, 150.0) >= mean_counts(0.7, 50.0));
}

TEST_CASE("detect_counts is deterministic and validates inputs") {
  TensorF mu({4, 6}, 0.3);
  RngStream a(75, 0), b(75, 0);
  const DetectorSpec spec = detector_preset("spad");
  CHECK(detect_counts(mu, 100.0, spec, a).values.data ==
        detect_counts(mu, 100.0, spec, b).values.data);

  TensorF bad({2, 2}, 1.5);
  RngStream rng(75, 1);
  CHECK_THROWS_AS(detect_counts(bad, 100.0, spec, rng), std::invalid_argument);
  CHECK_THROWS_AS(detect_counts(mu, 0.0, spec, rng), std::invalid_argument);
}

TEST_CASE("counts invert to intensities in expectation") {
  TensorF mu({100, 100}, 0.6);
  RngStream rng(76, 0);
  const DetectorSpec spec = detector_preset("sipm");
  const BucketSeries b = detect_counts(mu, 10000.0, spec, rng);
  const TensorF est = counts_to_intensity(b, spec);
  double mean = 0;
  for (double v : est.data) mean += v;
  mean /= static_cast<double>(est.data.size());
  CHECK(mean == doctest::Approx(0.6).epsilon(0.01));
}
