// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ghostlab/detector.hpp"
#include "ghostlab/dynghost.hpp"
#include "ghostlab/optim.hpp"

namespace ghostlab {

/// Experiment configuration, loaded from a JSON document with one section
/// per concern. Every field below is the schema default; unknown keys in
/// the document are rejected.
struct SceneConfig {
  int64_t T = 4, H = 16, W = 16;
  int64_t count = 8;               // training sequences
  std::string sprite = "mix";      // disc|ring|rect|glyph|mix
  double sprite_size = 7.0;
  std::string motion = "mix";      // one kind or "mix" over all six
  double speed_min = 1.0, speed_max = 3.0;
  std::string source = "procedural";  // or "external"
  std::string external_dir;
};

struct PatternConfig {
  std::string kind = "speckle";  // speckle|bernoulli
  int64_t M = 24;
  double grain_px = 2.0;
  double bernoulli_p = 0.5;
  bool binarize = false;
};

struct DetectorSectionConfig {
  std::string kind = "classical";  // classical|snspd|spad|sipm
  double sigma = 0.01;             // classical analog noise
  double n_bar = 100.0;            // photon budget per measurement
  double integration_time_s = 1e-3;
};

struct ModelSectionConfig {
  int64_t embed_dim = 16, heads = 2;
  std::string block_layout = "STST";
  int64_t mlp_hidden = 64, head_hidden = 256;
  bool use_temporal_pe = true;
  std::string checkpoint;  // required when "dynghost" is a reconstructor
  int epochs = 30, batch_size = 4;
  double lr = 3e-4, weight_decay = 1e-3;
  double loss_mse = 1.0, loss_ssim = 0.5, loss_temporal = 0.1;
  int64_t val_count = 16;
};

struct FistaSectionConfig {
  int iterations = 200;
  double lambda = -1.0;  // < 0 selects the auto rule
};

struct SnrSectionConfig {
  std::vector<double> grid = {30, 20, 15, 10, 5, 0};
};

struct GradcheckSectionConfig {
  int64_t probes = 200;
  double h = 1e-5;
};

struct AblateSectionConfig {
  int epochs = 10;
};

struct NormalizeSweepSectionConfig {
  std::string probe = "linear";  // linear|pi|model
  double lambda = 100.0;         // flux for the variance column
  int model_epochs = 12;
};

struct DetectorCompareSectionConfig {
  std::vector<std::string> detectors = {"classical", "snspd", "spad", "sipm"};
  std::map<std::string, std::string> checkpoints;  // detector -> checkpoint dir
};

struct ExperimentConfig {
  uint64_t seed = 7;
  std::string output_dir = "out";
  std::string timing = "wall";  // wall|none; "none" zeroes time columns
  SceneConfig scene;
  PatternConfig patterns;
  DetectorSectionConfig detector;
  std::string normalization = "none";
  std::vector<std::string> reconstructors = {"dgi", "pi", "fista"};
  FistaSectionConfig fista;
  ModelSectionConfig model;
  SnrSectionConfig snr;
  GradcheckSectionConfig gradcheck;
  AblateSectionConfig ablate;
  NormalizeSweepSectionConfig normalize_sweep;
  DetectorCompareSectionConfig detector_compare;

  std::string resolved_json;  // canonical resolved document
  uint64_t config_hash = 0;   // FNV-1a over resolved_json
};

/// Parses and validates a config document; unknown keys anywhere are an
/// error, missing keys take the defaults above.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
/// The all-defaults configuration.
ExperimentConfig default_config();
/// Loads `config_path` (or the defaults when empty) and applies the CLI
/// overrides before resolving, so the config hash tracks them.
ExperimentConfig resolve_config(const std::string& config_path, bool has_seed, uint64_t seed,
                                const std::string& out_dir);

/// Substream allocation for derived randomness (documented contract):
/// patterns = 1; scene s = 1000 + s; detector noise for scene s =
/// 200000 + s; model init = 3; shuffle = 4; gradcheck = 5. Validation
/// scenes continue the training numbering.
struct StreamIds {
  static constexpr uint64_t patterns = 1;
  static constexpr uint64_t model_init = 3;
  static constexpr uint64_t shuffle = 4;
  static constexpr uint64_t gradcheck = 5;
  static uint64_t scene(int64_t s) { return 1000 + static_cast<uint64_t>(s); }
  static uint64_t detector(int64_t s) { return 200000 + static_cast<uint64_t>(s); }
};

/// Writes patterns, scenes and buckets (train + validation split) under
/// output_dir and returns the manifest path.
std::string cmd_simulate(const ExperimentConfig& cfg);

/// Runs the configured reconstructors over the simulated dataset; writes
/// reconstruct.csv (per-frame rows plus a summary row per method),
/// per-method metrics JSON and reconstruction GTFs. Returns the CSV path.
std::string cmd_reconstruct(const ExperimentConfig& cfg);

/// Trains the model on the simulated dataset; writes checkpoint/ and
/// train_loss.csv; returns the checkpoint directory.
std::string cmd_train(const ExperimentConfig& cfg);

/// Finite-difference gradient audit on a fresh toy instance.
GradCheckReport cmd_gradcheck(const ExperimentConfig& cfg);

/// Detector x normalization x method comparison CSV.
std::string cmd_detector_compare(const ExperimentConfig& cfg);

/// One row per normalization strategy: variance at the configured flux
/// plus downstream reconstruction metrics from the configured probe.
std::string cmd_normalize_sweep(const ExperimentConfig& cfg);

/// Reconstruction quality across the configured SNR grid.
std::string cmd_snr_sweep(const ExperimentConfig& cfg);

/// Trains the six model variants on the identical dataset and seed.
std::string cmd_ablate(const ExperimentConfig& cfg);

/// In-memory dataset used by the training-side commands.
struct Dataset {
  PatternSet patterns;
  std::vector<TensorF> train_truth;  // [T,H,W] each
  std::vector<TensorF> train_counts; // [T,M] raw buckets (counts or analog)
  std::vector<TensorF> val_truth;
  std::vector<TensorF> val_counts;
  bool counts_mode = false;
  std::string detector_kind = "classical";
  double n_bar = 0.0;
  double sigma = 0.0;
  DetectorSpec spec;
};

/// Loads the files cmd_simulate wrote.
Dataset load_dataset(const std::string& dir);

/// Builds the same dataset in memory (identical draws to cmd_simulate).
Dataset build_dataset(const ExperimentConfig& cfg);

uint64_t fnv1a64(const std::string& s);

}  // namespace ghostlab
