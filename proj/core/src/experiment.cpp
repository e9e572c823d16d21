// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "ghostlab/checkpoint.hpp"
#include "ghostlab/detector.hpp"
#include "ghostlab/gtf.hpp"
#include "ghostlab/measurement.hpp"
#include "ghostlab/metrics.hpp"
#include "ghostlab/normalize.hpp"
#include "ghostlab/recon.hpp"
#include "ghostlab/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ghostlab {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- config --

json to_json(const ExperimentConfig& c) {
  json j;
  j["seeds"] = {{"master", c.seed}};
  j["output_dir"] = c.output_dir;
  j["timing"] = c.timing;
  j["scene"] = {{"T", c.scene.T},
                {"H", c.scene.H},
                {"W", c.scene.W},
                {"count", c.scene.count},
                {"sprite", c.scene.sprite},
                {"sprite_size", c.scene.sprite_size},
                {"motion", c.scene.motion},
                {"speed_min", c.scene.speed_min},
                {"speed_max", c.scene.speed_max},
                {"source", c.scene.source},
                {"external_dir", c.scene.external_dir}};
  j["patterns"] = {{"kind", c.patterns.kind},
                   {"M", c.patterns.M},
                   {"grain_px", c.patterns.grain_px},
                   {"bernoulli_p", c.patterns.bernoulli_p},
                   {"binarize", c.patterns.binarize}};
  j["detector"] = {{"kind", c.detector.kind},
                   {"sigma", c.detector.sigma},
                   {"n_bar", c.detector.n_bar},
                   {"integration_time_s", c.detector.integration_time_s}};
  j["normalization"] = c.normalization;
  j["reconstructors"] = c.reconstructors;
  j["fista"] = {{"iterations", c.fista.iterations}, {"lambda", c.fista.lambda}};
  j["model"] = {{"embed_dim", c.model.embed_dim},
                {"heads", c.model.heads},
                {"block_layout", c.model.block_layout},
                {"mlp_hidden", c.model.mlp_hidden},
                {"head_hidden", c.model.head_hidden},
                {"use_temporal_pe", c.model.use_temporal_pe},
                {"checkpoint", c.model.checkpoint},
                {"epochs", c.model.epochs},
                {"batch_size", c.model.batch_size},
                {"lr", c.model.lr},
                {"weight_decay", c.model.weight_decay},
                {"loss_mse", c.model.loss_mse},
                {"loss_ssim", c.model.loss_ssim},
                {"loss_temporal", c.model.loss_temporal},
                {"val_count", c.model.val_count}};
  j["snr"] = {{"grid", c.snr.grid}};
  j["gradcheck"] = {{"probes", c.gradcheck.probes}, {"h", c.gradcheck.h}};
  j["ablate"] = {{"epochs", c.ablate.epochs}};
  j["normalize_sweep"] = {{"probe", c.normalize_sweep.probe},
                          {"lambda", c.normalize_sweep.lambda},
                          {"model_epochs", c.normalize_sweep.model_epochs}};
  j["detector_compare"] = {{"detectors", c.detector_compare.detectors},
                           {"checkpoints", c.detector_compare.checkpoints}};
  return j;
}

/// Paths whose values are free-form objects (arbitrary keys allowed).
bool freeform_path(const std::string& path) { return path == "detector_compare.checkpoints"; }

void validate_keys(const json& defaults, const json& user, const std::string& path) {
  if (!user.is_object()) {
    throw std::invalid_argument("config: expected object at '" + (path.empty() ? "." : path) + "'");
  }
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw std::invalid_argument("config: unknown key '" + where + "'");
    const json& dv = defaults.at(key);
    if (dv.is_object() && !freeform_path(where)) {
      validate_keys(dv, value, where);
    } else if (dv.is_object() != value.is_object() || dv.is_array() != value.is_array()) {
      throw std::invalid_argument("config: wrong shape for '" + where + "'");
    }
  }
}

json merge(const json& defaults, const json& user, const std::string& path) {
  json out = defaults;
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (defaults.at(key).is_object() && !freeform_path(where)) {
      out[key] = merge(defaults.at(key), value, where);
    } else {
      out[key] = value;
    }
  }
  return out;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.seed = j.at("seeds").at("master").get<uint64_t>();
  c.output_dir = j.at("output_dir").get<std::string>();
  c.timing = j.at("timing").get<std::string>();
  if (c.timing != "wall" && c.timing != "none") {
    throw std::invalid_argument("config: timing must be 'wall' or 'none'");
  }
  const json& s = j.at("scene");
  c.scene.T = s.at("T").get<int64_t>();
  c.scene.H = s.at("H").get<int64_t>();
  c.scene.W = s.at("W").get<int64_t>();
  c.scene.count = s.at("count").get<int64_t>();
  c.scene.sprite = s.at("sprite").get<std::string>();
  c.scene.sprite_size = s.at("sprite_size").get<double>();
  c.scene.motion = s.at("motion").get<std::string>();
  c.scene.speed_min = s.at("speed_min").get<double>();
  c.scene.speed_max = s.at("speed_max").get<double>();
  c.scene.source = s.at("source").get<std::string>();
  c.scene.external_dir = s.at("external_dir").get<std::string>();
  const json& p = j.at("patterns");
  c.patterns.kind = p.at("kind").get<std::string>();
  c.patterns.M = p.at("M").get<int64_t>();
  c.patterns.grain_px = p.at("grain_px").get<double>();
  c.patterns.bernoulli_p = p.at("bernoulli_p").get<double>();
  c.patterns.binarize = p.at("binarize").get<bool>();
  const json& d = j.at("detector");
  c.detector.kind = d.at("kind").get<std::string>();
  c.detector.sigma = d.at("sigma").get<double>();
  c.detector.n_bar = d.at("n_bar").get<double>();
  c.detector.integration_time_s = d.at("integration_time_s").get<double>();
  c.normalization = j.at("normalization").get<std::string>();
  norm_kind_from_string(c.normalization);  // validates
  c.reconstructors = j.at("reconstructors").get<std::vector<std::string>>();
  c.fista.iterations = j.at("fista").at("iterations").get<int>();
  c.fista.lambda = j.at("fista").at("lambda").get<double>();
  const json& m = j.at("model");
  c.model.embed_dim = m.at("embed_dim").get<int64_t>();
  c.model.heads = m.at("heads").get<int64_t>();
  c.model.block_layout = m.at("block_layout").get<std::string>();
  c.model.mlp_hidden = m.at("mlp_hidden").get<int64_t>();
  c.model.head_hidden = m.at("head_hidden").get<int64_t>();
  c.model.use_temporal_pe = m.at("use_temporal_pe").get<bool>();
  c.model.checkpoint = m.at("checkpoint").get<std::string>();
  c.model.epochs = m.at("epochs").get<int>();
  c.model.batch_size = m.at("batch_size").get<int>();
  c.model.lr = m.at("lr").get<double>();
  c.model.weight_decay = m.at("weight_decay").get<double>();
  c.model.loss_mse = m.at("loss_mse").get<double>();
  c.model.loss_ssim = m.at("loss_ssim").get<double>();
  c.model.loss_temporal = m.at("loss_temporal").get<double>();
  c.model.val_count = m.at("val_count").get<int64_t>();
  c.snr.grid = j.at("snr").at("grid").get<std::vector<double>>();
  c.gradcheck.probes = j.at("gradcheck").at("probes").get<int64_t>();
  c.gradcheck.h = j.at("gradcheck").at("h").get<double>();
  c.ablate.epochs = j.at("ablate").at("epochs").get<int>();
  c.normalize_sweep.probe = j.at("normalize_sweep").at("probe").get<std::string>();
  c.normalize_sweep.lambda = j.at("normalize_sweep").at("lambda").get<double>();
  c.normalize_sweep.model_epochs = j.at("normalize_sweep").at("model_epochs").get<int>();
  c.detector_compare.detectors =
      j.at("detector_compare").at("detectors").get<std::vector<std::string>>();
  c.detector_compare.checkpoints =
      j.at("detector_compare").at("checkpoints").get<std::map<std::string, std::string>>();
  return c;
}

// ------------------------------------------------------------------ io ----

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write: " + tmp);
  }
  fs::rename(tmp, path);
}

std::string fmt6(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string hash_hex(uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string csv_preamble(const ExperimentConfig& cfg, const std::string& cmd) {
  std::ostringstream os;
  os << "# ghostlab " << cmd << " config_hash=" << hash_hex(cfg.config_hash)
     << " snr_def=10log10(mean(mu^2)/sigma^2) normalization=" << cfg.normalization << "\n";
  return os.str();
}

// ----------------------------------------------------------- generation ---

SpriteKind sprite_for(const ExperimentConfig& cfg, int64_t s) {
  static const SpriteKind kinds[] = {SpriteKind::disc, SpriteKind::ring, SpriteKind::rect,
                                     SpriteKind::glyph};
  if (cfg.scene.sprite == "mix") return kinds[s % 4];
  return sprite_kind_from_string(cfg.scene.sprite);
}

MotionKind motion_for(const ExperimentConfig& cfg, int64_t s) {
  static const MotionKind kinds[] = {MotionKind::linear,       MotionKind::oscillatory,
                                     MotionKind::circular,     MotionKind::accelerating,
                                     MotionKind::random_walk,  MotionKind::bounce};
  if (cfg.scene.motion == "mix") return kinds[s % 6];
  return motion_kind_from_string(cfg.scene.motion);
}

SceneSequence generate_scene(const ExperimentConfig& cfg, int64_t s) {
  RngStream rng(cfg.seed, StreamIds::scene(s));
  auto canvas = static_cast<int64_t>(std::ceil(cfg.scene.sprite_size)) + 4;
  if (canvas % 2 == 0) ++canvas;
  const TensorF sprite = generate_sprite(sprite_for(cfg, s), cfg.scene.sprite_size, canvas, rng);

  MotionSpec spec;
  spec.kind = motion_for(cfg, s);
  spec.speed = cfg.scene.speed_min +
               rng.next_double() * (cfg.scene.speed_max - cfg.scene.speed_min);
  const double theta = rng.next_double() * 6.283185307179586;
  spec.dir_x = std::cos(theta);
  spec.dir_y = std::sin(theta);
  spec.phase = rng.next_double() * 6.283185307179586;
  spec.margin = cfg.scene.sprite_size / 2.0 + 1.0;
  spec.master_seed = cfg.seed;
  spec.walk_seed = StreamIds::scene(s) + 500000;

  const double xlo = spec.margin, xhi = static_cast<double>(cfg.scene.W - 1) - spec.margin;
  const double ylo = spec.margin, yhi = static_cast<double>(cfg.scene.H - 1) - spec.margin;
  const std::pair<double, double> start{xlo + rng.next_double() * std::max(xhi - xlo, 0.0),
                                        ylo + rng.next_double() * std::max(yhi - ylo, 0.0)};
  const auto traj =
      generate_trajectory(spec, cfg.scene.T, start, {cfg.scene.H, cfg.scene.W});
  SceneSequence seq = render_sequence(sprite, traj, cfg.scene.H, cfg.scene.W);
  seq.motion = spec;
  return seq;
}

PatternSet generate_patterns(const ExperimentConfig& cfg) {
  RngStream rng(cfg.seed, StreamIds::patterns);
  PatternSet ps;
  if (cfg.patterns.kind == "speckle") {
    ps = generate_speckle(cfg.patterns.M, cfg.scene.H, cfg.scene.W, cfg.patterns.grain_px, rng);
  } else if (cfg.patterns.kind == "bernoulli") {
    ps = generate_bernoulli(cfg.patterns.M, cfg.scene.H, cfg.scene.W, cfg.patterns.bernoulli_p,
                            rng);
  } else {
    throw std::invalid_argument("config: patterns.kind must be speckle or bernoulli");
  }
  if (cfg.patterns.binarize) binarize_patterns(ps);
  return ps;
}

DetectorSpec spec_for(const ExperimentConfig& cfg, const std::string& kind) {
  DetectorSpec spec = detector_preset(kind);
  spec.integration_time_s = cfg.detector.integration_time_s;
  return spec;
}

BucketSeries make_buckets(const ExperimentConfig& cfg, const PatternSet& ps,
                          const SceneSequence& seq, int64_t s, const std::string& detector_kind,
                          uint64_t stream_offset = 0) {
  const TensorF mu = ideal_intensity(ps, seq);
  RngStream rng(cfg.seed, StreamIds::detector(s) + stream_offset);
  if (detector_kind == "classical") {
    return classical_detect(mu, cfg.detector.sigma, rng);
  }
  return detect_counts(mu, cfg.detector.n_bar, spec_for(cfg, detector_kind), rng);
}

// ----------------------------------------------------------- evaluation ---

struct MethodStats {
  std::vector<double> frame_mse, frame_ssim, frame_ms;  // mean per frame index
  double mean_mse = 0, std_mse = 0, mean_ssim = 0, std_ssim = 0, mean_ms = 0;
  double mean_tcons = 0;
};

MethodStats aggregate(const std::vector<MetricsReport>& reports,
                      const std::vector<std::vector<double>>& frame_times, int64_t T) {
  MethodStats st;
  st.frame_mse.assign(static_cast<size_t>(T), 0.0);
  st.frame_ssim.assign(static_cast<size_t>(T), 0.0);
  st.frame_ms.assign(static_cast<size_t>(T), 0.0);
  std::vector<double> all_mse, all_ssim;
  double tsum = 0.0;
  for (size_t r = 0; r < reports.size(); ++r) {
    for (int64_t t = 0; t < T; ++t) {
      st.frame_mse[static_cast<size_t>(t)] += reports[r].frame_mse[static_cast<size_t>(t)];
      st.frame_ssim[static_cast<size_t>(t)] += reports[r].frame_ssim[static_cast<size_t>(t)];
      st.frame_ms[static_cast<size_t>(t)] += frame_times[r][static_cast<size_t>(t)];
      all_mse.push_back(reports[r].frame_mse[static_cast<size_t>(t)]);
      all_ssim.push_back(reports[r].frame_ssim[static_cast<size_t>(t)]);
    }
    tsum += reports[r].temporal;
  }
  const double inv = 1.0 / static_cast<double>(reports.size());
  for (int64_t t = 0; t < T; ++t) {
    st.frame_mse[static_cast<size_t>(t)] *= inv;
    st.frame_ssim[static_cast<size_t>(t)] *= inv;
    st.frame_ms[static_cast<size_t>(t)] *= inv;
  }
  const auto mean_std = [](const std::vector<double>& v, double& m, double& sd) {
    m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    sd = 0;
    for (double x : v) sd += (x - m) * (x - m);
    sd = std::sqrt(sd / static_cast<double>(v.size()));
  };
  mean_std(all_mse, st.mean_mse, st.std_mse);
  mean_std(all_ssim, st.mean_ssim, st.std_ssim);
  double msum = 0;
  for (int64_t t = 0; t < T; ++t) msum += st.frame_ms[static_cast<size_t>(t)];
  st.mean_ms = msum / static_cast<double>(T);
  st.mean_tcons = tsum * inv;
  return st;
}

TensorF frame_of(const TensorF& stack, int64_t t) {
  const int64_t H = stack.dim(1), W = stack.dim(2);
  TensorF f({H, W});
  std::copy_n(stack.data.begin() + t * H * W, H * W, f.data.begin());
  return f;
}

/// Per-frame intensity estimates in the normalized mu scale.
TensorF intensity_estimate(const Dataset& ds, const TensorF& raw) {
  if (!ds.counts_mode) return raw;
  BucketSeries b;
  b.values = raw;
  b.mode = BucketMode::counts;
  b.n_bar = ds.n_bar;
  return counts_to_intensity(b, ds.spec);
}

/// Classical solvers work against the unnormalized sensing matrix, so the
/// row-normalized intensities are scaled back by the pattern row sums.
std::vector<double> solver_row(const PatternSet& ps, const TensorF& mu_est, int64_t t) {
  const int64_t M = mu_est.dim(1);
  std::vector<double> row(static_cast<size_t>(M));
  for (int64_t i = 0; i < M; ++i) {
    row[static_cast<size_t>(i)] = mu_est.at(t, i) * ps.row_sums[static_cast<size_t>(i)];
  }
  return row;
}

}  // namespace

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  const json j = to_json(c);
  c.resolved_json = j.dump();
  c.config_hash = fnv1a64(c.resolved_json);
  return c;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: parse error: " + std::string(e.what()));
  }
  const json defaults = to_json(ExperimentConfig{});
  validate_keys(defaults, user, "");
  const json resolved = merge(defaults, user, "");
  ExperimentConfig c = from_json(resolved);
  c.resolved_json = resolved.dump();
  c.config_hash = fnv1a64(c.resolved_json);
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

ExperimentConfig resolve_config(const std::string& config_path, bool has_seed, uint64_t seed,
                                const std::string& out_dir) {
  json user = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("config: cannot open " + config_path);
    user = json::parse(in);
  }
  if (has_seed) user["seeds"]["master"] = seed;
  if (!out_dir.empty()) user["output_dir"] = out_dir;
  return config_from_json_text(user.dump());
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  Dataset ds;
  ds.patterns = generate_patterns(cfg);
  ds.counts_mode = cfg.detector.kind != "classical";
  ds.detector_kind = cfg.detector.kind;
  ds.n_bar = cfg.detector.n_bar;
  ds.sigma = cfg.detector.sigma;
  if (ds.counts_mode) ds.spec = spec_for(cfg, cfg.detector.kind);

  const int64_t total = cfg.scene.count + cfg.model.val_count;
  for (int64_t s = 0; s < total; ++s) {
    SceneSequence seq = cfg.scene.source == "external"
                            ? load_external_frames(cfg.scene.external_dir)
                            : generate_scene(cfg, s);
    BucketSeries b = make_buckets(cfg, ds.patterns, seq, s, cfg.detector.kind);
    if (s < cfg.scene.count) {
      ds.train_truth.push_back(seq.frames);
      ds.train_counts.push_back(b.values);
    } else {
      ds.val_truth.push_back(seq.frames);
      ds.val_counts.push_back(b.values);
    }
  }
  return ds;
}

std::string cmd_simulate(const ExperimentConfig& cfg) {
  const fs::path out(cfg.output_dir);
  fs::create_directories(out / "scenes");
  fs::create_directories(out / "buckets");
  fs::create_directories(out / "scenes_val");
  fs::create_directories(out / "buckets_val");

  const PatternSet ps = generate_patterns(cfg);
  save_tensor(ps.patterns, (out / "patterns.gtf").string());

  const int64_t total = cfg.scene.count + cfg.model.val_count;
  for (int64_t s = 0; s < total; ++s) {
    const bool val = s >= cfg.scene.count;
    const int64_t local = val ? s - cfg.scene.count : s;
    char name[64];
    std::snprintf(name, sizeof(name), "seq_%03lld", static_cast<long long>(local));

    SceneSequence seq = cfg.scene.source == "external"
                            ? load_external_frames(cfg.scene.external_dir)
                            : generate_scene(cfg, s);
    BucketSeries b = make_buckets(cfg, ps, seq, s, cfg.detector.kind);

    const fs::path sdir = val ? out / "scenes_val" : out / "scenes";
    const fs::path bdir = val ? out / "buckets_val" : out / "buckets";
    save_tensor(seq.frames, (sdir / (std::string(name) + ".gtf")).string());
    save_tensor(b.values, (bdir / (std::string(name) + ".gtf")).string());

    json side;
    side["mode"] = b.mode == BucketMode::counts ? "counts" : "analog";
    side["detector"] = b.detector;
    side["seed"] = cfg.seed;
    side["stream_id"] = StreamIds::detector(s);
    side["n_bar"] = b.n_bar;
    side["sigma"] = b.sigma;
    side["config_hash"] = hash_hex(cfg.config_hash);
    if (b.mode == BucketMode::counts) {
      const DetectorSpec spec = spec_for(cfg, cfg.detector.kind);
      side["detector_spec"] = {{"name", spec.name},
                               {"efficiency", spec.efficiency},
                               {"dark_count_rate_hz", spec.dark_count_rate},
                               {"dead_time_ns", spec.dead_time_ns},
                               {"afterpulse_prob", spec.afterpulse_prob},
                               {"crosstalk_prob", spec.crosstalk_prob},
                               {"timing_jitter_ps", spec.timing_jitter_ps},
                               {"integration_time_s", spec.integration_time_s}};
    }
    atomic_write((bdir / (std::string(name) + ".json")).string(), side.dump(2) + "\n");
  }

  json manifest;
  manifest["command"] = "simulate";
  manifest["config"] = json::parse(cfg.resolved_json);
  manifest["config_hash"] = hash_hex(cfg.config_hash);
  manifest["train_count"] = cfg.scene.count;
  manifest["val_count"] = cfg.model.val_count;
  manifest["detector"] = cfg.detector.kind;
  const std::string mpath = (out / "manifest.json").string();
  atomic_write(mpath, manifest.dump(2) + "\n");
  return mpath;
}

Dataset load_dataset(const std::string& dir) {
  const fs::path out(dir);
  std::ifstream min(out / "manifest.json");
  if (!min) throw std::runtime_error("dataset: missing manifest.json in " + dir + " (run simulate first)");
  const json manifest = json::parse(min);

  Dataset ds;
  TensorF pat = load_tensor((out / "patterns.gtf").string());
  ds.patterns.M = pat.dim(0);
  ds.patterns.H = pat.dim(1);
  ds.patterns.W = pat.dim(2);
  ds.patterns.patterns = std::move(pat);
  recompute_row_sums(ds.patterns);

  ds.detector_kind = manifest.at("detector").get<std::string>();
  ds.counts_mode = ds.detector_kind != "classical";

  const int64_t train = manifest.at("train_count").get<int64_t>();
  const int64_t val = manifest.at("val_count").get<int64_t>();
  const auto load_split = [&](const char* sdir, const char* bdir, int64_t n,
                              std::vector<TensorF>& truth, std::vector<TensorF>& counts) {
    for (int64_t s = 0; s < n; ++s) {
      char name[64];
      std::snprintf(name, sizeof(name), "seq_%03lld", static_cast<long long>(s));
      truth.push_back(load_tensor((out / sdir / (std::string(name) + ".gtf")).string()));
      counts.push_back(load_tensor((out / bdir / (std::string(name) + ".gtf")).string()));
      if (s == 0 && std::string(sdir) == "scenes") {
        std::ifstream sin(out / bdir / (std::string(name) + ".json"));
        if (sin) {
          const json side = json::parse(sin);
          ds.n_bar = side.value("n_bar", 0.0);
          ds.sigma = side.value("sigma", 0.0);
          if (side.contains("detector_spec")) {
            const json& sp = side["detector_spec"];
            ds.spec.name = sp.at("name").get<std::string>();
            ds.spec.efficiency = sp.at("efficiency").get<double>();
            ds.spec.dark_count_rate = sp.at("dark_count_rate_hz").get<double>();
            ds.spec.dead_time_ns = sp.at("dead_time_ns").get<double>();
            ds.spec.afterpulse_prob = sp.at("afterpulse_prob").get<double>();
            ds.spec.crosstalk_prob = sp.at("crosstalk_prob").get<double>();
            ds.spec.timing_jitter_ps = sp.at("timing_jitter_ps").get<double>();
            ds.spec.integration_time_s = sp.at("integration_time_s").get<double>();
          }
        }
      }
    }
  };
  load_split("scenes", "buckets", train, ds.train_truth, ds.train_counts);
  load_split("scenes_val", "buckets_val", val, ds.val_truth, ds.val_counts);
  return ds;
}

std::string cmd_reconstruct(const ExperimentConfig& cfg) {
  const Dataset ds = load_dataset(cfg.output_dir);
  if (ds.train_truth.empty()) throw std::runtime_error("reconstruct: dataset has no sequences");
  const int64_t T = ds.train_truth.front().dim(0);
  const bool wall = cfg.timing == "wall";
  const fs::path out(cfg.output_dir);

  json meta;
  std::ostringstream csv;
  csv << csv_preamble(cfg, "reconstruct");
  csv << "method,frame,mse,ssim,time_ms,mse_std,ssim_std\n";

  for (const std::string& method : cfg.reconstructors) {
    std::vector<MetricsReport> reports;
    std::vector<std::vector<double>> times;
    double fista_L = 0.0;  // operator is fixed per pattern set
    fs::create_directories(out / "recon" / method);

    std::unique_ptr<PinvSolver> pinv;
    Checkpoint ck;
    if (method == "pi") {
      pinv = std::make_unique<PinvSolver>(ds.patterns);
      meta["pi"]["factorize_ms"] = wall ? pinv->factorize_ms() : 0.0;
    } else if (method == "dynghost") {
      if (cfg.model.checkpoint.empty()) {
        throw std::runtime_error("reconstruct: method dynghost requires model.checkpoint");
      }
      ck = load_checkpoint(cfg.model.checkpoint);
    } else if (method != "dgi" && method != "fista") {
      throw std::invalid_argument("reconstruct: unknown method " + method);
    }

    for (size_t s = 0; s < ds.train_truth.size(); ++s) {
      const TensorF& truth = ds.train_truth[s];
      TensorF pred(truth.dims, 0.0);
      std::vector<double> frame_ms(static_cast<size_t>(T), 0.0);

      if (method == "dynghost") {
        const TensorF bnorm = ck.normalizer.apply(ds.train_counts[s]);
        const auto t0 = Clock::now();
        pred = dynghost_forward(ds.patterns, bnorm, ck.params, ck.config);
        const double per_frame = wall ? ms_since(t0) / static_cast<double>(T) : 0.0;
        std::fill(frame_ms.begin(), frame_ms.end(), per_frame);
      } else {
        const TensorF best = intensity_estimate(ds, ds.train_counts[s]);
        for (int64_t t = 0; t < T; ++t) {
          const auto row = solver_row(ds.patterns, best, t);
          const auto t0 = Clock::now();
          TensorF img;
          if (method == "dgi") {
            img = dgi(ds.patterns, row);
          } else if (method == "pi") {
            img = pinv->solve(row);
          } else {
            FistaConfig fc;
            fc.iterations = cfg.fista.iterations;
            fc.lambda_reg = cfg.fista.lambda;
            fc.lipschitz_hint = fista_L;
            auto r = fista(ds.patterns, row, fc);
            fista_L = r.lipschitz;
            img = std::move(r.image);
            if (s == 0 && t == 0) {
              meta["fista"]["lambda"] = r.lambda;
              meta["fista"]["lipschitz"] = r.lipschitz;
              meta["fista"]["iterations"] = cfg.fista.iterations;
            }
          }
          frame_ms[static_cast<size_t>(t)] = wall ? ms_since(t0) : 0.0;
          std::copy(img.data.begin(), img.data.end(),
                    pred.data.begin() + t * img.numel());
        }
      }

      char name[64];
      std::snprintf(name, sizeof(name), "seq_%03lld.gtf", static_cast<long long>(s));
      save_tensor(pred, (out / "recon" / method / name).string());
      reports.push_back(evaluate_sequence(pred, truth));
      times.push_back(frame_ms);
    }

    const MethodStats st = aggregate(reports, times, T);
    for (int64_t t = 0; t < T; ++t) {
      csv << method << "," << t << "," << fmt6(st.frame_mse[static_cast<size_t>(t)]) << ","
          << fmt6(st.frame_ssim[static_cast<size_t>(t)]) << ","
          << fmt6(st.frame_ms[static_cast<size_t>(t)]) << ",,\n";
    }
    csv << method << ",summary," << fmt6(st.mean_mse) << "," << fmt6(st.mean_ssim) << ","
        << fmt6(st.mean_ms) << "," << fmt6(st.std_mse) << "," << fmt6(st.std_ssim) << "\n";

    json mj;
    mj["method"] = method;
    mj["config_hash"] = hash_hex(cfg.config_hash);
    mj["frame_mse"] = st.frame_mse;
    mj["frame_ssim"] = st.frame_ssim;
    mj["mean_mse"] = st.mean_mse;
    mj["std_mse"] = st.std_mse;
    mj["mean_ssim"] = st.mean_ssim;
    mj["std_ssim"] = st.std_ssim;
    mj["mean_temporal"] = st.mean_tcons;
    mj["mean_time_ms"] = st.mean_ms;
    if (meta.contains(method)) mj["solver"] = meta[method];
    atomic_write((out / ("metrics_" + method + ".json")).string(), mj.dump(2) + "\n");
  }

  const std::string cpath = (out / "reconstruct.csv").string();
  atomic_write(cpath, csv.str());
  return cpath;
}

namespace {

DynGhostConfig model_config(const ExperimentConfig& cfg, const Dataset& ds) {
  DynGhostConfig mc;
  mc.T = ds.train_truth.front().dim(0);
  mc.H = ds.train_truth.front().dim(1);
  mc.W = ds.train_truth.front().dim(2);
  mc.M = ds.patterns.M;
  mc.embed_dim = cfg.model.embed_dim;
  mc.heads = cfg.model.heads;
  mc.block_layout = cfg.model.block_layout;
  mc.mlp_hidden = cfg.model.mlp_hidden;
  mc.head_hidden = cfg.model.head_hidden;
  mc.use_temporal_pe = cfg.model.use_temporal_pe;
  return mc;
}

Normalizer fit_on_train(const ExperimentConfig& cfg, const Dataset& ds) {
  // Calibration batch = all training buckets, then frozen.
  int64_t total = 0;
  for (const auto& t : ds.train_counts) total += t.numel();
  TensorF all({total});
  int64_t off = 0;
  for (const auto& t : ds.train_counts) {
    std::copy(t.data.begin(), t.data.end(), all.data.begin() + off);
    off += t.numel();
  }
  return fit_normalizer(norm_kind_from_string(cfg.normalization), all);
}

std::vector<TrainSample> make_samples(const Normalizer& nz, const std::vector<TensorF>& counts,
                                      const std::vector<TensorF>& truth) {
  std::vector<TrainSample> out;
  for (size_t i = 0; i < counts.size(); ++i) {
    out.push_back({nz.apply(counts[i]), truth[i]});
  }
  return out;
}

struct EvalResult {
  double mse = 0, ssim = 0, tcons = 0;
};

EvalResult eval_model(const ParamStore& params, const DynGhostConfig& mc, const PatternSet& ps,
                      const std::vector<TrainSample>& samples) {
  EvalResult r;
  for (const auto& s : samples) {
    const TensorF pred = dynghost_forward(ps, s.buckets_norm, params, mc);
    const MetricsReport m = evaluate_sequence(pred, s.truth);
    r.mse += m.mean_mse;
    r.ssim += m.mean_ssim;
    r.tcons += m.temporal;
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  r.mse *= inv;
  r.ssim *= inv;
  r.tcons *= inv;
  return r;
}

TrainConfig train_config(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.model.epochs;
  tc.batch_size = cfg.model.batch_size;
  tc.optimizer.lr = cfg.model.lr;
  tc.optimizer.weight_decay = cfg.model.weight_decay;
  tc.loss = {cfg.model.loss_mse, cfg.model.loss_ssim, cfg.model.loss_temporal};
  return tc;
}

}  // namespace

std::string cmd_train(const ExperimentConfig& cfg) {
  const Dataset ds = load_dataset(cfg.output_dir);
  if (ds.train_truth.empty()) throw std::runtime_error("train: dataset has no sequences");

  const Normalizer nz = fit_on_train(cfg, ds);
  const auto samples = make_samples(nz, ds.train_counts, ds.train_truth);
  const DynGhostConfig mc = model_config(cfg, ds);
  ParamStore params = init_params(mc, cfg.seed);

  const TrainConfig tc = train_config(cfg);
  RngStream shuffle(cfg.seed, StreamIds::shuffle);
  const TrainResult res = train(params, mc, ds.patterns, samples, tc, shuffle);

  std::ostringstream csv;
  csv << csv_preamble(cfg, "train");
  csv << "step,loss\n";
  for (size_t i = 0; i < res.step_loss.size(); ++i) {
    csv << i << "," << fmt6(res.step_loss[i]) << "\n";
  }
  const fs::path out(cfg.output_dir);
  atomic_write((out / "train_loss.csv").string(), csv.str());

  Checkpoint ck;
  ck.config = mc;
  ck.params = std::move(params);
  ck.normalizer = nz;
  ck.loss = tc.loss;
  ck.optimizer = tc.optimizer;
  ck.step = res.steps;
  const std::string ckdir = (out / "checkpoint").string();
  save_checkpoint(ck, ckdir);
  return ckdir;
}

GradCheckReport cmd_gradcheck(const ExperimentConfig& cfg) {
  const Dataset ds = load_dataset(cfg.output_dir);
  if (ds.train_truth.empty()) throw std::runtime_error("gradcheck: dataset has no sequences");
  const Normalizer nz = fit_on_train(cfg, ds);
  const DynGhostConfig mc = model_config(cfg, ds);
  const ParamStore params = init_params(mc, cfg.seed);

  RngStream rng(cfg.seed, StreamIds::gradcheck);
  const auto rep =
      dynghost_gradient_check(ds.patterns, nz.apply(ds.train_counts.front()),
                              ds.train_truth.front(), params, mc,
                              {cfg.model.loss_mse, cfg.model.loss_ssim, cfg.model.loss_temporal},
                              cfg.gradcheck.probes, cfg.gradcheck.h, rng);

  json j;
  j["max_rel_err"] = rep.max_rel_err;
  j["mean_rel_err"] = rep.mean_rel_err;
  j["probes"] = rep.probes;
  j["h"] = cfg.gradcheck.h;
  j["pass"] = rep.max_rel_err < 1e-4;
  j["config_hash"] = hash_hex(cfg.config_hash);
  atomic_write((fs::path(cfg.output_dir) / "gradcheck.json").string(), j.dump(2) + "\n");
  return rep;
}

std::string cmd_detector_compare(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  const PatternSet ps = generate_patterns(cfg);

  // Shared scenes across detectors.
  std::vector<SceneSequence> scenes;
  for (int64_t s = 0; s < cfg.scene.count; ++s) scenes.push_back(generate_scene(cfg, s));

  std::vector<TensorF> mus;
  for (const auto& seq : scenes) mus.push_back(ideal_intensity(ps, seq));

  std::ostringstream csv;
  csv << csv_preamble(cfg, "detector-compare");
  csv << "detector,normalization,method,mse,ssim,signal_to_dark_ratio\n";

  uint64_t det_index = 0;
  for (const std::string& det : cfg.detector_compare.detectors) {
    const bool counts = det != "classical";
    DetectorSpec spec;
    double sdr = std::numeric_limits<double>::infinity();
    if (counts) {
      spec = spec_for(cfg, det);
      // Regime indicator at the full photon budget (mu = 1).
      sdr = signal_to_dark_ratio(1.0, cfg.detector.n_bar, spec);
    }

    std::vector<TensorF> estimates;  // per-sequence intensity estimates
    std::vector<TensorF> raw_buckets;
    for (int64_t s = 0; s < cfg.scene.count; ++s) {
      RngStream rng(cfg.seed, StreamIds::detector(s) + 10000000ull * det_index);
      if (counts) {
        BucketSeries b = detect_counts(mus[static_cast<size_t>(s)], cfg.detector.n_bar, spec, rng);
        raw_buckets.push_back(b.values);
        estimates.push_back(counts_to_intensity(b, spec));
      } else {
        BucketSeries b = classical_detect(mus[static_cast<size_t>(s)], cfg.detector.sigma, rng);
        raw_buckets.push_back(b.values);
        estimates.push_back(b.values);
      }
    }

    for (const std::string& method : cfg.reconstructors) {
      double sum_mse = 0, sum_ssim = 0;
      double fista_L = 0.0;
      std::unique_ptr<PinvSolver> pinv;
      if (method == "pi") pinv = std::make_unique<PinvSolver>(ps);
      Checkpoint ck;
      bool have_ck = false;
      if (method == "dynghost") {
        const auto it = cfg.detector_compare.checkpoints.find(det);
        if (it == cfg.detector_compare.checkpoints.end()) {
          throw std::runtime_error("detector-compare: no checkpoint configured for detector " +
                                   det);
        }
        ck = load_checkpoint(it->second);
        have_ck = true;
      }

      for (int64_t s = 0; s < cfg.scene.count; ++s) {
        const TensorF& truth = scenes[static_cast<size_t>(s)].frames;
        const int64_t T = truth.dim(0);
        TensorF pred(truth.dims, 0.0);
        if (have_ck) {
          pred = dynghost_forward(ps, ck.normalizer.apply(raw_buckets[static_cast<size_t>(s)]),
                                  ck.params, ck.config);
        } else {
          for (int64_t t = 0; t < T; ++t) {
            const auto row = solver_row(ps, estimates[static_cast<size_t>(s)], t);
            TensorF img;
            if (method == "dgi") {
              img = dgi(ps, row);
            } else if (method == "pi") {
              img = pinv->solve(row);
            } else if (method == "fista") {
              FistaConfig fc;
              fc.iterations = cfg.fista.iterations;
              fc.lambda_reg = cfg.fista.lambda;
              fc.lipschitz_hint = fista_L;
              auto r = fista(ps, row, fc);
              fista_L = r.lipschitz;
              img = std::move(r.image);
            } else {
              throw std::invalid_argument("detector-compare: unknown method " + method);
            }
            std::copy(img.data.begin(), img.data.end(), pred.data.begin() + t * img.numel());
          }
        }
        const MetricsReport m = evaluate_sequence(pred, truth);
        sum_mse += m.mean_mse;
        sum_ssim += m.mean_ssim;
      }
      const double inv = 1.0 / static_cast<double>(cfg.scene.count);
      csv << det << "," << cfg.normalization << "," << method << "," << fmt6(sum_mse * inv) << ","
          << fmt6(sum_ssim * inv) << "," << fmt6(sdr) << "\n";
    }
    ++det_index;
  }

  const std::string cpath = (fs::path(cfg.output_dir) / "detector_compare.csv").string();
  atomic_write(cpath, csv.str());
  return cpath;
}

std::string cmd_normalize_sweep(const ExperimentConfig& cfg) {
  const Dataset ds = load_dataset(cfg.output_dir);
  if (!ds.counts_mode) {
    throw std::runtime_error("normalize-sweep: requires a photon-counting dataset (e.g. snspd)");
  }
  static const char* kStrategies[] = {"none",   "sqrt",     "log1p",        "minmax",
                                      "zscore", "anscombe", "freeman_tukey"};

  // Pooled training counts for the data-dependent fits.
  int64_t total = 0;
  for (const auto& t : ds.train_counts) total += t.numel();
  TensorF pooled({total});
  int64_t off = 0;
  for (const auto& t : ds.train_counts) {
    std::copy(t.data.begin(), t.data.end(), pooled.data.begin() + off);
    off += t.numel();
  }

  std::ostringstream csv;
  csv << csv_preamble(cfg, "normalize-sweep");
  csv << "strategy,variance,mse,ssim\n";

  for (const char* strategy : kStrategies) {
    const Normalizer nz = fit_normalizer(norm_kind_from_string(strategy), pooled);

    // Empirical variance of the transform at the configured flux.
    RngStream rng(cfg.seed, 6);
    constexpr int64_t kDraws = 100000;
    double m = 0, m2 = 0;
    for (int64_t i = 0; i < kDraws; ++i) {
      const double z =
          nz.apply(static_cast<double>(rng.poisson(cfg.normalize_sweep.lambda)));
      m += z;
      m2 += z * z;
    }
    m /= kDraws;
    const double variance = m2 / kDraws - m * m;

    double mse_v = 0, ssim_v = 0;
    const std::string& probe = cfg.normalize_sweep.probe;
    if (probe == "linear") {
      // Ridge probe from normalized buckets to frames, fit on train,
      // scored on validation.
      const int64_t T = ds.train_truth.front().dim(0);
      const int64_t M = ds.patterns.M, HW = ds.patterns.pixels();
      const int64_t rows = static_cast<int64_t>(ds.train_counts.size()) * T;
      Eigen::MatrixXd X(rows, M + 1), Y(rows, HW);
      int64_t r = 0;
      for (size_t s = 0; s < ds.train_counts.size(); ++s) {
        const TensorF bn = nz.apply(ds.train_counts[s]);
        for (int64_t t = 0; t < T; ++t, ++r) {
          for (int64_t i = 0; i < M; ++i) X(r, i) = bn.at(t, i);
          X(r, M) = 1.0;
          for (int64_t j = 0; j < HW; ++j) {
            Y(r, j) = ds.train_truth[s].data[static_cast<size_t>(t * HW + j)];
          }
        }
      }
      Eigen::MatrixXd gram = X.transpose() * X;
      gram.diagonal().array() += 1e-6 * gram.trace() / static_cast<double>(M + 1);
      const Eigen::MatrixXd Wts = gram.ldlt().solve(X.transpose() * Y);

      int64_t n_eval = 0;
      for (size_t s = 0; s < ds.val_counts.size(); ++s) {
        const TensorF bn = nz.apply(ds.val_counts[s]);
        const TensorF& truth = ds.val_truth[s];
        for (int64_t t = 0; t < T; ++t, ++n_eval) {
          Eigen::VectorXd x(M + 1);
          for (int64_t i = 0; i < M; ++i) x(i) = bn.at(t, i);
          x(M) = 1.0;
          const Eigen::VectorXd y = Wts.transpose() * x;
          TensorF img({ds.patterns.H, ds.patterns.W});
          for (int64_t j = 0; j < HW; ++j) img.data[static_cast<size_t>(j)] = std::clamp(y(j), 0.0, 1.0);
          mse_v += mse(img, frame_of(truth, t));
          ssim_v += ssim(img, frame_of(truth, t));
        }
      }
      mse_v /= static_cast<double>(n_eval);
      ssim_v /= static_cast<double>(n_eval);
    } else if (probe == "pi") {
      PinvSolver pinv(ds.patterns);
      int64_t n_eval = 0;
      const int64_t T = ds.val_truth.front().dim(0);
      for (size_t s = 0; s < ds.val_counts.size(); ++s) {
        const TensorF est = intensity_estimate(ds, nz.invert(nz.apply(ds.val_counts[s])));
        for (int64_t t = 0; t < T; ++t, ++n_eval) {
          const TensorF img = pinv.solve(solver_row(ds.patterns, est, t));
          mse_v += mse(img, frame_of(ds.val_truth[s], t));
          ssim_v += ssim(img, frame_of(ds.val_truth[s], t));
        }
      }
      mse_v /= static_cast<double>(n_eval);
      ssim_v /= static_cast<double>(n_eval);
    } else if (probe == "model") {
      const DynGhostConfig mc = model_config(cfg, ds);
      ParamStore params = init_params(mc, cfg.seed);
      TrainConfig tc = train_config(cfg);
      tc.epochs = cfg.normalize_sweep.model_epochs;
      RngStream shuffle(cfg.seed, StreamIds::shuffle);
      train(params, mc, ds.patterns, make_samples(nz, ds.train_counts, ds.train_truth), tc,
            shuffle);
      const EvalResult ev =
          eval_model(params, mc, ds.patterns, make_samples(nz, ds.val_counts, ds.val_truth));
      mse_v = ev.mse;
      ssim_v = ev.ssim;
    } else {
      throw std::invalid_argument("normalize-sweep: probe must be linear, pi or model");
    }

    csv << strategy << "," << fmt6(variance) << "," << fmt6(mse_v) << "," << fmt6(ssim_v) << "\n";
  }

  const std::string cpath = (fs::path(cfg.output_dir) / "normalize_sweep.csv").string();
  atomic_write(cpath, csv.str());
  return cpath;
}

std::string cmd_snr_sweep(const ExperimentConfig& cfg) {
  const Dataset ds = load_dataset(cfg.output_dir);
  if (ds.counts_mode) {
    throw std::runtime_error("snr-sweep: requires an analog (classical-detector) dataset");
  }
  const int64_t T = ds.train_truth.front().dim(0), M = ds.patterns.M;

  // Ideal intensities recomputed from the stored scenes and patterns.
  std::vector<TensorF> mus;
  double mu_pow = 0.0;
  int64_t mu_n = 0;
  for (const auto& truth : ds.train_truth) {
    SceneSequence seq;
    seq.frames = truth;
    mus.push_back(ideal_intensity(ds.patterns, seq));
    for (double v : mus.back().data) mu_pow += v * v;
    mu_n += mus.back().numel();
  }
  mu_pow /= static_cast<double>(mu_n);

  Checkpoint ck;
  for (const auto& m : cfg.reconstructors) {
    if (m == "dynghost") {
      if (cfg.model.checkpoint.empty()) {
        throw std::runtime_error("snr-sweep: method dynghost requires model.checkpoint");
      }
      ck = load_checkpoint(cfg.model.checkpoint);
    }
  }

  std::ostringstream csv;
  csv << csv_preamble(cfg, "snr-sweep");
  csv << "snr_db,method,measured_snr_db,mean_ssim,mean_mse\n";

  std::unique_ptr<PinvSolver> pinv;
  for (const auto& m : cfg.reconstructors) {
    if (m == "pi") pinv = std::make_unique<PinvSolver>(ds.patterns);
  }

  double fista_L = 0.0;
  uint64_t grid_index = 0;
  for (double target : cfg.snr.grid) {
    TensorF pooled_mu({static_cast<int64_t>(mus.size()), T, M});
    int64_t off = 0;
    for (const auto& mu : mus) {
      std::copy(mu.data.begin(), mu.data.end(), pooled_mu.data.begin() + off);
      off += mu.numel();
    }
    const double sigma = sigma_for_snr(pooled_mu, target);

    // Fresh noise per grid point; SNR measured on the pre-clip signal.
    std::vector<TensorF> noisy, raw;
    for (size_t s = 0; s < mus.size(); ++s) {
      RngStream rng(cfg.seed, StreamIds::detector(static_cast<int64_t>(s)) +
                                  1000000ull * (grid_index + 1));
      TensorF r(mus[s].dims), c(mus[s].dims);
      for (size_t i = 0; i < mus[s].data.size(); ++i) {
        r.data[i] = mus[s].data[i] + rng.gaussian(0.0, sigma);
        c.data[i] = std::clamp(r.data[i], 0.0, 1.0);
      }
      raw.push_back(std::move(r));
      noisy.push_back(std::move(c));
    }
    TensorF pooled_raw(pooled_mu.dims);
    off = 0;
    for (const auto& r : raw) {
      std::copy(r.data.begin(), r.data.end(), pooled_raw.data.begin() + off);
      off += r.numel();
    }
    const double measured = snr_db(pooled_mu, pooled_raw);

    for (const std::string& method : cfg.reconstructors) {
      double sum_mse = 0, sum_ssim = 0;
      for (size_t s = 0; s < mus.size(); ++s) {
        const TensorF& truth = ds.train_truth[s];
        TensorF pred(truth.dims, 0.0);
        if (method == "dynghost") {
          pred = dynghost_forward(ds.patterns, ck.normalizer.apply(noisy[s]), ck.params,
                                  ck.config);
        } else {
          for (int64_t t = 0; t < T; ++t) {
            const auto row = solver_row(ds.patterns, noisy[s], t);
            TensorF img;
            if (method == "dgi") {
              img = dgi(ds.patterns, row);
            } else if (method == "pi") {
              img = pinv->solve(row);
            } else if (method == "fista") {
              FistaConfig fc;
              fc.iterations = cfg.fista.iterations;
              fc.lambda_reg = cfg.fista.lambda;
              fc.lipschitz_hint = fista_L;
              auto r = fista(ds.patterns, row, fc);
              fista_L = r.lipschitz;
              img = std::move(r.image);
            } else {
              throw std::invalid_argument("snr-sweep: unknown method " + method);
            }
            std::copy(img.data.begin(), img.data.end(), pred.data.begin() + t * img.numel());
          }
        }
        const MetricsReport mr = evaluate_sequence(pred, truth);
        sum_mse += mr.mean_mse;
        sum_ssim += mr.mean_ssim;
      }
      const double inv = 1.0 / static_cast<double>(mus.size());
      csv << fmt6(target) << "," << method << "," << fmt6(measured) << ","
          << fmt6(sum_ssim * inv) << "," << fmt6(sum_mse * inv) << "\n";
    }
    ++grid_index;
  }

  const std::string cpath = (fs::path(cfg.output_dir) / "snr_sweep.csv").string();
  atomic_write(cpath, csv.str());
  return cpath;
}

std::string cmd_ablate(const ExperimentConfig& cfg) {
  const Dataset ds = load_dataset(cfg.output_dir);
  const Normalizer nz = fit_on_train(cfg, ds);
  const auto train_samples = make_samples(nz, ds.train_counts, ds.train_truth);
  const auto val_samples = make_samples(nz, ds.val_counts, ds.val_truth);
  if (val_samples.empty()) throw std::runtime_error("ablate: dataset has no validation split");

  struct Variant {
    const char* name;
    const char* layout;
    bool temporal_pe;
    LossWeights loss;
  };
  const LossWeights full{cfg.model.loss_mse, cfg.model.loss_ssim, cfg.model.loss_temporal};
  const std::vector<Variant> variants = {
      {"full", cfg.model.block_layout.c_str(), true, full},
      {"no-temporal-attention", "SS", true, full},
      {"no-temporal-pos-enc", cfg.model.block_layout.c_str(), false, full},
      {"mse-only-loss", cfg.model.block_layout.c_str(), true, {full.mse, 0.0, 0.0}},
      {"no-temp-consistency-loss", cfg.model.block_layout.c_str(), true, {full.mse, full.ssim, 0.0}},
      {"1-temporal-block", "STS", true, full},
  };

  std::ostringstream csv;
  csv << csv_preamble(cfg, "ablate");
  csv << "variant,mse,ssim,tcons\n";

  for (const auto& v : variants) {
    DynGhostConfig mc = model_config(cfg, ds);
    mc.block_layout = v.layout;
    mc.use_temporal_pe = v.temporal_pe;
    ParamStore params = init_params(mc, cfg.seed);
    TrainConfig tc = train_config(cfg);
    tc.epochs = cfg.ablate.epochs;
    tc.loss = v.loss;
    RngStream shuffle(cfg.seed, StreamIds::shuffle);
    train(params, mc, ds.patterns, train_samples, tc, shuffle);
    const EvalResult ev = eval_model(params, mc, ds.patterns, val_samples);
    csv << v.name << "," << fmt6(ev.mse) << "," << fmt6(ev.ssim) << "," << fmt6(ev.tcons) << "\n";
  }

  const std::string cpath = (fs::path(cfg.output_dir) / "ablate.csv").string();
  atomic_write(cpath, csv.str());
  return cpath;
}

}  // namespace ghostlab
