// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ghostlab/rng.hpp"
#include "ghostlab/tensor.hpp"

namespace ghostlab {

enum class SpriteKind { disc, ring, rect, glyph };
enum class MotionKind { linear, oscillatory, circular, accelerating, random_walk, bounce };

SpriteKind sprite_kind_from_string(const std::string& s);
MotionKind motion_kind_from_string(const std::string& s);
std::string to_string(MotionKind k);

/// Trajectory parameters. Kinds not named below use only speed/direction.
/// Defaults are the toolkit's documented choices:
///  - oscillatory: sinusoid along `direction`, period frames per cycle,
///    amplitude set so the peak per-step displacement equals speed
///  - circular: chord per step equals speed, one revolution per `period`
///  - accelerating: step magnitude grows linearly, final step equals speed
///  - random_walk: i.i.d. Gaussian steps, per-axis sigma speed/sqrt(2)
///  - bounce: constant velocity, reflecting at margin-inset borders
/// Non-bounce kinds clamp the center into the margin-inset box so the
/// sprite stays fully visible.
struct MotionSpec {
  MotionKind kind = MotionKind::linear;
  double speed = 2.0;  // px/frame, valid range [0, 50]
  double dir_x = 1.0;
  double dir_y = 0.0;
  double period = 8.0;        // frames per cycle (oscillatory, circular)
  double phase = 0.0;         // radians
  double margin = 0.0;        // boundary inset, typically sprite half-extent
  uint64_t walk_seed = 0;     // substream id for random_walk
  uint64_t master_seed = 0;   // master seed for stochastic kinds
};

struct SceneSequence {
  TensorF frames;  // [T, H, W], every pixel in [0, 1]
  std::optional<MotionSpec> motion;
  std::vector<std::pair<double, double>> centers;  // per-frame sprite center (x, y)

  int64_t T() const { return frames.dim(0); }
  int64_t H() const { return frames.dim(1); }
  int64_t W() const { return frames.dim(2); }
};

/// Grayscale sprite on a canvas_px x canvas_px canvas, background 0,
/// values in [0, 1]. size_px is the diameter (disc/ring), edge length
/// (rect) or stroke extent (glyph). Edges are antialiased except rect,
/// which is hard-edged on integer pixels. Throws if the sprite does not
/// fit the canvas.
TensorF generate_sprite(SpriteKind kind, double size_px, int64_t canvas_px, RngStream& rng);

/// T center positions (x, y) starting at `start` inside bounds (W, H).
std::vector<std::pair<double, double>> generate_trajectory(const MotionSpec& spec, int64_t T,
                                                           std::pair<double, double> start,
                                                           std::pair<int64_t, int64_t> bounds_hw);

/// Frame t = sprite composited with its center at traj[t], bilinear
/// sub-pixel placement, clamped to [0, 1].
SceneSequence render_sequence(const TensorF& sprite,
                              const std::vector<std::pair<double, double>>& traj, int64_t H,
                              int64_t W);

/// Reads a directory of equal-size binary PGM (P5) files; lexicographic
/// filename order defines t; values scaled to [0,1] by maxval.
SceneSequence load_external_frames(const std::string& dir_path);

void save_pgm(const TensorF& image, const std::string& path);
TensorF load_pgm(const std::string& path);

}  // namespace ghostlab
