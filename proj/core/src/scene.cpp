// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace ghostlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// Soft-edged indicator: 1 inside, 0 outside, linear over one pixel.
double soft_step(double signed_dist_inside) { return clamp01(signed_dist_inside + 0.5); }

void draw_segment(TensorF& img, double x0, double y0, double x1, double y1, double half_width) {
  const int64_t n = img.dim(0);
  for (int64_t y = 0; y < n; ++y) {
    for (int64_t x = 0; x < n; ++x) {
      const double px = static_cast<double>(x), py = static_cast<double>(y);
      const double vx = x1 - x0, vy = y1 - y0;
      const double len2 = vx * vx + vy * vy;
      double t = len2 > 0 ? ((px - x0) * vx + (py - y0) * vy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = px - (x0 + t * vx), dy = py - (y0 + t * vy);
      const double d = std::sqrt(dx * dx + dy * dy);
      img.at(y, x) = std::max(img.at(y, x), soft_step(half_width - d));
    }
  }
}

}  // namespace

SpriteKind sprite_kind_from_string(const std::string& s) {
  if (s == "disc") return SpriteKind::disc;
  if (s == "ring") return SpriteKind::ring;
  if (s == "rect") return SpriteKind::rect;
  if (s == "glyph") return SpriteKind::glyph;
  throw std::invalid_argument("unknown sprite kind: " + s);
}

MotionKind motion_kind_from_string(const std::string& s) {
  if (s == "linear") return MotionKind::linear;
  if (s == "oscillatory") return MotionKind::oscillatory;
  if (s == "circular") return MotionKind::circular;
  if (s == "accelerating") return MotionKind::accelerating;
  if (s == "random_walk") return MotionKind::random_walk;
  if (s == "bounce") return MotionKind::bounce;
  throw std::invalid_argument("unknown motion kind: " + s);
}

std::string to_string(MotionKind k) {
  switch (k) {
    case MotionKind::linear: return "linear";
    case MotionKind::oscillatory: return "oscillatory";
    case MotionKind::circular: return "circular";
    case MotionKind::accelerating: return "accelerating";
    case MotionKind::random_walk: return "random_walk";
    case MotionKind::bounce: return "bounce";
  }
  return "?";
}

TensorF generate_sprite(SpriteKind kind, double size_px, int64_t canvas_px, RngStream& rng) {
  if (canvas_px < 1) throw std::invalid_argument("sprite: canvas must be positive");
  if (size_px <= 0 || size_px > static_cast<double>(canvas_px)) {
    throw std::invalid_argument("sprite: size_px must fit within the canvas");
  }
  TensorF img({canvas_px, canvas_px}, 0.0);
  const double c = (static_cast<double>(canvas_px) - 1.0) / 2.0;

  switch (kind) {
    case SpriteKind::disc: {
      const double r = size_px / 2.0;
      for (int64_t y = 0; y < canvas_px; ++y) {
        for (int64_t x = 0; x < canvas_px; ++x) {
          const double d = std::hypot(static_cast<double>(x) - c, static_cast<double>(y) - c);
          img.at(y, x) = soft_step(r - d);
        }
      }
      break;
    }
    case SpriteKind::ring: {
      const double r_mid = size_px / 2.0;
      const double half_thick = std::max(size_px / 8.0, 0.75);
      for (int64_t y = 0; y < canvas_px; ++y) {
        for (int64_t x = 0; x < canvas_px; ++x) {
          const double d = std::hypot(static_cast<double>(x) - c, static_cast<double>(y) - c);
          img.at(y, x) = soft_step(half_thick - std::fabs(d - r_mid));
        }
      }
      break;
    }
    case SpriteKind::rect: {
      const auto side = static_cast<int64_t>(std::llround(size_px));
      const int64_t lo = (canvas_px - side) / 2;
      for (int64_t y = lo; y < lo + side; ++y) {
        for (int64_t x = lo; x < lo + side; ++x) img.at(y, x) = 1.0;
      }
      break;
    }
    case SpriteKind::glyph: {
      // Digit-like figure: 2-4 strokes joining random anchor points on a
      // size_px box around the center.
      const double half = size_px / 2.0;
      const double hw = std::max(size_px / 10.0, 0.6);
      const int strokes = 2 + static_cast<int>(rng.next_u64() % 3);
      double px = c + (rng.next_double() * 2.0 - 1.0) * half * 0.8;
      double py = c - half * 0.9;
      for (int s = 0; s < strokes; ++s) {
        const double nx = c + (rng.next_double() * 2.0 - 1.0) * half * 0.9;
        const double ny = c + (rng.next_double() * 2.0 - 1.0) * half * 0.9;
        draw_segment(img, px, py, nx, ny, hw);
        px = nx;
        py = ny;
      }
      break;
    }
  }
  return img;
}

std::vector<std::pair<double, double>> generate_trajectory(const MotionSpec& spec, int64_t T,
                                                           std::pair<double, double> start,
                                                           std::pair<int64_t, int64_t> bounds_hw) {
  if (T < 1) throw std::invalid_argument("trajectory: T must be >= 1");
  if (spec.speed < 0.0 || spec.speed > 50.0) {
    throw std::invalid_argument("trajectory: speed must be in [0, 50]");
  }
  const double H = static_cast<double>(bounds_hw.first);
  const double W = static_cast<double>(bounds_hw.second);
  const double m = spec.margin;
  const double xlo = m, xhi = W - 1.0 - m;
  const double ylo = m, yhi = H - 1.0 - m;
  if (start.first < 0 || start.first > W - 1 || start.second < 0 || start.second > H - 1) {
    throw std::invalid_argument("trajectory: start outside bounds");
  }

  double nx = spec.dir_x, ny = spec.dir_y;
  const double nn = std::hypot(nx, ny);
  if (nn > 0) {
    nx /= nn;
    ny /= nn;
  }

  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<size_t>(T));
  const auto clamp_box = [&](double x, double y) {
    return std::make_pair(std::clamp(x, std::min(xlo, xhi), std::max(xlo, xhi)),
                          std::clamp(y, std::min(ylo, yhi), std::max(ylo, yhi)));
  };

  switch (spec.kind) {
    case MotionKind::linear: {
      for (int64_t t = 0; t < T; ++t) {
        out.push_back(clamp_box(start.first + spec.speed * nx * static_cast<double>(t),
                                start.second + spec.speed * ny * static_cast<double>(t)));
      }
      break;
    }
    case MotionKind::oscillatory: {
      const double omega = 2.0 * kPi / std::max(spec.period, 2.0);
      // Step t->t+1 has magnitude 2 A sin(w/2) |cos(w(t+1/2) + phi)|; the
      // amplitude and the -w/2 offset make the first step at phase 0 the
      // peak, with magnitude exactly `speed`.
      const double amp = spec.speed / (2.0 * std::sin(omega / 2.0));
      for (int64_t t = 0; t < T; ++t) {
        const double s =
            amp * std::sin(omega * (static_cast<double>(t) - 0.5) + spec.phase);
        out.push_back(clamp_box(start.first + s * nx, start.second + s * ny));
      }
      break;
    }
    case MotionKind::circular: {
      const double omega = 2.0 * kPi / std::max(spec.period, 3.0);
      // Chord per step 2 r sin(w/2) = speed.
      const double r = spec.speed / (2.0 * std::sin(omega / 2.0));
      const double cx = start.first - r * std::cos(spec.phase);
      const double cy = start.second - r * std::sin(spec.phase);
      for (int64_t t = 0; t < T; ++t) {
        const double a = spec.phase + omega * static_cast<double>(t);
        out.push_back(clamp_box(cx + r * std::cos(a), cy + r * std::sin(a)));
      }
      break;
    }
    case MotionKind::accelerating: {
      // Step t has magnitude speed * (t+1) / (T-1): ramps linearly up to
      // `speed` on the final step.
      double x = start.first, y = start.second;
      out.push_back(clamp_box(x, y));
      const double denom = static_cast<double>(std::max<int64_t>(T - 1, 1));
      for (int64_t t = 1; t < T; ++t) {
        const double step = spec.speed * static_cast<double>(t) / denom;
        x += step * nx;
        y += step * ny;
        out.push_back(clamp_box(x, y));
      }
      break;
    }
    case MotionKind::random_walk: {
      RngStream walk(spec.master_seed, spec.walk_seed);
      const double s = spec.speed / std::sqrt(2.0);
      double x = start.first, y = start.second;
      out.push_back(clamp_box(x, y));
      for (int64_t t = 1; t < T; ++t) {
        x += walk.gaussian(0.0, s);
        y += walk.gaussian(0.0, s);
        auto p = clamp_box(x, y);
        x = p.first;
        y = p.second;
        out.push_back(p);
      }
      break;
    }
    case MotionKind::bounce: {
      double x = start.first, y = start.second;
      double vx = spec.speed * nx, vy = spec.speed * ny;
      out.push_back(clamp_box(x, y));
      for (int64_t t = 1; t < T; ++t) {
        x += vx;
        y += vy;
        // Reflect off the margin-inset box, possibly repeatedly.
        for (int guard = 0; guard < 8; ++guard) {
          bool again = false;
          if (x < xlo) { x = 2 * xlo - x; vx = -vx; again = true; }
          if (x > xhi) { x = 2 * xhi - x; vx = -vx; again = true; }
          if (y < ylo) { y = 2 * ylo - y; vy = -vy; again = true; }
          if (y > yhi) { y = 2 * yhi - y; vy = -vy; again = true; }
          if (!again) break;
        }
        auto p = clamp_box(x, y);
        x = p.first;
        y = p.second;
        out.push_back(p);
      }
      break;
    }
  }
  return out;
}

SceneSequence render_sequence(const TensorF& sprite,
                              const std::vector<std::pair<double, double>>& traj, int64_t H,
                              int64_t W) {
  if (traj.empty()) throw std::invalid_argument("render: trajectory must have T >= 1");
  if (sprite.rank() != 2) throw std::invalid_argument("render: sprite must be 2-D");
  const int64_t sh = sprite.dim(0), sw = sprite.dim(1);
  const double scx = (static_cast<double>(sw) - 1.0) / 2.0;
  const double scy = (static_cast<double>(sh) - 1.0) / 2.0;

  SceneSequence seq;
  seq.frames = TensorF({static_cast<int64_t>(traj.size()), H, W}, 0.0);
  seq.centers = traj;

  for (size_t t = 0; t < traj.size(); ++t) {
    const double ox = traj[t].first - scx;   // sprite (0,0) lands at (ox, oy)
    const double oy = traj[t].second - scy;
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t x = 0; x < W; ++x) {
        // Bilinear sample of the sprite at the frame pixel, zero outside.
        const double sx = static_cast<double>(x) - ox;
        const double sy = static_cast<double>(y) - oy;
        const double fx = std::floor(sx), fy = std::floor(sy);
        const auto ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy);
        const double ax = sx - fx, ay = sy - fy;
        double v = 0.0;
        for (int dy = 0; dy <= 1; ++dy) {
          for (int dx = 0; dx <= 1; ++dx) {
            const int64_t px = ix + dx, py = iy + dy;
            if (px < 0 || px >= sw || py < 0 || py >= sh) continue;
            const double wgt = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
            v += wgt * sprite.at(py, px);
          }
        }
        seq.frames.at(static_cast<int64_t>(t), y, x) = clamp01(v);
      }
    }
  }
  return seq;
}

void save_pgm(const TensorF& image, const std::string& path) {
  if (image.rank() != 2) throw std::invalid_argument("pgm: image must be 2-D");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("pgm: cannot open for write: " + path);
  out << "P5\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
  for (double v : image.data) {
    const auto b = static_cast<unsigned char>(std::llround(clamp01(v) * 255.0));
    out.put(static_cast<char>(b));
  }
  if (!out) throw std::runtime_error("pgm: short write: " + path);
}

TensorF load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm: cannot open for read: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error("pgm: not a binary PGM (P5): " + path);
  int64_t w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw std::runtime_error("pgm: bad header in " + path);
  }
  in.get();  // single whitespace after maxval
  TensorF img({h, w});
  std::vector<unsigned char> buf(static_cast<size_t>(w * h));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw std::runtime_error("pgm: truncated payload in " + path);
  }
  for (size_t i = 0; i < buf.size(); ++i) {
    img.data[i] = static_cast<double>(buf[i]) / static_cast<double>(maxval);
  }
  return img;
}

SceneSequence load_external_frames(const std::string& dir_path) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir_path)) throw std::runtime_error("ingest: not a directory: " + dir_path);
  for (const auto& e : fs::directory_iterator(dir_path)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  if (files.empty()) throw std::runtime_error("ingest: empty directory: " + dir_path);
  std::sort(files.begin(), files.end());

  std::vector<TensorF> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    TensorF img = load_pgm(f.string());
    if (!frames.empty() && !(img.dims == frames.front().dims)) {
      throw std::runtime_error("ingest: frame size mismatch at " + f.string());
    }
    frames.push_back(std::move(img));
  }

  SceneSequence seq;
  const int64_t H = frames.front().dim(0), W = frames.front().dim(1);
  seq.frames = TensorF({static_cast<int64_t>(frames.size()), H, W});
  for (size_t t = 0; t < frames.size(); ++t) {
    std::copy(frames[t].data.begin(), frames[t].data.end(),
              seq.frames.data.begin() + static_cast<int64_t>(t) * H * W);
  }
  seq.centers.assign(frames.size(), {0.0, 0.0});
  return seq;
}

}  // namespace ghostlab
