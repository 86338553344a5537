#include "advxfer/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "advxfer/error.hpp"
#include "advxfer/image_io.hpp"
#include "advxfer/scripted.hpp"

namespace advxfer {

SceneKind parse_scene_kind(std::string_view name) {
  if (name == "crosswalk") return SceneKind::kCrosswalk;
  if (name == "highway") return SceneKind::kHighway;
  fail(ErrorKind::kInvalidInput, "unknown scene kind '" + std::string(name) + "'");
}

SyntheticOptions default_synthetic(SceneKind kind) {
  SyntheticOptions o;
  o.kind = kind;
  if (kind == SceneKind::kHighway) {
    o.scenario_id = "highway";
    o.start_distance = 80.0;
    o.end_distance = 35.0;
    o.reference_distance = 80.0;
  }
  return o;
}

namespace {

void fill_rect(Frame& f, int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, f.width);
  y1 = std::min(y1, f.height);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      f.at(x, y, 0) = r;
      f.at(x, y, 1) = g;
      f.at(x, y, 2) = b;
    }
  }
}

}  // namespace

Frame render_synthetic_frame(const SyntheticOptions& o, int index, Placement* placard) {
  if (o.width < 8 || o.height < 8) fail(ErrorKind::kInvalidDimension, "synthetic frame too small");
  Frame f = Frame::blank(o.width, o.height);
  const int horizon = o.height * 2 / 5;
  for (int y = 0; y < o.height; ++y) {
    for (int x = 0; x < o.width; ++x) {
      if (y < horizon) {
        const double t = static_cast<double>(y) / horizon;
        f.at(x, y, 0) = static_cast<std::uint8_t>(110 + 60 * t);
        f.at(x, y, 1) = static_cast<std::uint8_t>(150 + 50 * t);
        f.at(x, y, 2) = static_cast<std::uint8_t>(230 - 20 * t);
      } else {
        f.at(x, y, 0) = 70;
        f.at(x, y, 1) = 120;
        f.at(x, y, 2) = 60;
      }
    }
  }
  // Road trapezoid narrowing toward the horizon.
  const double cx = o.width / 2.0;
  for (int y = horizon; y < o.height; ++y) {
    const double t = static_cast<double>(y - horizon) / (o.height - horizon);
    const double half = o.width * (0.05 + 0.4 * t);
    for (int x = std::max(0, static_cast<int>(cx - half));
         x < std::min(o.width, static_cast<int>(cx + half)); ++x) {
      f.at(x, y, 0) = 90;
      f.at(x, y, 1) = 90;
      f.at(x, y, 2) = 95;
    }
  }

  const double span = o.frames > 1 ? (o.start_distance - o.end_distance) / (o.frames - 1) : 0.0;
  const double distance = o.start_distance - span * index;
  const double scale = o.reference_distance / distance;

  if (o.kind == SceneKind::kCrosswalk) {
    // Zebra stripes and a pedestrian, both growing as the car approaches.
    const int stripe_y = horizon + static_cast<int>((o.height - horizon) * std::min(0.9, 0.3 * scale));
    for (int k = -3; k <= 3; ++k) {
      const int sx = static_cast<int>(cx + k * 8 * scale);
      fill_rect(f, sx, stripe_y, sx + static_cast<int>(4 * scale) + 1, stripe_y + 3, 235, 235, 235);
    }
    const int ph = static_cast<int>(14 * scale) + 2;
    const int pw = std::max(2, ph / 3);
    const int px = static_cast<int>(cx - 10 * scale);
    fill_rect(f, px, stripe_y - ph, px + pw, stripe_y, 40, 40, 160);
  }

  const int side = std::max(2, static_cast<int>(std::lround(o.placard_size * scale)));
  const Placement p{o.placard_cx - side / 2, o.placard_cy - side / 2, side, side};
  // Post below the placard.
  fill_rect(f, o.placard_cx - 1, p.y + p.h, o.placard_cx + 1, p.y + p.h + side, 60, 60, 60);
  fill_rect(f, p.x, p.y, p.x + p.w, p.y + p.h, 200, 200, 200);
  if (placard) *placard = p;
  f.distance = distance;
  f.timestamp = o.sampling_interval * index;
  return f;
}

ScenarioManifest generate_scenario(const std::filesystem::path& dir, const SyntheticOptions& o) {
  if (o.frames < 1) fail(ErrorKind::kInvalidInput, "synthetic: frames must be >= 1");
  if (!(o.start_distance >= o.end_distance && o.end_distance > 0.0)) {
    fail(ErrorKind::kInvalidInput, "synthetic: need start_distance >= end_distance > 0");
  }
  ScenarioManifest m;
  m.scenario_id = o.scenario_id;
  m.directory = dir;
  m.sampling_interval = o.sampling_interval;
  m.patch_width = o.patch_width;
  m.patch_height = o.patch_height;
  m.patch_visible_at = 0.0;
  if (o.kind == SceneKind::kCrosswalk) {
    m.target_action = ActionLabel::kAccelerate;
    m.target_text = std::string(kCrosswalkTargetText);
  } else {
    m.target_action = ActionLabel::kTurnRight;
    m.target_text = std::string(kHighwayTargetText);
  }
  for (int i = 0; i < o.frames; ++i) {
    Placement p;
    const Frame f = render_synthetic_frame(o, i, &p);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%02d.png", i);
    write_png(dir / name, f);
    m.frames.push_back({dir / name, f.timestamp, f.distance, p});
  }
  write_manifest(dir / "manifest.json", m);
  return m;
}

}  // namespace advxfer
