#pragma once

#include <filesystem>
#include <string>

#include "advxfer/manifest.hpp"

namespace advxfer {

enum class SceneKind { kCrosswalk, kHighway };
SceneKind parse_scene_kind(std::string_view name);

/// Procedural approach sequence: gradient sky, road trapezoid, a pedestrian
/// rectangle (crosswalk only) and a roadside placard whose size grows with
/// 1/distance around a fixed centre. The placard rectangle is the patch
/// placement of each frame.
struct SyntheticOptions {
  std::string scenario_id = "crosswalk";
  SceneKind kind = SceneKind::kCrosswalk;
  int width = 160;
  int height = 96;
  int frames = 10;
  double sampling_interval = 0.5;
  double start_distance = 30.0;
  double end_distance = 10.0;
  int patch_width = 16;
  int patch_height = 16;
  /// Placard side length in pixels at `reference_distance`.
  double placard_size = 12.0;
  double reference_distance = 30.0;
  int placard_cx = 120;
  int placard_cy = 40;
};

SyntheticOptions default_synthetic(SceneKind kind);

/// Writes frame_NN.png files and manifest.json into `dir`; returns the manifest.
ScenarioManifest generate_scenario(const std::filesystem::path& dir, const SyntheticOptions& options);

/// Renders frame `index` in memory (no placard content, only the scene).
Frame render_synthetic_frame(const SyntheticOptions& options, int index, Placement* placard);

}  // namespace advxfer
