#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "advxfer/imaging.hpp"
#include "advxfer/nes.hpp"
#include "advxfer/oracle.hpp"

namespace advxfer {

struct ManifestFrame {
  std::filesystem::path image;  // resolved against the manifest directory on load
  double timestamp = 0.0;
  double distance = 0.0;
  Placement placement;
};

/// Pre-rendered approach sequence for one scenario.
struct ScenarioManifest {
  std::string scenario_id;
  ActionLabel target_action = ActionLabel::kUnknown;
  std::string target_text;
  std::optional<std::string> prompt;  // overrides the oracle prompt when set
  double sampling_interval = 0.5;
  double recording_start = 0.0;
  /// Frames with timestamp < patch_visible_at are recorded but not scored.
  std::optional<double> patch_visible_at;
  int patch_width = 0;
  int patch_height = 0;
  std::vector<ManifestFrame> frames;
  std::filesystem::path directory;

  /// Throws kInvalidInput on structural problems. Returns soft warnings
  /// (e.g. a scored frame count outside 8-12).
  std::vector<std::string> validate() const;

  /// Indices of the frames that are scored (at or after the visibility marker).
  std::vector<std::size_t> scored_frames() const;
};

inline constexpr int kMinTrialFrames = 8;
inline constexpr int kMaxTrialFrames = 12;

ScenarioManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const ScenarioManifest& manifest);

/// Decodes the scored frames, with timestamp/distance copied onto each Frame.
std::vector<EvaluationFrame> load_scored_frames(const ScenarioManifest& manifest);

}  // namespace advxfer
