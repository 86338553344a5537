#include "advxfer/manifest.hpp"

#include <cmath>
#include <fstream>

#include "advxfer/error.hpp"
#include "advxfer/image_io.hpp"
#include "json.hpp"

namespace advxfer {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) fail(ErrorKind::kInvalidInput, where + ": unknown key '" + key + "'");
  }
}

}  // namespace

std::vector<std::size_t> ScenarioManifest::scored_frames() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!patch_visible_at || frames[i].timestamp >= *patch_visible_at - 1e-9) out.push_back(i);
  }
  return out;
}

std::vector<std::string> ScenarioManifest::validate() const {
  const std::string where = "scenario " + scenario_id;
  if (scenario_id.empty()) fail(ErrorKind::kInvalidInput, "scenario: empty scenario_id");
  if (target_action == ActionLabel::kUnknown) {
    fail(ErrorKind::kInvalidInput, where + ": target_action must be a driving action");
  }
  if (target_text.empty()) fail(ErrorKind::kInvalidInput, where + ": empty target_text");
  if (!(sampling_interval > 0.0)) {
    fail(ErrorKind::kInvalidInput, where + ": sampling_interval must be positive");
  }
  if (patch_width < 1 || patch_height < 1) {
    fail(ErrorKind::kInvalidDimension, where + ": patch size must be positive");
  }
  if (frames.empty()) fail(ErrorKind::kInvalidInput, where + ": no frames");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const double gap = frames[i].timestamp - frames[i - 1].timestamp;
    if (std::abs(gap - sampling_interval) > 1e-6) {
      fail(ErrorKind::kInvalidInput, where + ": frame " + std::to_string(i) +
                                         " is not one sampling interval after its predecessor");
    }
    if (frames[i].distance > frames[i - 1].distance) {
      fail(ErrorKind::kInvalidInput, where + ": distances increase at frame " + std::to_string(i));
    }
  }
  const auto scored = scored_frames();
  if (scored.empty()) fail(ErrorKind::kInvalidInput, where + ": no frame at or after patch_visible_at");
  std::vector<std::string> warnings;
  const int n = static_cast<int>(scored.size());
  if (n < kMinTrialFrames || n > kMaxTrialFrames) {
    warnings.push_back(where + ": " + std::to_string(n) + " scored frames per trial (expected " +
                       std::to_string(kMinTrialFrames) + "-" + std::to_string(kMaxTrialFrames) + ")");
  }
  return warnings;
}

ScenarioManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingInput, "missing scenario manifest " + path.string());
  ScenarioManifest m;
  try {
    const json j = json::parse(in);
    reject_unknown(j,
                   {"scenario_id", "target_action", "target_text", "prompt", "sampling_interval",
                    "recording_start", "patch_visible_at", "patch_size", "frames"},
                   path.string());
    m.scenario_id = j.at("scenario_id").get<std::string>();
    m.target_action = parse_action(j.at("target_action").get<std::string>());
    m.target_text = j.at("target_text").get<std::string>();
    if (j.contains("prompt")) m.prompt = j.at("prompt").get<std::string>();
    m.sampling_interval = j.value("sampling_interval", 0.5);
    m.recording_start = j.value("recording_start", 0.0);
    if (j.contains("patch_visible_at")) m.patch_visible_at = j.at("patch_visible_at").get<double>();
    const auto& size = j.at("patch_size");
    m.patch_width = size.at(0).get<int>();
    m.patch_height = size.at(1).get<int>();
    m.directory = path.parent_path();
    for (const auto& f : j.at("frames")) {
      reject_unknown(f, {"image", "timestamp", "distance", "placement"}, path.string() + " frame");
      ManifestFrame mf;
      mf.image = m.directory / f.at("image").get<std::string>();
      mf.timestamp = f.at("timestamp").get<double>();
      mf.distance = f.at("distance").get<double>();
      const auto& p = f.at("placement");
      mf.placement = {p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>(), p.at(3).get<int>()};
      m.frames.push_back(std::move(mf));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::kInvalidInput, "malformed manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& path, const ScenarioManifest& m) {
  m.validate();
  json frames = json::array();
  for (const auto& f : m.frames) {
    frames.push_back({{"image", f.image.lexically_relative(m.directory).generic_string()},
                      {"timestamp", f.timestamp},
                      {"distance", f.distance},
                      {"placement", {f.placement.x, f.placement.y, f.placement.w, f.placement.h}}});
  }
  json j{{"scenario_id", m.scenario_id},
         {"target_action", to_string(m.target_action)},
         {"target_text", m.target_text},
         {"sampling_interval", m.sampling_interval},
         {"recording_start", m.recording_start},
         {"patch_size", {m.patch_width, m.patch_height}},
         {"frames", frames}};
  if (m.prompt) j["prompt"] = *m.prompt;
  if (m.patch_visible_at) j["patch_visible_at"] = *m.patch_visible_at;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<EvaluationFrame> load_scored_frames(const ScenarioManifest& manifest) {
  std::vector<EvaluationFrame> out;
  for (std::size_t i : manifest.scored_frames()) {
    const auto& mf = manifest.frames[i];
    Frame frame = read_image(mf.image);
    frame.timestamp = mf.timestamp;
    frame.distance = mf.distance;
    out.push_back({std::move(frame), mf.placement});
  }
  return out;
}

}  // namespace advxfer
