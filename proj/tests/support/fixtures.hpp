#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>

#include "advxfer/campaign.hpp"
#include "advxfer/config.hpp"
#include "advxfer/image_io.hpp"
#include "advxfer/metrics.hpp"
#include "advxfer/random.hpp"
#include "advxfer/synthetic.hpp"
#include "json.hpp"

namespace fixtures {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("advxfer_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

/// Random valid trial log for (oracle, patch, scenario) drawn from `rng`.
inline advxfer::TrialLog random_log(advxfer::Rng& rng, const std::string& trial_id,
                                    const std::string& oracle = "m", const std::string& patch = "p",
                                    const std::string& scenario = "s") {
  using advxfer::ActionLabel;
  advxfer::TrialLog log;
  log.trial_id = trial_id;
  log.oracle_id = oracle;
  log.patch_id = patch;
  log.scenario_id = scenario;
  log.target_action = ActionLabel::kAccelerate;
  const auto frames = rng.uniform_int(1, 14);
  for (int f = 0; f < frames; ++f) {
    advxfer::FrameRecord r;
    r.timestamp = 0.5 * f;
    r.distance = 30.0 - f;
    r.action = static_cast<ActionLabel>(rng.uniform_int(0, 5));
    r.matched_target = r.action == log.target_action;
    r.response = "text";
    log.frames.push_back(r);
  }
  return log;
}

// Scripted endpoints of the transfer fixture. The two sharers trigger on the
// red mean of a window inside the roadside placard; the third reads a window
// over the pedestrian that no patch placement reaches.
inline const std::string kSharerEndpoint = "scripted:patch-sensitive?region=117,37,6,6&threshold=200";
inline const std::string kInsensitiveEndpoint =
    "scripted:patch-sensitive?region=60,45,20,20&channel=b&threshold=120";

struct CampaignFixture {
  fs::path config_path;
  advxfer::CampaignConfig config;
};

/// Synthetic crosswalk scenario (8 frames, 4x4 patch) plus a three-oracle
/// config writing into dir/out.
inline CampaignFixture make_campaign(const fs::path& dir, int iterations = 100,
                                     double alpha = 2.0, int trials = 5,
                                     std::uint64_t master_seed = 11,
                                     const std::string& third = kInsensitiveEndpoint) {
  advxfer::SyntheticOptions o = advxfer::default_synthetic(advxfer::SceneKind::kCrosswalk);
  o.frames = 8;
  o.patch_width = o.patch_height = 4;
  advxfer::generate_scenario(dir / "crosswalk", o);
  const std::string text = R"({
  "oracles": [
    {"id": "alpha", "endpoint": ")" + kSharerEndpoint + R"("},
    {"id": "beta", "endpoint": ")" + kSharerEndpoint + R"("},
    {"id": "gamma", "endpoint": ")" + third + R"("}
  ],
  "embedding": {"endpoint": "scripted:bow", "dimension": 512},
  "scenarios": ["crosswalk/manifest.json"],
  "nes": {"iterations": )" + std::to_string(iterations) + R"(, "alpha": )" + std::to_string(alpha) + R"(},
  "trials_per_cell": )" + std::to_string(trials) + R"(,
  "output_dir": "out",
  "master_seed": )" + std::to_string(master_seed) + R"(,
  "permutations": 999
})";
  const fs::path path = dir / "campaign.json";
  advxfer::write_file_bytes(
      path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return {path, advxfer::load_config(path)};
}

/// Hidden-target objective on an 8-bit frame: the patch is composited at its
/// native size and the loss is the mean absolute channel error (channel
/// units) between the rendered region and a hidden random target.
class HiddenTargetOracle {
 public:
  HiddenTargetOracle(int w, int h, std::uint64_t seed)
      : w_(w), h_(h), target_(advxfer::quantize(advxfer::create_patch(w, h, advxfer::derive_seed(seed, "hidden-target")))) {}

  double operator()(const advxfer::Patch& patch) {
    ++calls;
    const advxfer::Frame canvas = advxfer::Frame::blank(w_, h_);
    const advxfer::Frame shown = advxfer::composite(canvas, patch, {0, 0, w_, h_});
    double sum = 0.0;
    for (std::size_t i = 0; i < shown.pixels.size(); ++i) {
      sum += std::abs(static_cast<double>(shown.pixels[i]) - target_[i]);
    }
    return sum / static_cast<double>(shown.pixels.size());
  }

  std::atomic<std::uint64_t> calls{0};

 private:
  int w_;
  int h_;
  std::vector<std::uint8_t> target_;
};

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Every file under `root` keyed by relative path. Timing fields of traces
/// and query ledgers are dropped.
inline std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = e.path().lexically_relative(root).generic_string();
    std::string text = read_text(e.path());
    if (e.path().filename() == "trace.jsonl" || rel.starts_with("ledger/")) {
      std::istringstream lines(text);
      std::string line, kept;
      while (std::getline(lines, line)) {
        auto j = nlohmann::json::parse(line);
        j.erase("wall_time");
        j.erase("latency");
        kept += j.dump() + "\n";
      }
      text = kept;
    }
    out[rel] = text;
  }
  return out;
}

}  // namespace fixtures
