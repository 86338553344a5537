#include <fstream>
#include <sstream>

#include "advxfer/error.hpp"
#include "advxfer/metrics.hpp"
#include "json.hpp"

namespace advxfer {

using nlohmann::json;

void TrialLog::validate() const {
  if (frames.empty()) fail(ErrorKind::kInvalidInput, "trial " + trial_id + " has no frames");
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (f > 0 && !(frames[f].timestamp > frames[f - 1].timestamp)) {
      fail(ErrorKind::kInvalidInput, "trial " + trial_id + ": timestamps not strictly increasing");
    }
    if (frames[f].matched_target != (frames[f].action == target_action)) {
      fail(ErrorKind::kInvalidInput, "trial " + trial_id + ": matched_target disagrees with action");
    }
  }
}

std::string trial_log_to_jsonl(const TrialLog& log) {
  log.validate();
  std::string out = json{{"trial_id", log.trial_id},
                         {"oracle_id", log.oracle_id},
                         {"patch_id", log.patch_id},
                         {"scenario_id", log.scenario_id},
                         {"target_action", to_string(log.target_action)},
                         {"seed", std::to_string(log.seed)},
                         {"frames", log.frames.size()}}
                        .dump();
  out += '\n';
  for (const FrameRecord& f : log.frames) {
    out += json{{"timestamp", f.timestamp},
                {"distance", f.distance},
                {"action", to_string(f.action)},
                {"matched_target", f.matched_target},
                {"response", f.response}}
               .dump();
    out += '\n';
  }
  return out;
}

TrialLog trial_log_from_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  TrialLog log;
  try {
    if (!std::getline(in, line)) fail(ErrorKind::kIo, "trial log is empty");
    const json header = json::parse(line);
    log.trial_id = header.at("trial_id").get<std::string>();
    log.oracle_id = header.at("oracle_id").get<std::string>();
    log.patch_id = header.at("patch_id").get<std::string>();
    log.scenario_id = header.at("scenario_id").get<std::string>();
    log.target_action = parse_action(header.at("target_action").get<std::string>());
    log.seed = std::stoull(header.at("seed").get<std::string>());
    const auto expected = header.at("frames").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      FrameRecord f;
      f.timestamp = j.at("timestamp").get<double>();
      f.distance = j.at("distance").get<double>();
      f.action = parse_action(j.at("action").get<std::string>());
      f.matched_target = j.at("matched_target").get<bool>();
      f.response = j.value("response", std::string());
      log.frames.push_back(std::move(f));
    }
    if (log.frames.size() != expected) {
      fail(ErrorKind::kIo, "trial " + log.trial_id + ": header announces " +
                               std::to_string(expected) + " frames, found " +
                               std::to_string(log.frames.size()));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::kIo, std::string("malformed trial log: ") + e.what());
  }
  log.validate();
  return log;
}

void write_trial_log(const std::filesystem::path& path, const TrialLog& log) {
  const std::string text = trial_log_to_jsonl(log);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

TrialLog read_trial_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingInput, "missing trial log " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return trial_log_from_jsonl(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace advxfer
