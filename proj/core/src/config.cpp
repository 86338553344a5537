#include "advxfer/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "advxfer/error.hpp"
#include "json.hpp"

namespace advxfer {

using nlohmann::json;

void CampaignConfig::validate() const {
  if (oracles.empty()) fail(ErrorKind::kInvalidInput, "config: no oracles");
  std::set<std::string> ids;
  for (const auto& o : oracles) {
    o.validate();
    if (o.id == "universal") fail(ErrorKind::kInvalidInput, "config: oracle id 'universal' is reserved");
    if (!ids.insert(o.id).second) fail(ErrorKind::kInvalidInput, "config: duplicate oracle id " + o.id);
  }
  embedding.validate();
  if (scenarios.empty()) fail(ErrorKind::kInvalidInput, "config: no scenarios");
  nes.validate();
  eot.validate();
  if (trials_per_cell < 1) fail(ErrorKind::kInvalidInput, "config: trials_per_cell must be >= 1");
  if (permutations < 99) fail(ErrorKind::kInvalidInput, "config: permutations must be >= 99");
  if (workers < 1) fail(ErrorKind::kInvalidInput, "config: workers must be >= 1");
}

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    std::string_view where) {
  if (!j.is_object()) fail(ErrorKind::kInvalidInput, std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) fail(ErrorKind::kInvalidInput, std::string(where) + ": unknown key '" + key + "'");
  }
}

Range parse_range(const json& j) {
  if (!j.is_array() || j.size() != 2) fail(ErrorKind::kInvalidInput, "range must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::uint64_t parse_seed(const json& j) {
  if (j.is_string()) return std::stoull(j.get<std::string>());
  return j.get<std::uint64_t>();
}

}  // namespace

CampaignConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  CampaignConfig c;
  try {
    const json j = json::parse(text);
    reject_unknown(j,
                   {"oracles", "embedding", "scenarios", "nes", "eot", "trials_per_cell",
                    "output_dir", "master_seed", "aggregation", "universal", "permutations",
                    "workers"},
                   "config");
    for (const auto& o : j.at("oracles")) {
      reject_unknown(o, {"id", "endpoint", "prompt", "timeout", "max_in_flight"}, "oracle");
      OracleRef ref;
      ref.id = o.at("id").get<std::string>();
      ref.endpoint = o.at("endpoint").get<std::string>();
      ref.prompt = o.value("prompt", ref.prompt);
      ref.timeout = o.value("timeout", ref.timeout);
      ref.max_in_flight = o.value("max_in_flight", ref.max_in_flight);
      c.oracles.push_back(std::move(ref));
    }
    if (j.contains("embedding")) {
      const auto& e = j.at("embedding");
      reject_unknown(e, {"endpoint", "dimension"}, "embedding");
      c.embedding.endpoint = e.value("endpoint", c.embedding.endpoint);
      c.embedding.dimension = e.value("dimension", c.embedding.dimension);
    }
    for (const auto& s : j.at("scenarios")) c.scenarios.push_back(base_dir / s.get<std::string>());
    if (j.contains("nes")) {
      const auto& n = j.at("nes");
      reject_unknown(n, {"n_directions", "sigma", "alpha", "iterations", "lambda_tv"}, "nes");
      c.nes.n_directions = n.value("n_directions", c.nes.n_directions);
      c.nes.sigma = n.value("sigma", c.nes.sigma);
      c.nes.alpha = n.value("alpha", c.nes.alpha);
      c.nes.iterations = n.value("iterations", c.nes.iterations);
      c.nes.lambda_tv = n.value("lambda_tv", c.nes.lambda_tv);
    }
    if (j.contains("eot")) {
      const auto& e = j.at("eot");
      reject_unknown(e, {"k_samples", "jitter", "brightness", "contrast"}, "eot");
      c.eot.k_samples = e.value("k_samples", c.eot.k_samples);
      c.eot.jitter = e.value("jitter", c.eot.jitter);
      if (e.contains("brightness")) c.eot.brightness = parse_range(e.at("brightness"));
      if (e.contains("contrast")) c.eot.contrast = parse_range(e.at("contrast"));
    }
    c.trials_per_cell = j.value("trials_per_cell", c.trials_per_cell);
    if (j.contains("output_dir")) c.output_dir = base_dir / j.at("output_dir").get<std::string>();
    else c.output_dir = base_dir / c.output_dir;
    if (j.contains("master_seed")) c.master_seed = parse_seed(j.at("master_seed"));
    if (j.contains("aggregation")) {
      c.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
    }
    c.universal = j.value("universal", c.universal);
    c.permutations = j.value("permutations", c.permutations);
    c.workers = j.value("workers", c.workers);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingInput, "missing config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const CampaignConfig& c) {
  json oracles = json::array();
  for (const auto& o : c.oracles) {
    oracles.push_back({{"id", o.id},
                       {"endpoint", o.endpoint},
                       {"prompt", o.prompt},
                       {"timeout", o.timeout},
                       {"max_in_flight", o.max_in_flight}});
  }
  json scenarios = json::array();
  for (const auto& s : c.scenarios) scenarios.push_back(s.generic_string());
  const json j{
      {"oracles", oracles},
      {"embedding", {{"endpoint", c.embedding.endpoint}, {"dimension", c.embedding.dimension}}},
      {"scenarios", scenarios},
      {"nes",
       {{"n_directions", c.nes.n_directions},
        {"sigma", c.nes.sigma},
        {"alpha", c.nes.alpha},
        {"iterations", c.nes.iterations},
        {"lambda_tv", c.nes.lambda_tv}}},
      {"eot",
       {{"k_samples", c.eot.k_samples},
        {"jitter", c.eot.jitter},
        {"brightness", {c.eot.brightness.lo, c.eot.brightness.hi}},
        {"contrast", {c.eot.contrast.lo, c.eot.contrast.hi}}}},
      {"trials_per_cell", c.trials_per_cell},
      {"output_dir", c.output_dir.generic_string()},
      {"master_seed", std::to_string(c.master_seed)},
      {"aggregation", to_string(c.aggregation)},
      {"universal", c.universal},
      {"permutations", c.permutations},
      {"workers", c.workers}};
  return j.dump(2);
}

}  // namespace advxfer
