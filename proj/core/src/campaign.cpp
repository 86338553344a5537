#include "advxfer/campaign.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "advxfer/error.hpp"
#include "advxfer/http.hpp"
#include "advxfer/image_io.hpp"
#include "advxfer/parallel.hpp"
#include "advxfer/random.hpp"
#include "json.hpp"

namespace advxfer {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path ResultsLayout::baseline_dir(std::string_view oracle, std::string_view scenario) const {
  return root / "baseline" / oracle / scenario;
}

fs::path ResultsLayout::eval_dir(std::string_view source, std::string_view target,
                                 std::string_view scenario) const {
  return root / "eval" / source / target / scenario;
}

fs::path ResultsLayout::patch_dir(std::string_view source, std::string_view scenario) const {
  return root / "patches" / source / scenario;
}

fs::path ResultsLayout::ledger_file(std::string_view phase) const {
  return root / "ledger" / (std::string(phase) + ".jsonl");
}

fs::path ResultsLayout::status_file(std::string_view phase) const {
  return root / "status" / (std::string(phase) + ".json");
}

std::string trial_file_name(int trial) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trial_%02d.jsonl", trial);
  return buf;
}

std::string patch_id(std::string_view source, std::string_view scenario) {
  return std::string(source) + "@" + std::string(scenario);
}

void write_phase_status(const fs::path& path, const PhaseStatus& s) {
  const json j{{"phase", s.phase},
               {"warnings", s.warnings},
               {"excluded", s.excluded},
               {"queries", s.queries}};
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

PhaseStatus read_phase_status(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    PhaseStatus s;
    s.phase = j.at("phase").get<std::string>();
    s.warnings = j.at("warnings").get<std::vector<std::string>>();
    s.excluded = j.at("excluded").get<std::vector<std::string>>();
    s.queries = j.at("queries").get<std::map<std::string, std::size_t>>();
    return s;
  } catch (const std::exception& e) {
    fail(ErrorKind::kIo, "malformed status file " + path.string() + ": " + e.what());
  }
}

TrialLog run_trial(OracleClient& oracle, const ActionNormalizer& normalizer,
                   const ScenarioManifest& scenario, std::span<const EvaluationFrame> frames,
                   const Patch* patch, const EotConfig& viewing, std::uint64_t seed,
                   std::string trial_id, std::string patch_id) {
  TrialLog log;
  log.trial_id = std::move(trial_id);
  log.oracle_id = oracle.id();
  log.patch_id = std::move(patch_id);
  log.scenario_id = scenario.scenario_id;
  log.target_action = scenario.target_action;
  log.seed = seed;
  EotConfig one = viewing;
  one.k_samples = 1;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const EvaluationFrame& ef = frames[f];
    Frame shown = ef.frame;
    if (patch != nullptr) {
      const Transform t = sample_transforms(one, derive_seed(seed, f)).front();
      shown = apply_transform(ef.frame, ef.placement, *patch, t);
    }
    OracleResponse r;
    try {
      r = oracle.query(shown);
    } catch (const Error& e) {
      throw Error(e.kind(), log.trial_id + " frame " + std::to_string(f) + ": " + e.what());
    }
    FrameRecord rec;
    rec.timestamp = ef.frame.timestamp;
    rec.distance = ef.frame.distance;
    rec.action = normalizer.classify(r);
    rec.matched_target = rec.action == scenario.target_action;
    rec.response = r.text;
    log.frames.push_back(std::move(rec));
  }
  return log;
}

std::vector<TrialLog> load_cell_logs(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kMissingInput, "missing cell directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("trial_") && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<TrialLog> logs;
  for (const auto& f : files) logs.push_back(read_trial_log(f));
  return logs;
}

AsrTable load_asr_table(const ResultsLayout& layout, const std::vector<std::string>& architectures,
                        std::string_view scenario) {
  AsrTable table;
  table.architectures = architectures;
  for (const auto& src : architectures) {
    std::vector<double> row;
    for (const auto& tgt : architectures) {
      const auto logs = load_cell_logs(layout.eval_dir(src, tgt, scenario));
      if (logs.empty()) {
        fail(ErrorKind::kMissingInput, "no complete trials in " +
                                           layout.eval_dir(src, tgt, scenario).string());
      }
      row.push_back(frame_asr(logs));
    }
    table.values.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------

struct Campaign::Impl {
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<ActionNormalizer> normalizer;
  std::map<std::string, std::vector<EvaluationFrame>> frames;  // by scenario id
  std::map<std::string, std::shared_ptr<QueryLedger>> ledgers;  // by phase
  std::mutex mutex;
};

Campaign::Campaign(CampaignConfig config)
    : config_(std::move(config)), layout_{config_.output_dir}, impl_(std::make_unique<Impl>()) {
  config_.validate();
  for (const auto& o : config_.oracles) {
    if (o.id == kUniversalSource) {
      fail(ErrorKind::kInvalidInput, "oracle id '" + o.id + "' is reserved");
    }
  }
  std::set<std::string> ids;
  for (const auto& path : config_.scenarios) {
    scenarios_.push_back(load_manifest(path));
    if (!ids.insert(scenarios_.back().scenario_id).second) {
      fail(ErrorKind::kInvalidInput, "duplicate scenario id " + scenarios_.back().scenario_id);
    }
  }
  impl_->embedder = make_embedder(config_.embedding);
  impl_->normalizer = std::make_unique<ActionNormalizer>(*impl_->embedder);
  for (const auto& s : scenarios_) impl_->frames[s.scenario_id] = load_scored_frames(s);

  json scenarios = json::array();
  for (const auto& s : scenarios_) {
    scenarios.push_back({{"scenario_id", s.scenario_id},
                         {"target_action", to_string(s.target_action)},
                         {"frames", s.scored_frames().size()}});
  }
  const json doc{{"architectures", architectures()},
                 {"scenarios", scenarios},
                 {"master_seed", std::to_string(config_.master_seed)},
                 {"trials_per_cell", config_.trials_per_cell},
                 {"universal", config_.universal},
                 {"permutations", config_.permutations},
                 {"config", json::parse(config_to_json(config_))}};
  const std::string text = doc.dump(2) + "\n";
  write_file_bytes(layout_.campaign_file(),
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Campaign::~Campaign() = default;

std::vector<std::string> Campaign::architectures() const {
  std::vector<std::string> out;
  for (const auto& o : config_.oracles) out.push_back(o.id);
  return out;
}

std::size_t Campaign::query_count(std::string_view phase) const {
  std::lock_guard lock(impl_->mutex);
  const auto it = impl_->ledgers.find(std::string(phase));
  return it == impl_->ledgers.end() ? 0 : it->second->size();
}

namespace {

struct Clients {
  std::shared_ptr<QueryLedger> ledger;
  std::vector<std::unique_ptr<OracleClient>> oracles;

  OracleClient& by_id(std::string_view id) {
    for (auto& o : oracles) {
      if (o->id() == id) return *o;
    }
    fail(ErrorKind::kLookup, "unknown oracle " + std::string(id));
  }
};

Clients connect(const CampaignConfig& config, const std::shared_ptr<QueryLedger>& ledger,
                const std::optional<std::string>& prompt) {
  Clients c{ledger, {}};
  for (OracleRef ref : config.oracles) {
    if (ref.endpoint.starts_with("http://")) {
      try {
        check_health(ref.endpoint, ref.timeout);
      } catch (const Error& e) {
        throw Error(e.kind(), "oracle " + ref.id + " is not healthy: " + e.what());
      }
    }
    if (prompt) ref.prompt = *prompt;
    c.oracles.push_back(make_oracle(ref, ledger));
  }
  return c;
}

struct TrialJob {
  std::string oracle;        // queried oracle
  std::string source;        // patch source, empty for baseline
  std::size_t scenario = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  fs::path dir;
};

std::map<std::string, std::size_t> count_by_oracle(const QueryLedger& ledger,
                                                   const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> out;
  for (const auto& id : ids) out[id] = ledger.count(id);
  return out;
}

}  // namespace

namespace {

// Runs trial jobs; failed trials are excluded and recorded in `status`.
void run_jobs(const std::vector<TrialJob>& jobs, int workers,
              const std::vector<ScenarioManifest>& scenarios,
              const std::map<std::string, std::vector<EvaluationFrame>>& frames,
              const std::map<std::string, Patch>& patches, const EotConfig& viewing,
              const ActionNormalizer& normalizer,
              const std::function<Clients&(const ScenarioManifest&)>& clients_for,
              PhaseStatus& status) {
  std::vector<std::optional<std::string>> failures(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t k) {
    const TrialJob& job = jobs[k];
    const ScenarioManifest& scn = scenarios[job.scenario];
    const Patch* patch = nullptr;
    std::string pid(kNoPatch);
    if (!job.source.empty()) {
      pid = patch_id(job.source, scn.scenario_id);
      patch = &patches.at(pid);
    }
    const std::string trial_id = pid + "/" + job.oracle + "/" + std::to_string(job.trial);
    const fs::path file = job.dir / trial_file_name(job.trial);
    fs::remove(job.dir / (file.stem().string() + ".incomplete.json"));
    try {
      const TrialLog log =
          run_trial(clients_for(scn).by_id(job.oracle), normalizer, scn,
                    frames.at(scn.scenario_id), patch, viewing, job.seed, trial_id, pid);
      write_trial_log(file, log);
    } catch (const Error& e) {
      fs::remove(file);
      const std::string text = json{{"trial_id", trial_id}, {"error", e.what()}}.dump() + "\n";
      write_file_bytes(job.dir / (file.stem().string() + ".incomplete.json"),
                       std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
      failures[k] = trial_id + ": " + e.what();
    }
  });
  for (const auto& f : failures) {
    if (f) {
      status.excluded.push_back(f->substr(0, f->find(": ")));
      status.warnings.push_back("trial excluded after oracle failure: " + *f);
    }
  }
}

}  // namespace

PhaseStatus Campaign::run_baseline() {
  PhaseStatus status{"baseline", {}, {}, {}};
  auto ledger = std::make_shared<QueryLedger>();
  {
    std::lock_guard lock(impl_->mutex);
    impl_->ledgers["baseline"] = ledger;
  }
  std::map<std::string, Clients> clients;  // by scenario (prompt override)
  for (const auto& s : scenarios_) {
    for (const auto& w : s.validate()) status.warnings.push_back(w);
    clients.emplace(s.scenario_id, connect(config_, ledger, s.prompt));
  }
  std::vector<TrialJob> jobs;
  for (const auto& o : config_.oracles) {
    for (std::size_t s = 0; s < scenarios_.size(); ++s) {
      const auto& sid = scenarios_[s].scenario_id;
      for (int k = 0; k < config_.trials_per_cell; ++k) {
        jobs.push_back({o.id, "", s, k, derive_seed(config_.master_seed, "baseline", o.id, sid, k),
                        layout_.baseline_dir(o.id, sid)});
      }
    }
  }
  run_jobs(jobs, config_.workers, scenarios_, impl_->frames, {}, config_.eot,
           *impl_->normalizer,
           [&](const ScenarioManifest& s) -> Clients& { return clients.at(s.scenario_id); }, status);
  ledger->write_jsonl(layout_.ledger_file("baseline"));
  status.queries = count_by_oracle(*ledger, architectures());
  write_phase_status(layout_.status_file("baseline"), status);
  return status;
}

namespace {

Patch optimize_cell(const CampaignConfig& config, const std::vector<OracleClient*>& oracles,
                    Embedder& embedder, const ScenarioManifest& scn,
                    const std::vector<EvaluationFrame>& frames, const fs::path& dir,
                    std::uint64_t seed, const QueryLedger& ledger) {
  const fs::path png = dir / "patch.png";
  if (fs::exists(png) && fs::exists(dir / "trace.jsonl")) return read_patch_png(png);

  ObjectiveSpec spec;
  spec.oracles = oracles;
  spec.embedder = &embedder;
  spec.target_text = scn.target_text;
  spec.frames = frames;
  spec.eot = config.eot;
  spec.aggregation = config.aggregation;
  spec.patch_width = scn.patch_width;
  spec.patch_height = scn.patch_height;

  NesConfig nes = config.nes;
  nes.seed = seed;
  OptimizeOptions options;
  options.workers = oracles.front()->ref().max_in_flight;
  for (const auto* o : oracles) options.workers = std::min(options.workers, o->ref().max_in_flight);
  options.checkpoint_path = dir / "checkpoint.json";
  options.ledger = &ledger;
  if (fs::exists(options.checkpoint_path)) options.resume = read_checkpoint(options.checkpoint_path);

  const OptimizationResult result = optimize(std::move(spec), nes, options);
  write_trace_jsonl(dir / "trace.jsonl", result.trace);
  write_patch_png(png, result.patch);
  fs::remove(options.checkpoint_path);
  // Evaluation uses the printed (8-bit) patch.
  return read_patch_png(png);
}

}  // namespace

PhaseStatus Campaign::run_self_attack() {
  PhaseStatus status{"self", {}, {}, {}};
  auto ledger = std::make_shared<QueryLedger>();
  {
    std::lock_guard lock(impl_->mutex);
    impl_->ledgers["self"] = ledger;
  }
  std::map<std::string, Clients> clients;
  for (const auto& s : scenarios_) clients.emplace(s.scenario_id, connect(config_, ledger, s.prompt));

  std::map<std::string, Patch> patches;
  for (const auto& o : config_.oracles) {
    for (const auto& scn : scenarios_) {
      OracleClient* client = &clients.at(scn.scenario_id).by_id(o.id);
      patches.emplace(patch_id(o.id, scn.scenario_id),
                      optimize_cell(config_, {client}, *impl_->embedder, scn,
                                    impl_->frames.at(scn.scenario_id),
                                    layout_.patch_dir(o.id, scn.scenario_id),
                                    derive_seed(config_.master_seed, "optimize", o.id, scn.scenario_id),
                                    *ledger));
    }
  }
  std::vector<TrialJob> jobs;
  for (const auto& o : config_.oracles) {
    for (std::size_t s = 0; s < scenarios_.size(); ++s) {
      const auto& sid = scenarios_[s].scenario_id;
      for (int k = 0; k < config_.trials_per_cell; ++k) {
        jobs.push_back({o.id, o.id, s, k, derive_seed(config_.master_seed, "self", o.id, sid, k),
                        layout_.eval_dir(o.id, o.id, sid)});
      }
    }
  }
  run_jobs(jobs, config_.workers, scenarios_, impl_->frames, patches, config_.eot,
           *impl_->normalizer,
           [&](const ScenarioManifest& s) -> Clients& { return clients.at(s.scenario_id); }, status);
  ledger->write_jsonl(layout_.ledger_file("self"));
  status.queries = count_by_oracle(*ledger, architectures());
  write_phase_status(layout_.status_file("self"), status);
  return status;
}

PhaseStatus Campaign::run_transfer() {
  PhaseStatus status{"transfer", {}, {}, {}};
  auto ledger = std::make_shared<QueryLedger>();
  {
    std::lock_guard lock(impl_->mutex);
    impl_->ledgers["transfer"] = ledger;
  }
  std::map<std::string, Clients> clients;
  for (const auto& s : scenarios_) clients.emplace(s.scenario_id, connect(config_, ledger, s.prompt));

  std::map<std::string, Patch> patches;
  std::vector<std::string> missing;
  for (const auto& o : config_.oracles) {
    for (const auto& scn : scenarios_) {
      const fs::path png = layout_.patch_dir(o.id, scn.scenario_id) / "patch.png";
      if (!fs::exists(png)) {
        missing.push_back(png.string());
        continue;
      }
      patches.emplace(patch_id(o.id, scn.scenario_id), read_patch_png(png));
    }
  }
  if (!missing.empty()) {
    std::string msg = "transfer phase needs the self-attack patches; missing:";
    for (const auto& m : missing) msg += " " + m;
    fail(ErrorKind::kMissingInput, msg);
  }

  std::vector<TrialJob> jobs;
  for (const auto& src : config_.oracles) {
    for (const auto& tgt : config_.oracles) {
      if (src.id == tgt.id) continue;
      for (std::size_t s = 0; s < scenarios_.size(); ++s) {
        const auto& sid = scenarios_[s].scenario_id;
        for (int k = 0; k < config_.trials_per_cell; ++k) {
          jobs.push_back({tgt.id, src.id, s, k,
                          derive_seed(config_.master_seed, "transfer", src.id, tgt.id, sid, k),
                          layout_.eval_dir(src.id, tgt.id, sid)});
        }
      }
    }
  }
  run_jobs(jobs, config_.workers, scenarios_, impl_->frames, patches, config_.eot,
           *impl_->normalizer,
           [&](const ScenarioManifest& s) -> Clients& { return clients.at(s.scenario_id); }, status);
  ledger->write_jsonl(layout_.ledger_file("transfer"));
  status.queries = count_by_oracle(*ledger, architectures());

  for (const auto& scn : scenarios_) {
    try {
      const AsrTable asr = load_asr_table(layout_, architectures(), scn.scenario_id);
      write_asr_csv(layout_.matrix_dir() / (scn.scenario_id + "_asr.csv"), asr);
      write_transfer_csv(layout_.matrix_dir() / (scn.scenario_id + "_tr.csv"),
                         TransferMatrix::build(asr));
    } catch (const Error& e) {
      status.warnings.push_back(scn.scenario_id + ": no transfer matrix: " + e.what());
    }
  }
  write_phase_status(layout_.status_file("transfer"), status);
  return status;
}

PhaseStatus Campaign::run_universal() {
  PhaseStatus status{"universal", {}, {}, {}};
  auto ledger = std::make_shared<QueryLedger>();
  {
    std::lock_guard lock(impl_->mutex);
    impl_->ledgers["universal"] = ledger;
  }
  std::map<std::string, Clients> clients;
  for (const auto& s : scenarios_) clients.emplace(s.scenario_id, connect(config_, ledger, s.prompt));

  std::map<std::string, Patch> patches;
  for (const auto& scn : scenarios_) {
    std::vector<OracleClient*> all;
    for (auto& o : clients.at(scn.scenario_id).oracles) all.push_back(o.get());
    patches.emplace(patch_id(kUniversalSource, scn.scenario_id),
                    optimize_cell(config_, all, *impl_->embedder, scn,
                                  impl_->frames.at(scn.scenario_id),
                                  layout_.patch_dir(kUniversalSource, scn.scenario_id),
                                  derive_seed(config_.master_seed, "universal", scn.scenario_id),
                                  *ledger));
  }
  std::vector<TrialJob> jobs;
  for (const auto& tgt : config_.oracles) {
    for (std::size_t s = 0; s < scenarios_.size(); ++s) {
      const auto& sid = scenarios_[s].scenario_id;
      for (int k = 0; k < config_.trials_per_cell; ++k) {
        jobs.push_back({tgt.id, std::string(kUniversalSource), s, k,
                        derive_seed(config_.master_seed, "universal-eval", tgt.id, sid, k),
                        layout_.eval_dir(kUniversalSource, tgt.id, sid)});
      }
    }
  }
  run_jobs(jobs, config_.workers, scenarios_, impl_->frames, patches, config_.eot,
           *impl_->normalizer,
           [&](const ScenarioManifest& s) -> Clients& { return clients.at(s.scenario_id); }, status);
  ledger->write_jsonl(layout_.ledger_file("universal"));
  status.queries = count_by_oracle(*ledger, architectures());
  write_phase_status(layout_.status_file("universal"), status);
  return status;
}

void Campaign::run_all() {
  run_baseline();
  run_self_attack();
  run_transfer();
  if (config_.universal) run_universal();
}

OptimizationResult optimize_patch(const CampaignConfig& config,
                                  const std::vector<std::string>& oracle_ids,
                                  const ScenarioManifest& scenario, const fs::path& checkpoint) {
  config.validate();
  if (oracle_ids.empty()) fail(ErrorKind::kInvalidInput, "optimize: no oracle ids");
  auto ledger = std::make_shared<QueryLedger>();
  Clients clients = connect(config, ledger, scenario.prompt);
  auto embedder = make_embedder(config.embedding);

  ObjectiveSpec spec;
  for (const auto& id : oracle_ids) spec.oracles.push_back(&clients.by_id(id));
  spec.embedder = embedder.get();
  spec.target_text = scenario.target_text;
  spec.frames = load_scored_frames(scenario);
  spec.eot = config.eot;
  spec.aggregation = config.aggregation;
  spec.patch_width = scenario.patch_width;
  spec.patch_height = scenario.patch_height;

  NesConfig nes = config.nes;
  nes.seed = oracle_ids.size() == 1
                 ? derive_seed(config.master_seed, "optimize", oracle_ids.front(), scenario.scenario_id)
                 : derive_seed(config.master_seed, "universal", scenario.scenario_id);
  OptimizeOptions options;
  options.workers = spec.oracles.front()->ref().max_in_flight;
  for (const auto* o : spec.oracles) options.workers = std::min(options.workers, o->ref().max_in_flight);
  options.ledger = ledger.get();
  options.checkpoint_path = checkpoint;
  if (!checkpoint.empty() && fs::exists(checkpoint)) options.resume = read_checkpoint(checkpoint);
  return optimize(std::move(spec), nes, options);
}

PhaseStatus run_baseline_phase(const CampaignConfig& config) { return Campaign(config).run_baseline(); }

PhaseStatus run_self_attack_phase(const CampaignConfig& config) {
  return Campaign(config).run_self_attack();
}

PhaseStatus run_transfer_phase(const CampaignConfig& config) { return Campaign(config).run_transfer(); }

}  // namespace advxfer
