#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "advxfer/config.hpp"
#include "advxfer/manifest.hpp"
#include "advxfer/metrics.hpp"
#include "advxfer/nes.hpp"

namespace advxfer {

/// Patch source used for the all-oracle patch; not allowed as an oracle id.
inline constexpr std::string_view kUniversalSource = "universal";

/// Results directory layout.
struct ResultsLayout {
  std::filesystem::path root;

  std::filesystem::path campaign_file() const { return root / "campaign.json"; }
  std::filesystem::path baseline_dir(std::string_view oracle, std::string_view scenario) const;
  std::filesystem::path eval_dir(std::string_view source, std::string_view target,
                                 std::string_view scenario) const;
  std::filesystem::path patch_dir(std::string_view source, std::string_view scenario) const;
  std::filesystem::path ledger_file(std::string_view phase) const;
  std::filesystem::path status_file(std::string_view phase) const;
  std::filesystem::path matrix_dir() const { return root / "matrix"; }
  std::filesystem::path report_dir() const { return root / "report"; }
};

std::string trial_file_name(int trial);
std::string patch_id(std::string_view source, std::string_view scenario);

struct PhaseStatus {
  std::string phase;
  std::vector<std::string> warnings;
  std::vector<std::string> excluded;  // trial ids dropped after an oracle failure
  std::map<std::string, std::size_t> queries;  // per oracle
};

void write_phase_status(const std::filesystem::path& path, const PhaseStatus& status);
PhaseStatus read_phase_status(const std::filesystem::path& path);

/// Plays one trial: every scored frame (with the patch composited under a
/// per-frame viewing transform drawn from `seed`, when a patch is given) is
/// sent to the oracle and the response normalized.
TrialLog run_trial(OracleClient& oracle, const ActionNormalizer& normalizer,
                   const ScenarioManifest& scenario, std::span<const EvaluationFrame> frames,
                   const Patch* patch, const EotConfig& viewing, std::uint64_t seed,
                   std::string trial_id, std::string patch_id);

/// Three-phase protocol runner over a loaded config. Every trial, patch and
/// statistic draws its randomness from derive_seed(master_seed, phase, ...).
class Campaign {
 public:
  explicit Campaign(CampaignConfig config);
  ~Campaign();

  const CampaignConfig& config() const noexcept { return config_; }
  const std::vector<ScenarioManifest>& scenarios() const noexcept { return scenarios_; }
  const ResultsLayout& layout() const noexcept { return layout_; }
  std::vector<std::string> architectures() const;

  /// Patch-free trials; returns per (oracle, scenario) baseline rates.
  PhaseStatus run_baseline();
  /// One NES patch per (oracle, scenario), then evaluation on the source
  /// oracle. Resumes from a checkpoint or an already written patch.
  PhaseStatus run_self_attack();
  /// Every patch on every other oracle; writes the per-scenario matrices.
  PhaseStatus run_transfer();
  /// One patch per scenario against all oracles, evaluated on each.
  PhaseStatus run_universal();
  void run_all();

  /// Frame-level oracle calls made by this object so far, per phase.
  std::size_t query_count(std::string_view phase) const;

 private:
  struct Impl;
  CampaignConfig config_;
  ResultsLayout layout_;
  std::vector<ScenarioManifest> scenarios_;
  std::unique_ptr<Impl> impl_;
};

/// Optimizes one patch for `oracle_ids` (one id: targeted, several:
/// universal) on one scenario, with the seed the campaign would use for that
/// cell. Resumes from `checkpoint` when it exists.
OptimizationResult optimize_patch(const CampaignConfig& config,
                                  const std::vector<std::string>& oracle_ids,
                                  const ScenarioManifest& scenario,
                                  const std::filesystem::path& checkpoint = {});

/// Free-function forms of the phases.
PhaseStatus run_baseline_phase(const CampaignConfig& config);
PhaseStatus run_self_attack_phase(const CampaignConfig& config);
PhaseStatus run_transfer_phase(const CampaignConfig& config);

/// Reads every complete trial log for a cell in trial order.
std::vector<TrialLog> load_cell_logs(const std::filesystem::path& dir);

/// Builds the ASR table of one scenario from the evaluation logs.
AsrTable load_asr_table(const ResultsLayout& layout, const std::vector<std::string>& architectures,
                        std::string_view scenario);

}  // namespace advxfer
