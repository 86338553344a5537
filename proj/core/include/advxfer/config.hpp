#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "advxfer/eot.hpp"
#include "advxfer/nes.hpp"
#include "advxfer/oracle.hpp"

namespace advxfer {

struct CampaignConfig {
  std::vector<OracleRef> oracles;
  EmbeddingRef embedding;
  std::vector<std::filesystem::path> scenarios;  // resolved against the config directory
  NesConfig nes;
  EotConfig eot;
  int trials_per_cell = 5;
  std::filesystem::path output_dir = "results";
  std::uint64_t master_seed = 0;
  Aggregation aggregation = Aggregation::kMean;
  bool universal = false;        // also optimize one patch against all oracles
  std::uint64_t permutations = 9999;
  int workers = 1;               // concurrent evaluation cells

  /// Throws kInvalidInput (trials_per_cell < 1, duplicate oracle ids, ...).
  void validate() const;
};

/// Parses a JSON config; unknown keys at any level are rejected.
CampaignConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
CampaignConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const CampaignConfig& config);

}  // namespace advxfer
