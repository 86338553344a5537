#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advxfer/oracle.hpp"

namespace advxfer {

struct FrameRecord {
  double timestamp = 0.0;
  double distance = 0.0;
  ActionLabel action = ActionLabel::kUnknown;
  bool matched_target = false;
  std::string response;  // raw model text, kept for audit

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

inline constexpr std::string_view kNoPatch = "none";

/// One trial of one (oracle, patch, scenario) cell.
struct TrialLog {
  std::string trial_id;
  std::string oracle_id;
  std::string patch_id = std::string(kNoPatch);
  std::string scenario_id;
  ActionLabel target_action = ActionLabel::kUnknown;
  std::uint64_t seed = 0;
  std::vector<FrameRecord> frames;

  /// Throws kInvalidInput on empty frames, non-increasing timestamps or a
  /// matched_target flag that disagrees with the action.
  void validate() const;

  friend bool operator==(const TrialLog&, const TrialLog&) = default;
};

/// JSONL: a header line with the trial metadata, then one line per frame.
void write_trial_log(const std::filesystem::path& path, const TrialLog& log);
TrialLog read_trial_log(const std::filesystem::path& path);
std::string trial_log_to_jsonl(const TrialLog& log);
TrialLog trial_log_from_jsonl(std::string_view text);

/// Total matched frames / total frames over all logs (micro-average).
/// Throws kInvalidInput for an empty set or logs from different cells.
double frame_asr(std::span<const TrialLog> logs);

/// asr_ij / asr_ii, unclamped. Throws kUndefinedBaseline when asr_ii == 0.
double transfer_rate(double asr_ij, double asr_ii);

/// Square table indexed [source patch architecture][target architecture].
struct AsrTable {
  std::vector<std::string> architectures;
  std::vector<std::vector<double>> values;

  void validate() const;
  std::size_t index(std::string_view architecture) const;  // kLookup
  double at(std::string_view source, std::string_view target) const;
  std::size_t size() const noexcept { return architectures.size(); }
};

class TransferMatrix {
 public:
  /// Source-normalized rates asr[i][j] / asr[i][i]. Throws kUndefinedBaseline
  /// naming the architecture with a zero diagonal.
  static TransferMatrix build(const AsrTable& asr);

  /// Takes rates as given (e.g. printed values); the diagonal is set to 1.
  static TransferMatrix from_rates(std::vector<std::string> architectures,
                                   std::vector<std::vector<double>> rates);

  const std::vector<std::string>& architectures() const noexcept { return architectures_; }
  const std::vector<std::vector<double>>& rates() const noexcept { return rates_; }
  std::size_t size() const noexcept { return architectures_.size(); }
  std::size_t index(std::string_view architecture) const;
  double at(std::string_view source, std::string_view target) const;

 private:
  std::vector<std::string> architectures_;
  std::vector<std::vector<double>> rates_;
};

inline TransferMatrix build_transfer_matrix(const AsrTable& asr) { return TransferMatrix::build(asr); }

/// Mean of off-diagonal rates. Throws kInvalidInput for n < 2.
double mean_transfer_rate(const TransferMatrix& m);
/// Mean incoming rate of `target` (column, diagonal excluded).
double vulnerability_score(const TransferMatrix& m, std::string_view target);
double robustness_score(const TransferMatrix& m, std::string_view target);
/// Mean outgoing rate of `source` (row, diagonal excluded).
double transfer_out_rate(const TransferMatrix& m, std::string_view source);

struct UniversalEfficiency {
  std::vector<double> per_architecture;
  double mean = 0.0;
};

/// universal_asr[j] / self_asr[j]. Throws kUndefinedBaseline on a zero self ASR.
UniversalEfficiency universal_efficiency(std::span<const double> universal_asr,
                                         std::span<const double> self_asr);

/// Fuses frame-aligned logs (one set per oracle, same trials in the same
/// order): a frame is attacked when a strict majority of oracles matched.
double ensemble_asr(std::span<const std::vector<TrialLog>> logs_per_oracle);

/// Mean of the off-diagonal entries of row `source` of a frame-success table.
double mean_cross_architecture(std::span<const std::vector<double>> table, std::size_t source);

void write_asr_csv(const std::filesystem::path& path, const AsrTable& table);
AsrTable read_asr_csv(const std::filesystem::path& path);
void write_transfer_csv(const std::filesystem::path& path, const TransferMatrix& m);

}  // namespace advxfer
