#include "advxfer/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "advxfer/error.hpp"

namespace advxfer {

double frame_asr(std::span<const TrialLog> logs) {
  if (logs.empty()) fail(ErrorKind::kInvalidInput, "frame_asr: no trial logs");
  const TrialLog& first = logs.front();
  std::size_t matched = 0;
  std::size_t total = 0;
  for (const TrialLog& log : logs) {
    if (log.oracle_id != first.oracle_id || log.patch_id != first.patch_id ||
        log.scenario_id != first.scenario_id) {
      fail(ErrorKind::kInvalidInput, "frame_asr: logs mix (oracle, patch, scenario) cells");
    }
    for (const FrameRecord& f : log.frames) matched += f.matched_target ? 1 : 0;
    total += log.frames.size();
  }
  if (total == 0) fail(ErrorKind::kInvalidInput, "frame_asr: logs contain no frames");
  return static_cast<double>(matched) / static_cast<double>(total);
}

double transfer_rate(double asr_ij, double asr_ii) {
  if (asr_ii == 0.0) fail(ErrorKind::kUndefinedBaseline, "transfer_rate: self-attack ASR is 0");
  return asr_ij / asr_ii;
}

namespace {

std::size_t find_index(const std::vector<std::string>& names, std::string_view name) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  fail(ErrorKind::kLookup, "unknown architecture '" + std::string(name) + "'");
}

void check_square(const std::vector<std::string>& names,
                  const std::vector<std::vector<double>>& values) {
  if (names.empty()) fail(ErrorKind::kInvalidInput, "empty architecture list");
  if (values.size() != names.size()) fail(ErrorKind::kInvalidInput, "table is not square");
  for (const auto& row : values) {
    if (row.size() != names.size()) fail(ErrorKind::kInvalidInput, "table is not square");
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      if (names[i] == names[j]) fail(ErrorKind::kInvalidInput, "duplicate architecture " + names[i]);
    }
  }
}

}  // namespace

void AsrTable::validate() const {
  check_square(architectures, values);
  for (const auto& row : values) {
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::kInvalidInput, "ASR value outside [0, 1]");
    }
  }
}

std::size_t AsrTable::index(std::string_view architecture) const {
  return find_index(architectures, architecture);
}

double AsrTable::at(std::string_view source, std::string_view target) const {
  return values[index(source)][index(target)];
}

TransferMatrix TransferMatrix::build(const AsrTable& asr) {
  asr.validate();
  const std::size_t n = asr.size();
  std::vector<std::vector<double>> rates(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (asr.values[i][i] == 0.0) {
      fail(ErrorKind::kUndefinedBaseline,
           "self-attack ASR of " + asr.architectures[i] + " is 0; transfer rates undefined");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) rates[i][j] = transfer_rate(asr.values[i][j], asr.values[i][i]);
    }
  }
  TransferMatrix m;
  m.architectures_ = asr.architectures;
  m.rates_ = std::move(rates);
  return m;
}

TransferMatrix TransferMatrix::from_rates(std::vector<std::string> architectures,
                                          std::vector<std::vector<double>> rates) {
  check_square(architectures, rates);
  for (std::size_t i = 0; i < rates.size(); ++i) rates[i][i] = 1.0;
  TransferMatrix m;
  m.architectures_ = std::move(architectures);
  m.rates_ = std::move(rates);
  return m;
}

std::size_t TransferMatrix::index(std::string_view architecture) const {
  return find_index(architectures_, architecture);
}

double TransferMatrix::at(std::string_view source, std::string_view target) const {
  return rates_[index(source)][index(target)];
}

namespace {

void require_pairs(const TransferMatrix& m) {
  if (m.size() < 2) fail(ErrorKind::kInvalidInput, "need at least two architectures");
}

}  // namespace

double mean_transfer_rate(const TransferMatrix& m) {
  require_pairs(m);
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (i != j) sum += m.rates()[i][j];
    }
  }
  const double n = static_cast<double>(m.size());
  return sum / (n * (n - 1.0));
}

double vulnerability_score(const TransferMatrix& m, std::string_view target) {
  const std::size_t j = m.index(target);
  require_pairs(m);
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i != j) sum += m.rates()[i][j];
  }
  return sum / static_cast<double>(m.size() - 1);
}

double robustness_score(const TransferMatrix& m, std::string_view target) {
  return 1.0 - vulnerability_score(m, target);
}

double transfer_out_rate(const TransferMatrix& m, std::string_view source) {
  const std::size_t i = m.index(source);
  require_pairs(m);
  double sum = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (i != j) sum += m.rates()[i][j];
  }
  return sum / static_cast<double>(m.size() - 1);
}

UniversalEfficiency universal_efficiency(std::span<const double> universal_asr,
                                         std::span<const double> self_asr) {
  if (universal_asr.size() != self_asr.size() || self_asr.empty()) {
    fail(ErrorKind::kInvalidInput, "universal_efficiency: mismatched or empty inputs");
  }
  UniversalEfficiency out;
  for (std::size_t j = 0; j < self_asr.size(); ++j) {
    if (self_asr[j] == 0.0) {
      fail(ErrorKind::kUndefinedBaseline,
           "universal_efficiency: self-attack ASR of architecture " + std::to_string(j) + " is 0");
    }
    out.per_architecture.push_back(universal_asr[j] / self_asr[j]);
    out.mean += out.per_architecture.back();
  }
  out.mean /= static_cast<double>(self_asr.size());
  return out;
}

double ensemble_asr(std::span<const std::vector<TrialLog>> logs_per_oracle) {
  if (logs_per_oracle.empty() || logs_per_oracle.front().empty()) {
    fail(ErrorKind::kInvalidInput, "ensemble_asr: no logs");
  }
  const auto& ref = logs_per_oracle.front();
  for (const auto& logs : logs_per_oracle) {
    if (logs.size() != ref.size()) fail(ErrorKind::kInvalidInput, "ensemble_asr: trial counts differ");
    for (std::size_t t = 0; t < ref.size(); ++t) {
      if (logs[t].trial_id != ref[t].trial_id || logs[t].frames.size() != ref[t].frames.size()) {
        fail(ErrorKind::kInvalidInput, "ensemble_asr: logs are not frame-aligned");
      }
    }
  }
  const std::size_t voters = logs_per_oracle.size();
  std::size_t attacked = 0;
  std::size_t total = 0;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    for (std::size_t f = 0; f < ref[t].frames.size(); ++f) {
      std::size_t votes = 0;
      for (const auto& logs : logs_per_oracle) votes += logs[t].frames[f].matched_target ? 1 : 0;
      if (2 * votes > voters) ++attacked;
      ++total;
    }
  }
  if (total == 0) fail(ErrorKind::kInvalidInput, "ensemble_asr: logs contain no frames");
  return static_cast<double>(attacked) / static_cast<double>(total);
}

double mean_cross_architecture(std::span<const std::vector<double>> table, std::size_t source) {
  if (source >= table.size()) fail(ErrorKind::kLookup, "source index out of range");
  if (table.size() < 2) fail(ErrorKind::kInvalidInput, "need at least two architectures");
  double sum = 0.0;
  for (std::size_t j = 0; j < table[source].size(); ++j) {
    if (j != source) sum += table[source][j];
  }
  return sum / static_cast<double>(table[source].size() - 1);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const std::vector<std::vector<double>>& values) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "source";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i];
    for (double v : values[i]) out << ',' << csv_number(v);
    out << '\n';
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

void write_asr_csv(const std::filesystem::path& path, const AsrTable& table) {
  table.validate();
  write_matrix_csv(path, table.architectures, table.values);
}

AsrTable read_asr_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingInput, "missing ASR table " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kIo, "empty ASR table " + path.string());
  auto header = split_csv(line);
  if (header.empty() || header.front() != "source") {
    fail(ErrorKind::kIo, "bad ASR table header in " + path.string());
  }
  AsrTable table;
  table.architectures.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) fail(ErrorKind::kIo, "ragged ASR table " + path.string());
    std::vector<double> row;
    try {
      for (std::size_t k = 1; k < cells.size(); ++k) row.push_back(std::stod(cells[k]));
    } catch (const std::exception&) {
      fail(ErrorKind::kIo, "non-numeric cell in " + path.string());
    }
    table.values.push_back(std::move(row));
  }
  table.validate();
  return table;
}

void write_transfer_csv(const std::filesystem::path& path, const TransferMatrix& m) {
  write_matrix_csv(path, m.architectures(), m.rates());
}

}  // namespace advxfer
