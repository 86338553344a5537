#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advxfer/imaging.hpp"

namespace advxfer {

inline constexpr std::string_view kDefaultPrompt = "What should the driver do?";

/// Black-box model handle. `endpoint` is "http://host:port" or
/// "scripted:<name>[?key=value&...]".
struct OracleRef {
  std::string id;
  std::string endpoint;
  std::string prompt = std::string(kDefaultPrompt);
  double timeout = 30.0;  // seconds
  int max_in_flight = 1;

  void validate() const;
};

struct OracleResponse {
  std::string text;
  double latency = 0.0;  // seconds
  std::optional<std::vector<double>> embedding;
};

enum class ActionLabel { kAccelerate, kMaintainSpeed, kBrake, kTurnLeft, kTurnRight, kUnknown };

std::string_view to_string(ActionLabel label);
/// Accepts the snake_case names produced by to_string.
ActionLabel parse_action(std::string_view name);

/// The five labels with a canonical phrase, in tie-break order.
inline constexpr ActionLabel kCanonicalActions[] = {
    ActionLabel::kAccelerate, ActionLabel::kMaintainSpeed, ActionLabel::kBrake,
    ActionLabel::kTurnLeft, ActionLabel::kTurnRight};
std::string_view canonical_phrase(ActionLabel label);

struct EmbeddingRef {
  std::string endpoint = "scripted:bow";
  int dimension = 4096;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Query ledger

struct LedgerEntry {
  std::string oracle_id;
  std::size_t request_bytes = 0;
  double latency = 0.0;
  bool ok = true;
};

/// Append-only record of every oracle call; safe to share across threads.
class QueryLedger {
 public:
  void append(LedgerEntry entry);
  std::size_t size() const;
  std::size_t count(std::string_view oracle_id) const;
  std::vector<LedgerEntry> snapshot() const;
  void write_jsonl(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mutex_;
  std::vector<LedgerEntry> entries_;
};

// ---------------------------------------------------------------------------
// Oracles

class OracleBackend {
 public:
  virtual ~OracleBackend() = default;
  /// Returns the model text for (frame, prompt) and the request payload size.
  virtual std::string infer(const Frame& frame, const std::string& prompt,
                            std::size_t& request_bytes) = 0;
};

/// Shareable client: bounds concurrency to max_in_flight and ledgers every call.
class OracleClient {
 public:
  OracleClient(OracleRef ref, std::unique_ptr<OracleBackend> backend,
               std::shared_ptr<QueryLedger> ledger);

  const OracleRef& ref() const noexcept { return ref_; }
  const std::string& id() const noexcept { return ref_.id; }
  QueryLedger& ledger() const noexcept { return *ledger_; }

  OracleResponse query(const Frame& frame);

 private:
  OracleRef ref_;
  std::unique_ptr<OracleBackend> backend_;
  std::shared_ptr<QueryLedger> ledger_;
  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  int in_flight_ = 0;
};

/// Builds a scripted or HTTP client from the endpoint scheme.
std::unique_ptr<OracleClient> make_oracle(const OracleRef& ref,
                                          std::shared_ptr<QueryLedger> ledger);

OracleResponse query_oracle(OracleClient& oracle, const Frame& frame);

// ---------------------------------------------------------------------------
// Embeddings

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int dimension() const = 0;
  virtual std::vector<double> embed(std::string_view text) = 0;
};

std::unique_ptr<Embedder> make_embedder(const EmbeddingRef& ref);

/// Validating wrapper: rejects empty text, wrong dimension and zero vectors.
std::vector<double> embed_text(Embedder& embedder, std::string_view text);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// 1 - cos(generated, target), in [0, 2].
double semantic_loss(std::span<const double> generated, std::span<const double> target);

/// Below this best-match cosine a response maps to kUnknown.
inline constexpr double kUnknownThreshold = 0.2;

/// Embeds the canonical action phrases once and classifies responses by
/// nearest phrase under cosine similarity.
class ActionNormalizer {
 public:
  explicit ActionNormalizer(Embedder& embedder);
  ActionLabel classify(const OracleResponse& response) const;
  ActionLabel classify(std::span<const double> embedding) const;

 private:
  Embedder& embedder_;
  std::vector<std::vector<double>> phrases_;
};

ActionLabel normalize_action(const OracleResponse& response, Embedder& embedder);

}  // namespace advxfer
