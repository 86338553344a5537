#include "advxfer/oracle.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "advxfer/error.hpp"
#include "advxfer/http.hpp"
#include "advxfer/scripted.hpp"
#include "json.hpp"

namespace advxfer {

void OracleRef::validate() const {
  if (id.empty()) fail(ErrorKind::kInvalidInput, "oracle id must be non-empty");
  if (endpoint.empty()) fail(ErrorKind::kInvalidInput, "oracle '" + id + "' has no endpoint");
  if (!(timeout > 0.0)) fail(ErrorKind::kInvalidInput, "oracle '" + id + "': timeout must be > 0");
  if (max_in_flight < 1) {
    fail(ErrorKind::kInvalidInput, "oracle '" + id + "': max_in_flight must be >= 1");
  }
}

void EmbeddingRef::validate() const {
  if (endpoint.empty()) fail(ErrorKind::kInvalidInput, "embedding endpoint must be non-empty");
  if (dimension < 1) fail(ErrorKind::kInvalidInput, "embedding dimension must be >= 1");
}

std::string_view to_string(ActionLabel label) {
  switch (label) {
    case ActionLabel::kAccelerate: return "accelerate";
    case ActionLabel::kMaintainSpeed: return "maintain_speed";
    case ActionLabel::kBrake: return "brake";
    case ActionLabel::kTurnLeft: return "turn_left";
    case ActionLabel::kTurnRight: return "turn_right";
    case ActionLabel::kUnknown: return "unknown";
  }
  return "unknown";
}

ActionLabel parse_action(std::string_view name) {
  for (ActionLabel label : kCanonicalActions) {
    if (to_string(label) == name) return label;
  }
  if (name == "unknown") return ActionLabel::kUnknown;
  fail(ErrorKind::kInvalidInput, "unknown action label '" + std::string(name) + "'");
}

std::string_view canonical_phrase(ActionLabel label) {
  switch (label) {
    case ActionLabel::kAccelerate: return "accelerate";
    case ActionLabel::kMaintainSpeed: return "maintain speed";
    case ActionLabel::kBrake: return "brake";
    case ActionLabel::kTurnLeft: return "turn left";
    case ActionLabel::kTurnRight: return "turn right";
    case ActionLabel::kUnknown: break;
  }
  return "";
}

// ---------------------------------------------------------------------------

void QueryLedger::append(LedgerEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

std::size_t QueryLedger::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::size_t QueryLedger::count(std::string_view oracle_id) const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.oracle_id == oracle_id ? 1 : 0;
  return n;
}

std::vector<LedgerEntry> QueryLedger::snapshot() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

void QueryLedger::write_jsonl(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& e : snapshot()) {
    nlohmann::json line = {{"oracle_id", e.oracle_id},
                           {"request_bytes", e.request_bytes},
                           {"latency", e.latency},
                           {"ok", e.ok}};
    out << line.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

OracleClient::OracleClient(OracleRef ref, std::unique_ptr<OracleBackend> backend,
                           std::shared_ptr<QueryLedger> ledger)
    : ref_(std::move(ref)), backend_(std::move(backend)), ledger_(std::move(ledger)) {
  ref_.validate();
  if (!backend_) fail(ErrorKind::kInvalidInput, "oracle '" + ref_.id + "' has no backend");
  if (!ledger_) ledger_ = std::make_shared<QueryLedger>();
}

OracleResponse OracleClient::query(const Frame& frame) {
  {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return in_flight_ < ref_.max_in_flight; });
    ++in_flight_;
  }
  struct SlotRelease {
    OracleClient* self;
    ~SlotRelease() {
      {
        std::lock_guard lock(self->slots_mutex_);
        --self->in_flight_;
      }
      self->slots_cv_.notify_one();
    }
  } release{this};

  const auto start = std::chrono::steady_clock::now();
  std::size_t bytes = frame.pixels.size();
  OracleResponse response;
  try {
    response.text = backend_->infer(frame, ref_.prompt, bytes);
  } catch (const Error&) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    ledger_->append({ref_.id, bytes, elapsed.count(), false});
    throw;
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  response.latency = elapsed.count();
  ledger_->append({ref_.id, bytes, response.latency, true});
  if (response.text.empty()) {
    fail(ErrorKind::kProtocol, "oracle '" + ref_.id + "' returned empty text");
  }
  return response;
}

std::unique_ptr<OracleClient> make_oracle(const OracleRef& ref,
                                          std::shared_ptr<QueryLedger> ledger) {
  ref.validate();
  std::unique_ptr<OracleBackend> backend;
  if (ref.endpoint.starts_with("scripted:")) {
    backend = make_scripted_oracle(ref.endpoint);
  } else if (ref.endpoint.starts_with("http://")) {
    backend = make_http_oracle(ref.endpoint, ref.timeout);
  } else {
    fail(ErrorKind::kInvalidInput,
         "oracle '" + ref.id + "': unsupported endpoint '" + ref.endpoint + "'");
  }
  return std::make_unique<OracleClient>(ref, std::move(backend), std::move(ledger));
}

OracleResponse query_oracle(OracleClient& oracle, const Frame& frame) {
  return oracle.query(frame);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Embedder> make_embedder(const EmbeddingRef& ref) {
  ref.validate();
  if (ref.endpoint.starts_with("scripted:")) return make_scripted_embedder(ref);
  if (ref.endpoint.starts_with("http://")) return make_http_embedder(ref);
  fail(ErrorKind::kInvalidInput, "unsupported embedding endpoint '" + ref.endpoint + "'");
}

namespace {

double norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace

std::vector<double> embed_text(Embedder& embedder, std::string_view text) {
  if (text.empty()) fail(ErrorKind::kInvalidInput, "cannot embed empty text");
  std::vector<double> v = embedder.embed(text);
  if (static_cast<int>(v.size()) != embedder.dimension()) {
    fail(ErrorKind::kProtocol, "embedding has dimension " + std::to_string(v.size()) +
                                   ", expected " + std::to_string(embedder.dimension()));
  }
  if (norm(v) == 0.0) fail(ErrorKind::kDegenerateEmbedding, "embedding has zero norm");
  return v;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::kInvalidInput, "embedding dimension mismatch: " + std::to_string(a.size()) +
                                       " vs " + std::to_string(b.size()));
  }
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) fail(ErrorKind::kDegenerateEmbedding, "zero-norm embedding");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double semantic_loss(std::span<const double> generated, std::span<const double> target) {
  return 1.0 - cosine_similarity(generated, target);
}

ActionNormalizer::ActionNormalizer(Embedder& embedder) : embedder_(embedder) {
  for (ActionLabel label : kCanonicalActions) {
    phrases_.push_back(embed_text(embedder_, canonical_phrase(label)));
  }
}

ActionLabel ActionNormalizer::classify(std::span<const double> embedding) const {
  double best = -2.0;
  ActionLabel best_label = ActionLabel::kUnknown;
  for (std::size_t i = 0; i < phrases_.size(); ++i) {
    const double c = cosine_similarity(embedding, phrases_[i]);
    if (c > best) {
      best = c;
      best_label = kCanonicalActions[i];
    }
  }
  return best < kUnknownThreshold ? ActionLabel::kUnknown : best_label;
}

ActionLabel ActionNormalizer::classify(const OracleResponse& response) const {
  if (response.embedding && static_cast<int>(response.embedding->size()) == embedder_.dimension()) {
    return classify(*response.embedding);
  }
  return classify(embed_text(embedder_, response.text));
}

ActionLabel normalize_action(const OracleResponse& response, Embedder& embedder) {
  return ActionNormalizer(embedder).classify(response);
}

}  // namespace advxfer
