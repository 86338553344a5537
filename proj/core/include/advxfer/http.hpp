#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advxfer/imaging.hpp"
#include "advxfer/oracle.hpp"

namespace advxfer {

// Oracle wire protocol (HTTP/1.1, JSON bodies, UTF-8):
//
//   POST /infer  {"image_png_b64": str, "prompt": str}  -> 200 {"text": str}
//   POST /embed  {"text": str}                          -> 200 {"vector": [num], "dim": int}
//   GET  /health                                        -> 200 {"name": str, "version": str}
//
// Rejected requests answer 400 (413 for oversized images) with {"error": str}.

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws kProtocol on malformed or truncated input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string encode_infer_request(const Frame& frame, std::string_view prompt);
/// Extracts "text" from a 200 reply body. Throws kProtocol when malformed.
std::string decode_infer_reply(std::string_view body);

std::string encode_embed_request(std::string_view text);
/// Throws kProtocol when malformed or when the vector length disagrees with
/// "dim" or with `expected_dim` (pass 0 to skip the latter check).
std::vector<double> decode_embed_reply(std::string_view body, int expected_dim);

struct Endpoint {
  std::string host;
  int port = 80;
};
/// Parses "http://host[:port][/]".
Endpoint parse_http_endpoint(std::string_view url);

struct HealthInfo {
  std::string name;
  std::string version;
};
HealthInfo check_health(std::string_view url, double timeout_seconds);

/// Number of retries after a transport failure (timeout, refused
/// connection, 5xx) before giving up with kTransport.
inline constexpr int kTransportRetries = 2;

std::unique_ptr<OracleBackend> make_http_oracle(std::string_view url, double timeout_seconds);
std::unique_ptr<Embedder> make_http_embedder(const EmbeddingRef& ref);

// ---------------------------------------------------------------------------
// Conformance suite: golden request/response pairs replayed against a live
// endpoint. Each case file holds
//   {"name", "method", "path", "body" (string, sent verbatim),
//    "expect_status", "expect_body" (exact key matches, optional),
//    "expect_types" ({key: "string"|"number"|"array"|"integer"}, optional),
//    "expect_same_as_previous" (bool, optional; body must equal the
//    previous case's body)}

struct ConformanceCase {
  std::string name;
  std::string method;
  std::string path;
  std::string body;
  int expect_status = 200;
  std::string expect_body_json;   // "" when absent
  std::string expect_types_json;  // "" when absent
  bool expect_same_as_previous = false;
};

struct ConformanceResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<ConformanceCase> load_conformance_cases(const std::filesystem::path& dir);
void write_conformance_cases(const std::filesystem::path& dir,
                             const std::vector<ConformanceCase>& cases);

/// Golden cases computed from the in-process scripted oracle `oracle_endpoint`
/// and scripted embedder `embedding`.
std::vector<ConformanceCase> build_golden_cases(std::string_view oracle_endpoint,
                                                const EmbeddingRef& embedding);

std::vector<ConformanceResult> run_conformance(std::string_view url,
                                               const std::vector<ConformanceCase>& cases,
                                               double timeout_seconds = 10.0);

}  // namespace advxfer
