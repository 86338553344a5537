#include "advxfer/http.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "advxfer/error.hpp"
#include "advxfer/image_io.hpp"
#include "advxfer/scripted.hpp"
#include "httplib.h"
#include "json.hpp"

namespace advxfer {

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) fail(ErrorKind::kProtocol, "base64 input is truncated");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) fail(ErrorKind::kProtocol, "malformed base64 input");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

namespace {

json parse_body(std::string_view body, std::string_view what) {
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    fail(ErrorKind::kProtocol, std::string(what) + ": reply is not a JSON object");
  }
  return doc;
}

std::string error_from_body(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (!doc.is_discarded() && doc.is_object() && doc.contains("error") && doc["error"].is_string()) {
    return doc["error"].get<std::string>();
  }
  return body.substr(0, 200);
}

bool retryable_status(int status) { return status >= 500; }

/// One POST with the shared retry policy. Returns the 200 body.
std::string post_with_retries(const Endpoint& endpoint, double timeout, const std::string& path,
                              const std::string& body, std::string_view what) {
  const auto seconds = static_cast<time_t>(timeout);
  const auto micros = static_cast<time_t>((timeout - static_cast<double>(seconds)) * 1e6);
  std::string last_error;
  for (int attempt = 0; attempt <= kTransportRetries; ++attempt) {
    httplib::Client client(endpoint.host, endpoint.port);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    auto result = client.Post(path, body, "application/json");
    if (!result) {
      last_error = httplib::to_string(result.error());
      continue;
    }
    if (result->status == 200) return result->body;
    if (retryable_status(result->status)) {
      last_error = "HTTP " + std::to_string(result->status) + ": " + error_from_body(result->body);
      continue;
    }
    fail(ErrorKind::kProtocol, std::string(what) + ": HTTP " + std::to_string(result->status) +
                                   ": " + error_from_body(result->body));
  }
  fail(ErrorKind::kTransport, std::string(what) + ": " + endpoint.host + ":" +
                                  std::to_string(endpoint.port) + " failed after " +
                                  std::to_string(kTransportRetries) + " retries (" + last_error +
                                  ")");
}

class HttpOracle final : public OracleBackend {
 public:
  HttpOracle(Endpoint endpoint, double timeout) : endpoint_(std::move(endpoint)), timeout_(timeout) {}

  std::string infer(const Frame& frame, const std::string& prompt,
                    std::size_t& request_bytes) override {
    const std::string body = encode_infer_request(frame, prompt);
    request_bytes = body.size();
    return decode_infer_reply(post_with_retries(endpoint_, timeout_, "/infer", body, "infer"));
  }

 private:
  Endpoint endpoint_;
  double timeout_;
};

class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(Endpoint endpoint, int dimension)
      : endpoint_(std::move(endpoint)), dimension_(dimension) {}

  int dimension() const override { return dimension_; }

  std::vector<double> embed(std::string_view text) override {
    const std::string body = post_with_retries(endpoint_, 30.0, "/embed",
                                               encode_embed_request(text), "embed");
    return decode_embed_reply(body, dimension_);
  }

 private:
  Endpoint endpoint_;
  int dimension_;
};

}  // namespace

std::string encode_infer_request(const Frame& frame, std::string_view prompt) {
  const json doc = {{"image_png_b64", base64_encode(encode_png(frame))},
                    {"prompt", std::string(prompt)}};
  return doc.dump();
}

std::string decode_infer_reply(std::string_view body) {
  const json doc = parse_body(body, "infer");
  if (!doc.contains("text") || !doc["text"].is_string()) {
    fail(ErrorKind::kProtocol, "infer: reply lacks a string \"text\" field");
  }
  std::string text = doc["text"].get<std::string>();
  if (text.empty()) fail(ErrorKind::kProtocol, "infer: reply text is empty");
  return text;
}

std::string encode_embed_request(std::string_view text) {
  return json{{"text", std::string(text)}}.dump();
}

std::vector<double> decode_embed_reply(std::string_view body, int expected_dim) {
  const json doc = parse_body(body, "embed");
  if (!doc.contains("vector") || !doc["vector"].is_array()) {
    fail(ErrorKind::kProtocol, "embed: reply lacks a \"vector\" array");
  }
  if (!doc.contains("dim") || !doc["dim"].is_number_integer()) {
    fail(ErrorKind::kProtocol, "embed: reply lacks an integer \"dim\"");
  }
  std::vector<double> v;
  v.reserve(doc["vector"].size());
  for (const auto& x : doc["vector"]) {
    if (!x.is_number()) fail(ErrorKind::kProtocol, "embed: non-numeric vector entry");
    v.push_back(x.get<double>());
  }
  const int dim = doc["dim"].get<int>();
  if (static_cast<int>(v.size()) != dim) {
    fail(ErrorKind::kProtocol, "embed: vector length disagrees with dim");
  }
  if (expected_dim > 0 && dim != expected_dim) {
    fail(ErrorKind::kProtocol, "embed: dim " + std::to_string(dim) + " but " +
                                   std::to_string(expected_dim) + " was declared");
  }
  return v;
}

Endpoint parse_http_endpoint(std::string_view url) {
  constexpr std::string_view kScheme = "http://";
  if (!url.starts_with(kScheme)) {
    fail(ErrorKind::kInvalidInput, "expected an http:// endpoint, got '" + std::string(url) + "'");
  }
  url.remove_prefix(kScheme.size());
  while (url.ends_with('/')) url.remove_suffix(1);
  if (url.find('/') != std::string_view::npos) {
    fail(ErrorKind::kInvalidInput, "endpoint paths are not supported: '" + std::string(url) + "'");
  }
  Endpoint endpoint;
  const std::size_t colon = url.rfind(':');
  endpoint.host = std::string(url.substr(0, colon));
  if (colon != std::string_view::npos) {
    const std::string_view port = url.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), endpoint.port);
    if (ec != std::errc() || ptr != port.data() + port.size() || endpoint.port <= 0 ||
        endpoint.port > 65535) {
      fail(ErrorKind::kInvalidInput, "bad port in endpoint '" + std::string(url) + "'");
    }
  }
  if (endpoint.host.empty()) fail(ErrorKind::kInvalidInput, "endpoint has no host");
  return endpoint;
}

HealthInfo check_health(std::string_view url, double timeout_seconds) {
  const Endpoint endpoint = parse_http_endpoint(url);
  httplib::Client client(endpoint.host, endpoint.port);
  const auto seconds = static_cast<time_t>(timeout_seconds);
  client.set_connection_timeout(seconds, static_cast<time_t>((timeout_seconds - seconds) * 1e6));
  client.set_read_timeout(seconds, static_cast<time_t>((timeout_seconds - seconds) * 1e6));
  auto result = client.Get("/health");
  if (!result) {
    fail(ErrorKind::kTransport, "health: " + std::string(url) + ": " +
                                    httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    fail(ErrorKind::kProtocol, "health: HTTP " + std::to_string(result->status));
  }
  const json doc = parse_body(result->body, "health");
  if (!doc.contains("name") || !doc["name"].is_string() || !doc.contains("version") ||
      !doc["version"].is_string()) {
    fail(ErrorKind::kProtocol, "health: reply needs string \"name\" and \"version\"");
  }
  return {doc["name"].get<std::string>(), doc["version"].get<std::string>()};
}

std::unique_ptr<OracleBackend> make_http_oracle(std::string_view url, double timeout_seconds) {
  return std::make_unique<HttpOracle>(parse_http_endpoint(url), timeout_seconds);
}

std::unique_ptr<Embedder> make_http_embedder(const EmbeddingRef& ref) {
  return std::make_unique<HttpEmbedder>(parse_http_endpoint(ref.endpoint), ref.dimension);
}

// ---------------------------------------------------------------------------
// Conformance

namespace {

json case_to_json(const ConformanceCase& c) {
  json doc = {{"name", c.name},
              {"method", c.method},
              {"path", c.path},
              {"body", c.body},
              {"expect_status", c.expect_status}};
  if (!c.expect_body_json.empty()) doc["expect_body"] = json::parse(c.expect_body_json);
  if (!c.expect_types_json.empty()) doc["expect_types"] = json::parse(c.expect_types_json);
  if (c.expect_same_as_previous) doc["expect_same_as_previous"] = true;
  return doc;
}

ConformanceCase case_from_json(const json& doc) {
  ConformanceCase c;
  c.name = doc.at("name").get<std::string>();
  c.method = doc.at("method").get<std::string>();
  c.path = doc.at("path").get<std::string>();
  c.body = doc.value("body", std::string());
  c.expect_status = doc.at("expect_status").get<int>();
  if (doc.contains("expect_body")) c.expect_body_json = doc["expect_body"].dump();
  if (doc.contains("expect_types")) c.expect_types_json = doc["expect_types"].dump();
  c.expect_same_as_previous = doc.value("expect_same_as_previous", false);
  return c;
}

bool type_matches(const json& value, std::string_view type) {
  if (type == "string") return value.is_string();
  if (type == "number") return value.is_number();
  if (type == "integer") return value.is_number_integer();
  if (type == "array") return value.is_array();
  if (type == "object") return value.is_object();
  return false;
}

bool values_equal(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return a.get<double>() == b.get<double>();
  if (a.is_array() && b.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!values_equal(a[i], b[i])) return false;
    }
    return true;
  }
  return a == b;
}

Frame golden_frame(bool placard) {
  Frame frame = Frame::blank(32, 32, 90, 90, 90);
  if (placard) {
    for (int y = 8; y < 24; ++y) {
      for (int x = 8; x < 24; ++x) {
        frame.at(x, y, 0) = 230;
        frame.at(x, y, 1) = 20;
        frame.at(x, y, 2) = 20;
      }
    }
  }
  return frame;
}

}  // namespace

std::vector<ConformanceCase> load_conformance_cases(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorKind::kMissingInput, "conformance directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("case_") && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ConformanceCase> cases;
  for (const auto& file : files) {
    std::ifstream in(file);
    cases.push_back(case_from_json(json::parse(in)));
  }
  return cases;
}

void write_conformance_cases(const std::filesystem::path& dir,
                             const std::vector<ConformanceCase>& cases) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    char prefix[16];
    std::snprintf(prefix, sizeof(prefix), "case_%02zu_", i);
    std::ofstream out(dir / (prefix + cases[i].name + ".json"), std::ios::trunc);
    out << case_to_json(cases[i]).dump(2) << '\n';
  }
}

std::vector<ConformanceCase> build_golden_cases(std::string_view oracle_endpoint,
                                                const EmbeddingRef& embedding) {
  ScriptedOracle oracle(parse_scripted_endpoint(oracle_endpoint));
  auto embedder = make_scripted_embedder(embedding);
  const std::string prompt(kDefaultPrompt);

  std::vector<ConformanceCase> cases;
  cases.push_back({"health", "GET", "/health", "", 200, "",
                   json{{"name", "string"}, {"version", "string"}}.dump(), false});

  const Frame red = golden_frame(true);
  const Frame plain = golden_frame(false);
  const std::string red_request = encode_infer_request(red, prompt);
  cases.push_back({"infer_red_placard", "POST", "/infer", red_request, 200,
                   json{{"text", oracle.respond(red)}}.dump(), "", false});
  cases.push_back({"infer_red_placard_repeat", "POST", "/infer", red_request, 200,
                   json{{"text", oracle.respond(red)}}.dump(), "", true});
  cases.push_back({"infer_plain_background", "POST", "/infer",
                   encode_infer_request(plain, prompt), 200,
                   json{{"text", oracle.respond(plain)}}.dump(), "", false});

  for (const std::string text : {"brake", "The driver should turn right to exit the highway."}) {
    const auto v = embedder->embed(text);
    const std::string name = text == "brake" ? "embed_brake" : "embed_highway_target";
    cases.push_back({name, "POST", "/embed", encode_embed_request(text), 200,
                     json{{"vector", v}, {"dim", embedding.dimension}}.dump(), "", false});
    cases.push_back({name + "_repeat", "POST", "/embed", encode_embed_request(text), 200, "",
                     "", true});
  }

  const json error_types = {{"error", "string"}};
  cases.push_back({"infer_malformed_json", "POST", "/infer", "{\"image_png_b64\": ", 400, "",
                   error_types.dump(), false});
  std::string truncated = json::parse(red_request)["image_png_b64"].get<std::string>();
  truncated.resize(truncated.size() - 7);
  cases.push_back({"infer_truncated_base64", "POST", "/infer",
                   json{{"image_png_b64", truncated}, {"prompt", prompt}}.dump(), 400, "",
                   error_types.dump(), false});
  cases.push_back({"infer_missing_image", "POST", "/infer", json{{"prompt", prompt}}.dump(), 400,
                   "", error_types.dump(), false});
  cases.push_back({"embed_empty_text", "POST", "/embed", encode_embed_request(""), 400, "",
                   error_types.dump(), false});
  return cases;
}

std::vector<ConformanceResult> run_conformance(std::string_view url,
                                               const std::vector<ConformanceCase>& cases,
                                               double timeout_seconds) {
  const Endpoint endpoint = parse_http_endpoint(url);
  std::vector<ConformanceResult> results;
  std::string previous_body;
  for (const auto& c : cases) {
    ConformanceResult r{c.name, false, ""};
    httplib::Client client(endpoint.host, endpoint.port);
    const auto seconds = static_cast<time_t>(timeout_seconds);
    client.set_connection_timeout(seconds, 0);
    client.set_read_timeout(seconds, 0);
    httplib::Result result = c.method == "GET"
                                 ? client.Get(c.path)
                                 : client.Post(c.path, c.body, "application/json");
    if (!result) {
      r.detail = "transport: " + httplib::to_string(result.error());
      results.push_back(std::move(r));
      continue;
    }
    std::ostringstream detail;
    bool ok = result->status == c.expect_status;
    if (!ok) detail << "status " << result->status << " != " << c.expect_status << "; ";
    const json body = json::parse(result->body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      ok = false;
      detail << "body is not a JSON object; ";
    } else {
      if (!c.expect_body_json.empty()) {
        const json expected = json::parse(c.expect_body_json);
        for (const auto& [key, value] : expected.items()) {
          if (!body.contains(key) || !values_equal(body[key], value)) {
            ok = false;
            detail << "field '" << key << "' differs; ";
          }
        }
      }
      if (!c.expect_types_json.empty()) {
        const json types = json::parse(c.expect_types_json);
        for (const auto& [key, type] : types.items()) {
          if (!body.contains(key) || !type_matches(body[key], type.get<std::string>())) {
            ok = false;
            detail << "field '" << key << "' is not " << type.get<std::string>() << "; ";
          }
        }
      }
      if (c.expect_same_as_previous && result->body != previous_body) {
        const json prev = json::parse(previous_body, nullptr, false);
        if (prev.is_discarded() || !values_equal(prev, body)) {
          ok = false;
          detail << "reply differs from the previous identical request; ";
        }
      }
    }
    previous_body = result->body;
    r.passed = ok;
    r.detail = detail.str();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace advxfer
