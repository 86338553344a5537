#include "advxfer/reference_server.hpp"

#include <mutex>

#include "advxfer/error.hpp"
#include "advxfer/http.hpp"
#include "advxfer/image_io.hpp"
#include "advxfer/scripted.hpp"
#include "httplib.h"
#include "json.hpp"

namespace advxfer {

using nlohmann::json;

struct ReferenceServer::Impl {
  Options options;
  httplib::Server server;
  std::unique_ptr<ScriptedOracle> oracle;
  std::unique_ptr<Embedder> embedder;
  std::mutex fault_mutex;
  int fault_status = 0;
  int fault_count = 0;

  bool take_fault(httplib::Response& res) {
    std::lock_guard lock(fault_mutex);
    if (fault_count <= 0) return false;
    --fault_count;
    res.status = fault_status;
    res.set_content(json{{"error", "injected failure"}}.dump(), "application/json");
    return true;
  }
};

namespace {

void reply_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

ReferenceServer::ReferenceServer(Options options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->oracle =
      std::make_unique<ScriptedOracle>(parse_scripted_endpoint(impl_->options.oracle_endpoint));
  impl_->embedder = make_scripted_embedder(impl_->options.embedding);
  Impl& s = *impl_;

  s.server.Get("/health", [&s](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"name", s.options.name}, {"version", s.options.version}}.dump(),
                    "application/json");
  });

  s.server.Post("/infer", [this, &s](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    if (s.take_fault(res)) return;
    if (req.body.size() > s.options.max_request_bytes) {
      return reply_error(res, 413, "request body exceeds the size limit");
    }
    try {
      const json body = json::parse(req.body);
      if (!body.contains("image_png_b64") || !body["image_png_b64"].is_string()) {
        return reply_error(res, 400, "missing string field image_png_b64");
      }
      if (body.contains("prompt") && !body["prompt"].is_string()) {
        return reply_error(res, 400, "prompt must be a string");
      }
      const auto png = base64_decode(body["image_png_b64"].get<std::string>());
      const Frame frame = decode_png(png);
      res.set_content(json{{"text", s.oracle->respond(frame)}}.dump(), "application/json");
    } catch (const json::exception& e) {
      reply_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const Error& e) {
      reply_error(res, 400, e.what());
    }
  });

  s.server.Post("/embed", [this, &s](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    if (s.take_fault(res)) return;
    try {
      const json body = json::parse(req.body);
      if (!body.contains("text") || !body["text"].is_string()) {
        return reply_error(res, 400, "missing string field text");
      }
      const auto text = body["text"].get<std::string>();
      if (text.empty()) return reply_error(res, 400, "text is empty");
      const auto v = s.embedder->embed(text);
      res.set_content(json{{"vector", v}, {"dim", s.embedder->dimension()}}.dump(),
                      "application/json");
    } catch (const json::exception& e) {
      reply_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const Error& e) {
      reply_error(res, 400, e.what());
    }
  });
}

ReferenceServer::~ReferenceServer() { stop(); }

int ReferenceServer::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) fail(ErrorKind::kTransport, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void ReferenceServer::listen(const std::string& host, int port) {
  port_ = port;
  if (!impl_->server.listen(host, port)) {
    fail(ErrorKind::kTransport, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void ReferenceServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string ReferenceServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

void ReferenceServer::inject_failures(int status, int count) {
  std::lock_guard lock(impl_->fault_mutex);
  impl_->fault_status = status;
  impl_->fault_count = count;
}

}  // namespace advxfer
