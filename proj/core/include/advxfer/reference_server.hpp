#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "advxfer/oracle.hpp"

namespace advxfer {

/// In-process HTTP server speaking the oracle wire protocol with a scripted
/// oracle and embedder behind it. Used by the conformance suite, the tests
/// and `advxfer serve`.
class ReferenceServer {
 public:
  struct Options {
    std::string oracle_endpoint = "scripted:patch-sensitive";
    EmbeddingRef embedding;
    std::string name = "advxfer-reference";
    std::string version = "1";
    std::size_t max_request_bytes = 16 << 20;  // larger bodies get 413
  };

  explicit ReferenceServer(Options options);
  ~ReferenceServer();
  ReferenceServer(const ReferenceServer&) = delete;
  ReferenceServer& operator=(const ReferenceServer&) = delete;

  /// Binds host:port (port 0 picks a free port) and serves on a background
  /// thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks the calling thread serving requests until stop().
  void listen(const std::string& host, int port);
  void stop();

  int port() const noexcept { return port_; }
  std::string url() const;

  /// The next `count` /infer and /embed requests answer `status` (e.g. 503).
  void inject_failures(int status, int count);
  std::size_t requests() const noexcept { return requests_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace advxfer
