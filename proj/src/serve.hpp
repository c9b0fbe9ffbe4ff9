#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

namespace azoo {

/// Read-only static file server. GET/HEAD serve files under the root with
/// extension-based content types; PUT, POST, PATCH and DELETE answer 405.
class StaticServer {
 public:
  /// Binds immediately; port 0 picks an ephemeral port. Throws Error(Io) when
  /// the root is not a directory or the port cannot be bound.
  StaticServer(const std::filesystem::path& root, const std::string& host = "127.0.0.1", int port = 0);
  ~StaticServer();

  StaticServer(const StaticServer&) = delete;
  StaticServer& operator=(const StaticServer&) = delete;

  int port() const noexcept { return port_; }

  /// Blocks until stop() is called from another thread.
  void run();
  /// Serves on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread worker_;
  int port_ = 0;
};

}  // namespace azoo
