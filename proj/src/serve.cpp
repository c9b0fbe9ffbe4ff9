#include "serve.hpp"

#include <httplib.h>

#include "error.hpp"

namespace azoo {

struct StaticServer::Impl {
  httplib::Server server;
};

StaticServer::StaticServer(const std::filesystem::path& root, const std::string& host, int port)
    : impl_(std::make_unique<Impl>()) {
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec)) fail(ErrorKind::Io, "serve root is not a directory: " + root.string());
  auto& s = impl_->server;
  if (!s.set_mount_point("/", root.string())) fail(ErrorKind::Io, "cannot serve " + root.string());
  const auto reject = [](const httplib::Request&, httplib::Response& res) {
    res.status = 405;
    res.set_header("Allow", "GET, HEAD");
    res.set_content("read-only server\n", "text/plain");
  };
  s.Post(".*", reject);
  s.Put(".*", reject);
  s.Patch(".*", reject);
  s.Delete(".*", reject);
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) res.set_content("not found\n", "text/plain");
  });
  // The library default sets SO_REUSEPORT, which would let a second server
  // share a busy port silently.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (port == 0) {
    port_ = s.bind_to_any_port(host);
    if (port_ <= 0) fail(ErrorKind::Io, "cannot bind an ephemeral port on " + host);
  } else {
    if (!s.bind_to_port(host, port)) fail(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
    port_ = port;
  }
}

StaticServer::~StaticServer() { stop(); }

void StaticServer::run() { impl_->server.listen_after_bind(); }

void StaticServer::start() {
  if (worker_.joinable()) return;
  worker_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void StaticServer::stop() {
  impl_->server.stop();
  if (worker_.joinable()) worker_.join();
}

}  // namespace azoo
