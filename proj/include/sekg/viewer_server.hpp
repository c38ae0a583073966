#pragma once

// Static file server for the viewer bundle and the graph document.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace sekg {

/// Serves the graph document at `/graph.json` and, when given, the viewer
/// bundle directory at `/`. The document is validated before serving and
/// re-read on every request.
class ViewerServer {
 public:
  /// Throws ConfigError for a missing file or directory and ParseError for an
  /// invalid graph document.
  ViewerServer(std::filesystem::path graph_document, std::optional<std::filesystem::path> viewer_dir);
  ~ViewerServer();

  ViewerServer(const ViewerServer&) = delete;
  ViewerServer& operator=(const ViewerServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port. Throws ConfigError if binding fails.
  int start(const std::string& host, int port);

  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  std::filesystem::path graph_;
  std::optional<std::filesystem::path> viewer_dir_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace sekg
