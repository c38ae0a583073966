#include "sekg/viewer_server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sekg/error.hpp"
#include "sekg/graph.hpp"
#include "sekg/log.hpp"
#include "sekg/text.hpp"

namespace sekg {

namespace {

constexpr const char* kFallbackIndex =
    "<!doctype html><meta charset=\"utf-8\"><title>sekg</title>"
    "<p>No viewer bundle is configured. The graph document is at <a href=\"/graph.json\">/graph.json</a>.</p>\n";

}  // namespace

ViewerServer::ViewerServer(std::filesystem::path graph_document, std::optional<std::filesystem::path> viewer_dir)
    : graph_(std::move(graph_document)), viewer_dir_(std::move(viewer_dir)), server_(std::make_unique<httplib::Server>()) {
  if (!std::filesystem::is_regular_file(graph_)) throw ConfigError("graph document not found: " + graph_.string());
  if (viewer_dir_ && !std::filesystem::is_directory(*viewer_dir_)) {
    throw ConfigError("viewer directory not found: " + viewer_dir_->string());
  }
  try {
    parse_viewer_document(nlohmann::json::parse(read_file(graph_.string())));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(graph_.filename().string() + ": " + e.what());
  }

  // SO_REUSEADDR only: a port already in use must fail to bind
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  server_->Get("/graph.json", [this](const httplib::Request&, httplib::Response& res) {
    try {
      res.set_content(read_file(graph_.string()), "application/json");
    } catch (const Error& e) {
      res.status = 500;
      res.set_content(e.what(), "text/plain");
    }
  });
  if (viewer_dir_) {
    server_->set_mount_point("/", viewer_dir_->string());
  } else {
    server_->Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kFallbackIndex, "text/html");
    });
  }
}

ViewerServer::~ViewerServer() { stop(); }

int ViewerServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  log::info("serve", "listening", {{"host", host}, {"port", std::to_string(bound)}});
  return bound;
}

void ViewerServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void ViewerServer::stop() {
  if (server_) server_->stop();
  wait();
}

}  // namespace sekg
