#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "kara/engine.hpp"

namespace kara {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string storage = "kara-data";
  int threads = 8;
  EngineSettings engine;
};

/// Reads {host, port, storage, threads, t, exact_bound, solver_threads,
/// solve_timeout_ms, region}. `region` is either an inline region object or
/// a path to one, resolved relative to the config file.
ServerConfig parse_server_config(const json& j, const std::filesystem::path& base_dir = ".");
/// Loads the file when given, then applies KARA_PORT / KARA_STORAGE.
ServerConfig load_server_config(const std::optional<std::filesystem::path>& path);

/// HTTP status for an error code.
int http_status(const std::string& code);

/// The HTTP front end. Handlers run on a bounded thread pool.
class HttpServer {
public:
  HttpServer(Engine& engine, int threads = 8);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and returns the port; port 0 picks a free one. Throws IoError.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kara
