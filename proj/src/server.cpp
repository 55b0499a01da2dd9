#include "kara/server.hpp"

#include <cstdlib>
#include <fstream>

#include "httplib.h"

namespace kara {

namespace fs = std::filesystem;

ServerConfig parse_server_config(const json& j, const fs::path& base_dir) {
  ServerConfig c;
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.storage = j.value("storage", c.storage);
  c.threads = j.value("threads", c.threads);
  c.engine.t = j.value("t", c.engine.t);
  c.engine.exact_bound = j.value("exact_bound", c.engine.exact_bound);
  c.engine.solver_threads = j.value("solver_threads", c.engine.solver_threads);
  c.engine.solve_timeout = std::chrono::milliseconds(j.value("solve_timeout_ms", c.engine.solve_timeout.count()));
  if (j.contains("region")) {
    if (j["region"].is_string()) {
      fs::path p = j["region"].get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      std::ifstream in(p);
      if (!in) throw IoError("cannot read region file", {{"path", p.string()}});
      try {
        c.engine.region = json::parse(in).get<LikelihoodRegion>();
      } catch (const json::exception& e) {
        throw ParseError("region file is malformed", {{"path", p.string()}, {"reason", e.what()}});
      }
    } else {
      c.engine.region = j["region"].get<LikelihoodRegion>();
    }
  }
  validate_region(c.engine.region);
  if (!(c.engine.t > 0.0 && c.engine.t <= 1.0)) throw ValidationFailed("t must lie in (0,1]", {{"t", c.engine.t}});
  if (c.port < 0 || c.port > 65535) throw ValidationFailed("port out of range", {{"port", c.port}});
  if (c.threads < 1) c.threads = 1;
  return c;
}

ServerConfig load_server_config(const std::optional<fs::path>& path) {
  ServerConfig c;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot read config file", {{"path", path->string()}});
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError("config file is not valid JSON", {{"path", path->string()}, {"byte", e.byte}});
    }
    c = parse_server_config(j, path->parent_path().empty() ? fs::path(".") : path->parent_path());
  }
  if (const char* port = std::getenv("KARA_PORT"); port && *port) {
    try {
      c.port = std::stoi(port);
    } catch (const std::exception&) {
      throw ValidationFailed("KARA_PORT is not a number", {{"KARA_PORT", port}});
    }
  }
  if (const char* storage = std::getenv("KARA_STORAGE"); storage && *storage) c.storage = storage;
  return c;
}

int http_status(const std::string& code) {
  if (code == "not_found") return 404;
  if (code == "contradiction" || code == "version_conflict" || code == "already_exists" ||
      code == "immutable_record")
    return 409;
  if (code == "infeasible_chain" || code == "size_limit_exceeded" || code == "pos_out_of_region") return 422;
  if (code == "cancelled") return 503;
  if (code == "io_error") return 500;
  return 400;
}

struct HttpServer::Impl {
  explicit Impl(Engine& e) : engine(e) {}
  Engine& engine;
  httplib::Server server;
  std::stop_source shutdown;
};

namespace {

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ParseError("request body is not valid JSON", {{"byte", e.byte}});
  }
}

std::string param(const httplib::Request& req, const char* name) {
  return req.has_param(name) ? req.get_param_value(name) : std::string{};
}

double number_param(const std::string& text, const char* name) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(name);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(std::string("query parameter ") + name + " is not a number", {{name, text}});
  }
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class F>
httplib::Server::Handler handle(F f, int ok_status = 200) {
  return [f, ok_status](const httplib::Request& req, httplib::Response& res) {
    try {
      send(res, ok_status, f(req));
    } catch (const Error& e) {
      send(res, http_status(e.code()), e.to_json());
    } catch (const json::exception& e) {
      send(res, 400, InvalidArgument(std::string("malformed request: ") + e.what()).to_json());
    } catch (const std::exception& e) {
      send(res, 500, Error("internal", e.what()).to_json());
    }
  };
}

}  // namespace

HttpServer::HttpServer(Engine& engine, int threads) : impl_(std::make_unique<Impl>(engine)) {
  auto& s = impl_->server;
  auto& e = impl_->engine;
  const auto n = static_cast<std::size_t>(std::max(1, threads));
  s.new_task_queue = [n] { return new httplib::ThreadPool(n); };
  const std::stop_token stop = impl_->shutdown.get_token();
  const std::string ws = "/workspaces/([^/]+)";

  s.Get("/health", handle([](const auto&) { return json{{"status", "ok"}}; }));
  s.Get("/workspaces", handle([&e](const auto&) { return e.list_workspaces(); }));
  s.Post("/workspaces", handle([&e](const auto& req) { return e.create_workspace(body_of(req)); }, 201));
  s.Get(ws, handle([&e](const auto& req) { return e.get_workspace(req.matches[1]); }));
  s.Put(ws + "/questionnaire",
        handle([&e](const auto& req) { return e.put_questionnaire(req.matches[1], body_of(req)); }));
  s.Post(ws + "/import", handle([&e](const auto& req) { return e.import_records(req.matches[1], body_of(req)); }));
  s.Put(ws + "/threshold", handle([&e](const auto& req) { return e.set_threshold(req.matches[1], body_of(req)); }));
  s.Post(ws + "/characterizations",
         handle([&e](const auto& req) { return e.add_characterizations(req.matches[1], body_of(req)); }));
  s.Post(ws + "/characterizations/([^/]+)/status",
         handle([&e](const auto& req) { return e.set_status(req.matches[1], req.matches[2], body_of(req)); }));
  s.Get(ws + "/characterizations/([^/]+)/similar", handle([&e](const auto& req) {
          const auto k = req.has_param("k") ? number_param(req.get_param_value("k"), "k") : 5.0;
          if (k < 0) throw InvalidArgument("k must be non-negative");
          return e.similar(req.matches[1], req.matches[2], static_cast<std::size_t>(k));
        }));
  s.Post(ws + "/experts", handle([&e](const auto& req) { return e.add_expert(req.matches[1], body_of(req)); }));
  s.Get(ws + "/experts/([^/]+)/comparisons", handle([&e](const auto& req) {
          return e.comparisons(req.matches[1], req.matches[2], param(req, "risk_factor"));
        }));
  s.Post(ws + "/experts/([^/]+)/comparisons", handle([&e](const auto& req) {
           return e.add_comparison(req.matches[1], req.matches[2], body_of(req));
         }));
  s.Delete(ws + "/experts/([^/]+)/comparisons/([^/]+)", handle([&e](const auto& req) {
             return e.remove_comparison(req.matches[1], req.matches[2], req.matches[3], body_of(req));
           }));
  s.Get(ws + "/experts/([^/]+)/lok-scale", handle([&e](const auto& req) {
          return e.expert_scale(req.matches[1], req.matches[2], param(req, "risk_factor"));
        }));
  s.Get(ws + "/reference-lok-scale",
        handle([&e](const auto& req) { return e.reference_scale(req.matches[1], param(req, "risk_factor")); }));
  s.Post(ws + "/consensus/solve", handle([&e, stop](const auto& req) {
           const auto body = body_of(req);
           auto rf = body.value("risk_factor", param(req, "risk_factor"));
           return e.solve_consensus(req.matches[1], rf, stop);
         }));
  s.Get(ws + "/global-lok-scale", handle([&e, stop](const auto& req) {
          return e.global_scale(req.matches[1], param(req, "risk_factor"), stop);
        }));
  s.Get(ws + "/pos/region", handle([&e](const auto& req) {
          std::optional<double> lok;
          if (req.has_param("lok")) lok = number_param(req.get_param_value("lok"), "lok");
          return e.pos_region(req.matches[1], lok);
        }));
  s.Put(ws + "/pos/region", handle([&e](const auto& req) { return e.set_region(req.matches[1], body_of(req)); }));
  s.Post(ws + "/pos/entries", handle([&e](const auto& req) { return e.add_pos_entry(req.matches[1], body_of(req)); }));
  s.Post(ws + "/pos/consensus",
         handle([&e](const auto& req) { return e.pos_consensus(req.matches[1], body_of(req)); }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send(res, res.status, NotFound("no such endpoint").to_json());
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw IoError("cannot bind", {{"host", host}});
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("port is busy or not bindable", {{"host", host}, {"port", port}});
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  impl_->shutdown.request_stop();
  impl_->server.stop();
}

}  // namespace kara
