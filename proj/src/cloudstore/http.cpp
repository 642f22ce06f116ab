#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ecg/cloudstore.hpp"

namespace ecg::cloudstore {
namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void reply_error(httplib::Response& res, const Error& e) {
  int status = 500;
  switch (e.code()) {
    case ErrorCode::kInvalidCredentials:
    case ErrorCode::kUnauthorized: status = 401; break;
    case ErrorCode::kNotFound: status = 404; break;
    case ErrorCode::kValidationError: status = 422; break;
    default: break;
  }
  // what() carries a "Code: " prefix; the code travels in its own field.
  const std::string name(to_string(e.code()));
  std::string message = e.what();
  if (message.rfind(name + ": ", 0) == 0) message.erase(0, name.size() + 2);
  reply(res, status, {{"error", name}, {"message", message}});
}

std::string bearer(const httplib::Request& req) {
  const std::string header = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (header.size() <= prefix.size() || header.compare(0, prefix.size(), prefix) != 0) return {};
  return header.substr(prefix.size());
}

// Runs a handler, turning module errors into their HTTP statuses.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    reply_error(res, e);
  } catch (const std::exception& e) {
    spdlog::error("request failed: {}", e.what());
    reply(res, 500, {{"error", "InternalError"}, {"message", "internal server error"}});
  }
}

[[noreturn]] void raise_for(const httplib::Result& r, const char* what) {
  if (!r) {
    throw Error(ErrorCode::kNetworkError, std::string(what) + ": " + httplib::to_string(r.error()));
  }
  std::string message = "HTTP " + std::to_string(r->status);
  const json body = json::parse(r->body, nullptr, false);
  if (body.is_object() && body.contains("message") && body["message"].is_string()) {
    message = body["message"].get<std::string>();
  }
  switch (r->status) {
    case 401: throw Error(ErrorCode::kUnauthorized, message);
    case 404: throw Error(ErrorCode::kNotFound, message);
    case 422: throw Error(ErrorCode::kValidationError, message);
    default: throw Error(ErrorCode::kNetworkError, std::string(what) + ": " + message);
  }
}

json parse_body(const httplib::Result& r, const char* what) {
  json body = json::parse(r->body, nullptr, false);
  if (body.is_discarded()) throw Error(ErrorCode::kNetworkError, std::string(what) + ": malformed response body");
  return body;
}

httplib::Headers auth_headers(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }

}  // namespace

struct HttpServer::Impl {
  explicit Impl(TraceService& s) : service(s) {}
  TraceService& service;
  httplib::Server server;
  std::thread thread;
};

HttpServer::HttpServer(TraceService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  TraceService& svc = impl_->service;

  srv.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::info("{} {} -> {}", req.method, req.path, res.status);
  });

  srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"status", "ok"}}); });

  srv.Post("/api/login", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body, nullptr, false);
      if (!body.is_object() || !body.contains("username") || !body.contains("password") ||
          !body["username"].is_string() || !body["password"].is_string()) {
        reply(res, 400, {{"error", "BadRequest"}, {"message", "expected {username, password}"}});
        return;
      }
      const SessionToken t = svc.login(body["username"].get<std::string>(), body["password"].get<std::string>());
      reply(res, 200, {{"token", t.token}, {"expires_at", format_timestamp(t.expires_at)}});
    });
  });

  srv.Post("/api/traces", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      // Malformed JSON arrives as a discarded value and is rejected after
      // the token check.
      const json body = json::parse(req.body, nullptr, false);
      reply(res, 201, {{"id", svc.store(bearer(req), body)}});
    });
  });

  srv.Get("/api/traces", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<std::string> filter;
      if (req.has_param("patient_ref")) filter = req.get_param_value("patient_ref");
      json summaries = json::array();
      for (const auto& s : svc.list(bearer(req), filter)) summaries.push_back(to_json(s));
      reply(res, 200, {{"summaries", std::move(summaries)}});
    });
  });

  srv.Get(R"(/api/traces/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::string body = svc.fetch(bearer(req), req.matches[1].str());
      res.status = 200;
      res.set_content(std::move(body), kJson);
    });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int bound = srv.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kNetworkError, "cannot bind " + host);
    return bound;
  }
  if (!srv.bind_to_port(host, port)) {
    throw Error(ErrorCode::kNetworkError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

Client::Client(std::string host, int port, std::chrono::seconds timeout)
    : host_(std::move(host)), port_(port), timeout_(timeout) {}

namespace {

httplib::Client connect(const std::string& host, int port, std::chrono::seconds timeout) {
  httplib::Client cli(host, port);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  return cli;
}

}  // namespace

bool Client::health() {
  auto cli = connect(host_, port_, timeout_);
  auto r = cli.Get("/api/health");
  return r && r->status == 200;
}

SessionToken Client::login(const std::string& username, const std::string& password) {
  auto cli = connect(host_, port_, timeout_);
  const json body = {{"username", username}, {"password", password}};
  auto r = cli.Post("/api/login", body.dump(), kJson);
  if (r && r->status == 401) throw Error(ErrorCode::kInvalidCredentials, "invalid username or password");
  if (!r || r->status != 200) raise_for(r, "login");
  const json j = parse_body(r, "login");
  try {
    return {j.at("token").get<std::string>(), username, parse_timestamp(j.at("expires_at").get<std::string>())};
  } catch (const json::exception&) {
    throw Error(ErrorCode::kNetworkError, "login: malformed response body");
  }
}

std::string Client::upload(const std::string& token, const json& record) {
  auto cli = connect(host_, port_, timeout_);
  auto r = cli.Post("/api/traces", auth_headers(token), record.dump(), kJson);
  if (!r || r->status != 201) raise_for(r, "upload");
  const json j = parse_body(r, "upload");
  if (!j.contains("id") || !j["id"].is_string()) throw Error(ErrorCode::kNetworkError, "upload: malformed response");
  return j["id"].get<std::string>();
}

std::vector<TraceSummary> Client::list(const std::string& token, const std::optional<std::string>& patient_ref) {
  auto cli = connect(host_, port_, timeout_);
  httplib::Params params;
  if (patient_ref) params.emplace("patient_ref", *patient_ref);
  auto r = cli.Get("/api/traces", params, auth_headers(token));
  if (!r || r->status != 200) raise_for(r, "list");
  const json j = parse_body(r, "list");
  std::vector<TraceSummary> out;
  if (!j.contains("summaries") || !j["summaries"].is_array()) {
    throw Error(ErrorCode::kNetworkError, "list: malformed response");
  }
  for (const json& s : j["summaries"]) out.push_back(summary_from_json(s));
  return out;
}

std::string Client::fetch(const std::string& token, const std::string& id) {
  auto cli = connect(host_, port_, timeout_);
  auto r = cli.Get("/api/traces/" + httplib::detail::encode_url(id), auth_headers(token));
  if (!r || r->status != 200) raise_for(r, "fetch");
  return r->body;
}

}  // namespace ecg::cloudstore
