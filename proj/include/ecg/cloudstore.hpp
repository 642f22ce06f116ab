#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ecg/analysis.hpp"
#include "ecg/extraction.hpp"

namespace ecg::cloudstore {

using Clock = std::chrono::system_clock;

/// ISO 8601 UTC with millisecond precision, e.g. 2024-03-01T12:00:00.000Z.
std::string format_timestamp(Clock::time_point t);
/// Throws kSchemaError for anything but the format above.
Clock::time_point parse_timestamp(const std::string& text);

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

inline constexpr int kRecordSchemaVersion = 1;

struct TraceRecord {
  std::string id;  // empty before the store assigns one
  std::string patient_ref;
  std::string lead_label;
  std::string created_at;
  extraction::CalibratedSignal signal;
  std::optional<analysis::AnalysisReport> analysis;
  std::optional<std::string> source_image_ref;
};

nlohmann::json to_json(const TraceRecord& record);
/// Throws kSchemaError for an unknown schema_version or a missing field.
TraceRecord record_from_json(const nlohmann::json& j);

/// Canonical form: sorted keys, shortest round-trip numbers, one line.
std::string serialize_trace(const TraceRecord& record);
TraceRecord deserialize_trace(std::string_view bytes);

/// Canonical re-encoding of any JSON text (sorted keys, single line).
std::string canonicalize(std::string_view json_text);

bool operator==(const TraceRecord& a, const TraceRecord& b);

struct TraceSummary {
  std::string id;
  std::string patient_ref;
  std::string lead_label;
  std::string created_at;
  std::optional<double> heart_rate_bpm;
  friend bool operator==(const TraceSummary&, const TraceSummary&) = default;
};

nlohmann::json to_json(const TraceSummary& s);
TraceSummary summary_from_json(const nlohmann::json& j);
TraceSummary summarize(const TraceRecord& record);

// ---------------------------------------------------------------------------
// Credentials and sessions
// ---------------------------------------------------------------------------

/// Argon2id cost. The defaults are libsodium's interactive limits.
struct HashParams {
  std::uint64_t opslimit;
  std::size_t memlimit;
  static HashParams interactive();
  static HashParams minimal();  // fastest accepted setting, for tests
};

struct Credential {
  std::string username;
  std::string salt;           // base64
  std::string password_hash;  // base64 Argon2id digest
  HashParams params;
};

/// Username to salted password digest; persisted as JSON with mode 0600.
class CredentialStore {
 public:
  explicit CredentialStore(HashParams params = HashParams::interactive());
  CredentialStore(CredentialStore&& other) noexcept;

  /// Loads an existing file; a missing file yields an empty store.
  static CredentialStore load(const std::filesystem::path& path,
                              HashParams params = HashParams::interactive());
  void save(const std::filesystem::path& path) const;

  /// Adds or replaces a user. Throws kInvalidParams for an empty name or password.
  void add_user(const std::string& username, const std::string& password);
  /// Constant-time digest comparison; unknown users cost the same as known ones.
  bool verify(const std::string& username, const std::string& password) const;
  bool contains(const std::string& username) const;
  std::size_t size() const;

 private:
  HashParams params_;
  mutable std::mutex mutex_;
  std::map<std::string, Credential> users_;
};

struct SessionToken {
  std::string token;  // 128 random bits, base64url without padding
  std::string username;
  Clock::time_point expires_at;
};

class SessionManager {
 public:
  using Now = std::function<Clock::time_point()>;
  explicit SessionManager(std::chrono::seconds ttl = std::chrono::hours(24), Now now = Clock::now);

  SessionToken issue(const std::string& username);
  /// Username for a live token; expired tokens are dropped.
  std::optional<std::string> validate(const std::string& token);

 private:
  std::chrono::seconds ttl_;
  Now now_;
  std::mutex mutex_;
  std::map<std::string, SessionToken> sessions_;
};

// ---------------------------------------------------------------------------
// Storage
// ---------------------------------------------------------------------------

/// One canonical JSON file per record under records/, plus an append-only
/// index.jsonl of summaries. Record files are written to a temporary name,
/// flushed and renamed, so readers never see partial records. Ids are
/// zero-padded decimals allocated past the largest id ever seen.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path dir);

  /// Assigns the id, persists and returns the stored record.
  TraceRecord store(TraceRecord record);
  /// Canonical bytes as persisted. Throws kNotFound.
  std::string fetch_bytes(const std::string& id) const;
  TraceRecord fetch(const std::string& id) const;
  /// Newest first (created_at, then id, descending).
  std::vector<TraceSummary> list(const std::optional<std::string>& patient_ref = std::nullopt) const;
  std::size_t size() const;

 private:
  void load();
  std::filesystem::path record_path(const std::string& id) const;

  std::filesystem::path dir_;
  std::mutex write_mutex_;
  mutable std::shared_mutex summaries_mutex_;
  std::vector<TraceSummary> summaries_;
  std::uint64_t next_id_ = 1;
};

std::string format_id(std::uint64_t n);

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

struct ServiceConfig {
  std::filesystem::path data_dir = "ehealth-data";
  std::filesystem::path credentials_path;  // data_dir/credentials.json when empty
  std::chrono::seconds token_ttl = std::chrono::hours(24);
  int port = 8080;
  std::string host = "127.0.0.1";
  HashParams hash_params = HashParams::interactive();
  analysis::AnalysisConfig analysis;

  std::filesystem::path resolved_credentials() const;
  /// EHEALTH_PORT, EHEALTH_DATA_DIR, EHEALTH_TOKEN_TTL_HOURS, EHEALTH_CREDENTIALS
  /// override the given values. Throws kInvalidParams for malformed values.
  static ServiceConfig from_env(ServiceConfig base);
};

/// Transport-independent request handling. Every operation except login
/// checks the token before touching storage.
class TraceService {
 public:
  explicit TraceService(ServiceConfig config, SessionManager::Now now = Clock::now);

  /// Throws kInvalidCredentials.
  SessionToken login(const std::string& username, const std::string& password);
  /// Body is a record without id. Missing analysis is computed here.
  /// Throws kUnauthorized, kValidationError.
  std::string store(const std::string& token, const nlohmann::json& body);
  std::vector<TraceSummary> list(const std::string& token, const std::optional<std::string>& patient_ref);
  /// Throws kUnauthorized, kNotFound.
  std::string fetch(const std::string& token, const std::string& id);

  const ServiceConfig& config() const { return config_; }

 private:
  std::string authorize(const std::string& token);

  ServiceConfig config_;
  SessionManager::Now now_;
  std::mutex reload_mutex_;
  std::shared_ptr<const CredentialStore> credentials_;
  std::filesystem::file_time_type credentials_stamp_{};
  SessionManager sessions_;
  RecordStore records_;
};

/// HTTP/1.1 JSON front end over TraceService.
class HttpServer {
 public:
  explicit HttpServer(TraceService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  /// bind() + listen() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocking client. Maps HTTP statuses to kInvalidCredentials (login 401),
/// kUnauthorized (401), kNotFound (404), kValidationError (422) and
/// connection failures to kNetworkError.
class Client {
 public:
  explicit Client(std::string host, int port, std::chrono::seconds timeout = std::chrono::seconds(30));

  bool health();
  SessionToken login(const std::string& username, const std::string& password);
  std::string upload(const std::string& token, const nlohmann::json& record);
  std::vector<TraceSummary> list(const std::string& token, const std::optional<std::string>& patient_ref = {});
  /// Response body exactly as sent by the server.
  std::string fetch(const std::string& token, const std::string& id);

 private:
  std::string host_;
  int port_;
  std::chrono::seconds timeout_;
};

}  // namespace ecg::cloudstore
