#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cloudstore/fs_util.hpp"
#include "ecg/cloudstore.hpp"

namespace ecg::cloudstore {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kIdWidth = 8;

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 20 && std::all_of(id.begin(), id.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Newest first; ids compare numerically via (length, text).
bool newer(const TraceSummary& a, const TraceSummary& b) {
  if (a.created_at != b.created_at) return a.created_at > b.created_at;
  if (a.id.size() != b.id.size()) return a.id.size() > b.id.size();
  return a.id > b.id;
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

long parse_positive(const std::string& text, const char* name) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || v <= 0) {
    throw Error(ErrorCode::kInvalidParams, std::string(name) + " must be a positive integer");
  }
  return v;
}

}  // namespace

std::string format_id(std::uint64_t n) {
  std::string digits = std::to_string(n);
  if (digits.size() < kIdWidth) digits.insert(0, kIdWidth - digits.size(), '0');
  return digits;
}

RecordStore::RecordStore(fs::path dir) : dir_(std::move(dir)) { load(); }

fs::path RecordStore::record_path(const std::string& id) const { return dir_ / "records" / (id + ".json"); }

void RecordStore::load() {
  std::error_code ec;
  fs::create_directories(dir_ / "records", ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create data directory " + dir_.string() + ": " + ec.message());

  std::set<std::string> indexed;
  std::uint64_t max_id = 0;
  auto note_id = [&](const std::string& id) { max_id = std::max<std::uint64_t>(max_id, std::stoull(id)); };

  const fs::path index = dir_ / "index.jsonl";
  if (fs::exists(index)) {
    std::istringstream lines(detail::read_text(index));
    std::string line;
    while (std::getline(lines, line)) {
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;  // torn final line after a crash
      try {
        TraceSummary s = summary_from_json(j);
        if (!valid_id(s.id) || !indexed.insert(s.id).second) continue;
        note_id(s.id);
        summaries_.push_back(std::move(s));
      } catch (const Error&) {
        continue;
      }
    }
  }

  // Records whose index line never made it to disk.
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir_ / "records")) {
    const fs::path& p = entry.path();
    if (p.filename().string().find(".tmp.") != std::string::npos) {
      fs::remove(p, ec);
      continue;
    }
    if (p.extension() == ".json" && valid_id(p.stem().string())) files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    const std::string id = p.stem().string();
    note_id(id);
    if (indexed.count(id)) continue;
    TraceSummary s = summarize(deserialize_trace(detail::read_text(p)));
    detail::append_line(index, to_json(s).dump());
    summaries_.push_back(std::move(s));
  }
  next_id_ = max_id + 1;
}

TraceRecord RecordStore::store(TraceRecord record) {
  validate(record.signal);
  std::lock_guard write_lock(write_mutex_);
  record.id = format_id(next_id_);
  detail::atomic_write(record_path(record.id), serialize_trace(record));
  ++next_id_;
  const TraceSummary summary = summarize(record);
  detail::append_line(dir_ / "index.jsonl", to_json(summary).dump());
  std::unique_lock lock(summaries_mutex_);
  summaries_.push_back(summary);
  return record;
}

std::string RecordStore::fetch_bytes(const std::string& id) const {
  if (!valid_id(id)) throw Error(ErrorCode::kNotFound, "no trace with id '" + id + "'");
  const fs::path p = record_path(id);
  if (!fs::exists(p)) throw Error(ErrorCode::kNotFound, "no trace with id '" + id + "'");
  return detail::read_text(p);
}

TraceRecord RecordStore::fetch(const std::string& id) const { return deserialize_trace(fetch_bytes(id)); }

std::vector<TraceSummary> RecordStore::list(const std::optional<std::string>& patient_ref) const {
  std::vector<TraceSummary> out;
  {
    std::shared_lock lock(summaries_mutex_);
    for (const auto& s : summaries_) {
      if (!patient_ref || s.patient_ref == *patient_ref) out.push_back(s);
    }
  }
  std::sort(out.begin(), out.end(), newer);
  return out;
}

std::size_t RecordStore::size() const {
  std::shared_lock lock(summaries_mutex_);
  return summaries_.size();
}

fs::path ServiceConfig::resolved_credentials() const {
  return credentials_path.empty() ? data_dir / "credentials.json" : credentials_path;
}

ServiceConfig ServiceConfig::from_env(ServiceConfig base) {
  if (auto v = env("EHEALTH_PORT")) {
    const long port = parse_positive(*v, "EHEALTH_PORT");
    if (port > 65535) throw Error(ErrorCode::kInvalidParams, "EHEALTH_PORT must be at most 65535");
    base.port = static_cast<int>(port);
  }
  if (auto v = env("EHEALTH_DATA_DIR")) base.data_dir = *v;
  if (auto v = env("EHEALTH_TOKEN_TTL_HOURS")) {
    base.token_ttl = std::chrono::hours(parse_positive(*v, "EHEALTH_TOKEN_TTL_HOURS"));
  }
  if (auto v = env("EHEALTH_CREDENTIALS")) base.credentials_path = *v;
  return base;
}

TraceService::TraceService(ServiceConfig config, SessionManager::Now now)
    : config_(std::move(config)),
      now_(now),
      credentials_(std::make_shared<const CredentialStore>(
          CredentialStore::load(config_.resolved_credentials(), config_.hash_params))),
      sessions_(config_.token_ttl, now),
      records_(config_.data_dir) {
  std::error_code ec;
  credentials_stamp_ = fs::last_write_time(config_.resolved_credentials(), ec);
}

SessionToken TraceService::login(const std::string& username, const std::string& password) {
  std::shared_ptr<const CredentialStore> creds;
  {
    // Pick up users provisioned while the server is running.
    std::lock_guard lock(reload_mutex_);
    std::error_code ec;
    const auto stamp = fs::last_write_time(config_.resolved_credentials(), ec);
    if (!ec && stamp != credentials_stamp_) {
      credentials_ = std::make_shared<const CredentialStore>(
          CredentialStore::load(config_.resolved_credentials(), config_.hash_params));
      credentials_stamp_ = stamp;
    }
    creds = credentials_;
  }
  if (!creds->verify(username, password)) {
    throw Error(ErrorCode::kInvalidCredentials, "invalid username or password");
  }
  return sessions_.issue(username);
}

std::string TraceService::authorize(const std::string& token) {
  auto user = sessions_.validate(token);
  if (!user) throw Error(ErrorCode::kUnauthorized, "missing, unknown or expired token");
  return *user;
}

std::string TraceService::store(const std::string& token, const json& body) {
  authorize(token);
  if (!body.is_object()) throw Error(ErrorCode::kValidationError, "record must be a JSON object");
  TraceRecord record;
  try {
    auto text = [&](const char* key, const std::string& fallback) {
      auto it = body.find(key);
      if (it == body.end() || it->is_null()) return fallback;
      if (!it->is_string()) throw Error(ErrorCode::kValidationError, std::string("'") + key + "' must be a string");
      return it->get<std::string>();
    };
    auto sig = body.find("signal");
    if (sig == body.end()) throw Error(ErrorCode::kValidationError, "record has no signal");
    record.signal = extraction::signal_from_json(*sig);
    extraction::validate(record.signal);
    record.patient_ref = text("patient_ref", "");
    record.lead_label = text("lead_label", record.signal.lead_label);
    if (auto it = body.find("source_image_ref"); it != body.end() && !it->is_null()) {
      record.source_image_ref = text("source_image_ref", "");
    }
    if (auto it = body.find("analysis"); it != body.end() && !it->is_null()) {
      record.analysis = analysis::report_from_json(*it);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kValidationError) throw;
    throw Error(ErrorCode::kValidationError, e.what());
  }
  if (!record.analysis) record.analysis = analysis::analyze(record.signal, config_.analysis);
  record.created_at = format_timestamp(now_());
  return records_.store(std::move(record)).id;
}

std::vector<TraceSummary> TraceService::list(const std::string& token, const std::optional<std::string>& patient_ref) {
  authorize(token);
  return records_.list(patient_ref);
}

std::string TraceService::fetch(const std::string& token, const std::string& id) {
  authorize(token);
  return records_.fetch_bytes(id);
}

}  // namespace ecg::cloudstore
