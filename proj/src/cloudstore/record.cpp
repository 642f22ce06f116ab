#include <cstdio>
#include <ctime>

#include <nlohmann/json.hpp>

#include "ecg/cloudstore.hpp"

namespace ecg::cloudstore {
namespace {

using nlohmann::json;

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchemaError, std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw Error(ErrorCode::kSchemaError, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorCode::kSchemaError, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

std::string format_timestamp(Clock::time_point t) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms >= 0 ? ms / 1000 : (ms - 999) / 1000);
  const int millis = static_cast<int>(ms - static_cast<long long>(secs) * 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[80];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
  return buf;
}

Clock::time_point parse_timestamp(const std::string& text) {
  std::tm tm{};
  int millis = 0;
  int consumed = 0;
  if (text.size() != 24 ||
      std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                  &tm.tm_min, &tm.tm_sec, &millis, &consumed) != 7 ||
      consumed != 24) {
    throw Error(ErrorCode::kSchemaError, "timestamp must look like 2024-01-31T23:59:59.000Z");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::time_t secs = timegm(&tm);
  const auto t = Clock::time_point(std::chrono::seconds(secs)) + std::chrono::milliseconds(millis);
  if (format_timestamp(t) != text) throw Error(ErrorCode::kSchemaError, "timestamp out of range: " + text);
  return t;
}

json to_json(const TraceRecord& r) {
  return {
      {"schema_version", kRecordSchemaVersion},
      {"id", r.id},
      {"patient_ref", r.patient_ref},
      {"lead_label", r.lead_label},
      {"created_at", r.created_at},
      {"signal", extraction::to_json(r.signal)},
      {"analysis", r.analysis ? analysis::to_json(*r.analysis) : json(nullptr)},
      {"source_image_ref", r.source_image_ref ? json(*r.source_image_ref) : json(nullptr)},
  };
}

TraceRecord record_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "trace record must be a JSON object");
  const json& version = require(j, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kRecordSchemaVersion) {
    throw Error(ErrorCode::kSchemaError, "unsupported record schema_version");
  }
  TraceRecord r;
  r.id = require_string(j, "id");
  r.patient_ref = require_string(j, "patient_ref");
  r.lead_label = require_string(j, "lead_label");
  r.created_at = require_string(j, "created_at");
  r.signal = extraction::signal_from_json(require(j, "signal"));
  if (auto it = j.find("analysis"); it != j.end() && !it->is_null()) r.analysis = analysis::report_from_json(*it);
  r.source_image_ref = optional_string(j, "source_image_ref");
  return r;
}

std::string serialize_trace(const TraceRecord& record) { return to_json(record).dump(); }

TraceRecord deserialize_trace(std::string_view bytes) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kSchemaError, "trace record is not valid JSON");
  return record_from_json(j);
}

std::string canonicalize(std::string_view json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kSchemaError, "not valid JSON");
  return j.dump();
}

bool operator==(const TraceRecord& a, const TraceRecord& b) { return serialize_trace(a) == serialize_trace(b); }

json to_json(const TraceSummary& s) {
  return {{"id", s.id},
          {"patient_ref", s.patient_ref},
          {"lead_label", s.lead_label},
          {"created_at", s.created_at},
          {"heart_rate_bpm", s.heart_rate_bpm ? json(*s.heart_rate_bpm) : json(nullptr)}};
}

TraceSummary summary_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "summary must be a JSON object");
  TraceSummary s;
  s.id = require_string(j, "id");
  s.patient_ref = require_string(j, "patient_ref");
  s.lead_label = require_string(j, "lead_label");
  s.created_at = require_string(j, "created_at");
  if (auto it = j.find("heart_rate_bpm"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw Error(ErrorCode::kSchemaError, "heart_rate_bpm must be a number");
    s.heart_rate_bpm = it->get<double>();
  }
  return s;
}

TraceSummary summarize(const TraceRecord& r) {
  TraceSummary s{r.id, r.patient_ref, r.lead_label, r.created_at, std::nullopt};
  if (r.analysis) s.heart_rate_bpm = r.analysis->heart_rate_bpm;
  return s;
}

}  // namespace ecg::cloudstore
