#include <nlohmann/json.hpp>

#include "ecg/analysis.hpp"

namespace ecg::analysis {
namespace {

using nlohmann::json;

json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::size_t> index_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned()) throw Error(ErrorCode::kSchemaError, std::string("beat field '") + key + "' must be an index");
  return it->get<std::size_t>();
}

std::optional<double> optional_number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchemaError, std::string("missing field '") + key + "'");
  if (it->is_null()) return std::nullopt;
  if (!it->is_number()) throw Error(ErrorCode::kSchemaError, std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchemaError, std::string("missing field '") + key + "'");
  return *it;
}

std::optional<ErrorCode> failure_from(const std::string& status) {
  if (status == "ok") return std::nullopt;
  for (ErrorCode c : {ErrorCode::kSignalTooShort, ErrorCode::kSamplingRateUnsupported, ErrorCode::kTooFewPeaks}) {
    if (status == to_string(c)) return c;
  }
  throw Error(ErrorCode::kSchemaError, "unknown analysis status '" + status + "'");
}

}  // namespace

AnalysisReport analyze(const CalibratedSignal& sig, const AnalysisConfig& cfg) {
  AnalysisReport report;
  report.r_peaks.signal_ref = sig.source_id;
  report.r_peaks.sample_period_s = sig.sample_period_s;
  report.filter_chain =
      cfg.filter_chain ? *cfg.filter_chain : std::vector<FilterSpec>{default_smoothing(sig.sampling_rate_hz())};

  CalibratedSignal filtered = sig;
  try {
    for (const FilterSpec& spec : report.filter_chain) filtered = apply(filtered, spec);
    report.r_peaks = pan_tompkins(sig, cfg.pan_tompkins);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSignalTooShort && e.code() != ErrorCode::kSamplingRateUnsupported) throw;
    report.failure = e.code();
    return report;
  }

  if (report.r_peaks.size() < 2) {
    report.failure = ErrorCode::kTooFewPeaks;
    return report;
  }
  report.heart_rate_bpm = heart_rate(report.r_peaks);
  if (report.r_peaks.size() >= 3) report.rr_std_ms = rr_std(report.r_peaks);
  report.beats = delineate_waves(filtered, report.r_peaks, cfg.delineation);
  return report;
}

json to_json(const FilterSpec& spec) {
  if (spec.kind == FilterSpec::Kind::kFirDirect) {
    return {{"kind", "fir_direct"}, {"coefficients", spec.coefficients}};
  }
  return {{"kind", "savitzky_golay"}, {"window_length", spec.window_length}, {"poly_order", spec.poly_order}};
}

FilterSpec filter_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "filter spec must be an object");
  const json& kind = require(j, "kind");
  try {
    if (kind == "fir_direct") return FilterSpec::fir(require(j, "coefficients").get<std::vector<double>>());
    if (kind == "savitzky_golay") {
      return FilterSpec::savitzky_golay(require(j, "window_length").get<int>(), require(j, "poly_order").get<int>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("malformed filter spec: ") + e.what());
  }
  throw Error(ErrorCode::kSchemaError, "unknown filter kind");
}

json to_json(const AnalysisReport& report) {
  json beats = json::array();
  for (const BeatFiducials& b : report.beats) {
    json flags = json::array();
    if (b.p_low_prominence) flags.push_back("p_low_prominence");
    if (b.t_low_prominence) flags.push_back("t_low_prominence");
    beats.push_back({{"p", optional_index(b.p)},
                     {"q", optional_index(b.q)},
                     {"r", b.r},
                     {"s", optional_index(b.s)},
                     {"t", optional_index(b.t)},
                     {"flags", std::move(flags)}});
  }
  json chain = json::array();
  for (const FilterSpec& f : report.filter_chain) chain.push_back(to_json(f));
  return {
      {"status", report.failure ? std::string(to_string(*report.failure)) : std::string("ok")},
      {"heart_rate_bpm", report.heart_rate_bpm ? json(*report.heart_rate_bpm) : json(nullptr)},
      {"rr_std_ms", report.rr_std_ms ? json(*report.rr_std_ms) : json(nullptr)},
      {"r_peaks", report.r_peaks.indices},
      {"sample_period_s", report.r_peaks.sample_period_s},
      {"signal_ref", report.r_peaks.signal_ref},
      {"beats", std::move(beats)},
      {"filter_chain", std::move(chain)},
  };
}

AnalysisReport report_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "analysis report must be an object");
  AnalysisReport report;
  try {
    report.failure = failure_from(require(j, "status").get<std::string>());
    report.heart_rate_bpm = optional_number(j, "heart_rate_bpm");
    report.rr_std_ms = optional_number(j, "rr_std_ms");
    report.r_peaks.indices = require(j, "r_peaks").get<std::vector<std::size_t>>();
    report.r_peaks.sample_period_s = require(j, "sample_period_s").get<double>();
    report.r_peaks.signal_ref = require(j, "signal_ref").get<std::string>();
    for (const json& b : require(j, "beats")) {
      BeatFiducials beat;
      beat.p = index_from(b, "p");
      beat.q = index_from(b, "q");
      beat.r = require(b, "r").get<std::size_t>();
      beat.s = index_from(b, "s");
      beat.t = index_from(b, "t");
      for (const json& f : require(b, "flags")) {
        if (f == "p_low_prominence") beat.p_low_prominence = true;
        else if (f == "t_low_prominence") beat.t_low_prominence = true;
      }
      report.beats.push_back(beat);
    }
    for (const json& f : require(j, "filter_chain")) report.filter_chain.push_back(filter_from_json(f));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("malformed analysis report: ") + e.what());
  }
  return report;
}

}  // namespace ecg::analysis
