#include <cstdio>

#include <nlohmann/json.hpp>

#include "ecg/extraction.hpp"

namespace ecg::extraction {
namespace {

using nlohmann::json;

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchemaError, std::string("missing field '") + key + "'");
  return *it;
}

double number_field(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number()) throw Error(ErrorCode::kSchemaError, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

json calibration_to_json(const CalibrationParams& p) {
  return {
      {"trace_height_px", p.trace_height_px},
      {"physical_height_cm", p.physical_height_cm},
      {"gain_mm_per_mV", p.gain_mm_per_mV},
      {"paper_speed_mm_per_s", p.paper_speed_mm_per_s},
      {"baseline_row_px", p.baseline_row_px ? json(*p.baseline_row_px) : json(nullptr)},
  };
}

CalibrationParams calibration_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "calibration must be an object");
  CalibrationParams p;
  p.trace_height_px = number_field(j, "trace_height_px");
  p.physical_height_cm = number_field(j, "physical_height_cm");
  p.gain_mm_per_mV = number_field(j, "gain_mm_per_mV");
  p.paper_speed_mm_per_s = number_field(j, "paper_speed_mm_per_s");
  if (auto it = j.find("baseline_row_px"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw Error(ErrorCode::kSchemaError, "baseline_row_px must be a number");
    p.baseline_row_px = it->get<double>();
  }
  return p;
}

}  // namespace

json to_json(const CalibratedSignal& sig) {
  json samples = json::array();
  for (double v : sig.samples_mV) samples.push_back(v);
  return {
      {"schema_version", kSignalSchemaVersion},
      {"lead_label", sig.lead_label},
      {"sample_period_s", sig.sample_period_s},
      {"samples_mV", std::move(samples)},
      {"source_id", sig.source_id},
      {"calibration", sig.calibration ? calibration_to_json(*sig.calibration) : json(nullptr)},
  };
}

CalibratedSignal signal_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "signal must be a JSON object");
  const json& version = require(j, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kSignalSchemaVersion) {
    throw Error(ErrorCode::kSchemaError, "unsupported signal schema_version");
  }
  CalibratedSignal sig;
  sig.sample_period_s = number_field(j, "sample_period_s");
  const json& samples = require(j, "samples_mV");
  if (!samples.is_array()) throw Error(ErrorCode::kSchemaError, "samples_mV must be an array");
  sig.samples_mV.reserve(samples.size());
  for (const json& v : samples) {
    if (!v.is_number()) throw Error(ErrorCode::kSchemaError, "samples_mV must hold numbers");
    sig.samples_mV.push_back(v.get<double>());
  }
  if (auto it = j.find("lead_label"); it != j.end() && it->is_string()) sig.lead_label = it->get<std::string>();
  if (auto it = j.find("source_id"); it != j.end() && it->is_string()) sig.source_id = it->get<std::string>();
  if (auto it = j.find("calibration"); it != j.end() && !it->is_null()) {
    sig.calibration = calibration_from_json(*it);
  }
  return sig;
}

std::string to_csv(const CalibratedSignal& sig) {
  std::string out = "time_s,amplitude_mV\n";
  char line[64];
  for (std::size_t i = 0; i < sig.samples_mV.size(); ++i) {
    std::snprintf(line, sizeof line, "%.9g,%.9g\n", static_cast<double>(i) * sig.sample_period_s,
                  sig.samples_mV[i]);
    out += line;
  }
  return out;
}

}  // namespace ecg::extraction
