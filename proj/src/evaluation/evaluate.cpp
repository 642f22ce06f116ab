#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ecg/evaluation.hpp"

namespace ecg::evaluation {
namespace {

using nlohmann::json;

json counts_json(const Counts& c) {
  return {{"precision", c.precision()},
          {"recall", c.recall()},
          {"matched", c.matched},
          {"detected", c.detected},
          {"truth", c.truth}};
}

json eval_json(const EvalResult& r) {
  json per_label = json::object();
  for (WaveLabel l : kAllLabels) per_label[std::string(1, to_char(l))] = counts_json(r.label(l));
  return {{"precision", r.precision},
          {"recall", r.recall},
          {"counts", {{"matched", r.counts.matched}, {"detected", r.counts.detected}, {"truth", r.counts.truth}}},
          {"per_label", std::move(per_label)},
          {"pqst", counts_json(r.waves())}};
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

ItemResult evaluate_item(const CorpusItem& item, const EvaluationOptions& options) {
  ItemResult result;
  result.name = item.name;
  result.seed = item.seed;
  result.injected_skew_deg = item.spec.distortions.rotation_deg;

  const RenderedTrace rendered = render_synthetic_trace(item.spec, item.seed);
  pipeline::PipelineConfig cfg = options.pipeline;
  cfg.calibration.trace_height_px = rendered.truth.trace_height_px;
  cfg.calibration.physical_height_cm = item.spec.paper.height_mm / 10.0;

  pipeline::DigitizeResult digitized;
  try {
    digitized = pipeline::digitize(rendered.image, cfg, item.name);
  } catch (const Error& e) {
    result.error = e.what();
    return result;
  }
  result.estimated_skew_deg = digitized.skew_deg;

  const auto [rmse, lag] =
      aligned_rmse(digitized.signal.samples_mV, rendered.truth.signal.samples_mV, options.lag_search_px);
  result.lag = lag;
  if (std::isfinite(rmse)) result.rmse_mV = rmse;
  result.success = std::isfinite(rmse) && rmse < options.success_rmse_mV;

  const analysis::AnalysisReport report = analysis::analyze(digitized.signal, cfg.analysis);
  if (report.failure) result.analysis_failure = std::string(to_string(*report.failure));
  result.heart_rate_bpm = report.heart_rate_bpm;
  const FeaturePointSet detected = feature_points(report, -lag * digitized.signal.sample_period_s);
  result.points = evaluate_points(detected, rendered.truth.fiducials, options.tolerances);
  return result;
}

}  // namespace

std::pair<double, int> aligned_rmse(const std::vector<double>& extracted, const std::vector<double>& truth,
                                    int max_lag) {
  const auto ne = static_cast<long>(extracted.size());
  const auto nt = static_cast<long>(truth.size());
  const long centre = std::lround(static_cast<double>(ne - nt) / 2.0);
  double best = std::numeric_limits<double>::infinity();
  int best_lag = static_cast<int>(centre);
  // Visit centre, centre-1, centre+1, ... so ties favour the centred lag.
  for (int step = 0; step <= 2 * std::max(0, max_lag); ++step) {
    const long lag = centre + (step % 2 ? -(step + 1) / 2 : step / 2);
    const long lo = std::max(0L, -lag);
    const long hi = std::min(nt, ne - lag);
    if (hi - lo < std::max(1L, nt / 2)) continue;
    double acc = 0.0;
    for (long i = lo; i < hi; ++i) {
      const double d = extracted[static_cast<std::size_t>(i + lag)] - truth[static_cast<std::size_t>(i)];
      acc += d * d;
    }
    const double rmse = std::sqrt(acc / static_cast<double>(hi - lo));
    if (rmse < best) {
      best = rmse;
      best_lag = static_cast<int>(lag);
    }
  }
  return {best, best_lag};
}

EvaluationReport evaluate_pipeline(const std::vector<CorpusItem>& corpus, const EvaluationOptions& options) {
  if (corpus.empty()) throw Error(ErrorCode::kInvalidSpec, "corpus is empty");
  EvaluationReport report;
  report.items.reserve(corpus.size());
  for (const CorpusItem& item : corpus) report.items.push_back(evaluate_item(item, options));

  for (const ItemResult& item : report.items) {
    if (item.success) ++report.successes;
    if (item.rmse_mV) report.rmse_mV.push_back(*item.rmse_mV);
    report.points.add(item.points);
  }
  report.success_rate = static_cast<double>(report.successes) / static_cast<double>(report.items.size());
  report.vacuous_precision = report.points.counts.detected == 0;
  report.vacuous_recall = report.points.counts.truth == 0;
  return report;
}

std::vector<CorpusItem> corpus_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kInvalidSpec, "corpus must be a JSON list");
  std::vector<CorpusItem> corpus;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& entry = j[i];
    if (!entry.is_object()) throw Error(ErrorCode::kInvalidSpec, "corpus entries must be objects");
    for (const auto& kv : entry.items()) {
      if (kv.key() != "name" && kv.key() != "seed" && kv.key() != "spec") {
        throw Error(ErrorCode::kInvalidSpec, "unknown corpus field '" + kv.key() + "'");
      }
    }
    CorpusItem item;
    item.name = "item" + std::to_string(i);
    try {
      if (entry.contains("name")) item.name = entry.at("name").get<std::string>();
      if (entry.contains("seed")) item.seed = entry.at("seed").get<std::uint64_t>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::kInvalidSpec, "corpus entry " + std::to_string(i) + " has a malformed name or seed");
    }
    item.spec = spec_from_json(entry.contains("spec") ? entry.at("spec") : json::object());
    corpus.push_back(std::move(item));
  }
  return corpus;
}

json to_json(const std::vector<CorpusItem>& corpus) {
  json out = json::array();
  for (const CorpusItem& item : corpus) {
    out.push_back({{"name", item.name}, {"seed", item.seed}, {"spec", to_json(item.spec)}});
  }
  return out;
}

json to_json(const EvaluationReport& report) {
  json items = json::array();
  for (const ItemResult& item : report.items) {
    items.push_back({
        {"name", item.name},
        {"seed", item.seed},
        {"error", optional_json(item.error)},
        {"rmse_mV", optional_json(item.rmse_mV)},
        {"success", item.success},
        {"lag_px", item.lag},
        {"estimated_skew_deg", item.estimated_skew_deg},
        {"injected_skew_deg", item.injected_skew_deg},
        {"heart_rate_bpm", optional_json(item.heart_rate_bpm)},
        {"analysis_failure", optional_json(item.analysis_failure)},
        {"points", eval_json(item.points)},
    });
  }
  json rmse = {{"count", report.rmse_mV.size()}};
  if (!report.rmse_mV.empty()) {
    rmse["min"] = *std::min_element(report.rmse_mV.begin(), report.rmse_mV.end());
    rmse["max"] = *std::max_element(report.rmse_mV.begin(), report.rmse_mV.end());
    rmse["mean"] = std::accumulate(report.rmse_mV.begin(), report.rmse_mV.end(), 0.0) /
                   static_cast<double>(report.rmse_mV.size());
    rmse["median"] = median(report.rmse_mV);
  }
  return {
      {"items", std::move(items)},
      {"summary",
       {{"items", report.items.size()},
        {"successes", report.successes},
        {"success_rate", report.success_rate},
        {"rmse_mV", std::move(rmse)},
        {"points", eval_json(report.points)},
        {"vacuous_precision", report.vacuous_precision},
        {"vacuous_recall", report.vacuous_recall}}},
  };
}

std::string format_table(const EvaluationReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %10s %8s %8s %8s %8s %8s  %s\n", "item", "rmse_mV", "skew", "HR",
                "R prec", "R rec", "PQST rec", "status");
  out += line;
  for (const ItemResult& item : report.items) {
    const Counts& r = item.points.label(WaveLabel::kR);
    std::string status = item.error ? *item.error : (item.success ? "ok" : "rmse above bound");
    if (!item.error && item.analysis_failure) status += " (" + *item.analysis_failure + ")";
    std::snprintf(line, sizeof line, "%-20.20s %10.4f %8.2f %8.1f %8.3f %8.3f %8.3f  %s\n", item.name.c_str(),
                  item.rmse_mV.value_or(std::nan("")), item.estimated_skew_deg, item.heart_rate_bpm.value_or(std::nan("")),
                  r.precision(), r.recall(), item.points.waves().recall(), status.c_str());
    out += line;
  }
  const Counts& r = report.points.label(WaveLabel::kR);
  std::snprintf(line, sizeof line, "success %zu/%zu (%.1f%%)  median rmse %.4f mV\n", report.successes,
                report.items.size(), 100.0 * report.success_rate, median(report.rmse_mV));
  out += line;
  std::snprintf(line, sizeof line, "R precision %.4f recall %.4f  PQST precision %.4f recall %.4f\n", r.precision(),
                r.recall(), report.points.waves().precision(), report.points.waves().recall());
  out += line;
  return out;
}

}  // namespace ecg::evaluation
