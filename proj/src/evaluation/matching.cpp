#include <algorithm>
#include <cmath>
#include <tuple>

#include "ecg/evaluation.hpp"

namespace ecg::evaluation {

char to_char(WaveLabel label) noexcept {
  switch (label) {
    case WaveLabel::kR: return 'R';
    case WaveLabel::kP: return 'P';
    case WaveLabel::kQ: return 'Q';
    case WaveLabel::kS: return 'S';
    case WaveLabel::kT: return 'T';
  }
  return '?';
}

FeaturePointSet feature_points(const analysis::AnalysisReport& report, double time_offset_s) {
  FeaturePointSet out;
  out.source = FeaturePointSet::Source::kDetected;
  const double period = report.r_peaks.sample_period_s;
  auto add = [&](std::size_t index, WaveLabel label) {
    out.points.push_back({static_cast<double>(index) * period + time_offset_s, label});
  };
  for (std::size_t r : report.r_peaks.indices) add(r, WaveLabel::kR);
  for (const auto& beat : report.beats) {
    if (beat.p) add(*beat.p, WaveLabel::kP);
    if (beat.q) add(*beat.q, WaveLabel::kQ);
    if (beat.s) add(*beat.s, WaveLabel::kS);
    if (beat.t) add(*beat.t, WaveLabel::kT);
  }
  return out;
}

Matching match_points(const FeaturePointSet& detected, const FeaturePointSet& truth, double tolerance_s) {
  if (!(tolerance_s > 0.0)) throw Error(ErrorCode::kInvalidParams, "matching tolerance must be positive");

  struct Candidate {
    double distance;
    std::size_t d;
    std::size_t t;
  };
  std::vector<Candidate> candidates;
  for (std::size_t d = 0; d < detected.points.size(); ++d) {
    for (std::size_t t = 0; t < truth.points.size(); ++t) {
      if (detected.points[d].label != truth.points[t].label) continue;
      const double dist = std::abs(detected.points[d].time_s - truth.points[t].time_s);
      if (dist <= tolerance_s) candidates.push_back({dist, d, t});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.d, a.t) < std::tie(b.distance, b.d, b.t);
  });

  Matching m;
  m.tolerance_s = tolerance_s;
  std::vector<bool> used_d(detected.points.size(), false);
  std::vector<bool> used_t(truth.points.size(), false);
  for (const auto& c : candidates) {
    if (used_d[c.d] || used_t[c.t]) continue;
    used_d[c.d] = true;
    used_t[c.t] = true;
    m.pairs.emplace_back(c.d, c.t);
  }
  std::sort(m.pairs.begin(), m.pairs.end());
  for (std::size_t d = 0; d < used_d.size(); ++d) {
    if (!used_d[d]) m.unmatched_detected.push_back(d);
  }
  for (std::size_t t = 0; t < used_t.size(); ++t) {
    if (!used_t[t]) m.unmatched_truth.push_back(t);
  }
  return m;
}

double precision(const Matching& m) {
  const std::size_t detected = m.pairs.size() + m.unmatched_detected.size();
  return detected == 0 ? 1.0 : static_cast<double>(m.pairs.size()) / static_cast<double>(detected);
}

double recall(const Matching& m) {
  const std::size_t truth = m.pairs.size() + m.unmatched_truth.size();
  return truth == 0 ? 1.0 : static_cast<double>(m.pairs.size()) / static_cast<double>(truth);
}

Counts EvalResult::waves() const {
  Counts c;
  for (WaveLabel l : {WaveLabel::kP, WaveLabel::kQ, WaveLabel::kS, WaveLabel::kT}) c += label(l);
  return c;
}

void EvalResult::add(const EvalResult& other) {
  for (std::size_t i = 0; i < per_label.size(); ++i) per_label[i] += other.per_label[i];
  counts += other.counts;
  precision = counts.precision();
  recall = counts.recall();
}

EvalResult evaluate_points(const FeaturePointSet& detected, const FeaturePointSet& truth, const Tolerances& tol) {
  EvalResult result;
  for (WaveLabel label : kAllLabels) {
    FeaturePointSet d;
    FeaturePointSet t;
    d.source = detected.source;
    t.source = truth.source;
    for (const auto& p : detected.points) {
      if (p.label == label) d.points.push_back(p);
    }
    for (const auto& p : truth.points) {
      if (p.label == label) t.points.push_back(p);
    }
    const Matching m = match_points(d, t, tol.for_label(label));
    Counts& c = result.per_label[static_cast<std::size_t>(label)];
    c.matched = m.pairs.size();
    c.detected = d.points.size();
    c.truth = t.points.size();
    result.counts += c;
  }
  result.precision = result.counts.precision();
  result.recall = result.counts.recall();
  return result;
}

}  // namespace ecg::evaluation
