#include <cmath>
#include <numeric>

#include "ecg/analysis.hpp"

namespace ecg::analysis {
namespace {

std::vector<double> rr_intervals_s(const RPeakSet& peaks) {
  std::vector<double> rr;
  rr.reserve(peaks.indices.size());
  for (std::size_t i = 1; i < peaks.indices.size(); ++i) {
    rr.push_back(static_cast<double>(peaks.indices[i] - peaks.indices[i - 1]) * peaks.sample_period_s);
  }
  return rr;
}

}  // namespace

double heart_rate(const RPeakSet& peaks) {
  if (peaks.size() < 2) throw Error(ErrorCode::kTooFewPeaks, "heart rate needs at least two R peaks");
  const auto rr = rr_intervals_s(peaks);
  const double mean = std::accumulate(rr.begin(), rr.end(), 0.0) / static_cast<double>(rr.size());
  return 60.0 / mean;
}

double rr_std(const RPeakSet& peaks) {
  if (peaks.size() < 3) throw Error(ErrorCode::kTooFewPeaks, "RR spread needs at least three R peaks");
  const auto rr = rr_intervals_s(peaks);
  const double mean = std::accumulate(rr.begin(), rr.end(), 0.0) / static_cast<double>(rr.size());
  double ss = 0.0;
  for (double v : rr) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(rr.size())) * 1000.0;
}

}  // namespace ecg::analysis
