#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "ecg/analysis.hpp"

namespace ecg::analysis {

FilterSpec FilterSpec::fir(std::vector<double> taps) {
  FilterSpec spec;
  spec.kind = Kind::kFirDirect;
  spec.coefficients = std::move(taps);
  spec.check();
  return spec;
}

FilterSpec FilterSpec::savitzky_golay(int window_length, int poly_order) {
  FilterSpec spec;
  spec.kind = Kind::kSavitzkyGolay;
  spec.window_length = window_length;
  spec.poly_order = poly_order;
  spec.check();
  return spec;
}

void FilterSpec::check() const {
  if (kind == Kind::kFirDirect) {
    if (coefficients.empty()) throw Error(ErrorCode::kEmptyFilter, "FIR filter needs at least one tap");
    return;
  }
  if (window_length < 3 || window_length % 2 == 0) {
    throw Error(ErrorCode::kInvalidParams, "Savitzky-Golay window must be odd and >= 3");
  }
  if (poly_order < 0 || poly_order >= window_length) {
    throw Error(ErrorCode::kInvalidParams, "Savitzky-Golay order must be in [0, window)");
  }
}

std::vector<double> fir_filter(std::span<const double> x, std::span<const double> taps) {
  if (taps.empty()) throw Error(ErrorCode::kEmptyFilter, "FIR filter needs at least one tap");
  if (x.empty()) throw Error(ErrorCode::kSignalTooShort, "signal is empty");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t k_max = static_cast<std::ptrdiff_t>(taps.size());
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = 0; k < k_max; ++k) {
      acc += taps[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(std::max<std::ptrdiff_t>(i - k, 0))];
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

CalibratedSignal fir_filter(const CalibratedSignal& sig, std::span<const double> taps) {
  CalibratedSignal out = sig;
  out.samples_mV = fir_filter(sig.samples_mV, taps);
  return out;
}

std::vector<double> savgol_weights(int window_length, int poly_order, int eval_pos) {
  FilterSpec::savitzky_golay(window_length, poly_order);
  if (eval_pos < 0 || eval_pos >= window_length) {
    throw Error(ErrorCode::kInvalidParams, "evaluation position lies outside the window");
  }
  const int half = window_length / 2;
  const int terms = poly_order + 1;
  // Centred, scaled abscissae keep the design matrix well conditioned.
  const double scale = std::max(1, half);
  Eigen::MatrixXd design(window_length, terms);
  for (int j = 0; j < window_length; ++j) {
    const double u = (j - half) / scale;
    double p = 1.0;
    for (int k = 0; k < terms; ++k) {
      design(j, k) = p;
      p *= u;
    }
  }
  Eigen::VectorXd basis(terms);
  {
    const double u = (eval_pos - half) / scale;
    double p = 1.0;
    for (int k = 0; k < terms; ++k) {
      basis(k) = p;
      p *= u;
    }
  }
  // Fitted value at eval_pos is basis' * pinv(A) * x with pinv(A) = R^-1 Q'.
  // Hence the weights are Q * R^-T * basis.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::MatrixXd thin_q = qr.householderQ() * Eigen::MatrixXd::Identity(window_length, terms);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(terms, terms).triangularView<Eigen::Upper>();
  const Eigen::VectorXd z = r.transpose().triangularView<Eigen::Lower>().solve(basis);
  const Eigen::VectorXd w = thin_q * z;
  return {w.data(), w.data() + w.size()};
}

std::vector<double> savgol_filter(std::span<const double> x, int window_length, int poly_order) {
  FilterSpec::savitzky_golay(window_length, poly_order);
  const std::size_t window = static_cast<std::size_t>(window_length);
  if (x.size() < window) throw Error(ErrorCode::kSignalTooShort, "signal is shorter than the smoothing window");
  const int half = window_length / 2;
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);

  const auto centre = savgol_weights(window_length, poly_order, half);
  for (std::size_t i = static_cast<std::size_t>(half); i + static_cast<std::size_t>(half) < n; ++i) {
    double acc = 0.0;
    const double* src = x.data() + (i - static_cast<std::size_t>(half));
    for (std::size_t j = 0; j < window; ++j) acc += centre[j] * src[j];
    y[i] = acc;
  }
  for (int pos = 0; pos < half; ++pos) {
    const auto head = savgol_weights(window_length, poly_order, pos);
    const auto tail = savgol_weights(window_length, poly_order, window_length - 1 - pos);
    double head_acc = 0.0;
    double tail_acc = 0.0;
    const double* last = x.data() + (n - window);
    for (std::size_t j = 0; j < window; ++j) {
      head_acc += head[j] * x[j];
      tail_acc += tail[j] * last[j];
    }
    y[static_cast<std::size_t>(pos)] = head_acc;
    y[n - 1 - static_cast<std::size_t>(pos)] = tail_acc;
  }
  return y;
}

CalibratedSignal savgol_filter(const CalibratedSignal& sig, int window_length, int poly_order) {
  CalibratedSignal out = sig;
  out.samples_mV = savgol_filter(sig.samples_mV, window_length, poly_order);
  return out;
}

CalibratedSignal apply(const CalibratedSignal& sig, const FilterSpec& spec) {
  spec.check();
  if (spec.kind == FilterSpec::Kind::kFirDirect) return fir_filter(sig, spec.coefficients);
  return savgol_filter(sig, spec.window_length, spec.poly_order);
}

FilterSpec default_smoothing(double sampling_rate_hz) {
  int window = static_cast<int>(std::lround(15.0 * sampling_rate_hz / 250.0));
  if (window % 2 == 0) ++window;
  return FilterSpec::savitzky_golay(std::max(window, 5), 3);
}

}  // namespace ecg::analysis
