#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "ecg/evaluation.hpp"
#include "ecg/imaging.hpp"

namespace ecg::evaluation {
namespace {

using nlohmann::json;

constexpr double kGainMmPerMv = 10.0;
constexpr double kSpeedMmPerS = 25.0;
constexpr double kMaxPixels = 64e6;

struct Component {
  WaveLabel label;
  double amplitude;
  double offset_s;
  double sigma_s;
};

class BeatModel {
 public:
  explicit BeatModel(const WaveformParams& w) {
    const double rr = 60.0 / w.heart_rate_bpm;
    const double t_scale = std::sqrt(rr);
    auto add = [&](WaveLabel label, const WaveComponent& c, double scale) {
      if (c.amplitude_mV != 0.0) {
        components_.push_back({label, c.amplitude_mV, c.offset_ms * scale / 1000.0, c.width_ms * scale / 1000.0});
      }
    };
    add(WaveLabel::kP, w.p, 1.0);
    add(WaveLabel::kQ, w.q, 1.0);
    add(WaveLabel::kR, w.r, 1.0);
    add(WaveLabel::kS, w.s, 1.0);
    add(WaveLabel::kT, w.t, t_scale);

    const std::set<int> missing(w.missing_beats.begin(), w.missing_beats.end());
    for (int k = 0;; ++k) {
      const double tb = w.first_beat_s + k * rr;
      if (tb >= w.duration_s) break;
      if (!missing.count(k)) beats_.push_back(tb);
    }
    for (const auto& c : components_) reach_ = std::max(reach_, std::abs(c.offset_s) + 6.0 * c.sigma_s);
  }

  double value(double t) const {
    double v = 0.0;
    auto it = std::lower_bound(beats_.begin(), beats_.end(), t - reach_);
    for (; it != beats_.end() && *it <= t + reach_; ++it) {
      for (const auto& c : components_) {
        const double z = (t - *it - c.offset_s) / c.sigma_s;
        v += c.amplitude * std::exp(-0.5 * z * z);
      }
    }
    return v;
  }

  const std::vector<double>& beats() const { return beats_; }
  const std::vector<Component>& components() const { return components_; }

 private:
  std::vector<Component> components_;
  std::vector<double> beats_;
  double reach_ = 0.0;
};

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidSpec, what);
}

// Reads `key` from an object into `out` if present; rejects wrong types.
template <typename T>
void read(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidSpec, std::string("field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* where) {
  if (!obj.is_object()) throw Error(ErrorCode::kInvalidSpec, std::string(where) + " must be an object");
  for (const auto& item : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; })) {
      throw Error(ErrorCode::kInvalidSpec, "unknown field '" + item.key() + "' in " + where);
    }
  }
}

json component_json(const WaveComponent& c) {
  return {{"amplitude_mV", c.amplitude_mV}, {"offset_ms", c.offset_ms}, {"width_ms", c.width_ms}};
}

void read_component(const json& obj, const char* key, WaveComponent& c) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  reject_unknown(*it, {"amplitude_mV", "offset_ms", "width_ms"}, key);
  read(*it, "amplitude_mV", c.amplitude_mV);
  read(*it, "offset_ms", c.offset_ms);
  read(*it, "width_ms", c.width_ms);
}

json color_json(Rgb c) { return json::array({c.r, c.g, c.b}); }

void read_color(const json& obj, const char* key, Rgb& c) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  std::vector<int> v;
  read(obj, key, v);
  if (v.size() != 3 || std::any_of(v.begin(), v.end(), [](int x) { return x < 0 || x > 255; })) {
    throw Error(ErrorCode::kInvalidSpec, std::string("color '") + key + "' must be three values in [0, 255]");
  }
  c = Rgb{static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]), static_cast<std::uint8_t>(v[2])};
}

std::uint8_t clamp_channel(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

void SyntheticTraceSpec::check() const {
  const auto& w = waveform;
  require(std::isfinite(w.heart_rate_bpm) && w.heart_rate_bpm > 0.0 && w.heart_rate_bpm <= 300.0,
          "heart rate must be in (0, 300] bpm");
  require(std::isfinite(w.duration_s) && w.duration_s > 0.0, "duration must be positive");
  require(std::isfinite(w.first_beat_s) && w.first_beat_s >= 0.0, "first beat time must be non-negative");
  for (const WaveComponent* c : {&w.p, &w.q, &w.r, &w.s, &w.t}) {
    require(std::isfinite(c->amplitude_mV) && std::isfinite(c->offset_ms), "wave parameters must be finite");
    require(std::isfinite(c->width_ms) && c->width_ms > 0.0, "wave widths must be positive");
  }
  const auto& p = paper;
  require(std::isfinite(p.grid_mm) && p.grid_mm > 0.0, "grid spacing must be positive");
  require(p.major_every >= 1, "major grid period must be at least 1");
  require(std::isfinite(p.stroke_width_px) && p.stroke_width_px > 0.0, "stroke width must be positive");
  require(std::isfinite(p.px_per_mm) && p.px_per_mm > 0.0, "pixel density must be positive");
  require(std::isfinite(p.height_mm) && p.height_mm > 0.0, "paper height must be positive");
  require(p.baseline_fraction > 0.0 && p.baseline_fraction < 1.0, "baseline fraction must be in (0, 1)");
  const double width = w.duration_s * kSpeedMmPerS * p.px_per_mm;
  const double height = p.height_mm * p.px_per_mm;
  require(width >= 2.0 && height >= 2.0, "rendered image would be smaller than 2x2 pixels");
  require(width * height <= kMaxPixels, "rendered image would exceed 64 megapixels");
  const auto& d = distortions;
  require(d.rotation_deg >= -10.0 && d.rotation_deg <= 10.0, "rotation must be in [-10, 10] degrees");
  require(std::isfinite(d.noise_sd) && d.noise_sd >= 0.0, "noise SD must be non-negative");
  require(d.lighting_gradient >= 0.0 && d.lighting_gradient < 1.0, "lighting gradient must be in [0, 1)");
  require(!d.jpeg_quality || (*d.jpeg_quality >= 1 && *d.jpeg_quality <= 100), "JPEG quality must be in [1, 100]");
}

GroundTruth synthesize_ecg(const WaveformParams& waveform, double sampling_rate_hz) {
  if (!(sampling_rate_hz > 0.0)) throw Error(ErrorCode::kInvalidSpec, "sampling rate must be positive");
  const BeatModel model(waveform);
  const auto n = static_cast<std::size_t>(std::lround(waveform.duration_s * sampling_rate_hz));
  if (n < 2) throw Error(ErrorCode::kInvalidSpec, "waveform shorter than two samples");

  GroundTruth truth;
  truth.signal.sample_period_s = 1.0 / sampling_rate_hz;
  truth.signal.lead_label = "II";
  truth.signal.samples_mV.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth.signal.samples_mV[i] = extraction::quantize_mV(model.value(static_cast<double>(i) / sampling_rate_hz));
  }

  // Each component's fiducial is the extremum of the summed curve within two
  // widths of its centre, located on a 0.25 ms grid.
  const double end = static_cast<double>(n - 1) / sampling_rate_hz;
  truth.fiducials.source = FeaturePointSet::Source::kGroundTruth;
  for (double tb : model.beats()) {
    for (const auto& c : model.components()) {
      const double centre = tb + c.offset_s;
      const double lo = centre - 2.0 * c.sigma_s;
      const double hi = centre + 2.0 * c.sigma_s;
      double best_t = centre;
      double best_v = model.value(centre);
      for (double t = lo; t <= hi; t += 0.00025) {
        const double v = model.value(t);
        if (c.amplitude > 0.0 ? v > best_v : v < best_v) {
          best_v = v;
          best_t = t;
        }
      }
      if (best_t >= 0.0 && best_t <= end) truth.fiducials.points.push_back({best_t, c.label});
    }
  }
  std::stable_sort(truth.fiducials.points.begin(), truth.fiducials.points.end(),
                   [](const FeaturePoint& a, const FeaturePoint& b) { return a.time_s < b.time_s; });
  return truth;
}

RenderedTrace render_synthetic_trace(const SyntheticTraceSpec& spec, std::uint64_t seed) {
  spec.check();
  const PaperParams& paper = spec.paper;
  const double fs = kSpeedMmPerS * paper.px_per_mm;
  GroundTruth truth = synthesize_ecg(spec.waveform, fs);
  truth.trace_height_px = paper.height_mm * paper.px_per_mm;
  truth.skew_deg = spec.distortions.rotation_deg;

  const int width = static_cast<int>(truth.signal.samples_mV.size());
  const int height = static_cast<int>(std::lround(truth.trace_height_px));
  RasterImage img(width, height, Rgb{255, 255, 255});

  const double pitch = paper.grid_mm * paper.px_per_mm;
  auto draw_grid = [&](bool major) {
    const Rgb color = major ? paper.major_color : paper.minor_color;
    const int thickness = major ? 2 : 1;
    for (int k = 0;; ++k) {
      const long pos = std::lround(k * pitch);
      if (pos >= std::max(width, height)) break;
      if ((k % paper.major_every == 0) != major) continue;
      for (int d = 0; d < thickness; ++d) {
        const long p = pos + d;
        if (p < width) {
          for (int y = 0; y < height; ++y) img.at(static_cast<int>(p), y) = color;
        }
        if (p < height) {
          for (int x = 0; x < width; ++x) img.at(x, static_cast<int>(p)) = color;
        }
      }
    }
  };
  draw_grid(false);
  draw_grid(true);

  // Each column covers the curve over [c - 1/2, c + 1/2] widened by half
  // the stroke.
  const BeatModel model(spec.waveform);
  const double baseline = paper.baseline_fraction * height;
  const double px_per_mV = kGainMmPerMv * paper.px_per_mm;
  const double half_stroke = paper.stroke_width_px / 2.0;
  auto row_at = [&](double column) { return baseline - model.value(column / fs) * px_per_mV; };
  for (int c = 0; c < width; ++c) {
    const double y0 = row_at(c - 0.5);
    const double y1 = row_at(c);
    const double y2 = row_at(c + 0.5);
    const double lo = std::min({y0, y1, y2}) - half_stroke;
    const double hi = std::max({y0, y1, y2}) + half_stroke;
    long first = static_cast<long>(std::ceil(lo));
    long last = static_cast<long>(std::floor(hi));
    if (first > last) first = last = std::lround(y1);
    first = std::max(first, 0L);
    last = std::min(last, static_cast<long>(height) - 1);
    for (long y = first; y <= last; ++y) img.at(c, static_cast<int>(y)) = paper.ink_color;
  }

  const Distortions& d = spec.distortions;
  if (d.rotation_deg != 0.0) img = imaging::rotate(img, d.rotation_deg);

  if (d.lighting_gradient > 0.0 || d.noise_sd > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, d.noise_sd > 0.0 ? d.noise_sd : 1.0);
    const double span = std::max(1, img.width() - 1);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        Rgb& px = img.at(x, y);
        const double shade = 1.0 - d.lighting_gradient * x / span;
        double ch[3] = {px.r * shade, px.g * shade, px.b * shade};
        if (d.noise_sd > 0.0) {
          for (double& v : ch) v += noise(rng);
        }
        px = Rgb{clamp_channel(ch[0]), clamp_channel(ch[1]), clamp_channel(ch[2])};
      }
    }
  }

  if (d.jpeg_quality) img = imaging::load_image(imaging::encode_jpeg(img, *d.jpeg_quality));
  return {std::move(img), std::move(truth)};
}

json to_json(const SyntheticTraceSpec& spec) {
  const auto& w = spec.waveform;
  const auto& p = spec.paper;
  const auto& d = spec.distortions;
  return {
      {"waveform",
       {{"heart_rate_bpm", w.heart_rate_bpm},
        {"duration_s", w.duration_s},
        {"first_beat_s", w.first_beat_s},
        {"p", component_json(w.p)},
        {"q", component_json(w.q)},
        {"r", component_json(w.r)},
        {"s", component_json(w.s)},
        {"t", component_json(w.t)},
        {"missing_beats", w.missing_beats}}},
      {"paper",
       {{"grid_mm", p.grid_mm},
        {"major_every", p.major_every},
        {"minor_color", color_json(p.minor_color)},
        {"major_color", color_json(p.major_color)},
        {"ink_color", color_json(p.ink_color)},
        {"stroke_width_px", p.stroke_width_px},
        {"px_per_mm", p.px_per_mm},
        {"height_mm", p.height_mm},
        {"baseline_fraction", p.baseline_fraction}}},
      {"distortions",
       {{"rotation_deg", d.rotation_deg},
        {"noise_sd", d.noise_sd},
        {"lighting_gradient", d.lighting_gradient},
        {"jpeg_quality", d.jpeg_quality ? json(*d.jpeg_quality) : json(nullptr)}}},
  };
}

SyntheticTraceSpec spec_from_json(const json& j) {
  SyntheticTraceSpec spec;
  reject_unknown(j, {"waveform", "paper", "distortions"}, "spec");
  if (auto it = j.find("waveform"); it != j.end()) {
    reject_unknown(*it,
                   {"heart_rate_bpm", "duration_s", "first_beat_s", "p", "q", "r", "s", "t", "missing_beats"},
                   "waveform");
    auto& w = spec.waveform;
    read(*it, "heart_rate_bpm", w.heart_rate_bpm);
    read(*it, "duration_s", w.duration_s);
    read(*it, "first_beat_s", w.first_beat_s);
    read_component(*it, "p", w.p);
    read_component(*it, "q", w.q);
    read_component(*it, "r", w.r);
    read_component(*it, "s", w.s);
    read_component(*it, "t", w.t);
    read(*it, "missing_beats", w.missing_beats);
  }
  if (auto it = j.find("paper"); it != j.end()) {
    reject_unknown(*it,
                   {"grid_mm", "major_every", "minor_color", "major_color", "ink_color", "stroke_width_px",
                    "px_per_mm", "height_mm", "baseline_fraction"},
                   "paper");
    auto& p = spec.paper;
    read(*it, "grid_mm", p.grid_mm);
    read(*it, "major_every", p.major_every);
    read_color(*it, "minor_color", p.minor_color);
    read_color(*it, "major_color", p.major_color);
    read_color(*it, "ink_color", p.ink_color);
    read(*it, "stroke_width_px", p.stroke_width_px);
    read(*it, "px_per_mm", p.px_per_mm);
    read(*it, "height_mm", p.height_mm);
    read(*it, "baseline_fraction", p.baseline_fraction);
  }
  if (auto it = j.find("distortions"); it != j.end()) {
    reject_unknown(*it, {"rotation_deg", "noise_sd", "lighting_gradient", "jpeg_quality"}, "distortions");
    auto& d = spec.distortions;
    read(*it, "rotation_deg", d.rotation_deg);
    read(*it, "noise_sd", d.noise_sd);
    read(*it, "lighting_gradient", d.lighting_gradient);
    if (auto q = it->find("jpeg_quality"); q != it->end() && !q->is_null()) {
      int quality = 0;
      read(*it, "jpeg_quality", quality);
      d.jpeg_quality = quality;
    }
  }
  spec.check();
  return spec;
}

}  // namespace ecg::evaluation
