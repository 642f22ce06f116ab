#include "cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>
#include <sys/stat.h>

#include "ecg/analysis.hpp"
#include "ecg/cloudstore.hpp"
#include "ecg/evaluation.hpp"
#include "ecg/imaging.hpp"
#include "ecg/pipeline.hpp"

namespace ecg::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool verbose = false;
};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

json read_json_file(const std::string& path) {
  const auto bytes = imaging::read_file(path);
  json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kSchemaError, path + " is not valid JSON");
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  imaging::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Writes to `path`, or to standard output when no path was given.
void emit(const std::optional<std::string>& path, const std::string& text) {
  if (path) {
    write_text(*path, text);
  } else {
    std::cout << text << std::flush;
  }
}

pipeline::PipelineConfig load_config(const Globals& g) {
  pipeline::PipelineConfig cfg;
  if (!g.config_path.empty()) cfg = pipeline::merge_config(cfg, read_json_file(g.config_path));
  return cfg;
}

imaging::CropRect parse_crop(const std::string& text) {
  imaging::CropRect r;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d,%d,%d,%d%c", &r.x, &r.y, &r.w, &r.h, &tail) != 4) {
    throw Error(ErrorCode::kInvalidParams, "--crop expects x,y,w,h");
  }
  return r;
}

analysis::FilterSpec parse_filter(const std::string& text) {
  if (text.rfind("sg:", 0) == 0) {
    int window = 0;
    int order = 0;
    char tail = 0;
    if (std::sscanf(text.c_str() + 3, "%d:%d%c", &window, &order, &tail) != 2) {
      throw Error(ErrorCode::kInvalidParams, "--filter sg:WINDOW:ORDER");
    }
    return analysis::FilterSpec::savitzky_golay(window, order);
  }
  if (text.rfind("fir:", 0) == 0) {
    std::vector<double> taps;
    std::string rest = text.substr(4);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const std::size_t comma = std::min(rest.find(',', pos), rest.size());
      const std::string item = rest.substr(pos, comma - pos);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (item.empty() || used != item.size()) throw Error(ErrorCode::kInvalidParams, "--filter fir:c0,c1,...");
      taps.push_back(v);
      pos = comma + 1;
    }
    return analysis::FilterSpec::fir(std::move(taps));
  }
  throw Error(ErrorCode::kInvalidParams, "--filter expects sg:WINDOW:ORDER or fir:c0,c1,...");
}

std::string password_from(const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("EHEALTH_PASSWORD"); env && *env) return env;
  return {};
}

std::string prompt_password() {
  std::cerr << "password: " << std::flush;
  std::string line;
  std::getline(std::cin, line);
  return line;
}

// Reads a JSON list of corpus entries, or a single spec object. Entries
// without a seed get base_seed + index.
std::vector<evaluation::CorpusItem> read_corpus(const std::string& path, std::uint64_t base_seed) {
  json j = read_json_file(path);
  if (j.is_object()) {
    json entry = j.contains("spec") ? j : json{{"spec", j}};
    j = json::array({entry});
  }
  if (!j.is_array()) throw Error(ErrorCode::kInvalidSpec, "corpus must be a JSON list or a spec object");
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_object() && !j[i].contains("seed")) j[i]["seed"] = base_seed + i;
    if (j[i].is_object() && !j[i].contains("name")) j[i]["name"] = fs::path(path).stem().string() + "_" + std::to_string(i);
  }
  return evaluation::corpus_from_json(j);
}

std::string format_summary(const analysis::AnalysisReport& r) {
  char line[160];
  std::string out;
  auto row = [&](const char* key, const std::string& value) {
    std::snprintf(line, sizeof line, "%-16s %s\n", key, value.c_str());
    out += line;
  };
  auto num = [](std::optional<double> v, const char* fmt) {
    if (!v) return std::string("-");
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, *v);
    return std::string(buf);
  };
  row("status", r.failure ? std::string(to_string(*r.failure)) : "ok");
  row("r_peaks", std::to_string(r.r_peaks.size()));
  row("heart_rate_bpm", num(r.heart_rate_bpm, "%.2f"));
  row("rr_std_ms", num(r.rr_std_ms, "%.2f"));
  std::size_t p = 0, q = 0, s = 0, t = 0;
  for (const auto& b : r.beats) {
    p += b.p.has_value();
    q += b.q.has_value();
    s += b.s.has_value();
    t += b.t.has_value();
  }
  row("beats P/Q/S/T", std::to_string(p) + "/" + std::to_string(q) + "/" + std::to_string(s) + "/" +
                           std::to_string(t));
  return out;
}

// ---------------------------------------------------------------------------
// Client session handling
// ---------------------------------------------------------------------------

struct ClientOptions {
  std::string server;
  std::string token_file;
  std::optional<std::string> user;
  std::optional<std::string> password;
};

std::pair<std::string, int> split_server(const std::string& server) {
  const auto colon = server.rfind(':');
  if (colon == std::string::npos || colon == 0) throw Error(ErrorCode::kInvalidParams, "--server expects HOST:PORT");
  int port = 0;
  try {
    port = std::stoi(server.substr(colon + 1));
  } catch (const std::exception&) {
    port = 0;
  }
  if (port <= 0 || port > 65535) throw Error(ErrorCode::kInvalidParams, "--server port must be in [1, 65535]");
  return {server.substr(0, colon), port};
}

std::string default_server() {
  if (const char* s = std::getenv("EHEALTH_SERVER"); s && *s) return s;
  const char* port = std::getenv("EHEALTH_PORT");
  return std::string("127.0.0.1:") + (port && *port ? port : "8080");
}

std::string default_token_file() {
  const char* home = std::getenv("HOME");
  return home && *home ? (fs::path(home) / ".ehealth_token").string() : std::string();
}

struct CachedToken {
  std::string server;
  std::string username;
  std::string token;
};

std::optional<CachedToken> read_token(const std::string& path) {
  if (path.empty() || !fs::exists(path)) return std::nullopt;
  try {
    const json j = read_json_file(path);
    return CachedToken{j.at("server").get<std::string>(), j.at("username").get<std::string>(),
                       j.at("token").get<std::string>()};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void save_token(const std::string& path, const std::string& server, const cloudstore::SessionToken& t) {
  if (path.empty()) throw Error(ErrorCode::kInvalidParams, "no token file: set HOME or pass --token-file");
  const json j = {{"server", server},
                  {"username", t.username},
                  {"token", t.token},
                  {"expires_at", cloudstore::format_timestamp(t.expires_at)}};
  write_text(path, j.dump(2) + "\n");
  ::chmod(path.c_str(), 0600);
}

cloudstore::SessionToken do_login(cloudstore::Client& client, const ClientOptions& o, const std::string& user,
                                  std::string password) {
  if (password.empty()) password = prompt_password();
  try {
    auto t = client.login(user, password);
    save_token(o.token_file, o.server, t);
    return t;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidCredentials || e.code() == ErrorCode::kUnauthorized) {
      throw Error(ErrorCode::kInvalidCredentials, "login failed: invalid username or password");
    }
    throw;
  }
}

// Runs `op` with the cached token. On 401 logs in once more, silently, if a
// password is at hand, then retries.
template <typename Op>
auto with_session(const ClientOptions& o, Op&& op) {
  const auto [host, port] = split_server(o.server);
  cloudstore::Client client(host, port);
  auto cached = read_token(o.token_file);
  if (cached && cached->server != o.server) cached.reset();
  const std::string user = o.user ? *o.user : (cached ? cached->username : std::string());
  const std::string password = password_from(o.password);

  std::string token;
  if (cached && (!o.user || *o.user == cached->username)) {
    token = cached->token;
  } else {
    if (user.empty() || password.empty()) {
      throw Error(ErrorCode::kUnauthorized, "not logged in: run 'login' or pass --user and --password");
    }
    token = do_login(client, o, user, password).token;
  }
  try {
    return op(client, token);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnauthorized || user.empty() || password.empty()) throw;
    spdlog::debug("token rejected, logging in again as {}", user);
    try {
      token = do_login(client, o, user, password).token;
    } catch (const Error&) {
      throw Error(ErrorCode::kUnauthorized, std::string("Unauthorized: ") + e.what() + "; re-login failed");
    }
    return op(client, token);
  }
}

void add_client_options(CLI::App* cmd, ClientOptions& o) {
  o.server = default_server();
  o.token_file = default_token_file();
  cmd->add_option("--server", o.server, "Server as HOST:PORT")->capture_default_str();
  cmd->add_option("--token-file", o.token_file, "Cached session token")->capture_default_str();
  cmd->add_option("--user", o.user, "Username for (re-)login");
  cmd->add_option("--password", o.password, "Password (or EHEALTH_PASSWORD)");
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct DigitizeArgs {
  std::string image;
  std::optional<std::string> output, overlay, csv, mask;
  bool no_deskew = false;
  bool strict_deskew = false;
  std::optional<double> deskew_range, deskew_step;
  std::optional<std::string> crop;
  std::optional<int> threshold;
  std::optional<int> se_length;
  std::optional<double> angle_step;
  std::optional<std::string> gap;
  std::optional<double> trace_height, height_cm, gain, speed, baseline;
  std::optional<std::string> lead, source_id;
};

int cmd_digitize(const Globals& g, const DigitizeArgs& a) {
  pipeline::PipelineConfig cfg = load_config(g);
  if (a.no_deskew) cfg.deskew = false;
  if (a.strict_deskew) cfg.strict_deskew = true;
  if (a.deskew_range) cfg.deskew_range_deg = *a.deskew_range;
  if (a.deskew_step) cfg.deskew_step_deg = *a.deskew_step;
  if (a.crop) cfg.crop = parse_crop(*a.crop);
  if (a.threshold) cfg.otsu_threshold = *a.threshold;
  if (a.se_length) cfg.se_length = *a.se_length;
  if (a.angle_step) cfg.angle_step_deg = *a.angle_step;
  if (a.gap) cfg = pipeline::merge_config(cfg, json{{"gap_strategy", *a.gap}});
  if (a.trace_height) cfg.calibration.trace_height_px = *a.trace_height;
  if (a.height_cm) cfg.calibration.physical_height_cm = *a.height_cm;
  if (a.gain) cfg.calibration.gain_mm_per_mV = *a.gain;
  if (a.speed) cfg.calibration.paper_speed_mm_per_s = *a.speed;
  if (a.baseline) cfg.calibration.baseline_row_px = *a.baseline;
  if (a.lead) cfg.lead_label = *a.lead;
  if (a.output) cfg.outputs.signal = a.output;
  if (a.overlay) cfg.outputs.overlay = a.overlay;
  if (a.csv) cfg.outputs.csv = a.csv;
  if (a.mask) cfg.outputs.mask = a.mask;
  cfg.check();

  const RasterImage photo = imaging::load_image_file(a.image);
  const std::string source = a.source_id.value_or(fs::path(a.image).filename().string());
  const auto result = pipeline::digitize(photo, cfg, source, cfg.outputs.overlay.has_value());
  if (result.skew_degenerate) spdlog::warn("no dominant skew angle found; assuming 0 deg");

  emit(cfg.outputs.signal, extraction::to_json(result.signal).dump(2) + "\n");
  if (cfg.outputs.csv) write_text(*cfg.outputs.csv, extraction::to_csv(result.signal));
  if (cfg.outputs.mask) imaging::write_file(*cfg.outputs.mask, imaging::encode_png(result.mask));
  if (cfg.outputs.overlay) imaging::write_file(*cfg.outputs.overlay, imaging::encode_png(*result.overlay));
  spdlog::info("skew {:.2f} deg, threshold {}, {} samples at {:.1f} Hz", result.skew_deg, result.threshold,
               result.signal.samples_mV.size(), result.signal.sampling_rate_hz());
  return kExitOk;
}

struct AnalyzeArgs {
  std::string signal;
  std::optional<std::string> output;
  std::vector<std::string> filters;
  bool no_filter = false;
};

int cmd_analyze(const Globals& g, const AnalyzeArgs& a) {
  pipeline::PipelineConfig cfg = load_config(g);
  if (a.no_filter) cfg.analysis.filter_chain = std::vector<analysis::FilterSpec>{};
  if (!a.filters.empty()) {
    std::vector<analysis::FilterSpec> chain;
    for (const auto& f : a.filters) chain.push_back(parse_filter(f));
    cfg.analysis.filter_chain = std::move(chain);
  }
  if (a.output) cfg.outputs.report = a.output;
  cfg.check();

  extraction::CalibratedSignal sig = extraction::signal_from_json(read_json_file(a.signal));
  extraction::validate(sig);
  const auto report = analysis::analyze(sig, cfg.analysis);
  emit(cfg.outputs.report, analysis::to_json(report).dump(2) + "\n");
  (cfg.outputs.report ? std::cout : std::cerr) << format_summary(report);
  if (report.failure) {
    spdlog::error("analysis incomplete: {}", to_string(*report.failure));
    return kExitAnalysis;
  }
  return kExitOk;
}

int cmd_synth(const Globals& g, const std::string& spec_path, const std::string& out_dir) {
  const auto corpus = read_corpus(spec_path, g.seed);
  fs::create_directories(out_dir);
  for (const auto& item : corpus) {
    const auto rendered = evaluation::render_synthetic_trace(item.spec, item.seed);
    const fs::path base = fs::path(out_dir) / item.name;
    imaging::write_file(base.string() + ".png", imaging::encode_png(rendered.image));
    json fiducials = json::array();
    for (const auto& p : rendered.truth.fiducials.points) {
      fiducials.push_back({{"label", std::string(1, evaluation::to_char(p.label))}, {"time_s", p.time_s}});
    }
    const json truth = {{"name", item.name},
                        {"seed", item.seed},
                        {"spec", evaluation::to_json(item.spec)},
                        {"skew_deg", rendered.truth.skew_deg},
                        {"trace_height_px", rendered.truth.trace_height_px},
                        {"signal", extraction::to_json(rendered.truth.signal)},
                        {"fiducials", std::move(fiducials)}};
    write_text(base.string() + ".truth.json", truth.dump(2) + "\n");
    std::cout << base.string() << ".png\n";
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string corpus;
  std::optional<std::string> output;
  std::optional<double> bound, r_tol, wave_tol;
  bool no_deskew = false;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  evaluation::EvaluationOptions options;
  options.pipeline = load_config(g);
  if (a.no_deskew) options.pipeline.deskew = false;
  if (a.bound) options.success_rmse_mV = *a.bound;
  if (a.r_tol) options.tolerances.r_s = *a.r_tol;
  if (a.wave_tol) options.tolerances.wave_s = *a.wave_tol;
  if (!(options.success_rmse_mV >= 0.0) || !(options.tolerances.r_s > 0.0) || !(options.tolerances.wave_s > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "bound must be >= 0 and tolerances > 0");
  }
  const auto corpus = read_corpus(a.corpus, g.seed);
  const auto report = evaluation::evaluate_pipeline(corpus, options);
  if (a.output) write_text(*a.output, evaluation::to_json(report).dump(2) + "\n");
  std::cout << evaluation::format_table(report);
  return kExitOk;
}

struct ServeArgs {
  std::optional<int> port;
  std::optional<std::string> host, data_dir, credentials;
  std::optional<int> ttl_hours;
};

cloudstore::ServiceConfig service_config(const ServeArgs& a) {
  auto cfg = cloudstore::ServiceConfig::from_env(cloudstore::ServiceConfig{});
  if (a.port) cfg.port = *a.port;
  if (a.host) cfg.host = *a.host;
  if (a.data_dir) cfg.data_dir = *a.data_dir;
  if (a.credentials) cfg.credentials_path = *a.credentials;
  if (a.ttl_hours) {
    if (*a.ttl_hours <= 0) throw Error(ErrorCode::kInvalidParams, "--ttl-hours must be positive");
    cfg.token_ttl = std::chrono::hours(*a.ttl_hours);
  }
  return cfg;
}

int cmd_serve(const Globals& g, const ServeArgs& a) {
  auto cfg = service_config(a);
  cfg.analysis = load_config(g).analysis;
  // Block termination signals before any thread starts, then wait for one.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  cloudstore::TraceService service(cfg);
  cloudstore::HttpServer server(service);
  const int port = server.start(cfg.host, cfg.port);
  spdlog::info("serving {} on {}:{}", cfg.data_dir.string(), cfg.host, port);
  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {} received, shutting down", sig);
  server.stop();
  return kExitOk;
}

int cmd_adduser(const ServeArgs& a, const std::string& user, const std::optional<std::string>& password_flag) {
  const auto cfg = service_config(a);
  std::string password = password_from(password_flag);
  if (password.empty()) password = prompt_password();
  const fs::path path = cfg.resolved_credentials();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto store = cloudstore::CredentialStore::load(path, cfg.hash_params);
  store.add_user(user, password);
  store.save(path);
  spdlog::info("user '{}' saved to {}", user, path.string());
  return kExitOk;
}

int cmd_login(const ClientOptions& o) {
  if (!o.user) throw Error(ErrorCode::kInvalidParams, "login needs --user");
  const auto [host, port] = split_server(o.server);
  cloudstore::Client client(host, port);
  const auto t = do_login(client, o, *o.user, password_from(o.password));
  spdlog::info("logged in as {} until {}", t.username, cloudstore::format_timestamp(t.expires_at));
  return kExitOk;
}

int cmd_upload(const ClientOptions& o, const std::string& path, const std::optional<std::string>& patient,
               const std::optional<std::string>& lead) {
  json input = read_json_file(path);
  json body = input.is_object() && input.contains("signal") ? input : json{{"signal", input}};
  body.erase("id");
  body.erase("created_at");
  body.erase("schema_version");
  if (patient) body["patient_ref"] = *patient;
  if (lead) body["lead_label"] = *lead;
  const std::string id =
      with_session(o, [&](cloudstore::Client& c, const std::string& token) { return c.upload(token, body); });
  std::cout << id << "\n";
  return kExitOk;
}

int cmd_fetch(const ClientOptions& o, const std::string& id, const std::optional<std::string>& out) {
  const std::string body =
      with_session(o, [&](cloudstore::Client& c, const std::string& token) { return c.fetch(token, id); });
  emit(out, body);
  if (!out) std::cout << "\n";
  return kExitOk;
}

std::string hr_text(std::optional<double> hr) {
  if (!hr) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *hr);
  return buf;
}

int cmd_list(const ClientOptions& o, const std::optional<std::string>& patient, bool as_json) {
  const auto summaries =
      with_session(o, [&](cloudstore::Client& c, const std::string& token) { return c.list(token, patient); });
  if (as_json) {
    json arr = json::array();
    for (const auto& s : summaries) arr.push_back(cloudstore::to_json(s));
    std::cout << arr.dump(2) << "\n";
    return kExitOk;
  }
  std::printf("%-10s %-24s %-16s %-6s %s\n", "id", "created_at", "patient_ref", "lead", "HR");
  for (const auto& s : summaries) {
    std::printf("%-10s %-24s %-16s %-6s %s\n", s.id.c_str(), s.created_at.c_str(), s.patient_ref.c_str(),
                s.lead_label.c_str(), hr_text(s.heart_rate_bpm).c_str());
  }
  return kExitOk;
}

void setup_logging(bool verbose) {
  static auto logger = [] {
    auto l = spdlog::stderr_logger_mt("ecg");
    l->set_pattern("%^%l%$: %v");
    spdlog::set_default_logger(l);
    return l;
  }();
  logger->set_level(verbose ? spdlog::level::debug : spdlog::level::info);
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyMask:
    case ErrorCode::kDegenerateHistogram:
    case ErrorCode::kAllGaps: return kExitEmptyMask;
    case ErrorCode::kDegenerateImage: return kExitDegenerateImage;
    case ErrorCode::kSignalTooShort:
    case ErrorCode::kSamplingRateUnsupported:
    case ErrorCode::kTooFewPeaks:
    case ErrorCode::kNoPeaks: return kExitAnalysis;
    case ErrorCode::kNetworkError: return kExitNetwork;
    case ErrorCode::kUnauthorized:
    case ErrorCode::kInvalidCredentials: return kExitAuth;
    default: return kExitInvalidInput;
  }
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"ECG paper-trace digitizer, analyzer and trace store client"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline configuration (JSON)");
  app.add_option("--seed", g.seed, "Seed for synthetic data");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");

  DigitizeArgs dg;
  auto* digitize = app.add_subcommand("digitize", "Extract a calibrated signal from a trace photograph");
  digitize->add_option("image", dg.image, "PNG or JPEG photograph")->required();
  digitize->add_option("-o,--output", dg.output, "Signal JSON (default: stdout)");
  digitize->add_option("--overlay", dg.overlay, "Verification overlay PNG");
  digitize->add_option("--csv", dg.csv, "Signal CSV");
  digitize->add_option("--mask", dg.mask, "Cleaned binary mask PNG");
  digitize->add_flag("--no-deskew", dg.no_deskew, "Skip skew correction");
  digitize->add_flag("--strict-deskew", dg.strict_deskew, "Fail when no skew angle stands out");
  digitize->add_option("--deskew-range", dg.deskew_range, "Skew search half-range, degrees");
  digitize->add_option("--deskew-step", dg.deskew_step, "Skew search step, degrees");
  digitize->add_option("--crop", dg.crop, "Crop after deskew: x,y,w,h");
  digitize->add_option("--threshold", dg.threshold, "Fixed gray threshold instead of Otsu");
  digitize->add_option("--se-length", dg.se_length, "Structuring element length, pixels");
  digitize->add_option("--angle-step", dg.angle_step, "Structuring element angle step, degrees");
  digitize->add_option("--gap", dg.gap, "Gap filling: repeat_previous or linear_interpolate");
  digitize->add_option("--trace-height", dg.trace_height, "Trace area height, pixels");
  digitize->add_option("--height-cm", dg.height_cm, "Trace area height on paper, cm");
  digitize->add_option("--gain", dg.gain, "Gain, mm/mV");
  digitize->add_option("--speed", dg.speed, "Paper speed, mm/s");
  digitize->add_option("--baseline", dg.baseline, "0 mV row, pixels");
  digitize->add_option("--lead", dg.lead, "Lead label");
  digitize->add_option("--source-id", dg.source_id, "Source id stored with the signal");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Filter, detect R peaks and delineate waves");
  analyze->add_option("signal", an.signal, "Signal JSON")->required();
  analyze->add_option("-o,--output", an.output, "Report JSON (default: stdout)");
  analyze->add_option("--filter", an.filters, "sg:WINDOW:ORDER or fir:c0,c1,... (repeatable, in order)");
  analyze->add_flag("--no-filter", an.no_filter, "Skip smoothing");

  std::string synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Render synthetic trace photographs with ground truth");
  synth->add_option("spec", synth_spec, "Spec object or corpus list (JSON)")->required();
  synth->add_option("-d,--out-dir", synth_out, "Output directory")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Digitize and score a synthetic corpus");
  evaluate->add_option("corpus", ev.corpus, "Corpus JSON")->required();
  evaluate->add_option("-o,--output", ev.output, "Report JSON");
  evaluate->add_option("--bound", ev.bound, "Success bound on amplitude RMSE, mV");
  evaluate->add_option("--r-tolerance", ev.r_tol, "R matching tolerance, s");
  evaluate->add_option("--wave-tolerance", ev.wave_tol, "P/Q/S/T matching tolerance, s");
  evaluate->add_flag("--no-deskew", ev.no_deskew, "Skip skew correction");

  ServeArgs sv;
  auto add_server_options = [&sv](CLI::App* cmd) {
    cmd->add_option("--data-dir", sv.data_dir, "Record directory (EHEALTH_DATA_DIR)");
    cmd->add_option("--credentials", sv.credentials, "Credentials file (EHEALTH_CREDENTIALS)");
  };
  auto* serve = app.add_subcommand("serve", "Run the trace store");
  serve->add_option("--port", sv.port, "Port (EHEALTH_PORT)");
  serve->add_option("--host", sv.host, "Bind address");
  serve->add_option("--ttl-hours", sv.ttl_hours, "Token lifetime (EHEALTH_TOKEN_TTL_HOURS)");
  add_server_options(serve);

  std::string new_user;
  std::optional<std::string> new_password;
  auto* adduser = app.add_subcommand("adduser", "Create or reset a store account");
  adduser->add_option("username", new_user, "Account name")->required();
  adduser->add_option("--password", new_password, "Password (or EHEALTH_PASSWORD, or stdin)");
  add_server_options(adduser);

  ClientOptions co;
  auto* login = app.add_subcommand("login", "Log in and cache a session token");
  add_client_options(login, co);

  std::string upload_path;
  std::optional<std::string> patient, lead, list_patient, fetch_out;
  auto* upload = app.add_subcommand("upload", "Upload a signal");
  upload->add_option("signal", upload_path, "Signal JSON or record JSON")->required();
  upload->add_option("--patient", patient, "Patient reference");
  upload->add_option("--lead", lead, "Lead label");
  add_client_options(upload, co);

  std::string fetch_id;
  auto* fetch = app.add_subcommand("fetch", "Download a record");
  fetch->add_option("id", fetch_id, "Record id")->required();
  fetch->add_option("-o,--output", fetch_out, "Write the record here (default: stdout)");
  add_client_options(fetch, co);

  bool list_json = false;
  auto* list = app.add_subcommand("list", "List stored records");
  list->add_option("--patient", list_patient, "Exact patient reference");
  list->add_flag("--json", list_json, "JSON output");
  add_client_options(list, co);

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  setup_logging(g.verbose);

  try {
    if (digitize->parsed()) return cmd_digitize(g, dg);
    if (analyze->parsed()) return cmd_analyze(g, an);
    if (synth->parsed()) return cmd_synth(g, synth_spec, synth_out);
    if (evaluate->parsed()) return cmd_evaluate(g, ev);
    if (serve->parsed()) return cmd_serve(g, sv);
    if (adduser->parsed()) return cmd_adduser(sv, new_user, new_password);
    if (login->parsed()) return cmd_login(co);
    if (upload->parsed()) return cmd_upload(co, upload_path, patient, lead);
    if (fetch->parsed()) return cmd_fetch(co, fetch_id, fetch_out);
    if (list->parsed()) return cmd_list(co, list_patient, list_json);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInvalidInput;
  }
  return kExitUsage;
}

}  // namespace ecg::cli
