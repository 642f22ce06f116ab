#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "ecg/cloudstore.hpp"
#include "ecg/evaluation.hpp"
#include "ecg/imaging.hpp"

namespace ecg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("ecg-cli-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  int ecg(std::vector<std::string> args) {
    args.insert(args.begin(), "ecg");
    return run(args);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }
  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  void write_signal(const std::string& name, std::vector<double> samples) const {
    extraction::CalibratedSignal sig;
    sig.samples_mV = std::move(samples);
    sig.sample_period_s = 0.004;
    write(name, extraction::to_json(sig).dump());
  }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(ecg({}), kExitUsage);
  EXPECT_EQ(ecg({"frobnicate"}), kExitUsage);
  EXPECT_EQ(ecg({"digitize"}), kExitUsage);
  EXPECT_EQ(ecg({"--help"}), kExitOk);
}

TEST_F(CliTest, BlankImageExitsThree) {
  imaging::write_file(path("blank.png"), imaging::encode_png(RasterImage(200, 120, Rgb{255, 255, 255})));
  EXPECT_EQ(ecg({"digitize", path("blank.png"), "-o", path("out.json")}), 3);
  EXPECT_EQ(ecg({"digitize", path("blank.png"), "--strict-deskew"}), 4);
  EXPECT_FALSE(fs::exists(dir_ / "out.json"));
  write("junk.png", "not an image");
  EXPECT_EQ(ecg({"digitize", path("junk.png")}), 2);
  EXPECT_EQ(ecg({"digitize", path("missing.png")}), 2);
}

TEST_F(CliTest, DigitizeWritesOutputs) {
  evaluation::SyntheticTraceSpec spec;
  spec.waveform.duration_s = 5.0;
  const auto rendered = evaluation::render_synthetic_trace(spec, 2);
  imaging::write_file(path("trace.png"), imaging::encode_png(rendered.image));
  ASSERT_EQ(ecg({"digitize", path("trace.png"), "-o", path("sig.json"), "--csv", path("sig.csv"), "--overlay",
                 path("overlay.png"), "--mask", path("mask.png"), "--lead", "II"}),
            kExitOk);
  const extraction::CalibratedSignal sig = extraction::signal_from_json(json::parse(read("sig.json")));
  EXPECT_EQ(sig.lead_label, "II");
  EXPECT_EQ(sig.samples_mV.size(), rendered.truth.signal.samples_mV.size());
  EXPECT_TRUE(fs::exists(dir_ / "overlay.png"));
  EXPECT_TRUE(fs::exists(dir_ / "mask.png"));
  EXPECT_EQ(read("sig.csv").rfind("time_s,", 0), 0u);

  ASSERT_EQ(ecg({"analyze", path("sig.json"), "-o", path("report.json")}), kExitOk);
  const analysis::AnalysisReport report = analysis::report_from_json(json::parse(read("report.json")));
  ASSERT_TRUE(report.heart_rate_bpm.has_value());
  EXPECT_NEAR(*report.heart_rate_bpm, 75.0, 1.0);
  EXPECT_EQ(ecg({"digitize", path("trace.png"), "--crop", "1,2"}), 2);
}

TEST_F(CliTest, AnalysisFailuresExitFive) {
  write_signal("short.json", std::vector<double>(250, 0.0));
  EXPECT_EQ(ecg({"analyze", path("short.json"), "-o", path("short.report.json")}), 5);
  // The partial report is still written.
  const json partial = json::parse(read("short.report.json"));
  EXPECT_EQ(partial["status"], "SignalTooShort");

  write_signal("flat.json", std::vector<double>(2500, 0.0));
  EXPECT_EQ(ecg({"analyze", path("flat.json"), "-o", path("flat.report.json")}), 5);
  EXPECT_EQ(ecg({"analyze", path("flat.json"), "--filter", "sg:4:2"}), 2);
  write("broken.json", "{\"samples_mV\": [1, 2]");
  EXPECT_EQ(ecg({"analyze", path("broken.json")}), 2);
}

TEST_F(CliTest, InvalidCorpusExitsTwo) {
  write("bad.json", R"([{"spec": {"waveform": {"heart_rate_bpm": -60}}}])");
  EXPECT_EQ(ecg({"evaluate", path("bad.json")}), 2);
  write("empty.json", "[]");
  EXPECT_EQ(ecg({"evaluate", path("empty.json")}), 2);
}

TEST_F(CliTest, EvaluateIsDeterministic) {
  write("corpus.json", R"([{"spec": {"waveform": {"duration_s": 6}}}, {"spec": {"waveform": {"duration_s": 6, "heart_rate_bpm": 90}, "distortions": {"rotation_deg": 3, "noise_sd": 4}}}])");
  ASSERT_EQ(ecg({"--seed", "7", "evaluate", path("corpus.json"), "-o", path("a.json")}), kExitOk);
  ASSERT_EQ(ecg({"--seed", "7", "evaluate", path("corpus.json"), "-o", path("b.json")}), kExitOk);
  EXPECT_EQ(read("a.json"), read("b.json"));
  const json report = json::parse(read("a.json"));
  EXPECT_EQ(report["items"].size(), 2u);

  ASSERT_EQ(ecg({"--seed", "7", "synth", path("corpus.json"), "-d", path("synth")}), kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "synth" / "corpus_0.png"));
  EXPECT_TRUE(fs::exists(dir_ / "synth" / "corpus_1.truth.json"));
}

TEST_F(CliTest, UploadFetchAgainstServer) {
  const fs::path data = dir_ / "data";
  ASSERT_EQ(ecg({"adduser", "alice", "--password", "pw", "--data-dir", data.string()}), kExitOk);

  cloudstore::ServiceConfig cfg;
  cfg.data_dir = data;
  cloudstore::TraceService service(cfg);
  cloudstore::HttpServer server(service);
  const int port = server.start("127.0.0.1", 0);
  const std::string server_arg = "127.0.0.1:" + std::to_string(port);
  const std::string token_file = path("token");

  evaluation::WaveformParams w;
  w.duration_s = 12.0;
  extraction::CalibratedSignal sig = evaluation::synthesize_ecg(w, 250.0).signal;
  for (double& v : sig.samples_mV) v = extraction::quantize_mV(v);
  write("sig.json", extraction::to_json(sig).dump());

  EXPECT_EQ(ecg({"login", "--server", server_arg, "--token-file", token_file, "--user", "alice", "--password", "bad"}), 7);
  EXPECT_EQ(ecg({"list", "--server", server_arg, "--token-file", token_file}), 7);
  ASSERT_EQ(ecg({"login", "--server", server_arg, "--token-file", token_file, "--user", "alice", "--password", "pw"}),
            kExitOk);
  EXPECT_EQ(fs::status(token_file).permissions() & fs::perms::all, fs::perms::owner_read | fs::perms::owner_write);

  testing::internal::CaptureStdout();
  const int rc = ecg({"upload", path("sig.json"), "--patient", "p7", "--server", server_arg, "--token-file", token_file});
  std::string id = testing::internal::GetCapturedStdout();
  ASSERT_EQ(rc, kExitOk);
  while (!id.empty() && std::isspace(static_cast<unsigned char>(id.back()))) id.pop_back();
  EXPECT_EQ(id, "00000001");

  ASSERT_EQ(ecg({"fetch", id, "-o", path("fetched.json"), "--server", server_arg, "--token-file", token_file}), kExitOk);
  const std::string token = cloudstore::Client("127.0.0.1", port).login("alice", "pw").token;
  EXPECT_EQ(read("fetched.json"), service.fetch(token, id));
  EXPECT_EQ(cloudstore::deserialize_trace(read("fetched.json")).signal, sig);
  EXPECT_EQ(ecg({"fetch", "00000077", "--server", server_arg, "--token-file", token_file}), 2);

  // A stale cached token is replaced by logging in again.
  write("token", "stale-token\n");
  EXPECT_EQ(ecg({"list", "--server", server_arg, "--token-file", token_file}), 7);
  EXPECT_EQ(ecg({"list", "--server", server_arg, "--token-file", token_file, "--user", "alice", "--password", "pw"}),
            kExitOk);
  EXPECT_EQ(read("token").find("stale-token"), std::string::npos);

  server.stop();
  EXPECT_EQ(ecg({"list", "--server", server_arg, "--token-file", token_file}), 6);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(ErrorCode::kEmptyMask), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::kDegenerateHistogram), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::kAllGaps), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::kDegenerateImage), 4);
  EXPECT_EQ(exit_code_for(ErrorCode::kSignalTooShort), 5);
  EXPECT_EQ(exit_code_for(ErrorCode::kTooFewPeaks), 5);
  EXPECT_EQ(exit_code_for(ErrorCode::kNetworkError), 6);
  EXPECT_EQ(exit_code_for(ErrorCode::kUnauthorized), 7);
  EXPECT_EQ(exit_code_for(ErrorCode::kInvalidSpec), 2);
}

}  // namespace
}  // namespace ecg::cli
