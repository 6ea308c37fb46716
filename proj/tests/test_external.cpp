#include <gtest/gtest.h>

#include <sys/stat.h>

#include <chrono>
#include <filesystem>

#include "fixtures.hpp"
#include "gfuzz/engine.hpp"
#include "gfuzz/error.hpp"

using namespace gfuzz;
using fixtures::ModelBuilder;
namespace fs = std::filesystem;

namespace {

// Writes an executable shell script that receives "--dir <dir>".
std::string script(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "gfuzz-doubles";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  write_file(p, "#!/bin/sh\nd=\"$2\"\n" + body + "\n");
  chmod(p.c_str(), 0755);
  return p.string();
}

ModelSpec identity_model() {
  ModelBuilder b;
  const int p = b.input({1, 3, 3, 2});
  b.add("Reshape", {{"shape", std::vector<std::int64_t>{1, 3, 3, 2}}}, {p});
  return b.build(5);
}

ModelSpec depthwise_model() {
  ModelBuilder b;
  const int p = b.input({1, 6, 6, 2});
  b.add("DepthwiseConv2d", fixtures::depthwise_params(1, 3, 2, 2), {p});
  return b.build(5);
}

const std::string kEngine = std::string(GFUZZ_BIN) + " engine";

}  // namespace

TEST(External, EchoDoubleRoundTripsTensorsByteExactly) {
  const std::string cmd = script("echo.sh", "cp \"$d/input_0.tns\" \"$d/output_0.tns\"");
  const ModelSpec m = identity_model();
  const auto in = synthesize_inputs(m);
  const auto r = run_external(m, in, cmd, 10);
  ASSERT_FALSE(r.failure);
  ASSERT_EQ(r.outputs.size(), 1u);
  EXPECT_EQ(encode_tns(r.outputs[0]), encode_tns(in[0]));
  TrialConfig cfg;
  cfg.engine_cmd = cmd;
  EXPECT_EQ(run_trial(m, cfg).status, Status::kDCP);
}

TEST(External, BuiltinEngineFileModeLoopback) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ModelSpec m = fixtures::campaign_model(seed, 2, 6);
    const auto in = synthesize_inputs(m);
    const auto ext = run_external(m, in, kEngine + " --backend reference", 30);
    const auto ref = run_reference(m, in);
    ASSERT_FALSE(ext.failure);
    ASSERT_EQ(ext.outputs.size(), ref.outputs.size());
    for (std::size_t i = 0; i < ref.outputs.size(); ++i) EXPECT_TRUE(bit_equal(ext.outputs[i], ref.outputs[i]));
  }
}

TEST(External, ConvertFailureDoubleIsMcf) {
  const std::string cmd = script(
      "convert_fail.sh",
      "printf '{\"stage\":\"convert\",\"code\":108,\"message\":\"writeFb.cpp:108: Check failed\",\"op\":\"DepthwiseConv2d\"}' "
      "> \"$d/status.json\"\nexit 1");
  TrialConfig cfg;
  cfg.engine_cmd = cmd;
  const auto o = run_trial(depthwise_model(), cfg);
  EXPECT_EQ(o.status, Status::kMCF);
  EXPECT_EQ(o.dedup_key, "MCF|convert|108|DepthwiseConv2d");
}

TEST(External, BuiltinSeededConvertFailureThroughTheWire) {
  TrialConfig cfg;
  cfg.engine_cmd = kEngine + " --backend optimized --bug-mask convert-dilated-depthwise";
  const auto o = run_trial(depthwise_model(), cfg);
  EXPECT_EQ(o.status, Status::kMCF);
  EXPECT_EQ(o.dedup_key, "MCF|convert|108|DepthwiseConv2d");
}

TEST(External, HangDoubleTimesOut) {
  const std::string cmd = script("hang.sh", "sleep 30");
  TrialConfig cfg;
  cfg.engine_cmd = cmd;
  cfg.timeout_s = 0.5;
  const auto t0 = std::chrono::steady_clock::now();
  const auto o = run_trial(identity_model(), cfg);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(o.status, Status::kIF);
  ASSERT_TRUE(o.failure);
  EXPECT_EQ(o.failure->kind, "timeout");
  EXPECT_LT(elapsed, 5.0);
}

TEST(External, CrashDoubleIsIf) {
  const std::string cmd = script("crash.sh", "kill -SEGV $$");
  TrialConfig cfg;
  cfg.engine_cmd = cmd;
  const auto o = run_trial(identity_model(), cfg);
  EXPECT_EQ(o.status, Status::kIF);
  EXPECT_EQ(o.failure->kind, "crash");
}

TEST(External, InferFailureStatusIsIf) {
  const std::string cmd = script(
      "infer_fail.sh", "printf '{\"stage\":\"infer\",\"code\":134,\"message\":\"abort\",\"kind\":\"abort\"}' > \"$d/status.json\"\nexit 134");
  TrialConfig cfg;
  cfg.engine_cmd = cmd;
  const auto o = run_trial(identity_model(), cfg);
  EXPECT_EQ(o.status, Status::kIF);
  EXPECT_EQ(o.dedup_key, "IF|abort|134|");
}

TEST(External, MalformedRepliesAreInfrastructureFaults) {
  const ModelSpec m = identity_model();
  const auto in = synthesize_inputs(m);
  EXPECT_THROW(run_external(m, in, script("silent.sh", "exit 0"), 10), InfraError);
  EXPECT_THROW(run_external(m, in, script("garbage.sh", "echo nope > \"$d/output_0.tns\""), 10), InfraError);
  EXPECT_THROW(run_external(m, in, script("badstatus.sh", "echo '{' > \"$d/status.json\"\nexit 3"), 10), InfraError);
  EXPECT_THROW(run_external(m, in, "/nonexistent/engine", 10), InfraError);
}

TEST(External, ServeRequestWritesReply) {
  const fs::path dir = fs::temp_directory_path() / "gfuzz-serve-test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const ModelSpec m = identity_model();
  write_request(dir, m, synthesize_inputs(m));
  EXPECT_EQ(serve_request(dir, Backend::kOptimized, {}), 0);
  EXPECT_TRUE(fs::exists(dir / "output_0.tns"));
  EXPECT_TRUE(fs::exists(dir / "status.json"));
  fs::remove_all(dir);
}
