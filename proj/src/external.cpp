#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "gfuzz/engine.hpp"
#include "gfuzz/error.hpp"
#include "gfuzz/io.hpp"

namespace gfuzz {

namespace fs = std::filesystem;

namespace {

std::string tensor_name(const char* prefix, std::size_t i) { return std::string(prefix) + std::to_string(i) + ".tns"; }

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "gfuzz-req-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw InfraError("cannot create request directory");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

EngineFailure parse_status(const fs::path& file) {
  try {
    const auto j = nlohmann::json::parse(read_file(file));
    EngineFailure f;
    const auto stage = j.at("stage").get<std::string>();
    if (stage == "convert") f.stage = Stage::kConvert;
    else if (stage == "infer") f.stage = Stage::kInfer;
    else throw InfraError("status.json: unknown stage '" + stage + "'");
    f.code = j.at("code").get<int>();
    f.message = j.at("message").get<std::string>();
    f.kind = j.value("kind", f.stage == Stage::kConvert ? std::string("reject") : std::string("fault"));
    f.op = j.value("op", std::string());
    f.node = j.value("node", -1);
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw InfraError(std::string("malformed status.json: ") + e.what());
  }
}

}  // namespace

void write_request(const fs::path& dir, const ModelSpec& m, const std::vector<Tensor>& inputs) {
  write_file(dir / "model.json", serialize_model(m));
  for (std::size_t i = 0; i < inputs.size(); ++i) write_file(dir / tensor_name("input_", i), encode_tns(inputs[i]));
}

ExecResult run_external(const ModelSpec& m, const std::vector<Tensor>& inputs, const std::string& cmd, double timeout_s) {
  TempDir tmp;
  write_request(tmp.path(), m, inputs);
  const std::string line = cmd + " --dir " + shell_quote(tmp.path().string());
  const std::string log = (tmp.path() / "engine.log").string();

  const pid_t pid = fork();
  if (pid < 0) throw InfraError("fork failed");
  if (pid == 0) {
    setpgid(0, 0);
    const int fd = open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      dup2(fd, 1);
      dup2(fd, 2);
      close(fd);
    }
    execl("/bin/sh", "sh", "-c", line.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  int wstatus = 0;
  bool timed_out = false;
  for (;;) {
    const pid_t r = waitpid(pid, &wstatus, WNOHANG);
    if (r == pid) break;
    if (r < 0) throw InfraError("waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &wstatus, 0);
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }

  ExecResult result;
  const fs::path status = tmp.path() / "status.json";
  if (timed_out) {
    result.failure = EngineFailure{Stage::kInfer, 0, "timeout", "no reply within deadline", -1, ""};
    return result;
  }
  if (WIFSIGNALED(wstatus)) {
    const int sig = WTERMSIG(wstatus);
    result.failure = EngineFailure{Stage::kInfer, 128 + sig, "crash", "terminated by signal " + std::to_string(sig), -1, ""};
    return result;
  }
  const int code = WEXITSTATUS(wstatus);
  if (code != 0) {
    if (fs::exists(status)) {
      result.failure = parse_status(status);
    } else if (code == 126 || code == 127) {
      throw InfraError("engine command could not be run: " + cmd);
    } else {
      result.failure = EngineFailure{Stage::kInfer, code, "crash", "exit status " + std::to_string(code), -1, ""};
    }
    return result;
  }
  const std::size_t n_out = m.outputs().size();
  for (std::size_t i = 0; i < n_out; ++i) {
    const fs::path p = tmp.path() / tensor_name("output_", i);
    if (!fs::exists(p)) throw InfraError("engine reply is missing " + p.filename().string());
    try {
      result.outputs.push_back(decode_tns(read_file(p)));
    } catch (const ParseError& e) {
      throw InfraError("engine reply " + p.filename().string() + ": " + e.what());
    }
  }
  return result;
}

int serve_request(const fs::path& dir, Backend backend, const OptimizedOptions& options) {
  auto reply = [&](const EngineFailure& f) {
    nlohmann::json j{{"stage", stage_name(f.stage)}, {"code", f.code}, {"message", f.message}, {"kind", f.kind}};
    if (!f.op.empty()) j["op"] = f.op;
    if (f.node >= 0) j["node"] = f.node;
    write_file(dir / "status.json", j.dump() + "\n");
  };

  ModelSpec m;
  std::vector<Tensor> inputs;
  try {
    m = load_model(dir / "model.json");
    for (std::size_t i = 0; i < m.input_shapes.size(); ++i) inputs.push_back(decode_tns(read_file(dir / tensor_name("input_", i))));
  } catch (const Error& e) {
    reply(EngineFailure{Stage::kConvert, 2, "reject", e.what(), -1, ""});
    return 2;
  }
  const ExecResult r = backend == Backend::kReference ? run_reference(m, inputs) : run_optimized(m, inputs, options);
  if (r.failure) {
    reply(*r.failure);
    const int code = r.failure->code & 0xff;
    return code == 0 ? 1 : code;
  }
  for (std::size_t i = 0; i < r.outputs.size(); ++i) write_file(dir / tensor_name("output_", i), encode_tns(r.outputs[i]));
  write_file(dir / "status.json", nlohmann::json{{"stage", "infer"}, {"code", 0}, {"message", "ok"}}.dump() + "\n");
  return 0;
}

}  // namespace gfuzz
