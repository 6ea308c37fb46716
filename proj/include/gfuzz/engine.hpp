#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfuzz/interp.hpp"
#include "gfuzz/shapecalc.hpp"

namespace gfuzz {

// ---- comparison ----

constexpr double kElementTolerance = 1e-3;
constexpr double kPassRatio = 0.999;
constexpr double kRelativeEpsilon = 1e-6;

bool element_agrees(double ref, double test);
// Fraction of agreeing elements; 0 on shape or dtype mismatch. Empty tensors agree.
double success_ratio(const Tensor& ref, const Tensor& test);

struct ComparisonReport {
  std::vector<double> ratios;  // one per output
  double re = 1.0;             // min over outputs
  bool pass() const { return re >= kPassRatio; }
};

// Arity mismatch yields re = 0.
ComparisonReport compare(const std::vector<Tensor>& ref, const std::vector<Tensor>& test);

// ---- external engines ----

// Writes model.json and input_<i>.tns into `dir`.
void write_request(const std::filesystem::path& dir, const ModelSpec& m, const std::vector<Tensor>& inputs);

// Runs `<cmd> --dir <tmp>` through /bin/sh and parses the reply. Timeouts and
// signals become infer failures; malformed replies throw InfraError.
ExecResult run_external(const ModelSpec& m, const std::vector<Tensor>& inputs, const std::string& cmd,
                        double timeout_s = 30.0);

enum class Backend { kReference, kOptimized };

// Serves one request directory with a built-in interpreter. Returns the
// process exit code: 0 on success, the failure code otherwise.
int serve_request(const std::filesystem::path& dir, Backend backend, const OptimizedOptions& options);

// ---- trials ----

enum class Status { kMCF, kIF, kDCF, kDCP };
std::string_view status_name(Status s);

struct TrialOutcome {
  Status status = Status::kDCP;
  std::string dedup_key;  // empty for DCP
  std::optional<EngineFailure> failure;
  std::vector<double> ratios;
  double re = 1.0;
  int worst_node = -1;
  std::string worst_op;
  std::set<Bug> culprits;  // defects that fired at the failing node
};

nlohmann::json outcome_json(const TrialOutcome& o);

struct TrialConfig {
  std::string engine_cmd;  // empty: built-in optimized interpreter
  double timeout_s = 30.0;
  BugMask bugs;
  bool fuse = true;
};

// Local structure class of a node, e.g. "Concat[multi-input]".
std::string structure_class(const ModelSpec& m, int node, bool fused);

// Reference vs engine under test. Throws GenerationError when the reference
// itself cannot run the model.
TrialOutcome run_trial(const ModelSpec& m, const TrialConfig& cfg);

// ---- registry ----

struct RegistryEntry {
  Status status = Status::kDCP;
  int first_model = -1;
  TrialOutcome first;
  int count = 0;
  std::set<Bug> defects;  // union of culprits over all occurrences
};

class ExceptionRegistry {
 public:
  // Returns true when the outcome opens a new entry. DCP is ignored.
  bool record(const TrialOutcome& o, int model_id);

  struct Totals {
    int dedup = 0;
    int raw = 0;
  };
  Totals totals(Status s) const;
  const std::map<std::string, RegistryEntry>& entries() const { return entries_; }
  std::set<Bug> detected() const;
  // Among DCF outcomes attributed to exactly {b}, the share of the most common key.
  std::optional<double> dedup_share(Bug b) const;

  nlohmann::json to_json() const;
  std::string table() const;

 private:
  std::map<std::string, RegistryEntry> entries_;
  std::map<Status, int> raw_;
  std::map<Bug, std::map<std::string, int>> solo_;
};

}  // namespace gfuzz
