#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gfuzz/coverage.hpp"
#include "gfuzz/engine.hpp"
#include "gfuzz/graphgen.hpp"
#include "gfuzz/mutation.hpp"
#include "gfuzz/search.hpp"

namespace gfuzz {

enum class TopologyChoice { kWS, kRN, kBoth };

struct CampaignConfig {
  int tc0 = 100;
  int blocks_min = 1;
  int blocks_max = 30;
  std::vector<int> k_choices{2, 4, 6};
  double p_ws = 0.5;
  double p_rn = 0.9;
  TopologyChoice topology = TopologyChoice::kBoth;
  MutationConfig mutation;
  // Off: no model-level mutations, no TSM and no PM.
  bool mutations = true;
  CoverageConfig coverage;
  SearchConfig search;
  std::string engine_cmd;  // empty: built-in optimized interpreter
  double timeout_s = 30.0;
  BugMask bugs;
  bool fuse = true;
  std::uint64_t master_seed = 0;
  int generation_retries = 10;
  bool execute_discarded = false;
  int max_rounds = 0;  // 0: 50 * tc0 + 1000
  std::vector<Shape> base_shapes{{1, 8, 8, 3}, {1, 16, 16, 3}, {1, 8, 8, 8}, {1, 16, 16, 4}, {1, 32, 32, 3}};
  ShapeDomain shape_domain;
  ShapeCalcOptions shape_options;

  // Throws ConfigError.
  void validate() const;
  int round_limit() const { return max_rounds > 0 ? max_rounds : 50 * tc0 + 1000; }
};

CampaignConfig parse_campaign_config(std::string_view text);
CampaignConfig load_campaign_config(const std::filesystem::path& path);
nlohmann::json campaign_config_json(const CampaignConfig& cfg);

struct InputRequest {
  std::vector<int> blocks;  // corpus indices the generator may use
  MutationAction action;
  int n = 1;  // topology node count
};

// Topology → block assignment → model-level mutations → expansion → shapes
// and params. One attempt; throws GenerationError (or WiringError/ShapeError)
// on failure.
ModelSpec input_mutation(const BlockCorpus& corpus, const InputRequest& req, const CampaignConfig& cfg, Rng& rng);

// Blocks whose operators the built-in interpreters can run.
BlockCorpus builtin_subset(const BlockCorpus& corpus);

struct RetainedModel {
  int id = 0;
  int round = 0;
  ModelSpec model;
  TrialOutcome outcome;
};

struct CampaignStats {
  int rounds = 0;
  int discarded = 0;
  int generation_failures = 0;
  int reference_faults = 0;
  int executed = 0;
};

struct CampaignResult {
  CoverageState coverage;
  ExceptionRegistry registry;
  std::vector<RetainedModel> retained;
  CampaignStats stats;
  nlohmann::json tree;  // null in random mode
};

// Main loop. When `out_dir` is non-empty the campaign directory is written
// there: retained models, outcomes, registry, coverage, trace and summary.
CampaignResult fuzz_workflow(const BlockCorpus& corpus, const CampaignConfig& cfg,
                             const std::filesystem::path& out_dir = {});

// Coverage table, exception table and trace summary into `out_dir`.
void emit_reports(const CampaignResult& result, const CampaignConfig& cfg, const std::filesystem::path& out_dir);

std::string model_file_name(int id);

}  // namespace gfuzz
