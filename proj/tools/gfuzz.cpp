#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "gfuzz/error.hpp"
#include "gfuzz/harness.hpp"
#include "gfuzz/io.hpp"

namespace fs = std::filesystem;
using namespace gfuzz;

namespace {

constexpr int kExitInfra = 2;

void parse_blocks(const std::string& spec, CampaignConfig& cfg) {
  const auto dots = spec.find("..");
  try {
    if (dots == std::string::npos) {
      cfg.blocks_min = cfg.blocks_max = std::stoi(spec);
    } else {
      cfg.blocks_min = std::stoi(spec.substr(0, dots));
      cfg.blocks_max = std::stoi(spec.substr(dots + 2));
    }
  } catch (const std::exception&) {
    throw ConfigError("--blocks expects <a>..<b>");
  }
}

int cmd_run(const std::string& corpus_path, const std::string& config_path, const std::string& out,
            const std::map<std::string, std::string>& overrides) {
  CampaignConfig cfg = config_path.empty() ? CampaignConfig{} : load_campaign_config(config_path);
  for (const auto& [k, v] : overrides) {
    if (k == "engine") cfg.engine_cmd = v;
    else if (k == "search") {
      if (v == "mcts") cfg.search.mode = SearchMode::kMcts;
      else if (v == "random") cfg.search.mode = SearchMode::kRandom;
      else throw ConfigError("--search must be mcts or random");
    } else if (k == "seed") cfg.master_seed = std::stoull(v);
    else if (k == "tc0") cfg.tc0 = std::stoi(v);
    else if (k == "blocks") parse_blocks(v, cfg);
    else if (k == "bug-mask") cfg.bugs = parse_bug_mask(v);
    else if (k == "mutations") cfg.mutations = v == "on";
    else if (k == "execute-discarded") cfg.execute_discarded = true;
  }
  cfg.validate();
  const BlockCorpus corpus = load_corpus(corpus_path);
  const CampaignResult r = fuzz_workflow(corpus, cfg, out);
  std::printf("%s\n%s", coverage_table(r.coverage).c_str(), r.registry.table().c_str());
  std::printf("retained %zu/%d in %d rounds (discarded %d, generation failures %d)\n", r.retained.size(), cfg.tc0,
              r.stats.rounds, r.stats.discarded, r.stats.generation_failures);
  return 0;
}

int cmd_replay(const std::string& out, int id, const std::string& engine, const std::string& mask) {
  const auto campaign = nlohmann::json::parse(read_file(fs::path(out) / "campaign.json"));
  CampaignConfig cfg = parse_campaign_config(campaign.dump());
  if (!engine.empty()) cfg.engine_cmd = engine;
  if (!mask.empty()) cfg.bugs = parse_bug_mask(mask);
  const ModelSpec m = load_model(fs::path(out) / "models" / model_file_name(id));
  const TrialOutcome o = run_trial(m, TrialConfig{cfg.engine_cmd, cfg.timeout_s, cfg.bugs, cfg.fuse});
  std::printf("%s\n", outcome_json(o).dump(1).c_str());
  return 0;
}

int cmd_report(const std::string& out) {
  const fs::path dir(out);
  std::printf("%s\n%s\n", read_file(dir / "coverage.txt").c_str(), read_file(dir / "exceptions.txt").c_str());
  std::map<std::string, int> status;
  int rewards = 0, rounds = 0;
  std::string line;
  std::istringstream trace(read_file(dir / "trace.jsonl"));
  while (std::getline(trace, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ++rounds;
    ++status[j.at("status").get<std::string>()];
    rewards += j.value("reward", 0);
  }
  std::printf("Search trace: %d rounds, %d rewarded\n", rounds, rewards);
  for (const auto& [s, c] : status) std::printf("  %-20s %d\n", s.c_str(), c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gfuzz: graph-based coverage-guided fuzzer for DL inference engines"};
  app.require_subcommand(1);

  std::string corpus, config, out, engine, search, seed, tc0, blocks, mask, mutations;
  bool execute_discarded = false;
  auto* run = app.add_subcommand("run", "Run a fuzzing campaign");
  run->add_option("--corpus", corpus, "Block corpus JSON")->required();
  run->add_option("--config", config, "Campaign config JSON");
  run->add_option("--out", out, "Campaign output directory")->required();
  run->add_option("--engine", engine, "External engine command (default: built-in optimized interpreter)");
  run->add_option("--search", search, "mcts or random");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--tc0", tc0, "Retained model target");
  run->add_option("--blocks", blocks, "Blocks per model, <a>..<b>");
  run->add_option("--bug-mask", mask, "Seeded defects: csv, all or none");
  run->add_option("--mutations", mutations, "on or off")->check(CLI::IsMember({"on", "off"}));
  run->add_flag("--execute-discarded", execute_discarded, "Also execute models that add no coverage");

  int model_id = 0;
  auto* replay = app.add_subcommand("replay", "Re-run one retained model");
  replay->add_option("--out", out, "Campaign directory")->required();
  replay->add_option("--model", model_id, "Retained model id")->required();
  replay->add_option("--engine", engine, "Override the engine command");
  replay->add_option("--bug-mask", mask, "Override the defect mask");

  auto* report = app.add_subcommand("report", "Print the reports of a campaign");
  report->add_option("--out", out, "Campaign directory")->required();

  std::string dir, backend = "optimized";
  bool no_fuse = false;
  auto* eng = app.add_subcommand("engine", "Serve one request directory with a built-in interpreter");
  eng->add_option("--dir", dir, "Request directory")->required();
  eng->add_option("--backend", backend, "reference or optimized")->check(CLI::IsMember({"reference", "optimized"}));
  eng->add_option("--bug-mask", mask, "Seeded defects: csv, all or none");
  eng->add_flag("--no-fuse", no_fuse, "Disable operator fusion");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::map<std::string, std::string> o;
      if (!engine.empty()) o["engine"] = engine;
      if (!search.empty()) o["search"] = search;
      if (!seed.empty()) o["seed"] = seed;
      if (!tc0.empty()) o["tc0"] = tc0;
      if (!blocks.empty()) o["blocks"] = blocks;
      if (!mask.empty()) o["bug-mask"] = mask;
      if (!mutations.empty()) o["mutations"] = mutations;
      if (execute_discarded) o["execute-discarded"] = "1";
      return cmd_run(corpus, config, out, o);
    }
    if (*replay) return cmd_replay(out, model_id, engine, mask);
    if (*report) return cmd_report(out);
    OptimizedOptions opts;
    opts.bugs = parse_bug_mask(mask);
    opts.fuse = !no_fuse;
    return serve_request(dir, backend == "reference" ? Backend::kReference : Backend::kOptimized, opts);
  } catch (const InfraError& e) {
    std::fprintf(stderr, "gfuzz: infrastructure failure: %s\n", e.what());
    return kExitInfra;
  } catch (const Error& e) {
    std::fprintf(stderr, "gfuzz: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gfuzz: %s\n", e.what());
    return 1;
  }
}
