#include "gfuzz/harness.hpp"

#include <cstdio>
#include <optional>

#include "gfuzz/error.hpp"
#include "gfuzz/io.hpp"
#include "gfuzz/operators.hpp"

namespace gfuzz {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream tags under the per-round seed.
constexpr std::uint64_t kTagChoose = 1;
constexpr std::uint64_t kTagPlan = 2;
constexpr std::uint64_t kTagAttempt = 100;

}  // namespace

std::string model_file_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "model_%06d.json", id);
  return buf;
}

BlockCorpus builtin_subset(const BlockCorpus& corpus) {
  BlockCorpus out;
  for (const auto& b : corpus.blocks) {
    bool ok = true;
    for (const auto& m : b.members) ok &= is_builtin(m);
    if (ok) out.blocks.push_back(b);
  }
  return out;
}

ModelSpec input_mutation(const BlockCorpus& corpus, const InputRequest& req, const CampaignConfig& cfg, Rng& rng) {
  if (req.blocks.empty()) throw GenerationError("no blocks to generate from");
  GraphGenConfig gen;
  gen.n = req.n;
  const bool ws = cfg.topology == TopologyChoice::kWS || (cfg.topology == TopologyChoice::kBoth && rng.bernoulli(0.5));
  gen.model = ws ? TopologyModel::kWS : TopologyModel::kRN;
  gen.k = cfg.k_choices[rng.index(cfg.k_choices.size())];
  gen.p = ws ? cfg.p_ws : cfg.p_rn;
  gen.seed = rng.next_u64();

  std::vector<std::size_t> allowed(req.blocks.begin(), req.blocks.end());
  Graph g = assign_blocks(generate_topology(gen), corpus, allowed, rng);

  for (const auto& mut : req.action.mutations) {
    switch (mut.kind) {
      case MutationKind::kGEA: gea(g, mut.r, rng); break;
      case MutationKind::kGER: ger(g, mut.r, rng); break;
      case MutationKind::kBNA: bna(g, mut.r, rng); break;
      case MutationKind::kBNR: bnr(g, mut.r, rng); break;
      default: break;
    }
  }

  std::vector<ParamSchema> schemas;
  ModelSpec m = lower_to_model(expand_blocks(g), &schemas);
  Shape base = cfg.base_shapes[rng.index(cfg.base_shapes.size())];
  if (req.action.has(MutationKind::kTSM)) base = tsm(base, cfg.shape_domain, rng);
  m.input_shapes.assign(m.placeholders().size(), base);

  ShapeCalcOptions opts = cfg.shape_options;
  opts.sample_params = req.action.has(MutationKind::kPM);
  m = calc_shapes_and_params(m, schemas, opts, rng);
  m.weights_seed = rng.next_u64();
  return m;
}

namespace {

json names_of(const BlockCorpus& corpus, const std::vector<int>& blocks) {
  json out = json::array();
  for (int b : blocks) out.push_back(corpus.blocks[static_cast<std::size_t>(b)].name);
  return out;
}

class CampaignWriter {
 public:
  explicit CampaignWriter(fs::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    std::error_code ec;
    fs::create_directories(dir_ / "models", ec);
    if (ec) throw InfraError("cannot create " + (dir_ / "models").string() + ": " + ec.message());
  }
  bool enabled() const { return !dir_.empty(); }
  void model(int id, const ModelSpec& m) {
    if (enabled()) save_model(m, dir_ / "models" / model_file_name(id));
  }
  void outcome(const json& j) { outcomes_ += j.dump() + "\n"; }
  void trace(const json& j) { trace_ += j.dump() + "\n"; }
  void flush() {
    if (!enabled()) return;
    write_file(dir_ / "outcomes.jsonl", outcomes_);
    write_file(dir_ / "trace.jsonl", trace_);
  }

 private:
  fs::path dir_;
  std::string outcomes_;
  std::string trace_;
};

}  // namespace

CampaignResult fuzz_workflow(const BlockCorpus& source, const CampaignConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const BlockCorpus corpus = cfg.engine_cmd.empty() ? builtin_subset(source) : source;
  corpus.validate();
  if (corpus.blocks.empty()) throw ConfigError("corpus has no usable blocks");

  CampaignResult result{CoverageState(corpus, cfg.coverage), {}, {}, {}, nullptr};
  std::optional<MctsTree> tree;
  if (cfg.search.mode == SearchMode::kMcts) tree.emplace(corpus, cfg.search);
  const TrialConfig trial{cfg.engine_cmd, cfg.timeout_s, cfg.bugs, cfg.fuse};
  CampaignWriter writer(out_dir);
  if (writer.enabled()) write_file(out_dir / "campaign.json", campaign_config_json(cfg).dump(1) + "\n");

  CampaignStats& st = result.stats;
  for (int round = 0; static_cast<int>(result.retained.size()) < cfg.tc0 && round < cfg.round_limit(); ++round) {
    ++st.rounds;
    const std::uint64_t round_seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(round));
    Rng plan(derive_seed(round_seed, kTagPlan));
    Rng choose_rng(derive_seed(round_seed, kTagChoose));

    InputRequest req;
    req.n = static_cast<int>(plan.uniform_int(cfg.blocks_min, cfg.blocks_max));
    std::optional<MctsTree::Choice> choice;
    if (tree) {
      choice = tree->choose(result.coverage, choose_rng);
      req.blocks = choice->blocks;
    } else {
      req.blocks = random_chooser(corpus, choose_rng, req.n);
    }
    if (cfg.mutations) req.action = select_mutations(cfg.mutation, plan);
    for (int b : req.blocks) req.action.blocks.push_back(corpus.blocks[static_cast<std::size_t>(b)].name);

    json rec{{"round", round}, {"path", names_of(corpus, req.blocks)}};
    if (choice) rec["expanded"] = choice->expanded ? json(corpus.blocks[static_cast<std::size_t>(choice->blocks.back())].name) : json(nullptr);
    std::vector<std::string> muts;
    for (const auto& mu : req.action.mutations) muts.push_back(std::string(mutation_name(mu.kind)) + (is_model_level(mu.kind) ? "@" + std::to_string(mu.r) : ""));
    rec["mutations"] = muts;

    auto finish = [&](const std::string& status, bool reward) {
      if (tree) tree->backpropagate(choice->node, reward);
      rec["status"] = status;
      rec["reward"] = reward ? 1 : 0;
      rec["olc"] = result.coverage.olc();
      writer.trace(rec);
    };

    std::optional<ModelSpec> model;
    for (int attempt = 0; attempt < cfg.generation_retries && !model; ++attempt) {
      Rng rng(derive_seed(round_seed, kTagAttempt + static_cast<std::uint64_t>(attempt)));
      try {
        model = input_mutation(corpus, req, cfg, rng);
      } catch (const GenerationError&) {
      } catch (const WiringError&) {
      } catch (const ShapeError&) {
      }
    }
    if (!model) {
      ++st.generation_failures;
      finish("generation-failed", false);
      continue;
    }

    const bool fresh = result.coverage.is_new_coverage({*model});
    if (!fresh && !cfg.execute_discarded) {
      ++st.discarded;
      finish("discarded", false);
      continue;
    }

    TrialOutcome outcome;
    try {
      outcome = run_trial(*model, trial);
    } catch (const GenerationError&) {
      ++st.reference_faults;
      finish("reference-fault", false);
      continue;
    }
    ++st.executed;
    const int id = fresh ? static_cast<int>(result.retained.size()) : -1;
    const bool new_exception = result.registry.record(outcome, id);
    json out{{"round", round}, {"model", id}, {"outcome", outcome_json(outcome)}};
    writer.outcome(out);
    if (fresh) {
      result.coverage.observe(*model);
      writer.model(id, *model);
      result.retained.push_back({id, round, std::move(*model), outcome});
      rec["model"] = id;
    } else {
      ++st.discarded;
    }
    rec["outcome"] = status_name(outcome.status);
    finish(fresh ? "retained" : "discarded-executed", new_exception);
  }

  if (tree) result.tree = tree->to_json();
  writer.flush();
  if (writer.enabled()) emit_reports(result, cfg, out_dir);
  return result;
}

void emit_reports(const CampaignResult& result, const CampaignConfig& cfg, const fs::path& out_dir) {
  write_file(out_dir / "coverage.txt", coverage_table(result.coverage));
  write_file(out_dir / "coverage.json", coverage_json(result.coverage));
  write_file(out_dir / "registry.json", result.registry.to_json().dump(1) + "\n");
  write_file(out_dir / "exceptions.txt", result.registry.table());
  if (!result.tree.is_null()) write_file(out_dir / "tree.json", result.tree.dump(1) + "\n");

  std::vector<std::string> detected;
  for (Bug b : result.registry.detected()) detected.emplace_back(bug_name(b));
  const auto& st = result.stats;
  json summary{{"retained", result.retained.size()},
               {"target", cfg.tc0},
               {"rounds", st.rounds},
               {"discarded", st.discarded},
               {"generation_failures", st.generation_failures},
               {"reference_faults", st.reference_faults},
               {"executed", st.executed},
               {"olc", result.coverage.olc()},
               {"exceptions", result.registry.to_json()["totals"]},
               {"defects_detected", detected},
               {"search", cfg.search.mode == SearchMode::kMcts ? "mcts" : "random"}};
  if (!result.tree.is_null()) {
    summary["tree_nodes"] = result.tree["nodes"].size();
    summary["tree_resets"] = result.tree["resets"];
  }
  write_file(out_dir / "summary.json", summary.dump(1) + "\n");
}

}  // namespace gfuzz
