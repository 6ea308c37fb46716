#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "fixtures.hpp"
#include "gfuzz/error.hpp"
#include "gfuzz/harness.hpp"

using namespace gfuzz;
namespace fs = std::filesystem;

namespace {

int block_index(const BlockCorpus& c, const std::string& name) { return static_cast<int>(*c.find(name)); }

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Config, DefaultsMatchTheCampaignConstants) {
  const CampaignConfig c = parse_campaign_config("{}");
  EXPECT_EQ(c.k_choices, (std::vector<int>{2, 4, 6}));
  EXPECT_DOUBLE_EQ(c.p_ws, 0.5);
  EXPECT_DOUBLE_EQ(c.p_rn, 0.9);
  EXPECT_EQ(c.mutation.r_choices, (std::vector<double>{0, 0.1, 0.2}));
  EXPECT_EQ(c.coverage.n_maxspc, 200);
  EXPECT_EQ(c.search.tc1, 10);
  EXPECT_EQ(c.search.tc2, 1);
  EXPECT_EQ(c.search.max_children, 3);
  EXPECT_NEAR(c.search.e, 1 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(c.blocks_min, 1);
  EXPECT_EQ(c.blocks_max, 30);
  EXPECT_EQ(c.generation_retries, 10);
}

TEST(Config, FileRoundTrip) {
  const CampaignConfig a = load_campaign_config(fixtures::source_path("configs/default.json"));
  const CampaignConfig b = parse_campaign_config(campaign_config_json(a).dump());
  EXPECT_EQ(campaign_config_json(a), campaign_config_json(b));
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_campaign_config("{\"tc0\": 0}"), ConfigError);
  EXPECT_THROW(parse_campaign_config("{\"bogus\": 1}"), ConfigError);
  EXPECT_THROW(parse_campaign_config("{\"blocks\": [5, 2]}"), ConfigError);
  EXPECT_THROW(parse_campaign_config("{\"search\": {\"mode\": \"greedy\"}}"), ConfigError);
  EXPECT_THROW(parse_campaign_config("{\"backend\": {\"bug_mask\": \"nope\"}}"), ConfigError);
  EXPECT_THROW(parse_campaign_config("{\"mutation\": {\"r\": [1.5]}}"), ConfigError);
  EXPECT_THROW(parse_campaign_config("[1,2"), ConfigError);
}

TEST(InputMutation, SingleReluBlock) {
  const auto& corpus = fixtures::default_corpus();
  CampaignConfig cfg;
  InputRequest req;
  req.blocks = {block_index(corpus, "Relu")};
  req.n = 1;
  Rng rng(3);
  const ModelSpec m = input_mutation(corpus, req, cfg, rng);
  ASSERT_EQ(m.nodes.size(), 2u);
  EXPECT_EQ(m.nodes[0].op, "Placeholder");
  EXPECT_EQ(m.nodes[1].op, "Relu");
}

TEST(InputMutation, SubgraphMembersAppearInTheModel) {
  const auto& corpus = fixtures::default_corpus();
  CampaignConfig cfg;
  InputRequest req;
  req.blocks = {block_index(corpus, "SG3")};
  req.n = 1;
  Rng rng(8);
  const ModelSpec m = input_mutation(corpus, req, cfg, rng);
  std::vector<std::string> ops;
  for (const auto& n : m.nodes)
    if (n.op != "Placeholder") ops.push_back(n.op);
  EXPECT_EQ(ops, (std::vector<std::string>{"Conv2d", "BiasAdd", "Relu"}));
}

TEST(InputMutation, EdgeAdditionAddsExactlyOneEdgeAtTenNodes) {
  const auto& corpus = fixtures::default_corpus();
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    GraphGenConfig gen;
    gen.n = 10;
    gen.k = 2;
    gen.seed = seed;
    Rng rng(seed);
    std::vector<std::size_t> all(corpus.blocks.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    Graph g;
    try {
      g = assign_blocks(generate_topology(gen), corpus, all, rng);
    } catch (const GenerationError&) {
      continue;
    }
    Graph twin = g;
    Rng mrng(seed + 1000);
    const auto st = gea(twin, 0.1, mrng);
    EXPECT_EQ(st.requested, 1);
    if (st.shortfall()) continue;
    EXPECT_EQ(twin.edges.size(), g.edges.size() + 1);
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(Workflow, SmallestCampaign) {
  CampaignConfig cfg;
  cfg.tc0 = 1;
  const auto r = fuzz_workflow(fixtures::default_corpus(), cfg);
  EXPECT_EQ(r.retained.size(), 1u);
  EXPECT_TRUE(r.registry.entries().empty());
  EXPECT_GT(r.coverage.olc(), 0.0);
}

TEST(Workflow, DeterministicAcrossRuns) {
  CampaignConfig cfg;
  cfg.tc0 = 30;
  cfg.bugs.set();
  cfg.master_seed = 17;
  const auto a = fuzz_workflow(fixtures::default_corpus(), cfg);
  const auto b = fuzz_workflow(fixtures::default_corpus(), cfg);
  ASSERT_EQ(a.retained.size(), b.retained.size());
  for (std::size_t i = 0; i < a.retained.size(); ++i)
    EXPECT_EQ(serialize_model(a.retained[i].model), serialize_model(b.retained[i].model));
  EXPECT_EQ(a.registry.to_json(), b.registry.to_json());
  EXPECT_TRUE(a.coverage == b.coverage);
  EXPECT_EQ(a.tree, b.tree);
}

TEST(Workflow, EveryRetainedModelIncreasedCoverage) {
  CampaignConfig cfg;
  cfg.tc0 = 40;
  cfg.search.mode = SearchMode::kRandom;
  const auto r = fuzz_workflow(fixtures::default_corpus(), cfg);
  ASSERT_EQ(r.retained.size(), 40u);
  CoverageState replay(builtin_subset(fixtures::default_corpus()), cfg.coverage);
  for (const auto& rm : r.retained) {
    ASSERT_TRUE(replay.is_new_coverage({rm.model}));
    replay.observe(rm.model);
  }
  EXPECT_TRUE(replay == r.coverage);
}

TEST(Workflow, ForeignOperatorsAreFilteredWithoutAnEngine) {
  BlockCorpus c = fixtures::three_op_corpus();
  Block pow = single_operator_block("Pow");
  pow.in_degree = {2};
  pow.out_degree = {0, 1};
  c.blocks.push_back(pow);
  CampaignConfig cfg;
  cfg.tc0 = 5;
  const auto r = fuzz_workflow(c, cfg);
  for (const auto& rm : r.retained)
    for (const auto& n : rm.model.nodes) EXPECT_NE(n.op, "Pow");
}

TEST(Workflow, WritesTheCampaignDirectory) {
  const fs::path dir = fresh_dir("gfuzz-harness-out");
  CampaignConfig cfg;
  cfg.tc0 = 5;
  cfg.bugs.set();
  fuzz_workflow(fixtures::default_corpus(), cfg, dir);
  for (const char* f : {"campaign.json", "outcomes.jsonl", "trace.jsonl", "registry.json", "coverage.txt", "coverage.json",
                        "exceptions.txt", "summary.json", "tree.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(fs::exists(dir / "models" / model_file_name(i)));
  const auto replayed = load_model(dir / "models" / model_file_name(0));
  EXPECT_EQ(read_file(dir / "models" / model_file_name(0)), serialize_model(replayed));
  fs::remove_all(dir);
}

TEST(Workflow, TraceOlcIsMonotone) {
  CampaignConfig cfg;
  cfg.tc0 = 30;
  const fs::path dir = fresh_dir("gfuzz-harness-trace");
  fuzz_workflow(fixtures::default_corpus(), cfg, dir);
  std::istringstream in(read_file(dir / "trace.jsonl"));
  std::string line;
  double last = 0;
  while (std::getline(in, line)) {
    const double olc = nlohmann::json::parse(line).at("olc").get<double>();
    EXPECT_GE(olc + 1e-12, last);
    last = olc;
  }
  fs::remove_all(dir);
}

TEST(Reports, EmptyCampaignHasHeaders) {
  const fs::path dir = fresh_dir("gfuzz-harness-empty");
  fs::create_directories(dir);
  CampaignResult r{CoverageState(fixtures::three_op_corpus(), {}), {}, {}, {}, nullptr};
  emit_reports(r, CampaignConfig{}, dir);
  EXPECT_NE(read_file(dir / "coverage.txt").find("OLC"), std::string::npos);
  EXPECT_NE(read_file(dir / "exceptions.txt").find("Dedup"), std::string::npos);
  fs::remove_all(dir);
}
